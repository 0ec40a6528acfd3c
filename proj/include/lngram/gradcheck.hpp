#pragma once

// Finite-difference verification of the routing surrogate and of the exact
// gradients through the Lngram branch, in double precision.

#include <cstdint>

namespace lngram {

struct GradcheckConfig {
  int cases = 100;
  int bits = 4;
  int mem_dim = 8;
  double step = 1e-5;
  double temperature = 1.0;
  std::uint64_t seed = 1;
};

struct GradcheckReport {
  int cases = 0;
  double surrogate_max_rel = 0.0;  // exact surrogate vs central differences of <g, mu(z)>
  double onebit_max_abs = 0.0;     // one-bit vs exact at one bit per route, lambda = 1
  double main_path_max_rel = 0.0;  // tables, key/value projections, conv kernels
  double surrogate_tol = 1e-6;
  double onebit_tol = 1e-12;
  double main_path_tol = 1e-5;

  bool passed() const {
    return surrogate_max_rel < surrogate_tol && onebit_max_abs < onebit_tol && main_path_max_rel < main_path_tol;
  }
};

GradcheckReport run_gradcheck(const GradcheckConfig& config);

}  // namespace lngram
