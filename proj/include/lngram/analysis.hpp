#pragma once

// Depth and significance analyses over captured hidden states and traces.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lngram/backbone.hpp"
#include "lngram/corpus.hpp"

namespace lngram {

// ---- LogitLens ----

// Maps hidden states (rows) to logits; must include the final normalization.
using HeadFn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

struct KLProfile {
  std::vector<double> kl;  // per captured state, index 0 = embedding output
  std::int64_t positions = 0;
};

// samples[i][l] is the l-th captured state of sample i (positions x d). The
// reference distribution is the head applied to the last state.
KLProfile logitlens_profile(const std::vector<std::vector<Eigen::MatrixXd>>& samples, const HeadFn& head);
KLProfile logitlens_profile(const Decoder<float>& model, const std::vector<LayerStates<float>>& samples);

// ---- CKA ----

// Linear CKA with column-centered features and the biased HSIC estimator.
double linear_cka(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

// s(i, j) = CKA(base[i], variant[j]).
Eigen::MatrixXd cka_matrix(const std::vector<Eigen::MatrixXd>& base, const std::vector<Eigen::MatrixXd>& variant);

struct AlignmentCurve {
  int k = 3;
  std::vector<double> aligned;  // a_j, 1-based baseline layer index
  std::vector<double> gain;     // a_j - j
};

// Columns of s are variant layers j = 1..Lv, rows baseline layers i = 1..Lb.
AlignmentCurve soft_alignment(const Eigen::MatrixXd& s, int k = 3);

// ---- bootstrap ----

struct BootstrapEntry {
  std::string name;
  std::size_t n = 0;
  double delta = 0.0;  // percentage points, b minus a
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p = 1.0;
  double p_adjusted = 1.0;
  int trials = 0;
  std::uint64_t seed = 0;
};

BootstrapEntry paired_bootstrap(const std::vector<int>& correct_a, const std::vector<int>& correct_b, int trials,
                                std::uint64_t seed, const std::string& name = "");

// Holm step-down adjusted p-values in the input order.
std::vector<double> holm_bonferroni(const std::vector<double>& p);

// Runs paired_bootstrap per benchmark with independent seeds, then Holm.
std::vector<BootstrapEntry> bootstrap_report(const std::vector<std::string>& names,
                                             const std::vector<std::vector<int>>& a,
                                             const std::vector<std::vector<int>>& b, int trials, std::uint64_t seed);

// ---- gate traces ----

struct GateSummary {
  int layer = 0;
  int order = 0;
  std::int64_t positions = 0;
  std::int64_t entity_finals = 0;
  double median = 0.0;
  double entity_final_mean = 0.0;
  double ratio = 0.0;
  std::vector<double> series;  // per absolute position, NaN when absent
};

// Trace positions map to absolute byte offsets as base + sequence * seq_len + t.
// Gates of several subtables at one position are averaged.
GateSummary gate_summary(const GateTrace& trace, const std::vector<EntitySpan>& entities, Split split, int layer,
                         int order, int seq_len, std::int64_t base = 0);

void write_gate_trace_csv(const std::string& path, const GateTrace& trace);
GateTrace read_gate_trace_csv(const std::string& path);

// Dense matrix as CSV without header.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);

}  // namespace lngram
