#include "lngram/numerics.hpp"

#include <cmath>

namespace lngram {

bool is_prob_vector(const ProbVector& p, double tol) {
  if (p.size() == 0) return false;
  if ((p.array() < 0.0).any() || !p.allFinite()) return false;
  return std::abs(p.sum() - 1.0) <= tol;
}

double kl_divergence(const ProbVector& p, const ProbVector& q) {
  if (p.size() != q.size()) {
    throw DimensionError("kl_divergence: length mismatch");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = p(i);
    if (pi <= 0.0) continue;
    const double qi = std::max(q(i), kKlFloor);
    total += pi * std::log(pi / qi);
  }
  // Rounding can leave a tiny negative residue for p == q.
  return std::max(total, 0.0);
}

Eigen::VectorXd finite_difference_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                                       const Eigen::VectorXd& z, double h) {
  if (!(h > 0.0)) throw ParameterError("finite_difference_grad: step must be positive");
  Eigen::VectorXd grad(z.size());
  Eigen::VectorXd probe = z;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    probe(j) = z(j) + h;
    const double up = f(probe);
    probe(j) = z(j) - h;
    const double down = f(probe);
    probe(j) = z(j);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw OracleError("finite_difference_grad: non-finite function value");
    }
    grad(j) = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace lngram
