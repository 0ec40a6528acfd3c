#pragma once

// Counterfactual surrogate gradients for the routing logits.
//
// For one local slot (order n, route r, window offset u) the M bit logits z
// are treated as independent Bernoulli variables with p_j = sigmoid(tau z_j).
// The exact surrogate differentiates <g, mu(z)> where mu(z) is the expected
// retrieval over all K = 2^M substituted symbols; the one-bit surrogate only
// compares the two rows obtained by forcing each bit to 0 or 1. Every other
// slot of the window and every other route keep their forward symbols.

#include <span>
#include <string>
#include <vector>

#include "lngram/memory.hpp"

namespace lngram {

enum class SurrogateMode {
  exact,
  onebit,
  // Comparison baseline only: bit-difference score with an identity slope in
  // place of the sigmoid derivative. Not a default anywhere.
  straight_through,
};

SurrogateMode parse_surrogate_mode(const std::string& name);
std::string to_string(SurrogateMode mode);

struct SurrogateConfig {
  double temperature = 1.0;
  double scale = 1.0;  // lambda, applied in one-bit mode only
  SurrogateMode mode = SurrogateMode::exact;

  void validate() const;
};

// P(c | z) for c in [0, 2^M): product of independent bit probabilities.
template <class T>
Vector<T> local_symbol_probs(const Vector<T>& z, T tau) {
  if (!(tau > T(0))) throw ParameterError("local_symbol_probs: tau must be positive");
  const int bits = int(z.size());
  if (bits < 1 || bits > kMaxBitsPerRoute) throw ParameterError("local_symbol_probs: bit count out of range");
  Vector<T> probs = Vector<T>::Zero(Eigen::Index(1) << bits);
  probs(0) = T(1);
  for (int j = 0; j < bits; ++j) {
    const T p = sigmoid(tau * z(j));
    const Eigen::Index half = Eigen::Index(1) << j;
    for (Eigen::Index c = 0; c < half; ++c) {
      probs(c | half) = probs(c) * p;
      probs(c) *= (T(1) - p);
    }
  }
  return probs;
}

// mu(z) = sum_c P(c|z) E_c. counterfactuals is K x d_m, row c = E_c.
template <class T>
Vector<T> expected_retrieval(const Vector<T>& z, T tau, const Matrix<T>& counterfactuals) {
  const Vector<T> probs = local_symbol_probs(z, tau);
  if (counterfactuals.rows() != probs.size()) {
    throw DimensionError("expected_retrieval: need one counterfactual row per symbol");
  }
  return counterfactuals.transpose() * probs;
}

// d<g, mu(z)>/dz_j = tau sum_c P(c|z) (beta_j(c) - p_j) <g, E_c>.
template <class T>
Vector<T> exact_surrogate_grad(const Vector<T>& z, T tau, const Vector<T>& upstream,
                               const Matrix<T>& counterfactuals) {
  const Vector<T> probs = local_symbol_probs(z, tau);
  if (counterfactuals.rows() != probs.size() || counterfactuals.cols() != upstream.size()) {
    throw DimensionError("exact_surrogate_grad: counterfactual shape mismatch");
  }
  const Vector<T> scores = counterfactuals * upstream;
  const Vector<T> weighted = probs.cwiseProduct(scores);
  const T total = weighted.sum();
  Vector<T> grad(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const T p = sigmoid(tau * z(j));
    T on = T(0);
    for (Eigen::Index c = 0; c < weighted.size(); ++c) {
      if ((c >> j) & 1) on += weighted(c);
    }
    grad(j) = tau * (on - p * total);
  }
  return grad;
}

// lambda tau p_j (1 - p_j) <g, E_j^(1) - E_j^(0)>. Row j of forced_zero /
// forced_one holds the retrieval with bit j forced to 0 / 1.
template <class T>
Vector<T> onebit_surrogate_grad(const Vector<T>& z, T tau, T lambda, const Vector<T>& upstream,
                                const Matrix<T>& forced_zero, const Matrix<T>& forced_one) {
  if (!(tau > T(0))) throw ParameterError("onebit_surrogate_grad: tau must be positive");
  if (forced_zero.rows() != z.size() || forced_one.rows() != z.size() ||
      forced_zero.cols() != upstream.size() || forced_one.cols() != upstream.size()) {
    throw DimensionError("onebit_surrogate_grad: counterfactual shape mismatch");
  }
  const Vector<T> scores = (forced_one - forced_zero) * upstream;
  Vector<T> grad(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const T p = sigmoid(tau * z(j));
    grad(j) = lambda * tau * p * (T(1) - p) * scores(j);
  }
  return grad;
}

// Window slots that a position participates in: for every order n and end
// position t whose window covers `position`, the offset u = position - t + n - 1.
struct WindowSlot {
  int order;
  int end_position;  // 0-based within the sequence
  int offset;
};
std::vector<WindowSlot> routing_contributions(int position, int seq_len, std::span<const int> orders);

// Everything backprop_routing needs from the forward pass.
template <class T>
struct RoutingForwardState {
  const SymbolGrid* symbols = nullptr;
  const std::vector<Matrix<T>>* logits = nullptr;  // Z^(s), positions x d
  const MultiTableBank<T>* bank = nullptr;
  const RetrievalSet<T>* retrieval = nullptr;
};

// Accumulates the surrogate gradient of the routing logits over every valid
// position, route, order and window slot. upstream[s][k] is dL/de for order
// orders[k] (positions x R d_m). The summation order per logit slot is fixed,
// so any route_block gives bit-identical results.
template <class T>
std::vector<Matrix<T>> backprop_routing(const RoutingForwardState<T>& state,
                                        const std::vector<std::vector<Matrix<T>>>& upstream,
                                        const SurrogateConfig& config, int route_block = 1 << 30);

}  // namespace lngram
