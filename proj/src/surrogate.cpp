#include "lngram/surrogate.hpp"

#include <algorithm>

namespace lngram {

SurrogateMode parse_surrogate_mode(const std::string& name) {
  if (name == "exact") return SurrogateMode::exact;
  if (name == "onebit" || name == "one-bit") return SurrogateMode::onebit;
  if (name == "ste" || name == "straight-through") return SurrogateMode::straight_through;
  throw ConfigError("unknown surrogate mode '" + name + "' (expected exact|onebit|ste)");
}

std::string to_string(SurrogateMode mode) {
  switch (mode) {
    case SurrogateMode::exact: return "exact";
    case SurrogateMode::onebit: return "onebit";
    case SurrogateMode::straight_through: return "ste";
  }
  return "exact";
}

void SurrogateConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("surrogate temperature must be positive");
  if (!(scale > 0.0)) throw ConfigError("surrogate scale must be positive");
}

std::vector<WindowSlot> routing_contributions(int position, int seq_len, std::span<const int> orders) {
  std::vector<WindowSlot> slots;
  for (int n : orders) {
    for (int u = 0; u < n; ++u) {
      const int end = position + (n - 1 - u);
      if (end < n - 1 || end >= seq_len) continue;
      slots.push_back({n, end, u});
    }
  }
  return slots;
}

template <class T>
std::vector<Matrix<T>> backprop_routing(const RoutingForwardState<T>& state,
                                        const std::vector<std::vector<Matrix<T>>>& upstream,
                                        const SurrogateConfig& config, int route_block) {
  if (!state.symbols || !state.logits || !state.bank || !state.retrieval) {
    throw UsageError("backprop_routing: missing forward state");
  }
  config.validate();
  if (route_block < 1) throw ParameterError("backprop_routing: block must be >= 1");
  const SymbolGrid& symbols = *state.symbols;
  const auto& logits = *state.logits;
  const auto& bank = *state.bank;
  const auto& retrieval = *state.retrieval;
  const int S = symbols.subtables();
  const int positions = symbols.positions();
  const int routes = symbols.routes();
  const int bits = symbols.bits();
  const std::uint64_t K = symbols.alphabet();
  if (int(logits.size()) != S || int(upstream.size()) != S || retrieval.positions != positions ||
      int(retrieval.addresses.size()) != S) {
    throw UsageError("backprop_routing: forward state does not match upstream gradients");
  }
  const int dm = bank.table(0, 0).dim;
  const int seq_len = retrieval.seq_len;
  const T tau = T(config.temperature);
  const T lambda = T(config.scale);

  std::vector<Matrix<T>> grads;
  grads.reserve(S);
  std::vector<T> probs(K), scores(K);
  for (int s = 0; s < S; ++s) {
    Matrix<T> dz = Matrix<T>::Zero(positions, Eigen::Index(routes) * bits);
    const Matrix<T>& z_all = logits[s];
    for (int r0 = 0; r0 < routes; r0 += route_block) {
      const int r1 = std::min(routes, r0 + route_block);
      for (int r = r0; r < r1; ++r) {
        for (std::size_t k = 0; k < bank.orders.size(); ++k) {
          const int n = bank.orders[k];
          const auto& table = bank.table(s, int(k));
          const Matrix<T>& g_all = upstream[s][k];
          const auto& addr_all = retrieval.addresses[s][k];
          for (int t = 0; t < positions; ++t) {
            if (t % seq_len < n - 1) continue;
            const auto g = g_all.row(t).segment(Eigen::Index(r) * dm, dm);
            if (g.isZero(0)) continue;
            const std::uint64_t base = addr_all[std::size_t(t) * routes + r];
            std::uint64_t weight = 1;
            for (int u = 0; u < n; ++u, weight *= K) {
              const int pos = t - n + 1 + u;
              const std::uint64_t current = symbols.at(s, pos, r);
              const std::uint64_t stem = base - current * weight;
              auto row_of = [&](std::uint64_t c) { return table.entries.row(Eigen::Index(stem + c * weight)); };
              auto zrow = z_all.row(pos).segment(Eigen::Index(r) * bits, bits);
              auto out = dz.row(pos).segment(Eigen::Index(r) * bits, bits);
              if (config.mode == SurrogateMode::exact) {
                // P(c|z) by incremental products, then tau * (E[beta_j s] - p_j E[s]).
                probs[0] = T(1);
                for (int j = 0; j < bits; ++j) {
                  const T p = sigmoid(tau * zrow(j));
                  const std::uint64_t half = std::uint64_t(1) << j;
                  for (std::uint64_t c = 0; c < half; ++c) {
                    probs[c | half] = probs[c] * p;
                    probs[c] *= (T(1) - p);
                  }
                }
                T total = T(0);
                for (std::uint64_t c = 0; c < K; ++c) {
                  scores[c] = probs[c] * row_of(c).dot(g);
                  total += scores[c];
                }
                for (int j = 0; j < bits; ++j) {
                  const T p = sigmoid(tau * zrow(j));
                  T on = T(0);
                  for (std::uint64_t c = 0; c < K; ++c) {
                    if ((c >> j) & 1u) on += scores[c];
                  }
                  out(j) += tau * (on - p * total);
                }
              } else {
                for (int j = 0; j < bits; ++j) {
                  const std::uint64_t mask = std::uint64_t(1) << j;
                  const T score = (row_of(current | mask) - row_of(current & ~mask)).dot(g);
                  if (config.mode == SurrogateMode::onebit) {
                    const T p = sigmoid(tau * zrow(j));
                    out(j) += lambda * tau * p * (T(1) - p) * score;
                  } else {
                    out(j) += score;
                  }
                }
              }
            }
          }
        }
      }
    }
    grads.push_back(std::move(dz));
  }
  return grads;
}

template std::vector<Matrix<float>> backprop_routing<float>(const RoutingForwardState<float>&,
                                                            const std::vector<std::vector<Matrix<float>>>&,
                                                            const SurrogateConfig&, int);
template std::vector<Matrix<double>> backprop_routing<double>(const RoutingForwardState<double>&,
                                                              const std::vector<std::vector<Matrix<double>>>&,
                                                              const SurrogateConfig&, int);

}  // namespace lngram
