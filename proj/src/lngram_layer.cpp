#include "lngram/lngram_layer.hpp"

#include <algorithm>
#include <cmath>

namespace lngram {

FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "single" || name == "single-table") return FusionMode::single_table;
  if (name == "multi" || name == "multi-table") return FusionMode::multi_table;
  throw ConfigError("unknown fusion mode '" + name + "' (expected single|multi)");
}

std::string to_string(FusionMode mode) { return mode == FusionMode::single_table ? "single" : "multi"; }

int LngramConfig::max_order() const { return orders.empty() ? 0 : *std::max_element(orders.begin(), orders.end()); }

int LngramConfig::dilation() const { return conv_dilation > 0 ? conv_dilation : std::max(1, max_order()); }

void LngramConfig::validate() const {
  if (dim < 1) throw ConfigError("lngram: dim must be positive");
  if (bits < 1 || bits > kMaxBitsPerRoute) throw ConfigError("lngram: bits per route out of range");
  if (dim % bits != 0) {
    throw ConfigError("lngram: model dim " + std::to_string(dim) + " not divisible by bits " + std::to_string(bits));
  }
  if (orders.empty()) throw ConfigError("lngram: at least one n-gram order required");
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (orders[i] < 1) throw ConfigError("lngram: orders must be >= 1");
    for (std::size_t j = 0; j < i; ++j) {
      if (orders[i] == orders[j]) throw ConfigError("lngram: duplicate n-gram order");
    }
  }
  if (mem_dim < 1) throw ConfigError("lngram: memory dim must be positive");
  if (subtables < 1) throw ConfigError("lngram: subtables must be >= 1");
  if (mode == FusionMode::single_table && subtables != 1) {
    throw ConfigError("lngram: single-table mode requires subtables = 1");
  }
  if (!(fusion_temperature > 0.0)) throw ConfigError("lngram: fusion temperature must be positive");
  if (conv_width < 1) throw ConfigError("lngram: conv width must be >= 1");
  if (conv_dilation < 0) throw ConfigError("lngram: conv dilation must be >= 0");
  if (table_row_padding < 1) throw ConfigError("lngram: table row padding must be >= 1");
  if (route_block < 0) throw ConfigError("lngram: route block must be >= 0");
  for (int n : orders) checked_table_rows(routes(), std::uint32_t(1) << bits, n);
  surrogate.validate();
}

template <class T>
LngramParams<T> make_lngram_params(const LngramConfig& config, std::mt19937_64& rng) {
  config.validate();
  LngramParams<T> p;
  p.codec = make_codec<T>(config.dim, config.bits, config.subtables, rng);
  p.codec.eps = T(config.eps);
  p.bank = make_bank<T>(config.subtables, config.orders, config.routes(), config.bits, config.mem_dim, rng,
                        config.table_init_std, config.table_row_padding);
  const Eigen::Index in = Eigen::Index(config.routes()) * config.mem_dim;
  std::normal_distribution<double> normal(0.0, config.readout_init_std);
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = T(normal(rng));
    return m;
  };
  for (int i = 0; i < config.projection_count(); ++i) {
    p.readout.key_proj.push_back(draw(in, config.dim));
    p.readout.key_bias.push_back(Matrix<T>::Zero(1, config.dim));
    p.readout.value_proj.push_back(draw(in, config.dim));
    p.readout.value_bias.push_back(Matrix<T>::Zero(1, config.dim));
  }
  p.readout.conv_kernels = Matrix<T>::Zero(config.dim, config.conv_width);
  return p;
}

template <class T>
LngramParams<T> zeros_like(const LngramParams<T>& params) {
  LngramParams<T> z = params;
  for (auto& w : z.codec.projections) w.setZero();
  for (auto& group : z.bank.groups) {
    for (auto& table : group) table.entries.setZero();
  }
  for (auto* list : {&z.readout.key_proj, &z.readout.key_bias, &z.readout.value_proj, &z.readout.value_bias}) {
    for (auto& m : *list) m.setZero();
  }
  z.readout.conv_kernels.setZero();
  return z;
}

template <class To, class From>
LngramParams<To> cast_params(const LngramParams<From>& params) {
  LngramParams<To> out;
  out.codec.bits = params.codec.bits;
  out.codec.eps = To(params.codec.eps);
  for (const auto& w : params.codec.projections) out.codec.projections.push_back(w.template cast<To>());
  out.bank.orders = params.bank.orders;
  for (const auto& group : params.bank.groups) {
    std::vector<MemoryTable<To>> g;
    for (const auto& table : group) {
      MemoryTable<To> t;
      t.order = table.order;
      t.routes = table.routes;
      t.symbols = table.symbols;
      t.dim = table.dim;
      t.entries = table.entries.template cast<To>();
      g.push_back(std::move(t));
    }
    out.bank.groups.push_back(std::move(g));
  }
  auto cast_list = [](const std::vector<Matrix<From>>& in) {
    std::vector<Matrix<To>> o;
    for (const auto& m : in) o.push_back(m.template cast<To>());
    return o;
  };
  out.readout.key_proj = cast_list(params.readout.key_proj);
  out.readout.key_bias = cast_list(params.readout.key_bias);
  out.readout.value_proj = cast_list(params.readout.value_proj);
  out.readout.value_bias = cast_list(params.readout.value_bias);
  out.readout.conv_kernels = params.readout.conv_kernels.template cast<To>();
  return out;
}

template <class T>
std::pair<Vector<T>, Vector<T>> project_branch(const RetrievalResult<T>& e, const ReadoutParams<T>& params,
                                               int projection) {
  if (projection < 0 || projection >= int(params.key_proj.size())) {
    throw DimensionError("project_branch: projection index out of range");
  }
  const auto& wk = params.key_proj[projection];
  const auto& wv = params.value_proj[projection];
  if (e.values.size() != wk.rows()) throw DimensionError("project_branch: retrieval length mismatch");
  Vector<T> k = wk.transpose() * e.values + params.key_bias[projection].row(0).transpose();
  Vector<T> v = wv.transpose() * e.values + params.value_bias[projection].row(0).transpose();
  return {std::move(k), std::move(v)};
}

namespace {

template <class T>
std::vector<T> branch_scores(const Vector<T>& hidden, const std::vector<Branch<T>>& branches, T eps) {
  std::vector<T> scores;
  if (branches.empty()) return scores;
  const Vector<T> hn = rmsnorm(hidden, eps);
  const T scale = T(1) / std::sqrt(T(hidden.size()));
  for (const auto& b : branches) {
    if (b.key.size() != hidden.size() || b.value.size() != hidden.size()) {
      throw DimensionError("readout: branch vectors must have the model dimension");
    }
    scores.push_back(hn.dot(rmsnorm(b.key, eps)) * scale);
  }
  return scores;
}

}  // namespace

template <class T>
ReadoutStep<T> gate_single(const Vector<T>& hidden, const std::vector<Branch<T>>& branches, T eps) {
  ReadoutStep<T> out;
  out.value = Vector<T>::Zero(hidden.size());
  out.scores = branch_scores(hidden, branches, eps);
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const T alpha = sigmoid(out.scores[b]);
    out.weights.push_back(alpha);
    out.value += alpha * branches[b].value;
  }
  return out;
}

template <class T>
ReadoutStep<T> fuse_multi(const Vector<T>& hidden, const std::vector<Branch<T>>& branches, T tau_f, T eps) {
  if (!(tau_f > T(0))) throw ParameterError("fuse_multi: fusion temperature must be positive");
  ReadoutStep<T> out;
  out.value = Vector<T>::Zero(hidden.size());
  out.scores = branch_scores(hidden, branches, eps);
  if (branches.empty()) return out;
  const Vector<T> pi = softmax_temp(Eigen::Map<const Vector<T>>(out.scores.data(), Eigen::Index(out.scores.size())), tau_f);
  for (std::size_t b = 0; b < branches.size(); ++b) {
    out.weights.push_back(pi(Eigen::Index(b)));
    out.value += pi(Eigen::Index(b)) * branches[b].value;
  }
  return out;
}

template <class T>
Matrix<T> conv_refine(const Matrix<T>& v, const Matrix<T>& kernels, int dilation, T eps, Eigen::Index seq_len) {
  const Matrix<T> normed = rmsnorm_rows(v, eps);
  const Matrix<T> conv = depthwise_causal_conv(normed, kernels, dilation, seq_len);
  return v + conv.unaryExpr([](T x) { return silu(x); });
}

template <class T>
Matrix<T> lngram_forward(const Matrix<T>& hidden, const LngramParams<T>& params, const LngramConfig& config,
                         Eigen::Index seq_len, LngramCache<T>* cache, GateTrace* trace) {
  const int d = config.dim;
  if (hidden.cols() != d) throw DimensionError("lngram_forward: hidden width does not match config dim");
  if (seq_len < 0) seq_len = hidden.rows();
  if (seq_len < 1 || hidden.rows() % seq_len != 0) {
    throw DimensionError("lngram_forward: rows not a multiple of seq_len");
  }
  const int P = int(hidden.rows());
  const int nk = int(config.orders.size());
  const int B = config.branch_count();
  const T eps = T(config.eps);
  const T inv_sqrt_d = T(1) / std::sqrt(T(d));

  LngramCache<T> local;
  LngramCache<T>& c = cache ? *cache : local;
  c.seq_len = int(seq_len);
  c.hidden = hidden;
  c.codes = discretize(hidden, params.codec);
  c.symbols = pack_routes(c.codes.bits, config.bits);
  const int block = config.route_block > 0 ? config.route_block : config.routes();
  c.retrieval = retrieve_all(c.symbols, params.bank, block, int(seq_len));

  c.keys.assign(B, Matrix<T>());
  c.values.assign(B, Matrix<T>());
  c.keys_normed.assign(B, Matrix<T>());
  c.keys_inv_rms.assign(B, Vector<T>());
  c.scores = Matrix<T>::Zero(P, B);
  c.weights = Matrix<T>::Zero(P, B);
  c.active.assign(std::size_t(P) * B, 0);

  const Matrix<T>& hn = c.codes.normalized;  // rmsnorm(h_t) doubles as the gate query
  for (int s = 0; s < config.subtables; ++s) {
    for (int k = 0; k < nk; ++k) {
      const int b = s * nk + k;
      const int proj = config.mode == FusionMode::single_table ? 0 : k;
      const Matrix<T>& e = c.retrieval.values[s][k];
      c.keys[b] = e * params.readout.key_proj[proj];
      c.keys[b].rowwise() += params.readout.key_bias[proj].row(0);
      c.values[b] = e * params.readout.value_proj[proj];
      c.values[b].rowwise() += params.readout.value_bias[proj].row(0);
      c.keys_normed[b] = rmsnorm_rows(c.keys[b], eps, &c.keys_inv_rms[b]);
      for (int t = 0; t < P; ++t) {
        const bool valid = c.retrieval.valid(t, k);
        if (!valid && !config.literal_invalid_branches) continue;
        c.active[std::size_t(t) * B + b] = 1;
        c.scores(t, b) = hn.row(t).dot(c.keys_normed[b].row(t)) * inv_sqrt_d;
      }
    }
  }

  c.fused = Matrix<T>::Zero(P, d);
  const T tau_f = T(config.fusion_temperature);
  for (int t = 0; t < P; ++t) {
    if (config.mode == FusionMode::single_table) {
      for (int b = 0; b < B; ++b) {
        if (!c.active[std::size_t(t) * B + b]) continue;
        c.weights(t, b) = sigmoid(c.scores(t, b));
      }
    } else {
      T m = -std::numeric_limits<T>::infinity();
      for (int b = 0; b < B; ++b) {
        if (c.active[std::size_t(t) * B + b]) m = std::max(m, c.scores(t, b) / tau_f);
      }
      T total = T(0);
      for (int b = 0; b < B; ++b) {
        if (!c.active[std::size_t(t) * B + b]) continue;
        c.weights(t, b) = std::exp(c.scores(t, b) / tau_f - m);
        total += c.weights(t, b);
      }
      if (total > T(0)) c.weights.row(t) /= total;
    }
    for (int b = 0; b < B; ++b) {
      if (!c.active[std::size_t(t) * B + b]) continue;
      c.fused.row(t) += c.weights(t, b) * c.values[b].row(t);
      if (trace) {
        trace->entries.push_back({0, int(t / seq_len), int(t % seq_len), b / nk, config.orders[b % nk],
                                  double(c.scores(t, b)), double(c.weights(t, b))});
      }
    }
  }

  c.fused_normed = rmsnorm_rows(c.fused, eps, &c.fused_inv_rms);
  c.conv_out = depthwise_causal_conv(c.fused_normed, params.readout.conv_kernels, config.dilation(), seq_len);
  Matrix<T> out = hidden + c.fused + c.conv_out.unaryExpr([](T x) { return silu(x); });
  return out;
}

template <class T>
Matrix<T> lngram_backward(const LngramCache<T>& c, const LngramParams<T>& params, const LngramConfig& config,
                          const Matrix<T>& dout, LngramParams<T>& grads, RoutingGradient routing) {
  const int P = int(c.hidden.rows());
  const int d = config.dim;
  const int nk = int(config.orders.size());
  const int B = config.branch_count();
  const int R = config.routes();
  const int dm = config.mem_dim;
  const T inv_sqrt_d = T(1) / std::sqrt(T(d));
  const T tau_f = T(config.fusion_temperature);
  if (dout.rows() != P || dout.cols() != d) throw DimensionError("lngram_backward: gradient shape mismatch");

  Matrix<T> dhidden = dout;

  // Y = V + SiLU(C), C = DWConv(rmsnorm(V)).
  Matrix<T> dfused = dout;
  Matrix<T> dconv(P, d);
  for (Eigen::Index i = 0; i < dconv.size(); ++i) dconv.data()[i] = dout.data()[i] * silu_grad(c.conv_out.data()[i]);
  Matrix<T> dnormed = Matrix<T>::Zero(P, d);
  depthwise_causal_conv_backward(c.fused_normed, params.readout.conv_kernels, config.dilation(), c.seq_len, dconv,
                                 dnormed, grads.readout.conv_kernels);
  dfused += rmsnorm_rows_backward(c.fused, c.fused_inv_rms, dnormed);

  // Fusion: V_t = sum_b w_tb v_tb.
  Matrix<T> dquery = Matrix<T>::Zero(P, d);  // gradient w.r.t. rmsnorm(h)
  std::vector<Matrix<T>> dkeys_normed(B, Matrix<T>::Zero(P, d));
  std::vector<Matrix<T>> dvalues(B, Matrix<T>::Zero(P, d));
  std::vector<T> dw(B);
  for (int t = 0; t < P; ++t) {
    T mean_dw = T(0);
    for (int b = 0; b < B; ++b) {
      dw[b] = T(0);
      if (!c.active[std::size_t(t) * B + b]) continue;
      dw[b] = dfused.row(t).dot(c.values[b].row(t));
      dvalues[b].row(t) = c.weights(t, b) * dfused.row(t);
      mean_dw += c.weights(t, b) * dw[b];
    }
    for (int b = 0; b < B; ++b) {
      if (!c.active[std::size_t(t) * B + b]) continue;
      const T w = c.weights(t, b);
      const T drho = config.mode == FusionMode::single_table ? dw[b] * w * (T(1) - w)
                                                            : w * (dw[b] - mean_dw) / tau_f;
      dquery.row(t) += (drho * inv_sqrt_d) * c.keys_normed[b].row(t);
      dkeys_normed[b].row(t) = (drho * inv_sqrt_d) * c.codes.normalized.row(t);
    }
  }

  // Projections and table rows.
  std::vector<std::vector<Matrix<T>>> dretrieval(config.subtables);
  for (int s = 0; s < config.subtables; ++s) {
    for (int k = 0; k < nk; ++k) {
      const int b = s * nk + k;
      const int proj = config.mode == FusionMode::single_table ? 0 : k;
      const Matrix<T>& e = c.retrieval.values[s][k];
      const Matrix<T> dkey = rmsnorm_rows_backward(c.keys[b], c.keys_inv_rms[b], dkeys_normed[b]);
      grads.readout.key_proj[proj].noalias() += e.transpose() * dkey;
      grads.readout.key_bias[proj] += dkey.colwise().sum();
      grads.readout.value_proj[proj].noalias() += e.transpose() * dvalues[b];
      grads.readout.value_bias[proj] += dvalues[b].colwise().sum();
      Matrix<T> de = dkey * params.readout.key_proj[proj].transpose();
      de.noalias() += dvalues[b] * params.readout.value_proj[proj].transpose();
      auto& table_grad = grads.bank.table(s, k).entries;
      const auto& addr = c.retrieval.addresses[s][k];
      for (int t = 0; t < P; ++t) {
        if (!c.retrieval.valid(t, k)) {
          de.row(t).setZero();
          continue;
        }
        for (int r = 0; r < R; ++r) {
          table_grad.row(Eigen::Index(addr[std::size_t(t) * R + r])) += de.block(t, Eigen::Index(r) * dm, 1, dm);
        }
      }
      dretrieval[s].push_back(std::move(de));
    }
  }

  // Routing logits -> codec projection -> H.
  if (routing == RoutingGradient::surrogate) {
    RoutingForwardState<T> state{&c.symbols, &c.codes.logits, &params.bank, &c.retrieval};
    const int block = config.route_block > 0 ? config.route_block : R;
    const auto dlogits = backprop_routing(state, dretrieval, config.surrogate, block);
    for (int s = 0; s < config.subtables; ++s) {
      grads.codec.projections[s].noalias() += c.codes.normalized.transpose() * dlogits[s];
      dquery.noalias() += dlogits[s] * params.codec.projections[s].transpose();
    }
  }
  dhidden += rmsnorm_rows_backward(c.hidden, c.codes.inv_rms, dquery);
  return dhidden;
}

template <class T>
void LngramDecodeState<T>::reset(const LngramConfig& config) {
  position = 0;
  const int keep = std::max(0, config.max_order() - 1);
  symbol_history.assign(config.subtables,
                        std::vector<std::vector<Symbol>>(keep, std::vector<Symbol>(config.routes(), 0)));
  const int conv_keep = (config.conv_width - 1) * config.dilation();
  conv_history.assign(conv_keep, Vector<T>::Zero(config.dim));
}

template <class T>
std::size_t LngramDecodeState<T>::state_bytes() const {
  std::size_t bytes = 0;
  for (const auto& s : symbol_history) {
    for (const auto& row : s) bytes += row.size() * sizeof(Symbol);
  }
  for (const auto& row : conv_history) bytes += std::size_t(row.size()) * sizeof(T);
  bytes += std::size_t(staging.size()) * sizeof(T);
  return bytes;
}

template <class T>
Vector<T> lngram_step(const Vector<T>& hidden, const LngramParams<T>& params, const LngramConfig& config,
                      LngramDecodeState<T>& state, GateTrace* trace) {
  const int d = config.dim;
  const int R = config.routes();
  const int M = config.bits;
  const int dm = config.mem_dim;
  const int nk = int(config.orders.size());
  const T eps = T(config.eps);
  const std::uint64_t K = std::uint64_t(1) << M;
  const int keep = std::max(0, config.max_order() - 1);
  if (hidden.size() != d) throw DimensionError("lngram_step: hidden width does not match config dim");
  if (int(state.symbol_history.size()) != config.subtables) state.reset(config);
  if (state.staged_gather && state.staging.rows() != Eigen::Index(config.branch_count()) * R) {
    state.staging = Matrix<T>::Zero(Eigen::Index(config.branch_count()) * R, dm);
  }

  const Vector<T> query = rmsnorm(hidden, eps);
  std::vector<std::vector<Symbol>> current(config.subtables, std::vector<Symbol>(R, 0));
  for (int s = 0; s < config.subtables; ++s) {
    const Vector<T> z = params.codec.projections[s].transpose() * query;
    for (int r = 0; r < R; ++r) {
      Symbol a = 0;
      for (int j = 0; j < M; ++j) a |= Symbol(z(r * M + j) > T(0)) << j;
      current[s][r] = a;
    }
  }

  std::vector<Branch<T>> branches;
  Vector<T> e(Eigen::Index(R) * dm);
  for (int s = 0; s < config.subtables; ++s) {
    for (int k = 0; k < nk; ++k) {
      const int n = config.orders[k];
      const bool valid = state.position >= n - 1;
      if (!valid && !config.literal_invalid_branches) continue;
      const auto& table = params.bank.table(s, k);
      const std::uint64_t stride = table.logical_rows() / std::uint64_t(R);
      if (valid) {
        for (int r = 0; r < R; ++r) {
          std::uint64_t a = std::uint64_t(r) * stride;
          std::uint64_t w = 1;
          for (int i = 0; i < n - 1; ++i, w *= K) a += std::uint64_t(state.symbol_history[s][keep - (n - 1) + i][r]) * w;
          a += std::uint64_t(current[s][r]) * w;
          if (state.staged_gather) {
            state.staging.row(Eigen::Index(s * nk + k) * R + r) = table.entries.row(Eigen::Index(a));
          } else {
            e.segment(Eigen::Index(r) * dm, dm) = table.entries.row(Eigen::Index(a)).transpose();
          }
        }
        if (state.staged_gather) {
          for (int r = 0; r < R; ++r) {
            e.segment(Eigen::Index(r) * dm, dm) = state.staging.row(Eigen::Index(s * nk + k) * R + r).transpose();
          }
        }
      } else {
        e.setZero();
      }
      const int proj = config.mode == FusionMode::single_table ? 0 : k;
      Vector<T> kv = params.readout.key_proj[proj].transpose() * e + params.readout.key_bias[proj].row(0).transpose();
      Vector<T> vv =
          params.readout.value_proj[proj].transpose() * e + params.readout.value_bias[proj].row(0).transpose();
      branches.push_back({std::move(kv), std::move(vv), s, n});
    }
  }
  const ReadoutStep<T> step = config.mode == FusionMode::single_table
                                  ? gate_single(hidden, branches, eps)
                                  : fuse_multi(hidden, branches, T(config.fusion_temperature), eps);
  if (trace) {
    for (std::size_t b = 0; b < branches.size(); ++b) {
      trace->entries.push_back({0, 0, state.position, branches[b].subtable, branches[b].order, double(step.scores[b]),
                                double(step.weights[b])});
    }
  }

  const Vector<T> normed = rmsnorm(step.value, eps);
  const Matrix<T>& kernels = params.readout.conv_kernels;
  const int delta = config.dilation();
  const int hist = int(state.conv_history.size());
  Vector<T> conv = kernels.col(0).cwiseProduct(normed);
  for (int i = 1; i < config.conv_width; ++i) {
    const int back = i * delta;
    if (back > state.position) break;
    conv += kernels.col(i).cwiseProduct(state.conv_history[hist - back]);
  }
  Vector<T> out = hidden + step.value + conv.unaryExpr([](T x) { return silu(x); });

  for (int s = 0; s < config.subtables && keep > 0; ++s) {
    auto& h = state.symbol_history[s];
    std::rotate(h.begin(), h.begin() + 1, h.end());
    h.back() = current[s];
  }
  if (hist > 0) {
    std::rotate(state.conv_history.begin(), state.conv_history.begin() + 1, state.conv_history.end());
    state.conv_history.back() = normed;
  }
  ++state.position;
  return out;
}

template <class T>
std::int64_t parameter_count_impl(const LngramParams<T>& p) {
  std::int64_t n = 0;
  for (const auto& w : p.codec.projections) n += w.size();
  for (const auto& g : p.bank.groups) {
    for (const auto& t : g) n += std::int64_t(t.logical_rows()) * t.dim;
  }
  for (const auto* list : {&p.readout.key_proj, &p.readout.key_bias, &p.readout.value_proj, &p.readout.value_bias}) {
    for (const auto& m : *list) n += m.size();
  }
  return n + p.readout.conv_kernels.size();
}

std::int64_t parameter_count(const LngramParams<float>& params) { return parameter_count_impl(params); }

#define LNGRAM_INSTANTIATE(T)                                                                                     \
  template LngramParams<T> make_lngram_params<T>(const LngramConfig&, std::mt19937_64&);                          \
  template LngramParams<T> zeros_like<T>(const LngramParams<T>&);                                                 \
  template std::pair<Vector<T>, Vector<T>> project_branch<T>(const RetrievalResult<T>&, const ReadoutParams<T>&, \
                                                             int);                                                \
  template ReadoutStep<T> gate_single<T>(const Vector<T>&, const std::vector<Branch<T>>&, T);                     \
  template ReadoutStep<T> fuse_multi<T>(const Vector<T>&, const std::vector<Branch<T>>&, T, T);                   \
  template Matrix<T> conv_refine<T>(const Matrix<T>&, const Matrix<T>&, int, T, Eigen::Index);                    \
  template Matrix<T> lngram_forward<T>(const Matrix<T>&, const LngramParams<T>&, const LngramConfig&,             \
                                       Eigen::Index, LngramCache<T>*, GateTrace*);                                \
  template Matrix<T> lngram_backward<T>(const LngramCache<T>&, const LngramParams<T>&, const LngramConfig&,       \
                                        const Matrix<T>&, LngramParams<T>&, RoutingGradient);                     \
  template struct LngramDecodeState<T>;                                                                           \
  template Vector<T> lngram_step<T>(const Vector<T>&, const LngramParams<T>&, const LngramConfig&,                \
                                    LngramDecodeState<T>&, GateTrace*);

LNGRAM_INSTANTIATE(float)
LNGRAM_INSTANTIATE(double)
#undef LNGRAM_INSTANTIATE

template LngramParams<double> cast_params<double, float>(const LngramParams<float>&);
template LngramParams<float> cast_params<float, double>(const LngramParams<double>&);

}  // namespace lngram
