#pragma once

// The Lngram branch: discretize -> pack -> exact retrieval -> gated readout ->
// causal convolution refinement, added to the layer input as a residual.
//
//   single-table:  alpha = sigmoid(rho),  v_t = sum_n alpha_n v_n
//   multi-table:   pi = softmax(rho / tau_f) over valid (s, n), v_t = sum pi v
//   rho = rmsnorm(h_t) . rmsnorm(k) / sqrt(d),  k = e W_K + b_K,  v = e W_V + b_V
//   Y = V + SiLU(DWConv(rmsnorm(V))),  out = H + Y
//
// Branches whose window does not fit (position < n - 1) are skipped; the
// literal_invalid_branches flag instead feeds them e = 0.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lngram/codec.hpp"
#include "lngram/memory.hpp"
#include "lngram/surrogate.hpp"

namespace lngram {

enum class FusionMode { single_table, multi_table };

FusionMode parse_fusion_mode(const std::string& name);
std::string to_string(FusionMode mode);

struct LngramConfig {
  int dim = 128;
  int bits = 4;
  std::vector<int> orders{2, 3};
  int mem_dim = 16;
  int subtables = 1;
  FusionMode mode = FusionMode::single_table;
  double fusion_temperature = 1.0;
  int conv_width = 4;
  int conv_dilation = 0;  // 0 selects max(orders)
  double eps = kDefaultRmsEps;
  bool literal_invalid_branches = false;
  double table_init_std = 0.02;
  double readout_init_std = 0.02;
  std::uint64_t table_row_padding = 1;
  int route_block = 0;  // retrieval streaming block in routes; 0 = all routes
  SurrogateConfig surrogate;

  int routes() const { return dim / bits; }
  int dilation() const;
  int max_order() const;
  int branch_count() const { return subtables * int(orders.size()); }
  int projection_count() const { return mode == FusionMode::single_table ? 1 : int(orders.size()); }
  void validate() const;
};

template <class T>
struct ReadoutParams {
  // Stored so that k = e * key_proj + key_bias; shapes (R d_m) x d and 1 x d.
  std::vector<Matrix<T>> key_proj, key_bias, value_proj, value_bias;
  Matrix<T> conv_kernels;  // d x w, zero at construction
};

template <class T>
struct LngramParams {
  CodecParams<T> codec;
  MultiTableBank<T> bank;
  ReadoutParams<T> readout;
};

// Codec orthogonal init, tables N(0, table_init_std), W_K/W_V N(0,
// readout_init_std), all biases and conv kernels zero.
template <class T>
LngramParams<T> make_lngram_params(const LngramConfig& config, std::mt19937_64& rng);

// Same shapes, every entry zero. Used for gradient buffers.
template <class T>
LngramParams<T> zeros_like(const LngramParams<T>& params);

template <class To, class From>
LngramParams<To> cast_params(const LngramParams<From>& params);

struct GateEntry {
  int layer = 0;  // 1-based decoder layer, 0 when used standalone
  int sequence = 0;
  int t = 0;  // 0-based position within the sequence
  int s = 0;
  int n = 0;
  double score = 0.0;
  double gate = 0.0;
};

struct GateTrace {
  std::vector<GateEntry> entries;
};

template <class T>
struct Branch {
  Vector<T> key;
  Vector<T> value;
  int subtable = 0;
  int order = 0;
};

template <class T>
struct ReadoutStep {
  Vector<T> value;            // fused v_t
  std::vector<T> scores;      // rho per branch
  std::vector<T> weights;     // alpha or pi per branch
};

template <class T>
std::pair<Vector<T>, Vector<T>> project_branch(const RetrievalResult<T>& e, const ReadoutParams<T>& params,
                                               int projection);

template <class T>
ReadoutStep<T> gate_single(const Vector<T>& hidden, const std::vector<Branch<T>>& branches, T eps);

template <class T>
ReadoutStep<T> fuse_multi(const Vector<T>& hidden, const std::vector<Branch<T>>& branches, T tau_f, T eps);

// Y = V + SiLU(DWConv(rmsnorm(V))), sequences of seq_len rows.
template <class T>
Matrix<T> conv_refine(const Matrix<T>& v, const Matrix<T>& kernels, int dilation, T eps,
                      Eigen::Index seq_len = -1);

// Forward intermediates kept for backward.
template <class T>
struct LngramCache {
  int seq_len = 0;
  Matrix<T> hidden;
  DiscretizeResult<T> codes;
  SymbolGrid symbols;
  RetrievalSet<T> retrieval;
  // Per branch b = s * |orders| + k, all positions x d.
  std::vector<Matrix<T>> keys, values, keys_normed;
  std::vector<Vector<T>> keys_inv_rms;
  Matrix<T> scores, weights;  // positions x branches
  std::vector<std::uint8_t> active;  // positions x branches
  Matrix<T> fused;         // V
  Matrix<T> fused_normed;  // rmsnorm(V)
  Vector<T> fused_inv_rms;
  Matrix<T> conv_out;      // DWConv(rmsnorm(V)) before SiLU
};

// H + Y for stacked sequences of seq_len rows each. Optionally keeps the
// cache for backward and appends gate values to trace.
template <class T>
Matrix<T> lngram_forward(const Matrix<T>& hidden, const LngramParams<T>& params, const LngramConfig& config,
                         Eigen::Index seq_len = -1, LngramCache<T>* cache = nullptr, GateTrace* trace = nullptr);

enum class RoutingGradient { none, surrogate };

// Accumulates parameter gradients into grads and returns dL/dH. Tables,
// readout projections and conv kernels get chain-rule gradients; the codec
// projection receives the surrogate (or nothing with RoutingGradient::none).
template <class T>
Matrix<T> lngram_backward(const LngramCache<T>& cache, const LngramParams<T>& params, const LngramConfig& config,
                          const Matrix<T>& dout, LngramParams<T>& grads,
                          RoutingGradient routing = RoutingGradient::surrogate);

// Fixed-size incremental state for token-by-token decoding.
template <class T>
struct LngramDecodeState {
  int position = 0;
  // symbol_history[s] holds the last (max_order - 1) symbol rows, oldest first.
  std::vector<std::vector<std::vector<Symbol>>> symbol_history;
  // Last (w - 1) * dilation rows of rmsnorm(V), oldest first.
  std::vector<Vector<T>> conv_history;
  // Host-gather residency: hit rows are first copied into a staging buffer
  // (one row per route and branch), then read from there.
  bool staged_gather = false;
  Matrix<T> staging;

  void reset(const LngramConfig& config);
  std::size_t state_bytes() const;
};

template <class T>
Vector<T> lngram_step(const Vector<T>& hidden, const LngramParams<T>& params, const LngramConfig& config,
                      LngramDecodeState<T>& state, GateTrace* trace = nullptr);

std::int64_t parameter_count(const LngramParams<float>& params);

}  // namespace lngram
