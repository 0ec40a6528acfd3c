#pragma once

// Desk-scale pre-norm causal decoder with optional Lngram branches.
//
//   H0 = embed[tokens]
//   layer l:  [H += Lngram(H) if l is an insertion layer]
//             H += Attn(RMSNorm_g(H))      (rotary positions, causal)
//             H += W_out SiLU(W_in RMSNorm_g(H))
//   logits = RMSNorm_g(H_L) * head
//
// Insertion layers are 1-based. Activations of B sequences are stacked into
// (B T) x d matrices; every causal operation works per sequence.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lngram/lngram_layer.hpp"

namespace lngram {

struct DecoderConfig {
  int layers = 4;
  int dim = 128;
  int heads = 4;
  int ffn_dim = 512;
  int vocab = 256;
  int max_seq = 64;
  std::vector<int> insert_layers{1, 3};
  bool lngram_enabled = true;
  LngramConfig lngram;
  double norm_eps = kDefaultRmsEps;
  double rope_base = 10000.0;
  double init_std = 0.02;

  bool has_lngram(int layer_1based) const;
  void validate() const;
  // Canonical single-line description of every shape-relevant field.
  std::string describe() const;
  std::uint64_t hash() const;
};

std::uint64_t fnv1a64(std::string_view text);

enum class ParamGroup { backbone, table, readout, codec };
std::string to_string(ParamGroup group);

template <class T>
struct BlockParams {
  Matrix<T> attn_gain, wq, wk, wv, wo;
  Matrix<T> ffn_gain, w_in, w_out;
  std::optional<LngramParams<T>> lngram;
};

template <class T>
struct DecoderParams {
  Matrix<T> embed;  // V x d
  std::vector<BlockParams<T>> blocks;
  Matrix<T> final_gain;  // 1 x d
  Matrix<T> head;        // d x V
};

// Visits every learnable matrix with a stable name and its optimizer group.
template <class T, class F>
void for_each_param(DecoderParams<T>& p, F&& f);
template <class T, class F>
void for_each_param(const DecoderParams<T>& p, F&& f);

template <class T>
DecoderParams<T> zeros_like(const DecoderParams<T>& params);

template <class T>
class DecodeSession;

// Lngram-free config whose feedforward width is chosen so that its parameter
// count is closest to the dense (non-table) parameter count of config.
DecoderConfig matched_baseline(const DecoderConfig& config);

template <class T>
struct LayerStates {
  std::vector<Matrix<T>> hidden;  // H^(0) .. H^(L)
  Matrix<T> logits;
};

struct ParameterCounts {
  std::int64_t backbone = 0, table = 0, readout = 0, codec = 0;
  std::int64_t total() const { return backbone + table + readout + codec; }
  // Parameters touched per token: everything but the table rows that are not hit.
  std::int64_t dense() const { return backbone + readout + codec; }
};

template <class T>
class Decoder {
 public:
  Decoder(const DecoderConfig& config, std::uint64_t seed);
  Decoder(const DecoderConfig& config, DecoderParams<T> params);

  const DecoderConfig& config() const { return config_; }
  DecoderParams<T>& params() { return params_; }
  const DecoderParams<T>& params() const { return params_; }

  // tokens holds B sequences of seq_len tokens (seq_len < 0: one sequence).
  Matrix<T> forward_logits(std::span<const int> tokens, int seq_len = -1, GateTrace* trace = nullptr) const;
  LayerStates<T> forward_with_hidden(std::span<const int> tokens, int seq_len = -1,
                                     GateTrace* trace = nullptr) const;
  // Final norm followed by the head, applied row-wise.
  Matrix<T> head_logits(const Matrix<T>& hidden) const;

  // Mean next-token cross entropy; accumulates into grads.
  double loss_and_backward(std::span<const int> inputs, std::span<const int> targets, int seq_len,
                           DecoderParams<T>& grads, RoutingGradient routing = RoutingGradient::surrogate) const;
  double loss(std::span<const int> inputs, std::span<const int> targets, int seq_len) const;

  ParameterCounts parameter_counts() const;

  struct Cache;

 private:
  template <class>
  friend class DecodeSession;

  Matrix<T> run(std::span<const int> tokens, int seq_len, Cache* cache, std::vector<Matrix<T>>* states,
                GateTrace* trace) const;

  DecoderConfig config_;
  DecoderParams<T> params_;
};

// Rotary tables for positions [0, count).
template <class T>
struct Rotary {
  int half = 0;
  Matrix<T> cos, sin;  // count x half
  void ensure(int count, int head_dim, double base);
};

// Token-by-token inference with a preallocated attention cache; the Lngram
// state is fixed-size, so per-step memory does not grow with position.
template <class T>
class DecodeSession {
 public:
  DecodeSession(const Decoder<T>& model, int capacity);

  // Processes a prompt in one batched pass and fills the caches; returns the
  // logits of the last prompt position.
  Vector<T> prefill(std::span<const int> prompt);
  Vector<T> step(int token, GateTrace* trace = nullptr);

  // Route table reads through a per-step staging buffer (host-gather residency).
  void set_host_gather(bool on);

  int position() const { return position_; }
  int capacity() const { return capacity_; }
  std::size_t state_bytes() const;

 private:
  const Decoder<T>& model_;
  int capacity_;
  int position_ = 0;
  std::vector<Matrix<T>> keys_, values_;  // per layer, capacity x d (rotated keys)
  std::vector<LngramDecodeState<T>> lngram_states_;
  Rotary<T> rotary_;
  Vector<T> scores_;  // attention scratch, capacity entries
};

}  // namespace lngram

#include "lngram/backbone_params.ipp"
