#pragma once

// Optimization: AdamW on backbone, readout and codec parameters; Adam without
// decay on memory tables at a multiplied learning rate. Global-norm clipping,
// linear warmup then cosine decay to a floor.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lngram/backbone.hpp"

namespace lngram {

struct TrainConfig {
  double lr = 3e-4;
  double weight_decay = 0.01;
  double warmup_ratio = 0.01;
  double min_lr_ratio = 0.1;
  double clip_norm = 1.0;
  double table_lr_multiplier = 5.0;
  double table_weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  int batch_size = 16;
  int seq_len = 64;
  std::int64_t total_tokens = 0;  // steps = total_tokens / (batch_size * seq_len)
  RoutingGradient routing = RoutingGradient::surrogate;

  std::int64_t steps() const;
  int warmup_steps() const;
  void validate() const;
  std::string describe() const;
};

// Peak-relative learning rate for backbone-rule parameters at a 0-based step.
double lr_at(const TrainConfig& config, std::int64_t step);
double group_lr(const TrainConfig& config, ParamGroup group, std::int64_t step);
double group_weight_decay(const TrainConfig& config, ParamGroup group);

double global_grad_norm(const DecoderParams<float>& grads);
// Scales grads so the global norm is at most max_norm; returns the pre-clip norm.
double clip_grad_norm(DecoderParams<float>& grads, double max_norm);

class Optimizer {
 public:
  Optimizer(const TrainConfig& config, const DecoderParams<float>& like);

  // One update at the given step with already clipped gradients.
  void step(DecoderParams<float>& params, const DecoderParams<float>& grads, std::int64_t step);
  std::int64_t updates() const { return updates_; }

 private:
  TrainConfig config_;
  DecoderParams<float> m_, v_;
  std::int64_t updates_ = 0;
};

struct StepLog {
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double table_lr = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  std::vector<StepLog> log;
  double final_loss = 0.0;
};

// Samples batches of contiguous windows from data with the config seed.
// dump_path, if set, receives a diagnostic report when the loss turns
// non-finite (TrainingError is thrown afterwards).
TrainResult train_loop(Decoder<float>& model, std::span<const std::uint8_t> data, const TrainConfig& config,
                       const std::function<void(const StepLog&)>& on_step = {}, const std::string& dump_path = "");

void write_loss_csv(const std::string& path, const TrainResult& result);

}  // namespace lngram
