#include "lngram/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace lngram {

std::int64_t TrainConfig::steps() const {
  const std::int64_t per_step = std::int64_t(batch_size) * seq_len;
  return per_step > 0 ? total_tokens / per_step : 0;
}

int TrainConfig::warmup_steps() const {
  const std::int64_t total = steps();
  if (total == 0) return 0;
  return int(std::max<std::int64_t>(1, std::int64_t(std::ceil(warmup_ratio * double(total)))));
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("train: lr must be > 0");
  if (!(table_lr_multiplier > 0)) throw ConfigError("train: table lr multiplier must be > 0");
  if (!(warmup_ratio >= 0 && warmup_ratio < 1)) throw ConfigError("train: warmup ratio must be in [0, 1)");
  if (!(min_lr_ratio >= 0 && min_lr_ratio <= 1)) throw ConfigError("train: min lr ratio must be in [0, 1]");
  if (!(clip_norm > 0)) throw ConfigError("train: clip norm must be > 0");
  if (weight_decay < 0 || table_weight_decay < 0) throw ConfigError("train: weight decay must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("train: betas must be in [0, 1)");
  if (!(adam_eps > 0)) throw ConfigError("train: adam eps must be > 0");
  if (batch_size < 1 || seq_len < 1) throw ConfigError("train: batch size and seq len must be >= 1");
  if (total_tokens < 0) throw ConfigError("train: total tokens must be >= 0");
}

std::string TrainConfig::describe() const {
  std::ostringstream os;
  os << "lr=" << lr << ";weight_decay=" << weight_decay << ";warmup_ratio=" << warmup_ratio
     << ";min_lr_ratio=" << min_lr_ratio << ";clip=" << clip_norm << ";table_lr_mult=" << table_lr_multiplier
     << ";table_wd=" << table_weight_decay << ";beta1=" << beta1 << ";beta2=" << beta2 << ";eps=" << adam_eps
     << ";seed=" << seed << ";batch=" << batch_size << ";seq_len=" << seq_len << ";tokens=" << total_tokens
     << ";routing=" << (routing == RoutingGradient::surrogate ? "surrogate" : "none");
  return os.str();
}

double lr_at(const TrainConfig& config, std::int64_t step) {
  const std::int64_t total = config.steps();
  const int warmup = config.warmup_steps();
  if (total == 0) return config.lr;
  if (step < warmup) return config.lr * double(step + 1) / double(warmup);
  const double floor = config.lr * config.min_lr_ratio;
  const std::int64_t decay = total - warmup;
  if (decay <= 0) return config.lr;
  const double progress = std::min(1.0, double(step - warmup + 1) / double(decay));
  return floor + (config.lr - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double group_lr(const TrainConfig& config, ParamGroup group, std::int64_t step) {
  const double lr = lr_at(config, step);
  return group == ParamGroup::table ? lr * config.table_lr_multiplier : lr;
}

double group_weight_decay(const TrainConfig& config, ParamGroup group) {
  return group == ParamGroup::table ? config.table_weight_decay : config.weight_decay;
}

double global_grad_norm(const DecoderParams<float>& grads) {
  double total = 0.0;
  for_each_param(grads, [&](const std::string&, ParamGroup, const Matrix<float>& g) {
    const float* p = g.data();
    double part = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) part += double(p[i]) * double(p[i]);
    total += part;
  });
  return std::sqrt(total);
}

double clip_grad_norm(DecoderParams<float>& grads, double max_norm) {
  const double norm = global_grad_norm(grads);
  if (norm > max_norm) {
    const float scale = float(max_norm / (norm + 1e-12));
    for_each_param(grads, [&](const std::string&, ParamGroup, Matrix<float>& g) { g *= scale; });
  }
  return norm;
}

Optimizer::Optimizer(const TrainConfig& config, const DecoderParams<float>& like)
    : config_(config), m_(zeros_like(like)), v_(zeros_like(like)) {
  config_.validate();
}

void Optimizer::step(DecoderParams<float>& params, const DecoderParams<float>& grads, std::int64_t step) {
  ++updates_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, double(updates_));
  const double c2 = 1.0 - std::pow(b2, double(updates_));
  std::vector<Matrix<float>*> ps, gs, ms, vs;
  std::vector<ParamGroup> groups;
  for_each_param(params, [&](const std::string&, ParamGroup g, Matrix<float>& m) {
    ps.push_back(&m);
    groups.push_back(g);
  });
  for_each_param(const_cast<DecoderParams<float>&>(grads),
                 [&](const std::string&, ParamGroup, Matrix<float>& m) { gs.push_back(&m); });
  for_each_param(m_, [&](const std::string&, ParamGroup, Matrix<float>& m) { ms.push_back(&m); });
  for_each_param(v_, [&](const std::string&, ParamGroup, Matrix<float>& m) { vs.push_back(&m); });
  if (gs.size() != ps.size()) throw DimensionError("optimizer: gradient structure does not match parameters");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const float lr = float(group_lr(config_, groups[i], step));
    const float wd = float(group_weight_decay(config_, groups[i]));
    const float fb1 = float(b1), fb2 = float(b2), eps = float(config_.adam_eps);
    const float inv_c1 = float(1.0 / c1), inv_sqrt_c2 = float(1.0 / std::sqrt(c2));
    float* p = ps[i]->data();
    const float* g = gs[i]->data();
    float* m = ms[i]->data();
    float* v = vs[i]->data();
    const Eigen::Index n = ps[i]->size();
    if (gs[i]->size() != n) throw DimensionError("optimizer: gradient shape mismatch");
    for (Eigen::Index j = 0; j < n; ++j) {
      m[j] = fb1 * m[j] + (1.0f - fb1) * g[j];
      v[j] = fb2 * v[j] + (1.0f - fb2) * g[j] * g[j];
      const float update = (m[j] * inv_c1) / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
      p[j] -= lr * (update + wd * p[j]);
    }
  }
}

namespace {

void write_dump(const std::string& path, std::int64_t step, double loss, const DecoderParams<float>& params,
                const DecoderParams<float>* grads) {
  if (path.empty()) return;
  std::ofstream os(path);
  os << "non-finite loss at step " << step << ": " << loss << "\n";
  os << "param\tgroup\tsize\tparam_norm\tfinite\tgrad_norm\n";
  std::vector<const Matrix<float>*> gs;
  if (grads) for_each_param(*grads, [&](const std::string&, ParamGroup, const Matrix<float>& g) { gs.push_back(&g); });
  std::size_t i = 0;
  for_each_param(params, [&](const std::string& name, ParamGroup group, const Matrix<float>& m) {
    os << name << '\t' << to_string(group) << '\t' << m.size() << '\t' << m.norm() << '\t' << all_finite(m) << '\t';
    if (i < gs.size()) os << gs[i]->norm();
    os << '\n';
    ++i;
  });
}

}  // namespace

TrainResult train_loop(Decoder<float>& model, std::span<const std::uint8_t> data, const TrainConfig& config,
                       const std::function<void(const StepLog&)>& on_step, const std::string& dump_path) {
  config.validate();
  TrainResult result;
  const std::int64_t steps = config.steps();
  if (steps == 0) return result;
  const int T = config.seq_len;
  const int B = config.batch_size;
  if (T > model.config().max_seq) throw ConfigError("train: seq_len exceeds model max_seq");
  if (data.size() < std::size_t(T) + 1) throw InputError("train: data shorter than one window");

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> start(0, data.size() - std::size_t(T) - 1);
  Optimizer opt(config, model.params());
  DecoderParams<float> grads = zeros_like(model.params());
  std::vector<int> inputs(std::size_t(B) * T), targets(std::size_t(B) * T);

  for (std::int64_t step = 0; step < steps; ++step) {
    for (int b = 0; b < B; ++b) {
      const std::size_t s = start(rng);
      for (int t = 0; t < T; ++t) {
        inputs[std::size_t(b) * T + t] = data[s + t];
        targets[std::size_t(b) * T + t] = data[s + t + 1];
      }
    }
    for_each_param(grads, [](const std::string&, ParamGroup, Matrix<float>& g) { g.setZero(); });
    double loss = 0.0;
    try {
      loss = model.loss_and_backward(inputs, targets, T, grads, config.routing);
    } catch (const TrainingError& e) {
      write_dump(dump_path, step, std::nan(""), model.params(), nullptr);
      throw TrainingError("train: non-finite loss at step " + std::to_string(step) +
                          (dump_path.empty() ? "" : "; diagnostics in " + dump_path));
    }
    const double norm = clip_grad_norm(grads, config.clip_norm);
    if (!std::isfinite(norm)) {
      write_dump(dump_path, step, loss, model.params(), &grads);
      throw TrainingError("train: non-finite gradient at step " + std::to_string(step) +
                          (dump_path.empty() ? "" : "; diagnostics in " + dump_path));
    }
    opt.step(model.params(), grads, step);
    StepLog entry{step, loss, lr_at(config, step), group_lr(config, ParamGroup::table, step), norm};
    result.log.push_back(entry);
    if (on_step) on_step(entry);
  }
  result.final_loss = result.log.back().loss;
  return result;
}

void write_loss_csv(const std::string& path, const TrainResult& result) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  os << "step,loss,lr,table_lr,grad_norm\n";
  os.precision(9);
  for (const auto& e : result.log) {
    os << e.step << ',' << e.loss << ',' << e.lr << ',' << e.table_lr << ',' << e.grad_norm << '\n';
  }
}

}  // namespace lngram
