#include "lngram/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "lngram/memtrack.hpp"

namespace lngram {

Residency parse_residency(const std::string& name) {
  if (name == "in-core" || name == "in_core") return Residency::in_core;
  if (name == "host-gather" || name == "host_gather") return Residency::host_gather;
  throw ConfigError("unknown residency mode '" + name + "' (expected in-core or host-gather)");
}

std::string to_string(Residency r) { return r == Residency::in_core ? "in-core" : "host-gather"; }

void BenchConfig::validate() const {
  if (prompt_len < 1) throw ConfigError("bench: prompt length must be >= 1");
  if (decode_steps < 1) throw ConfigError("bench: decode steps must be >= 1");
  if (reps < 1) throw ConfigError("bench: reps must be >= 1");
  if (warmup < 1) throw ConfigError("bench: warmup repetitions must be >= 1");
  if (probe_early < 1 || probe_late < probe_early || probe_late > decode_steps) {
    throw ConfigError("bench: probe steps must satisfy 1 <= early <= late <= decode steps");
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int argmax(const Vector<float>& logits) {
  Eigen::Index i = 0;
  logits.maxCoeff(&i);
  return int(i);
}

constexpr double kMb = 1024.0 * 1024.0;

}  // namespace

BenchReport run_bench(const Decoder<float>& model, const BenchConfig& config) {
  config.validate();
  BenchReport report;
  report.residency = config.residency;
  report.lngram = model.config().lngram_enabled && !model.config().insert_layers.empty();
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> tok(0, model.config().vocab - 1);
  std::vector<int> prompt(config.prompt_len);
  for (int& t : prompt) t = tok(rng);

  std::vector<double> prefill_ms, decode_ms, prefill_peak, decode_peak, inc_early, inc_late;
  std::vector<int> reference;
  const int capacity = config.prompt_len + config.decode_steps;
  for (int rep = 0; rep < config.warmup + config.reps; ++rep) {
    const bool measured = rep >= config.warmup;
    memtrack::reset_peak();
    DecodeSession<float> session(model, capacity);
    session.set_host_gather(config.residency == Residency::host_gather);

    const auto t0 = Clock::now();
    Vector<float> logits = session.prefill(prompt);
    const auto t1 = Clock::now();
    const double p_peak = double(memtrack::peak_bytes());

    std::vector<int> generated;
    generated.reserve(config.decode_steps);
    memtrack::reset_peak();
    std::size_t running_peak = 0;
    double early = 0.0, late = 0.0;
    const auto t2 = Clock::now();
    for (int s = 1; s <= config.decode_steps; ++s) {
      const int next = argmax(logits);
      generated.push_back(next);
      const bool probe = s == config.probe_early || s == config.probe_late;
      std::size_t live_before = 0;
      if (probe) {
        running_peak = std::max(running_peak, memtrack::peak_bytes());
        live_before = memtrack::live_bytes();
        memtrack::reset_peak();
      }
      logits = session.step(next);
      if (probe) {
        const double inc = double(memtrack::peak_bytes()) - double(live_before);
        if (s == config.probe_early) early = inc;
        if (s == config.probe_late) late = inc;
      }
    }
    const auto t3 = Clock::now();
    running_peak = std::max(running_peak, memtrack::peak_bytes());
    if (!measured) continue;
    prefill_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    decode_ms.push_back(std::chrono::duration<double, std::milli>(t3 - t2).count() / config.decode_steps);
    prefill_peak.push_back(p_peak);
    decode_peak.push_back(double(running_peak));
    inc_early.push_back(early);
    inc_late.push_back(late);
    if (reference.empty()) {
      reference = generated;
    } else if (generated != reference) {
      report.greedy_deterministic = false;
    }
  }
  report.memory_instrumented = memtrack::instrumented();
  report.prefill_latency_ms = median(prefill_ms);
  report.prefill_tokens_per_sec = 1000.0 * config.prompt_len / report.prefill_latency_ms;
  report.decode_ms_per_token = median(decode_ms);
  report.decode_tokens_per_sec = 1000.0 / report.decode_ms_per_token;
  report.prefill_peak_memory_mb = median(prefill_peak) / kMb;
  report.decode_peak_memory_mb = median(decode_peak) / kMb;
  report.incremental_bytes_early = std::int64_t(median(inc_early));
  report.incremental_bytes_late = std::int64_t(median(inc_late));
  report.decode_peak_incremental_memory_mb =
      double(std::max(report.incremental_bytes_early, report.incremental_bytes_late)) / kMb;
  report.decode_ms_per_token_reps = decode_ms;
  const double mean = [&] {
    double s = 0.0;
    for (double v : decode_ms) s += v;
    return s / double(decode_ms.size());
  }();
  for (double v : decode_ms) report.decode_ms_per_token_variance += (v - mean) * (v - mean);
  report.decode_ms_per_token_variance /= double(decode_ms.size());
  report.generated = reference;
  return report;
}

std::vector<BenchRow> bench_table(const BenchReport& lngram, const BenchReport& baseline) {
  auto row = [](std::string name, double a, double b) { return BenchRow{std::move(name), a, b, b != 0 ? a / b : 0.0}; };
  return {
      row("Prefill Throughput (tok/s)", lngram.prefill_tokens_per_sec, baseline.prefill_tokens_per_sec),
      row("Prefill Latency (ms)", lngram.prefill_latency_ms, baseline.prefill_latency_ms),
      row("Prefill Peak Memory (MB)", lngram.prefill_peak_memory_mb, baseline.prefill_peak_memory_mb),
      row("Decode Throughput (tok/s)", lngram.decode_tokens_per_sec, baseline.decode_tokens_per_sec),
      row("Decode Latency (ms/token)", lngram.decode_ms_per_token, baseline.decode_ms_per_token),
      row("Decode Peak Memory (MB)", lngram.decode_peak_memory_mb, baseline.decode_peak_memory_mb),
      row("Decode Peak Incremental Memory (MB)", lngram.decode_peak_incremental_memory_mb,
          baseline.decode_peak_incremental_memory_mb),
  };
}

}  // namespace lngram
