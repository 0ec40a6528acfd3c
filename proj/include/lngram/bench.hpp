#pragma once

// Prefill/decode timing and heap accounting for a Decoder.

#include <cstdint>
#include <string>
#include <vector>

#include "lngram/backbone.hpp"

namespace lngram {

enum class Residency { in_core, host_gather };
Residency parse_residency(const std::string& name);
std::string to_string(Residency r);

struct BenchConfig {
  int prompt_len = 64;
  int decode_steps = 1000;
  int reps = 5;
  int warmup = 1;
  Residency residency = Residency::in_core;
  // 1-based decode steps at which per-step incremental memory is sampled.
  int probe_early = 10;
  int probe_late = 1000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct BenchReport {
  Residency residency = Residency::in_core;
  bool lngram = false;
  bool memory_instrumented = false;
  double prefill_tokens_per_sec = 0.0;
  double prefill_latency_ms = 0.0;
  double prefill_peak_memory_mb = 0.0;
  double decode_tokens_per_sec = 0.0;
  double decode_ms_per_token = 0.0;
  double decode_peak_memory_mb = 0.0;
  double decode_peak_incremental_memory_mb = 0.0;
  // Incremental bytes (peak during the step minus live before it).
  std::int64_t incremental_bytes_early = 0;
  std::int64_t incremental_bytes_late = 0;
  std::vector<double> decode_ms_per_token_reps;
  double decode_ms_per_token_variance = 0.0;
  bool greedy_deterministic = true;
  std::vector<int> generated;
};

// Medians over reps after warmup; decode is greedy from a seeded random prompt.
BenchReport run_bench(const Decoder<float>& model, const BenchConfig& config);

struct BenchRow {
  std::string metric;
  double lngram = 0.0;
  double baseline = 0.0;
  double ratio = 0.0;  // lngram / baseline
};

std::vector<BenchRow> bench_table(const BenchReport& lngram, const BenchReport& baseline);

}  // namespace lngram
