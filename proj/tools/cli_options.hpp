#pragma once

// Every tunable of the lngram tool, bound to CLI11 options named
// "section.key" so that an INI file with [section] headers can set them.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lngram/bench.hpp"
#include "lngram/corpus.hpp"
#include "lngram/gradcheck.hpp"
#include "lngram/trainer.hpp"

namespace lngram::cli {

struct Settings {
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string config_path;

  DecoderConfig model;
  TrainConfig train;
  CorpusSpec corpus;
  BenchConfig bench;
  GradcheckConfig gradcheck;

  // string forms parsed after CLI11 is done
  std::string mode = "single";
  std::string surrogate = "exact";
  std::string routing = "surrogate";
  std::string residency = "in-core";

  std::string data_dir;         // directory holding train.bin / val.bin / entities.csv
  std::string checkpoint;
  std::string baseline_checkpoint;
  bool baseline = false;        // use the parameter-matched Lngram-free model
  int eval_windows = 0;         // 0 = whole split
  int bucket_width = 16;
  int analysis_windows = 32;
  int top_k = 3;
  int trials = 10000;
  std::string correct_a, correct_b;
  int gate_layer = 0;  // 0 = first insertion layer
  int gate_order = 0;  // 0 = highest order
  bool padding_check = true;
  int kv_heads = 0;  // accepted for completeness; must equal heads
};

// INI reader that flattens [section] key = value into "section.key".
class FlatIni : public CLI::ConfigINI {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

void register_options(CLI::App& app, Settings& s);

// Parses string-valued options and cross-field rules; throws ConfigError.
void finalize(Settings& s);

// Effective configuration as INI text, readable back through --config.
std::string effective_ini(const Settings& s);

}  // namespace lngram::cli
