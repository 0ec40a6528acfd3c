// lngram: corpus generation, training, evaluation, gradient checks, analyses
// and benchmarks behind one subcommand-style binary.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "cli_options.hpp"
#include "json.hpp"
#include "lngram/analysis.hpp"
#include "lngram/checkpoint.hpp"
#include "lngram/eval.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace lngram::cli {
namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json header(const std::string& command, const Settings& s) {
  json j;
  j["command"] = command;
  j["seed"] = s.seed;
  j["config_hash"] = hex64(s.model.hash());
  j["config"] = effective_ini(s);
  return j;
}

fs::path out_dir(const Settings& s) {
  fs::path p(s.out);
  fs::create_directories(p);
  return p;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& data) {
  std::ofstream os(path, std::ios::binary);
  os.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
  if (!os) throw InputError("cannot write " + path.string());
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(is), {});
}

std::vector<std::uint8_t> split_bytes(const Settings& s, const std::string& name) {
  if (s.data_dir.empty()) {
    const Corpus c = gen_corpus(s.corpus);
    return name == "train" ? c.train : c.val;
  }
  return read_bytes(fs::path(s.data_dir) / (name + ".bin"));
}

std::vector<EntitySpan> entity_index(const Settings& s) {
  if (s.data_dir.empty()) return gen_corpus(s.corpus).index;
  return read_entity_index((fs::path(s.data_dir) / "entities.csv").string());
}

Decoder<float> load_model(const Settings& s, const std::string& path, const DecoderConfig& config) {
  if (path.empty()) return Decoder<float>(config, s.seed);
  return load_checkpoint(path, config);
}

// First `windows` non-overlapping windows of seq_len tokens (0 = all).
std::vector<int> windows_of(const std::vector<std::uint8_t>& data, int seq_len, int windows) {
  std::size_t n = data.size() / std::size_t(seq_len);
  if (windows > 0) n = std::min<std::size_t>(n, std::size_t(windows));
  if (n == 0) throw InputError("data shorter than one window");
  return std::vector<int>(data.begin(), data.begin() + std::ptrdiff_t(n * seq_len));
}

json counts_json(const ParameterCounts& c) {
  return {{"backbone", c.backbone}, {"table", c.table}, {"readout", c.readout}, {"codec", c.codec},
          {"dense", c.dense()}, {"total", c.total()}};
}

int cmd_corpus_gen(const Settings& s) {
  const Corpus c = gen_corpus(s.corpus);
  const fs::path dir = out_dir(s);
  write_bytes(dir / "train.bin", c.train);
  write_bytes(dir / "val.bin", c.val);
  write_entity_index((dir / "entities.csv").string(), c);
  json j = header("corpus-gen", s);
  std::int64_t train_hits = 0, val_hits = 0;
  for (const auto& e : c.index) (e.split == Split::train ? train_hits : val_hits) += 1;
  j["train_bytes"] = c.train.size();
  j["val_bytes"] = c.val.size();
  j["entities"] = c.entities;
  j["planted_train"] = train_hits;
  j["planted_val"] = val_hits;
  j["expected_train"] = s.corpus.entity_frequency * double(c.train.size());
  j["expected_val"] = s.corpus.entity_frequency * double(c.val.size());
  write_json(dir / "corpus.json", j);
  std::cout << "corpus: " << c.train.size() << " train / " << c.val.size() << " val bytes, " << train_hits
            << " planted entities in train -> " << dir.string() << '\n';
  return 0;
}

int cmd_train(const Settings& s) {
  const auto train = split_bytes(s, "train");
  Decoder<float> model(s.model, s.seed);
  const fs::path dir = out_dir(s);
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = train_loop(
      model, train, s.train,
      [&](const StepLog& e) {
        if (e.step % 100 == 0) std::cerr << "step " << e.step << " loss " << e.loss << " lr " << e.lr << '\n';
      },
      (dir / "diagnostic_dump.tsv").string());
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_checkpoint((dir / "checkpoint.ckpt").string(), model,
                  {"train " + s.train.describe(), "seed " + std::to_string(s.seed)});
  write_loss_csv((dir / "loss.csv").string(), r);
  json j = header("train", s);
  j["steps"] = r.log.size();
  j["final_loss"] = r.log.empty() ? json(nullptr) : json(r.final_loss);
  j["seconds"] = seconds;
  j["parameters"] = counts_json(model.parameter_counts());
  j["optimizer"] = {{"backbone", "AdamW"}, {"table", "Adam"}, {"beta1", s.train.beta1}, {"beta2", s.train.beta2},
                    {"eps", s.train.adam_eps}};
  write_json(dir / "train.json", j);
  std::cout << "trained " << r.log.size() << " steps in " << seconds << " s -> " << (dir / "checkpoint.ckpt").string()
            << '\n';
  return 0;
}

int cmd_eval(const Settings& s) {
  const Decoder<float> model = load_model(s, s.checkpoint, s.model);
  auto val = split_bytes(s, "val");
  const int T = s.train.seq_len;
  if (s.eval_windows > 0) val.resize(std::min(val.size(), std::size_t(s.eval_windows) * T + 1));
  const EvalReport r = eval_ppl(model, val, T, s.bucket_width);
  const fs::path dir = out_dir(s);
  json j = header("eval", s);
  j["perplexity"] = r.perplexity;
  j["mean_nll"] = r.mean_nll;
  j["tokens"] = r.tokens;
  json buckets = json::array();
  for (const auto& b : r.buckets) {
    buckets.push_back({{"begin", b.begin}, {"end", b.end}, {"tokens", b.tokens}, {"perplexity", b.perplexity}});
  }
  j["prefix_buckets"] = buckets;
  write_json(dir / "eval.json", j);

  // Per-token top-1 correctness for paired bootstrap comparisons.
  const auto entities = entity_index(s);
  std::vector<char> entity_final(val.size(), 0);
  for (const auto& e : entities) {
    if (e.split == Split::val && e.end - 1 < std::int64_t(val.size())) entity_final[std::size_t(e.end - 1)] = 1;
  }
  std::ofstream os(dir / "correctness.csv");
  os << "benchmark,index,correct\n";
  const std::size_t windows = (val.size() - 1) / std::size_t(T);
  for (std::size_t w = 0; w < windows; ++w) {
    std::vector<int> in(val.begin() + std::ptrdiff_t(w * T), val.begin() + std::ptrdiff_t(w * T + T));
    const Matrix<float> logits = model.forward_logits(in, T);
    for (int t = 0; t < T; ++t) {
      Eigen::Index arg = 0;
      logits.row(t).maxCoeff(&arg);
      const std::size_t target = w * T + t + 1;
      const int ok = int(arg) == int(val[target]);
      os << "next_byte," << target << ',' << ok << '\n';
      if (entity_final[target]) os << "entity_final," << target << ',' << ok << '\n';
    }
  }
  std::cout << "perplexity " << r.perplexity << " over " << r.tokens << " tokens\n";
  return 0;
}

int cmd_gradcheck(const Settings& s) {
  const GradcheckReport r = run_gradcheck(s.gradcheck);
  json j = header("gradcheck", s);
  j["cases"] = r.cases;
  j["bits"] = s.gradcheck.bits;
  j["mem_dim"] = s.gradcheck.mem_dim;
  j["step"] = s.gradcheck.step;
  j["surrogate_max_rel_error"] = r.surrogate_max_rel;
  j["onebit_collapse_max_abs_error"] = r.onebit_max_abs;
  j["main_path_max_rel_error"] = r.main_path_max_rel;
  j["passed"] = r.passed();
  write_json(out_dir(s) / "gradcheck.json", j);
  std::cout << "surrogate max rel " << r.surrogate_max_rel << ", one-bit max abs " << r.onebit_max_abs
            << ", main path max rel " << r.main_path_max_rel << (r.passed() ? " PASS" : " FAIL") << '\n';
  return r.passed() ? 0 : 3;
}

int cmd_logitlens(const Settings& s) {
  const Decoder<float> model = load_model(s, s.checkpoint, s.model);
  const int T = s.train.seq_len;
  const auto tokens = windows_of(split_bytes(s, "val"), T, s.analysis_windows);
  std::vector<LayerStates<float>> samples;
  for (std::size_t w = 0; w * T < tokens.size(); ++w) {
    samples.push_back(model.forward_with_hidden(std::span<const int>(tokens).subspan(w * T, T), T));
  }
  const KLProfile p = logitlens_profile(model, samples);
  json j = header("analyze-logitlens", s);
  j["positions"] = p.positions;
  j["kl"] = p.kl;
  const fs::path dir = out_dir(s);
  write_json(dir / "logitlens.json", j);
  std::ofstream os(dir / "logitlens.csv");
  os << "layer,kl\n";
  for (std::size_t l = 0; l < p.kl.size(); ++l) os << l << ',' << p.kl[l] << '\n';
  for (std::size_t l = 0; l < p.kl.size(); ++l) std::cout << "layer " << l << " KL " << p.kl[l] << '\n';
  return 0;
}

std::vector<Eigen::MatrixXd> layer_features(const Decoder<float>& model, const std::vector<int>& tokens, int T) {
  std::vector<Eigen::MatrixXd> out;
  const LayerStates<float> st = model.forward_with_hidden(tokens, T);
  for (std::size_t l = 1; l < st.hidden.size(); ++l) out.push_back(st.hidden[l].cast<double>());
  return out;
}

int cmd_cka(const Settings& s) {
  const Decoder<float> variant = load_model(s, s.checkpoint, s.model);
  const DecoderConfig base_cfg = matched_baseline(s.model);
  const Decoder<float> base = load_model(s, s.baseline_checkpoint, base_cfg);
  const int T = s.train.seq_len;
  const auto tokens = windows_of(split_bytes(s, "val"), T, s.analysis_windows);
  const Eigen::MatrixXd sim = cka_matrix(layer_features(base, tokens, T), layer_features(variant, tokens, T));
  const AlignmentCurve a = soft_alignment(sim, std::min<int>(s.top_k, int(sim.rows())));
  const fs::path dir = out_dir(s);
  write_matrix_csv((dir / "cka.csv").string(), sim);
  json j = header("analyze-cka", s);
  j["baseline_config_hash"] = hex64(base_cfg.hash());
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    rows.emplace_back(sim.row(i).data(), sim.row(i).data() + sim.cols());
  }
  j["cka"] = rows;
  j["top_k"] = a.k;
  j["soft_alignment"] = a.aligned;
  j["effective_depth_gain"] = a.gain;
  write_json(dir / "cka.json", j);
  for (std::size_t l = 0; l < a.aligned.size(); ++l) {
    std::cout << "variant layer " << l + 1 << " aligned " << a.aligned[l] << " gain " << a.gain[l] << '\n';
  }
  return 0;
}

std::map<std::string, std::vector<int>> read_correctness(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read " + path);
  std::string line;
  std::getline(is, line);
  std::map<std::string, std::vector<int>> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string name, index, value;
    if (!std::getline(ss, name, ',') || !std::getline(ss, index, ',') || !std::getline(ss, value, ',')) {
      throw InputError("correctness: malformed line '" + line + "'");
    }
    out[name].push_back(std::stoi(value) != 0);
  }
  return out;
}

int cmd_bootstrap(const Settings& s) {
  if (s.correct_a.empty() || s.correct_b.empty()) throw UsageError("analyze-bootstrap needs --correct-a and --correct-b");
  const auto a = read_correctness(s.correct_a);
  const auto b = read_correctness(s.correct_b);
  std::vector<std::string> names;
  std::vector<std::vector<int>> va, vb;
  for (const auto& [name, values] : a) {
    const auto it = b.find(name);
    if (it == b.end()) throw InputError("benchmark '" + name + "' missing from --correct-b");
    names.push_back(name);
    va.push_back(values);
    vb.push_back(it->second);
  }
  const auto report = bootstrap_report(names, va, vb, s.trials, s.seed);
  json j = header("analyze-bootstrap", s);
  json rows = json::array();
  const fs::path dir = out_dir(s);
  std::ofstream csv(dir / "bootstrap.csv");
  csv << "benchmark,n,delta_pp,ci_low,ci_high,p,p_holm\n";
  for (const auto& e : report) {
    rows.push_back({{"benchmark", e.name}, {"n", e.n}, {"delta_pp", e.delta}, {"ci_low", e.ci_low},
                    {"ci_high", e.ci_high}, {"p", e.p}, {"p_holm", e.p_adjusted}, {"trials", e.trials}});
    csv << e.name << ',' << e.n << ',' << e.delta << ',' << e.ci_low << ',' << e.ci_high << ',' << e.p << ','
        << e.p_adjusted << '\n';
    std::cout << e.name << ": delta " << e.delta << " pp [" << e.ci_low << ", " << e.ci_high << "] p " << e.p
              << " holm " << e.p_adjusted << '\n';
  }
  j["trials"] = s.trials;
  j["benchmarks"] = rows;
  write_json(dir / "bootstrap.json", j);
  return 0;
}

int cmd_gate_viz(const Settings& s) {
  const Decoder<float> model = load_model(s, s.checkpoint, s.model);
  const auto& cfg = model.config();
  if (!cfg.lngram_enabled || cfg.insert_layers.empty()) throw ConfigError("gate-viz needs a model with Lngram layers");
  const int layer = s.gate_layer > 0 ? s.gate_layer : cfg.insert_layers.front();
  const int order = s.gate_order > 0 ? s.gate_order : cfg.lngram.max_order();
  const int T = s.train.seq_len;
  const auto tokens = windows_of(split_bytes(s, "val"), T, s.analysis_windows);
  GateTrace trace;
  model.forward_logits(tokens, T, &trace);
  const GateSummary g = gate_summary(trace, entity_index(s), Split::val, layer, order, T);
  const fs::path dir = out_dir(s);
  write_gate_trace_csv((dir / "gate_trace.csv").string(), trace);
  std::ofstream series(dir / "gate_series.csv");
  series << "position,byte,gate\n";
  for (std::size_t i = 0; i < g.series.size(); ++i) {
    series << i << ',' << int(tokens[i]) << ',' << g.series[i] << '\n';
  }
  json j = header("gate-viz", s);
  j["layer"] = layer;
  j["order"] = order;
  j["positions"] = g.positions;
  j["entity_final_positions"] = g.entity_finals;
  j["corpus_median"] = g.median;
  j["entity_final_mean"] = g.entity_final_mean;
  j["ratio"] = g.ratio;
  write_json(dir / "gate_summary.json", j);
  std::cout << "layer " << layer << " order " << order << ": entity-final mean " << g.entity_final_mean
            << " / median " << g.median << " = " << g.ratio << '\n';
  return 0;
}

json report_json(const BenchReport& r) {
  return {{"residency", to_string(r.residency)},
          {"lngram", r.lngram},
          {"memory_instrumented", r.memory_instrumented},
          {"decode_ms_per_token_reps", r.decode_ms_per_token_reps},
          {"decode_ms_per_token_variance", r.decode_ms_per_token_variance},
          {"incremental_bytes_early_step", r.incremental_bytes_early},
          {"incremental_bytes_late_step", r.incremental_bytes_late},
          {"greedy_deterministic", r.greedy_deterministic}};
}

int cmd_bench(const Settings& s) {
  const Decoder<float> model = load_model(s, s.checkpoint, s.model);
  const DecoderConfig base_cfg = matched_baseline(s.model);
  const Decoder<float> base = load_model(s, s.baseline_checkpoint, base_cfg);
  const BenchReport lr = run_bench(model, s.bench);
  const BenchReport br = run_bench(base, s.bench);
  json j = header("bench", s);
  json rows = json::array();
  for (const auto& row : bench_table(lr, br)) {
    rows.push_back({{"metric", row.metric}, {"lngram", row.lngram}, {"baseline", row.baseline}, {"ratio", row.ratio}});
    std::cout << row.metric << ": " << row.lngram << " vs " << row.baseline << " (" << row.ratio << "x)\n";
  }
  j["rows"] = rows;
  j["lngram"] = report_json(lr);
  j["baseline"] = report_json(br);
  if (s.padding_check && s.model.lngram_enabled) {
    DecoderConfig padded = s.model;
    padded.lngram.table_row_padding *= 8;
    const Decoder<float> big(padded, s.seed);
    const BenchReport pr = run_bench(big, s.bench);
    const double change = pr.decode_ms_per_token / lr.decode_ms_per_token - 1.0;
    j["padding_x8"] = {{"decode_ms_per_token", pr.decode_ms_per_token},
                       {"reference_ms_per_token", lr.decode_ms_per_token},
                       {"relative_change", change}};
    std::cout << "8x table rows: decode ms/token change " << 100.0 * change << "%\n";
  }
  write_json(out_dir(s) / "bench.json", j);
  return 0;
}

}  // namespace
}  // namespace lngram::cli

int main(int argc, char** argv) {
  using namespace lngram::cli;
  CLI::App app{"lngram: latent n-gram memory toolkit"};
  Settings s;
  register_options(app, s);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"corpus-gen", "generate the synthetic corpus with planted entities"},
      {"train", "train a model and write a checkpoint and loss curve"},
      {"eval", "validation perplexity, prefix buckets and per-token correctness"},
      {"gradcheck", "finite-difference checks of the surrogate and exact gradients"},
      {"analyze-logitlens", "per-layer KL to the final prediction"},
      {"analyze-cka", "CKA matrix and soft alignment against the matched baseline"},
      {"analyze-bootstrap", "paired bootstrap with Holm correction"},
      {"gate-viz", "gate traces and entity-final statistics"},
      {"bench", "prefill/decode throughput and memory"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();
  app.require_subcommand(1);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    finalize(s);
    fs::create_directories(s.out);
    {
      std::ofstream os(fs::path(s.out) / "effective_config.ini");
      os << effective_ini(s);
    }
    if (cmd == "corpus-gen") return cmd_corpus_gen(s);
    if (cmd == "train") return cmd_train(s);
    if (cmd == "eval") return cmd_eval(s);
    if (cmd == "gradcheck") return cmd_gradcheck(s);
    if (cmd == "analyze-logitlens") return cmd_logitlens(s);
    if (cmd == "analyze-cka") return cmd_cka(s);
    if (cmd == "analyze-bootstrap") return cmd_bootstrap(s);
    if (cmd == "gate-viz") return cmd_gate_viz(s);
    if (cmd == "bench") return cmd_bench(s);
  } catch (const lngram::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const lngram::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << cmd << " failed: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
