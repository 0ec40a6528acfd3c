#include "cli_options.hpp"

#include <sstream>

namespace lngram::cli {

std::vector<CLI::ConfigItem> FlatIni::from_config(std::istream& input) const {
  std::vector<CLI::ConfigItem> out;
  for (auto& item : CLI::ConfigINI::from_config(input)) {
    if (item.name == "++" || item.name == "--") continue;
    std::string prefix;
    for (const auto& p : item.parents) prefix += p + ".";
    item.name = prefix + item.name;
    item.parents.clear();
    out.push_back(std::move(item));
  }
  return out;
}

void register_options(CLI::App& app, Settings& s) {
  app.config_formatter(std::make_shared<FlatIni>());
  app.set_config("--config", "", "INI file with [model] [lngram] [train] [corpus] [bench] [analysis] sections");
  app.allow_config_extras(CLI::config_extras_mode::error);

  app.add_option("--seed", s.seed, "seed for every random choice of the command");
  app.add_option("--out", s.out, "output directory");

  auto& m = s.model;
  app.add_option("--model.layers", m.layers);
  app.add_option("--model.dim", m.dim);
  app.add_option("--model.heads", m.heads);
  app.add_option("--model.kv_heads", s.kv_heads, "must equal heads (no grouped attention)");
  app.add_option("--model.ffn_dim", m.ffn_dim);
  app.add_option("--model.vocab", m.vocab);
  app.add_option("--model.max_seq", m.max_seq);
  app.add_option("--insert-layers,--model.insert_layers", m.insert_layers, "1-based insertion layers")->delimiter(',');
  app.add_option("--model.lngram", m.lngram_enabled, "enable Lngram branches");
  app.add_option("--model.norm_eps", m.norm_eps);
  app.add_option("--model.rope_base", m.rope_base);
  app.add_option("--model.init_std", m.init_std);
  app.add_flag("--baseline", s.baseline, "use the parameter-matched Lngram-free model");

  auto& l = m.lngram;
  app.add_option("--bits,--lngram.bits", l.bits, "bits per route");
  app.add_option("--orders,--lngram.orders", l.orders, "n-gram orders")->delimiter(',');
  app.add_option("--lngram.mem_dim", l.mem_dim);
  app.add_option("--subtables,--lngram.subtables", l.subtables);
  app.add_option("--lngram.mode", s.mode, "single | multi");
  app.add_option("--tau-f,--lngram.fusion_temperature", l.fusion_temperature);
  app.add_option("--lngram.conv_width", l.conv_width, "conv kernel size");
  app.add_option("--lngram.conv_dilation", l.conv_dilation, "0 = max order");
  app.add_option("--lngram.table_init_std", l.table_init_std);
  app.add_option("--lngram.readout_init_std", l.readout_init_std);
  app.add_option("--lngram.row_padding", l.table_row_padding, "physical table rows per logical row");
  app.add_option("--lngram.route_block", l.route_block, "retrieval block in routes, 0 = all");
  app.add_option("--lngram.literal_invalid_branches", l.literal_invalid_branches);
  app.add_option("--surrogate,--lngram.surrogate", s.surrogate, "exact | onebit | ste");
  app.add_option("--lngram.surrogate_temperature", l.surrogate.temperature);
  app.add_option("--lngram.surrogate_scale", l.surrogate.scale);
  app.add_option("--lngram.surrogate_gradient", s.routing, "surrogate | none");

  auto& t = s.train;
  app.add_option("--train.lr", t.lr, "base learning rate");
  app.add_option("--train.weight_decay", t.weight_decay);
  app.add_option("--train.warmup_ratio", t.warmup_ratio);
  app.add_option("--train.min_lr_ratio", t.min_lr_ratio, "cosine floor relative to peak");
  app.add_option("--train.clip", t.clip_norm);
  app.add_option("--train.table_lr_multiplier", t.table_lr_multiplier);
  app.add_option("--train.table_weight_decay", t.table_weight_decay);
  app.add_option("--train.beta1", t.beta1);
  app.add_option("--train.beta2", t.beta2);
  app.add_option("--train.adam_eps", t.adam_eps);
  app.add_option("--train.batch_size", t.batch_size);
  app.add_option("--train.seq_len", t.seq_len);
  app.add_option("--train.tokens", t.total_tokens, "total training tokens");

  auto& c = s.corpus;
  app.add_option("--corpus.train_bytes", c.train_bytes);
  app.add_option("--corpus.val_bytes", c.val_bytes);
  app.add_option("--corpus.lexicon_size", c.lexicon_size);
  app.add_option("--corpus.zipf_exponent", c.zipf_exponent);
  app.add_option("--corpus.entity_count", c.entity_count);
  app.add_option("--corpus.entity_min_words", c.entity_min_words);
  app.add_option("--corpus.entity_max_words", c.entity_max_words);
  app.add_option("--corpus.entity_frequency", c.entity_frequency, "planted entities per byte");
  app.add_option("--corpus.sentence_end_prob", c.sentence_end_prob);

  auto& b = s.bench;
  app.add_option("--bench.prompt_len", b.prompt_len);
  app.add_option("--bench.decode_steps", b.decode_steps);
  app.add_option("--bench.reps", b.reps);
  app.add_option("--bench.warmup", b.warmup);
  app.add_option("--bench.residency", s.residency, "in-core | host-gather");
  app.add_option("--bench.probe_early", b.probe_early);
  app.add_option("--bench.probe_late", b.probe_late);
  app.add_option("--bench.padding_check", s.padding_check, "also time 8x padded tables");

  auto& g = s.gradcheck;
  app.add_option("--gradcheck.cases", g.cases);
  app.add_option("--gradcheck.bits", g.bits);
  app.add_option("--gradcheck.mem_dim", g.mem_dim);
  app.add_option("--gradcheck.step", g.step);

  app.add_option("--data", s.data_dir, "corpus directory from corpus-gen");
  app.add_option("--checkpoint", s.checkpoint);
  app.add_option("--baseline-checkpoint", s.baseline_checkpoint);
  app.add_option("--analysis.eval_windows", s.eval_windows, "0 = whole split");
  app.add_option("--analysis.bucket_width", s.bucket_width);
  app.add_option("--analysis.windows", s.analysis_windows);
  app.add_option("--analysis.top_k", s.top_k);
  app.add_option("--analysis.trials", s.trials);
  app.add_option("--analysis.gate_layer", s.gate_layer, "0 = first insertion layer");
  app.add_option("--analysis.gate_order", s.gate_order, "0 = highest order");
  app.add_option("--correct-a", s.correct_a, "CSV benchmark,index,correct");
  app.add_option("--correct-b", s.correct_b, "CSV benchmark,index,correct");
}

void finalize(Settings& s) {
  if (s.kv_heads != 0 && s.kv_heads != s.model.heads) {
    throw ConfigError("model.kv_heads must equal model.heads");
  }
  s.model.lngram.dim = s.model.dim;
  s.model.lngram.mode = parse_fusion_mode(s.mode);
  s.model.lngram.surrogate.mode = parse_surrogate_mode(s.surrogate);
  if (s.routing == "surrogate") {
    s.train.routing = RoutingGradient::surrogate;
  } else if (s.routing == "none") {
    s.train.routing = RoutingGradient::none;
  } else {
    throw ConfigError("lngram.surrogate_gradient must be surrogate or none, got '" + s.routing + "'");
  }
  s.bench.residency = parse_residency(s.residency);
  s.train.seed = s.seed;
  s.corpus.seed = s.seed;
  s.corpus.seq_len = s.train.seq_len;
  s.bench.seed = s.seed;
  s.gradcheck.seed = s.seed;
  if (s.train.seq_len > s.model.max_seq) throw ConfigError("train.seq_len exceeds model.max_seq");
  s.model.lngram.surrogate.validate();
  s.model.validate();
  s.train.validate();
  if (s.baseline) s.model = matched_baseline(s.model);
}

namespace {

template <class V>
std::string join(const std::vector<V>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace

std::string effective_ini(const Settings& s) {
  std::ostringstream os;
  os.precision(10);
  const auto& m = s.model;
  const auto& l = m.lngram;
  os << "seed = " << s.seed << "\n";
  os << "[model]\nlayers = " << m.layers << "\ndim = " << m.dim << "\nheads = " << m.heads
     << "\nffn_dim = " << m.ffn_dim << "\nvocab = " << m.vocab << "\nmax_seq = " << m.max_seq
     << "\ninsert_layers = " << join(m.insert_layers) << "\nlngram = " << (m.lngram_enabled ? "true" : "false")
     << "\nnorm_eps = " << m.norm_eps << "\nrope_base = " << m.rope_base << "\ninit_std = " << m.init_std << "\n";
  os << "[lngram]\nbits = " << l.bits << "\norders = " << join(l.orders) << "\nmem_dim = " << l.mem_dim
     << "\nsubtables = " << l.subtables << "\nmode = " << to_string(l.mode)
     << "\nfusion_temperature = " << l.fusion_temperature << "\nconv_width = " << l.conv_width
     << "\nconv_dilation = " << l.conv_dilation << "\ntable_init_std = " << l.table_init_std
     << "\nreadout_init_std = " << l.readout_init_std << "\nrow_padding = " << l.table_row_padding
     << "\nroute_block = " << l.route_block
     << "\nliteral_invalid_branches = " << (l.literal_invalid_branches ? "true" : "false")
     << "\nsurrogate = " << to_string(l.surrogate.mode) << "\nsurrogate_temperature = " << l.surrogate.temperature
     << "\nsurrogate_scale = " << l.surrogate.scale
     << "\nsurrogate_gradient = " << (s.train.routing == RoutingGradient::surrogate ? "surrogate" : "none") << "\n";
  const auto& t = s.train;
  os << "[train]\nlr = " << t.lr << "\nweight_decay = " << t.weight_decay << "\nwarmup_ratio = " << t.warmup_ratio
     << "\nmin_lr_ratio = " << t.min_lr_ratio << "\nclip = " << t.clip_norm
     << "\ntable_lr_multiplier = " << t.table_lr_multiplier << "\ntable_weight_decay = " << t.table_weight_decay
     << "\nbeta1 = " << t.beta1 << "\nbeta2 = " << t.beta2 << "\nadam_eps = " << t.adam_eps
     << "\nbatch_size = " << t.batch_size << "\nseq_len = " << t.seq_len << "\ntokens = " << t.total_tokens << "\n";
  const auto& c = s.corpus;
  os << "[corpus]\ntrain_bytes = " << c.train_bytes << "\nval_bytes = " << c.val_bytes
     << "\nlexicon_size = " << c.lexicon_size << "\nzipf_exponent = " << c.zipf_exponent
     << "\nentity_count = " << c.entity_count << "\nentity_min_words = " << c.entity_min_words
     << "\nentity_max_words = " << c.entity_max_words << "\nentity_frequency = " << c.entity_frequency
     << "\nsentence_end_prob = " << c.sentence_end_prob << "\n";
  const auto& b = s.bench;
  os << "[bench]\nprompt_len = " << b.prompt_len << "\ndecode_steps = " << b.decode_steps << "\nreps = " << b.reps
     << "\nwarmup = " << b.warmup << "\nresidency = " << to_string(b.residency) << "\nprobe_early = " << b.probe_early
     << "\nprobe_late = " << b.probe_late << "\npadding_check = " << (s.padding_check ? "true" : "false") << "\n";
  const auto& g = s.gradcheck;
  os << "[gradcheck]\ncases = " << g.cases << "\nbits = " << g.bits << "\nmem_dim = " << g.mem_dim
     << "\nstep = " << g.step << "\n";
  os << "[analysis]\neval_windows = " << s.eval_windows << "\nbucket_width = " << s.bucket_width
     << "\nwindows = " << s.analysis_windows << "\ntop_k = " << s.top_k << "\ntrials = " << s.trials
     << "\ngate_layer = " << s.gate_layer << "\ngate_order = " << s.gate_order << "\n";
  return os.str();
}

}  // namespace lngram::cli
