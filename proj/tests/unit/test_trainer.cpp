#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "lngram/checkpoint.hpp"
#include "lngram/corpus.hpp"
#include "lngram/eval.hpp"
#include "lngram/trainer.hpp"

using namespace lngram;

namespace {

DecoderConfig tiny(FusionMode mode = FusionMode::single_table) {
  DecoderConfig c;
  c.layers = 2;
  c.dim = 8;
  c.heads = 2;
  c.ffn_dim = 16;
  c.vocab = 16;
  c.max_seq = 16;
  c.insert_layers = {1};
  c.lngram.dim = 8;
  c.lngram.bits = 2;
  c.lngram.mem_dim = 3;
  c.lngram.mode = mode;
  c.lngram.subtables = mode == FusionMode::single_table ? 1 : 2;
  return c;
}

TrainConfig small_train(std::int64_t steps) {
  TrainConfig t;
  t.batch_size = 2;
  t.seq_len = 16;
  t.total_tokens = steps * 32;
  t.lr = 1e-2;
  t.seed = 5;
  return t;
}

std::vector<std::uint8_t> noise(int n, int vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, vocab - 1);
  std::vector<std::uint8_t> d(n);
  for (auto& b : d) b = std::uint8_t(u(rng));
  return d;
}

bool same_params(const Decoder<float>& a, const Decoder<float>& b) {
  std::vector<Matrix<float>> pa, pb;
  for_each_param(a.params(), [&](const std::string&, ParamGroup, const Matrix<float>& m) { pa.push_back(m); });
  for_each_param(b.params(), [&](const std::string&, ParamGroup, const Matrix<float>& m) { pb.push_back(m); });
  return pa == pb;
}

std::string temp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("table lr is five times the backbone lr at every step") {
  TrainConfig t = small_train(200);
  for (std::int64_t s = 0; s < t.steps(); ++s) {
    CHECK(group_lr(t, ParamGroup::table, s) / group_lr(t, ParamGroup::backbone, s) == doctest::Approx(5.0));
    CHECK(group_lr(t, ParamGroup::readout, s) == group_lr(t, ParamGroup::backbone, s));
  }
  CHECK(group_weight_decay(t, ParamGroup::table) == 0.0);
  CHECK(group_weight_decay(t, ParamGroup::codec) == t.weight_decay);
}

TEST_CASE("schedule shape") {
  TrainConfig t = small_train(300);
  t.warmup_ratio = 0.1;
  const int W = t.warmup_steps();
  CHECK(W == 30);
  CHECK(lr_at(t, 0) == doctest::Approx(t.lr / W));
  CHECK(lr_at(t, W - 1) == doctest::Approx(t.lr));
  CHECK(lr_at(t, t.steps() - 1) == doctest::Approx(t.lr * t.min_lr_ratio));
  for (std::int64_t s = W; s + 1 < t.steps(); ++s) CHECK(lr_at(t, s + 1) <= lr_at(t, s));
  for (int s = 0; s + 1 < W; ++s) CHECK(lr_at(t, s + 1) > lr_at(t, s));
}

TEST_CASE("clipping bounds the global norm") {
  Decoder<float> m(tiny(), 1);
  auto g = zeros_like(m.params());
  std::mt19937_64 rng(2);
  std::normal_distribution<float> n(0.f, 3.f);
  for_each_param(g, [&](const std::string&, ParamGroup, Matrix<float>& x) {
    x = x.unaryExpr([&](float) { return n(rng); });
  });
  const double before = global_grad_norm(g);
  CHECK(before > 1.0);
  CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(before));
  CHECK(global_grad_norm(g) <= 1.0 + 1e-6);
  auto small = zeros_like(m.params());
  small.embed(0, 0) = 0.5f;
  clip_grad_norm(small, 1.0);
  CHECK(small.embed(0, 0) == 0.5f);
}

TEST_CASE("parameter groups partition the learnables") {
  Decoder<float> m(tiny(FusionMode::multi_table), 1);
  std::map<ParamGroup, int> seen;
  std::set<const float*> data;
  for_each_param(m.params(), [&](const std::string& name, ParamGroup g, const Matrix<float>& x) {
    ++seen[g];
    CHECK(data.insert(x.data()).second);
    if (name.find("table") != std::string::npos) CHECK(g == ParamGroup::table);
  });
  CHECK(seen.size() == 4u);
}

TEST_CASE("first optimizer step follows the group rules") {
  Decoder<float> m(tiny(), 1);
  TrainConfig t = small_train(10);
  t.warmup_ratio = 0.0;
  Optimizer opt(t, m.params());
  auto before = m.params();
  auto g = zeros_like(m.params());
  g.embed.setOnes();
  g.blocks[0].lngram->bank.groups[0][0].entries.setOnes();
  opt.step(m.params(), g, 0);
  const double lr = lr_at(t, 0);
  const float e0 = before.embed(3, 2), e1 = m.params().embed(3, 2);
  CHECK(e1 - e0 == doctest::Approx(-lr * (1.0 + t.weight_decay * e0)).epsilon(1e-5));
  const float t0 = before.blocks[0].lngram->bank.groups[0][0].entries(5, 1);
  const float t1 = m.params().blocks[0].lngram->bank.groups[0][0].entries(5, 1);
  CHECK(t1 - t0 == doctest::Approx(-5.0 * lr).epsilon(1e-5));
  CHECK(m.params().head.isApprox(before.head * float(1.0 - lr * t.weight_decay), 1e-6f));
}

TEST_CASE("zero steps leave the model at init") {
  Decoder<float> m(tiny(), 3);
  const Decoder<float> init(tiny(), 3);
  const auto data = noise(500, 16, 1);
  TrainConfig t = small_train(0);
  const auto r = train_loop(m, data, t);
  CHECK(r.log.empty());
  CHECK(same_params(m, init));
}

TEST_CASE("identical seeds give identical runs") {
  const auto data = noise(3000, 16, 2);
  Decoder<float> a(tiny(), 4), b(tiny(), 4);
  const auto ra = train_loop(a, data, small_train(12));
  const auto rb = train_loop(b, data, small_train(12));
  CHECK(ra.log.size() == 12u);
  CHECK(ra.final_loss == rb.final_loss);
  CHECK(same_params(a, b));
  CHECK(ra.log.back().loss < ra.log.front().loss + 1.0);
}

TEST_CASE("loss goes down on a repetitive stream") {
  std::vector<std::uint8_t> data;
  for (int i = 0; i < 4000; ++i) data.push_back(std::uint8_t((i * 7) % 13));
  Decoder<float> m(tiny(), 6);
  const auto r = train_loop(m, data, small_train(60));
  CHECK(r.final_loss < 0.5 * r.log.front().loss);
}

TEST_CASE("uniform logits give perplexity equal to the vocabulary") {
  const auto data = noise(1000, 256, 3);
  const auto r = eval_ppl([](std::span<const int> x, int) { return Matrix<float>::Zero(Eigen::Index(x.size()), 256); },
                          data, 64);
  CHECK(r.perplexity == doctest::Approx(256.0).epsilon(1e-6));
  CHECK(r.tokens == (999 / 64) * 64);
  CHECK_THROWS_AS(eval_ppl([](std::span<const int>, int) { return Matrix<float>(); },
                           std::vector<std::uint8_t>{1}, 4),
                  InputError);
}

TEST_CASE("eval matches a scalar reference") {
  const auto data = noise(100, 16, 4);
  const Decoder<float> m(tiny(), 7);
  const auto r = eval_ppl(m, data, 16, 16, 3);
  double nll = 0.0;
  int count = 0;
  for (int w = 0; w + 16 < 100; w += 16) {
    std::vector<int> x(data.begin() + w, data.begin() + w + 16);
    const Matrix<float> lg = m.forward_logits(x);
    for (int t = 0; t < 16; ++t) {
      double z = 0.0;
      for (int v = 0; v < 16; ++v) z += std::exp(double(lg(t, v)));
      nll += std::log(z) - double(lg(t, data[w + t + 1]));
      ++count;
    }
  }
  CHECK(r.tokens == count);
  CHECK(std::abs(r.mean_nll - nll / count) < 1e-9);
  CHECK(r.perplexity >= 1.0);
}

TEST_CASE("corpus determinism and planting") {
  CorpusSpec s;
  s.train_bytes = 2'000'000;
  s.val_bytes = 20'000;
  const Corpus a = gen_corpus(s);
  const Corpus b = gen_corpus(s);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.entities.size() == 50u);
  std::int64_t planted = 0;
  for (const auto& e : a.index) planted += e.split == Split::train;
  const double expected = s.entity_frequency * double(s.train_bytes);
  CHECK(std::abs(planted - expected) < 0.05 * expected);
  std::int64_t found = 0;
  for (const auto& name : a.entities) found += count_occurrences(a.train, name);
  CHECK(found == planted);
  for (const auto& e : a.index) {
    const auto& text = a.split(e.split);
    CHECK(std::string(text.begin() + e.start, text.begin() + e.end) == a.entities[e.id]);
  }

  CorpusSpec none = s;
  none.train_bytes = 50'000;
  none.entity_frequency = 0.0;
  const Corpus c = gen_corpus(none);
  CHECK(c.index.empty());
  for (auto ch : c.train) CHECK_FALSE((ch >= 'A' && ch <= 'Z'));
}

TEST_CASE("entity index round-trip") {
  CorpusSpec s;
  s.train_bytes = 30'000;
  s.val_bytes = 10'000;
  const Corpus c = gen_corpus(s);
  const auto path = temp_path("lngram_unit_entities.csv");
  write_entity_index(path, c);
  const auto back = read_entity_index(path);
  REQUIRE(back.size() == c.index.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].start == c.index[i].start);
    CHECK(back[i].end == c.index[i].end);
    CHECK(back[i].id == c.index[i].id);
    CHECK(back[i].split == c.index[i].split);
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint round-trip, truncation and cross-mode rejection") {
  Decoder<float> m(tiny(), 8);
  m.params().blocks[0].lngram->readout.conv_kernels.setConstant(0.25f);
  const auto path = temp_path("lngram_unit.ckpt");
  save_checkpoint(path, m, {"note hello"});
  CheckpointInfo info;
  const Decoder<float> back = load_checkpoint(path, tiny(), &info);
  CHECK(same_params(m, back));
  CHECK(info.config_hash == tiny().hash());
  CHECK(info.meta.size() == 1u);

  CHECK_THROWS_AS(load_checkpoint(path, tiny(FusionMode::multi_table)), LoadError);

  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 7);
  CHECK_THROWS_AS(load_checkpoint(path, tiny()), LoadError);
  std::filesystem::resize_file(path, 20);
  CHECK_THROWS_AS(load_checkpoint(path, tiny()), LoadError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path, tiny()), LoadError);
}

TEST_CASE("train config validation") {
  TrainConfig t;
  t.clip_norm = -1.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  TrainConfig u;
  u.table_lr_multiplier = 0.0;
  CHECK_THROWS_AS(u.validate(), ConfigError);
}

}
