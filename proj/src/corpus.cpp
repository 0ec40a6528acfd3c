#include "lngram/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "lngram/errors.hpp"

namespace lngram {

void CorpusSpec::validate() const {
  if (train_bytes < 1 || val_bytes < 1) throw ConfigError("corpus: split sizes must be >= 1");
  if (lexicon_size < 1) throw ConfigError("corpus: lexicon size must be >= 1");
  if (word_min_len < 1 || word_max_len < word_min_len) throw ConfigError("corpus: bad word length range");
  if (!(zipf_exponent > 0)) throw ConfigError("corpus: zipf exponent must be > 0");
  if (entity_min_words < 1 || entity_max_words < entity_min_words) throw ConfigError("corpus: bad entity word range");
  if (!(entity_frequency >= 0)) throw ConfigError("corpus: entity frequency must be >= 0");
  if (!(sentence_end_prob >= 0 && sentence_end_prob <= 1)) throw ConfigError("corpus: sentence end prob in [0,1]");
  if (seq_len < 1) throw ConfigError("corpus: seq_len must be >= 1");
  for (const auto& e : entities) {
    if (e.empty()) throw ConfigError("corpus: empty entity");
    if (int(e.size()) > seq_len) throw ConfigError("corpus: entity '" + e + "' longer than sequence length");
  }
  if (entities.empty() && entity_count > 0) {
    const int longest = entity_max_words * (word_max_len + 1) - 1;
    if (longest > seq_len) throw ConfigError("corpus: generated entities may exceed sequence length");
  }
}

namespace {

std::string pseudo_word(std::mt19937_64& rng, int min_len, int max_len) {
  static const char consonants[] = "bcdfghjklmnprstvwz";
  static const char vowels[] = "aeiou";
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<int> c(0, int(sizeof(consonants)) - 2);
  std::uniform_int_distribution<int> v(0, int(sizeof(vowels)) - 2);
  const int n = len(rng);
  std::string w;
  const bool start_vowel = (rng() & 1u) != 0;
  for (int i = 0; i < n; ++i) w += ((i % 2 == 0) != start_vowel) ? consonants[c(rng)] : vowels[v(rng)];
  return w;
}

struct Background {
  std::vector<std::string> words;
  std::discrete_distribution<int> pick;
  double mean_bytes = 0.0;  // expected bytes per emitted word including separator
};

Background make_background(const CorpusSpec& spec, std::mt19937_64& rng) {
  Background bg;
  std::set<std::string> seen;
  while (int(bg.words.size()) < spec.lexicon_size) {
    std::string w = pseudo_word(rng, spec.word_min_len, spec.word_max_len);
    if (seen.insert(w).second) bg.words.push_back(std::move(w));
  }
  std::vector<double> weights(bg.words.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] = 1.0 / std::pow(double(i + 1), spec.zipf_exponent);
    total += weights[i];
  }
  double len = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) len += weights[i] / total * double(bg.words[i].size());
  // separator: ' ' or ". " at sentence ends
  bg.mean_bytes = len + 1.0 + spec.sentence_end_prob;
  bg.pick = std::discrete_distribution<int>(weights.begin(), weights.end());
  return bg;
}

std::vector<std::string> make_entities(const CorpusSpec& spec, std::mt19937_64& rng) {
  if (!spec.entities.empty()) return spec.entities;
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::uniform_int_distribution<int> words(spec.entity_min_words, spec.entity_max_words);
  while (int(out.size()) < spec.entity_count) {
    const int n = words(rng);
    std::string e;
    for (int i = 0; i < n; ++i) {
      std::string w = pseudo_word(rng, std::max(3, spec.word_min_len), std::max(3, spec.word_max_len));
      w[0] = char(std::toupper(static_cast<unsigned char>(w[0])));
      if (i) e += ' ';
      e += w;
    }
    if (seen.insert(e).second) out.push_back(std::move(e));
  }
  return out;
}

void emit_split(const CorpusSpec& spec, Background bg, const std::vector<std::string>& entities,
                std::int64_t length, Split split, std::uint64_t stream_seed, std::vector<std::uint8_t>& out,
                std::vector<EntitySpan>& index) {
  std::mt19937_64 rng(stream_seed);
  double mean_entity = 0.0;
  for (const auto& e : entities) mean_entity += double(e.size()) + 1.0;
  if (!entities.empty()) mean_entity /= double(entities.size());
  // Insert with probability q per boundary so that entities per byte equals the target.
  double q = 0.0;
  if (!entities.empty() && spec.entity_frequency > 0) {
    const double f = spec.entity_frequency;
    if (f * mean_entity >= 1.0) throw ConfigError("corpus: entity frequency too high for entity lengths");
    q = std::min(1.0, f * bg.mean_bytes / (1.0 - f * mean_entity));
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick_entity(0, std::max(0, int(entities.size()) - 1));
  out.clear();
  out.reserve(std::size_t(length) + 64);
  auto push = [&](const std::string& s) { out.insert(out.end(), s.begin(), s.end()); };
  while (std::int64_t(out.size()) < length) {
    if (q > 0 && u(rng) < q) {
      const int id = pick_entity(rng);
      const std::string& e = entities[id];
      if (std::int64_t(out.size() + e.size()) > length) break;
      index.push_back({split, std::int64_t(out.size()), std::int64_t(out.size() + e.size()), id});
      push(e);
      out.push_back(' ');
      continue;
    }
    push(bg.words[bg.pick(rng)]);
    if (u(rng) < spec.sentence_end_prob) out.push_back('.');
    out.push_back(' ');
  }
  if (std::int64_t(out.size()) > length) out.resize(std::size_t(length));
  while (std::int64_t(out.size()) < length) out.push_back(' ');
}

}  // namespace

Corpus gen_corpus(const CorpusSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  Corpus c;
  const Background bg = make_background(spec, rng);
  c.entities = make_entities(spec, rng);
  for (const auto& e : c.entities) {
    if (int(e.size()) > spec.seq_len) throw ConfigError("corpus: entity '" + e + "' longer than sequence length");
  }
  const std::vector<std::string> planted = spec.entity_frequency > 0 ? c.entities : std::vector<std::string>{};
  std::seed_seq train_seq{spec.seed, std::uint64_t(1)}, val_seq{spec.seed, std::uint64_t(2)};
  std::uint64_t train_seed = 0, val_seed = 0;
  {
    std::mt19937_64 a(train_seq), b(val_seq);
    train_seed = a();
    val_seed = b();
  }
  emit_split(spec, bg, planted, spec.train_bytes, Split::train, train_seed, c.train, c.index);
  emit_split(spec, bg, planted, spec.val_bytes, Split::val, val_seed, c.val, c.index);
  return c;
}

std::int64_t count_occurrences(const std::vector<std::uint8_t>& haystack, const std::string& needle) {
  if (needle.empty()) return 0;
  std::int64_t n = 0;
  auto it = haystack.begin();
  while (true) {
    it = std::search(it, haystack.end(), needle.begin(), needle.end());
    if (it == haystack.end()) break;
    ++n;
    it += std::ptrdiff_t(needle.size());
  }
  return n;
}

void write_entity_index(const std::string& path, const Corpus& corpus) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  os << "split,start,end,id,entity\n";
  for (const auto& e : corpus.index) {
    os << (e.split == Split::train ? "train" : "val") << ',' << e.start << ',' << e.end << ',' << e.id << ','
       << corpus.entities[e.id] << '\n';
  }
}

std::vector<EntitySpan> read_entity_index(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read " + path);
  std::string line;
  std::getline(is, line);
  std::vector<EntitySpan> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string split, start, end, id;
    if (!std::getline(ss, split, ',') || !std::getline(ss, start, ',') || !std::getline(ss, end, ',') ||
        !std::getline(ss, id, ',')) {
      throw InputError("entity index: malformed line '" + line + "'");
    }
    if (split != "train" && split != "val") throw InputError("entity index: bad split '" + split + "'");
    out.push_back({split == "train" ? Split::train : Split::val, std::stoll(start), std::stoll(end), std::stoi(id)});
  }
  return out;
}

}  // namespace lngram
