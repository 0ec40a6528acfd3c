#pragma once

// Seeded synthetic byte corpus: Zipf-distributed lowercase pseudo-words with
// sentence punctuation, plus planted multi-word capitalized entities whose
// occurrences are indexed.

#include <cstdint>
#include <string>
#include <vector>

namespace lngram {

struct CorpusSpec {
  std::uint64_t seed = 1;
  std::int64_t train_bytes = 2'000'000;
  std::int64_t val_bytes = 200'000;
  int lexicon_size = 3000;
  double zipf_exponent = 1.1;
  int word_min_len = 2;
  int word_max_len = 9;
  int entity_count = 50;
  int entity_min_words = 3;
  int entity_max_words = 5;
  double entity_frequency = 0.002;  // expected entity occurrences per byte
  double sentence_end_prob = 0.08;
  int seq_len = 64;  // every entity must fit in one training window
  std::vector<std::string> entities;  // explicit list; generated when empty

  void validate() const;
};

enum class Split { train, val };

struct EntitySpan {
  Split split = Split::train;
  std::int64_t start = 0;  // first byte
  std::int64_t end = 0;    // one past the last byte
  int id = 0;
};

struct Corpus {
  std::vector<std::uint8_t> train, val;
  std::vector<std::string> entities;
  std::vector<EntitySpan> index;

  const std::vector<std::uint8_t>& split(Split s) const { return s == Split::train ? train : val; }
};

Corpus gen_corpus(const CorpusSpec& spec);

// Number of non-overlapping verbatim occurrences of needle in haystack.
std::int64_t count_occurrences(const std::vector<std::uint8_t>& haystack, const std::string& needle);

void write_entity_index(const std::string& path, const Corpus& corpus);
std::vector<EntitySpan> read_entity_index(const std::string& path);

}  // namespace lngram
