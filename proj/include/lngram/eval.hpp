#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lngram/backbone.hpp"

namespace lngram {

// Logits for B stacked windows of seq_len tokens: (B seq_len) x V.
using LogitFn = std::function<Matrix<float>(std::span<const int> tokens, int seq_len)>;

struct PrefixBucket {
  int begin = 0;  // prefix positions [begin, end)
  int end = 0;
  std::int64_t tokens = 0;
  double perplexity = 0.0;
};

struct EvalReport {
  double perplexity = 0.0;
  double mean_nll = 0.0;
  std::int64_t tokens = 0;
  std::vector<PrefixBucket> buckets;
};

// Consecutive windows of seq_len input bytes, each position predicting the
// byte after it, so every byte past the first is scored at most once. A tail
// shorter than a window is dropped; data shorter than 2 bytes is an input error.
EvalReport eval_ppl(const LogitFn& logits, std::span<const std::uint8_t> data, int seq_len, int bucket_width = 16,
                    int batch = 16);
EvalReport eval_ppl(const Decoder<float>& model, std::span<const std::uint8_t> data, int seq_len,
                    int bucket_width = 16, int batch = 16);

}  // namespace lngram
