#include "lngram/eval.hpp"

#include <algorithm>
#include <cmath>

namespace lngram {

EvalReport eval_ppl(const LogitFn& logits, std::span<const std::uint8_t> data, int seq_len, int bucket_width,
                    int batch) {
  if (data.size() < 2) throw InputError("eval: need at least 2 bytes");
  if (seq_len < 1 || bucket_width < 1 || batch < 1) throw ParameterError("eval: seq_len, bucket width, batch >= 1");
  // Short data still yields one window covering everything.
  const int T = int(std::min<std::size_t>(std::size_t(seq_len), data.size() - 1));
  const std::size_t windows = (data.size() - 1) / std::size_t(T);
  const int nb = (T + bucket_width - 1) / bucket_width;
  std::vector<double> bucket_nll(nb, 0.0);
  std::vector<std::int64_t> bucket_count(nb, 0);
  double total = 0.0;
  std::int64_t count = 0;
  std::vector<int> inputs;
  for (std::size_t w0 = 0; w0 < windows; w0 += std::size_t(batch)) {
    const std::size_t nw = std::min<std::size_t>(std::size_t(batch), windows - w0);
    inputs.resize(nw * T);
    for (std::size_t w = 0; w < nw; ++w) {
      const std::size_t base = (w0 + w) * std::size_t(T);
      for (int t = 0; t < T; ++t) inputs[w * T + t] = data[base + t];
    }
    const Matrix<float> out = logits(inputs, T);
    if (out.rows() != Eigen::Index(nw * T)) throw DimensionError("eval: logit row count mismatch");
    for (std::size_t w = 0; w < nw; ++w) {
      const std::size_t base = (w0 + w) * std::size_t(T);
      for (int t = 0; t < T; ++t) {
        const auto row = out.row(Eigen::Index(w * T + t));
        const int y = data[base + t + 1];
        if (y >= out.cols()) throw InputError("eval: byte outside vocabulary");
        double m = row.maxCoeff();
        double z = 0.0;
        for (Eigen::Index v = 0; v < row.size(); ++v) z += std::exp(double(row(v)) - m);
        const double nll = std::log(z) + m - double(row(y));
        total += nll;
        ++count;
        bucket_nll[t / bucket_width] += nll;
        ++bucket_count[t / bucket_width];
      }
    }
  }
  EvalReport r;
  r.tokens = count;
  r.mean_nll = total / double(count);
  r.perplexity = std::exp(r.mean_nll);
  for (int b = 0; b < nb; ++b) {
    if (bucket_count[b] == 0) continue;
    r.buckets.push_back({b * bucket_width, std::min(T, (b + 1) * bucket_width), bucket_count[b],
                         std::exp(bucket_nll[b] / double(bucket_count[b]))});
  }
  return r;
}

EvalReport eval_ppl(const Decoder<float>& model, std::span<const std::uint8_t> data, int seq_len, int bucket_width,
                    int batch) {
  return eval_ppl([&](std::span<const int> tokens, int T) { return model.forward_logits(tokens, T); }, data, seq_len,
                  bucket_width, batch);
}

}  // namespace lngram
