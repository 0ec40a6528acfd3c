#include "lngram/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace lngram {

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::backbone: return "backbone";
    case ParamGroup::table: return "table";
    case ParamGroup::readout: return "readout";
    case ParamGroup::codec: return "codec";
  }
  return "backbone";
}

bool DecoderConfig::has_lngram(int layer) const {
  return lngram_enabled && std::find(insert_layers.begin(), insert_layers.end(), layer) != insert_layers.end();
}

void DecoderConfig::validate() const {
  if (layers < 1) throw ConfigError("decoder: layers must be >= 1");
  if (dim < 2 || heads < 1 || dim % heads != 0) throw ConfigError("decoder: dim must be divisible by heads");
  if ((dim / heads) % 2 != 0) throw ConfigError("decoder: head dim must be even for rotary positions");
  if (ffn_dim < 1) throw ConfigError("decoder: ffn dim must be >= 1");
  if (vocab < 2) throw ConfigError("decoder: vocab must be >= 2");
  if (max_seq < 1) throw ConfigError("decoder: max_seq must be >= 1");
  for (int l : insert_layers) {
    if (l < 1 || l > layers) {
      throw ConfigError("decoder: insertion layer " + std::to_string(l) + " outside [1, " + std::to_string(layers) + "]");
    }
  }
  if (lngram_enabled && !insert_layers.empty()) {
    if (lngram.dim != dim) throw ConfigError("decoder: lngram dim must equal model dim");
    lngram.validate();
  }
}

std::string DecoderConfig::describe() const {
  std::ostringstream os;
  os << "layers=" << layers << ";dim=" << dim << ";heads=" << heads << ";ffn=" << ffn_dim << ";vocab=" << vocab
     << ";max_seq=" << max_seq << ";norm_eps=" << norm_eps << ";rope_base=" << rope_base;
  os << ";lngram=" << (lngram_enabled && !insert_layers.empty() ? 1 : 0);
  if (lngram_enabled && !insert_layers.empty()) {
    os << ";insert=";
    for (int l : insert_layers) os << l << ',';
    os << ";bits=" << lngram.bits << ";orders=";
    for (int n : lngram.orders) os << n << ',';
    os << ";mem_dim=" << lngram.mem_dim << ";subtables=" << lngram.subtables << ";mode=" << to_string(lngram.mode)
       << ";conv_width=" << lngram.conv_width << ";dilation=" << lngram.dilation()
       << ";padding=" << lngram.table_row_padding;
  }
  return os.str();
}

std::uint64_t DecoderConfig::hash() const { return fnv1a64(describe()); }

template <class T>
void Rotary<T>::ensure(int count, int head_dim, double base) {
  const int h = head_dim / 2;
  if (h == half && cos.rows() >= count) return;
  half = h;
  cos.resize(count, h);
  sin.resize(count, h);
  for (int p = 0; p < count; ++p) {
    for (int i = 0; i < h; ++i) {
      const double freq = std::pow(base, -2.0 * i / head_dim);
      cos(p, i) = T(std::cos(p * freq));
      sin(p, i) = T(std::sin(p * freq));
    }
  }
}

namespace {

template <class T>
Matrix<T> draw(Eigen::Index rows, Eigen::Index cols, double std, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std);
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = T(normal(rng));
  return m;
}

// y = rmsnorm(x) * gain; raw receives rmsnorm(x).
template <class T>
Matrix<T> norm_gain(const Matrix<T>& x, const Matrix<T>& gain, T eps, Vector<T>* inv, Matrix<T>* raw) {
  Matrix<T> r = rmsnorm_rows(x, eps, inv);
  Matrix<T> y = r.array().rowwise() * gain.row(0).array();
  if (raw) *raw = std::move(r);
  return y;
}

// Rotates pairs (i, i + half) of every head; inverse applies the transpose.
template <class T>
void apply_rotary(Matrix<T>& m, int seq_len, int heads, const Rotary<T>& rot, bool inverse, int offset = 0) {
  const int dh = int(m.cols()) / heads;
  const int half = dh / 2;
  for (Eigen::Index row = 0; row < m.rows(); ++row) {
    const int pos = offset + int(row % seq_len);
    for (int h = 0; h < heads; ++h) {
      T* base = m.row(row).data() + h * dh;
      for (int i = 0; i < half; ++i) {
        const T c = rot.cos(pos, i);
        const T s = inverse ? -rot.sin(pos, i) : rot.sin(pos, i);
        const T a = base[i];
        const T b = base[i + half];
        base[i] = a * c - b * s;
        base[i + half] = a * s + b * c;
      }
    }
  }
}

template <class T>
T silu_elem(T x) {
  return silu(x);
}

}  // namespace

template <class T>
struct Decoder<T>::Cache {
  struct Layer {
    std::optional<LngramCache<T>> lngram;
    Matrix<T> x_in, raw1, xn1, q, k, v, attn, x_mid, raw2, xn2, pre, act;
    Vector<T> inv1, inv2;
    std::vector<Matrix<T>> probs;  // per (sequence, head), seq_len x seq_len
  };
  int seq_len = 0;
  std::vector<int> tokens;
  std::vector<Layer> layers;
  Matrix<T> x_final, raw_f, xf;
  Vector<T> inv_f;
  Rotary<T> rotary;
};

template <class T>
Decoder<T>::Decoder(const DecoderConfig& config, std::uint64_t seed) : config_(config) {
  config_.lngram.dim = config_.dim;
  config_.validate();
  std::mt19937_64 rng(seed);
  const double s = config_.init_std;
  const int d = config_.dim;
  params_.embed = draw<T>(config_.vocab, d, s, rng);
  for (int l = 1; l <= config_.layers; ++l) {
    BlockParams<T> b;
    b.attn_gain = Matrix<T>::Ones(1, d);
    b.wq = draw<T>(d, d, s, rng);
    b.wk = draw<T>(d, d, s, rng);
    b.wv = draw<T>(d, d, s, rng);
    b.wo = draw<T>(d, d, s, rng);
    b.ffn_gain = Matrix<T>::Ones(1, d);
    b.w_in = draw<T>(d, config_.ffn_dim, s, rng);
    b.w_out = draw<T>(config_.ffn_dim, d, s, rng);
    params_.blocks.push_back(std::move(b));
  }
  params_.final_gain = Matrix<T>::Ones(1, d);
  params_.head = draw<T>(d, config_.vocab, s, rng);
  // Separate streams keep the backbone init identical with and without Lngram.
  for (int l = 1; l <= config_.layers; ++l) {
    if (!config_.has_lngram(l)) continue;
    std::mt19937_64 lrng(seed * 0x9E3779B97F4A7C15ull + std::uint64_t(l));
    params_.blocks[l - 1].lngram = make_lngram_params<T>(config_.lngram, lrng);
  }
}

template <class T>
Decoder<T>::Decoder(const DecoderConfig& config, DecoderParams<T> params)
    : config_(config), params_(std::move(params)) {
  config_.lngram.dim = config_.dim;
  config_.validate();
  if (int(params_.blocks.size()) != config_.layers) throw ConfigError("decoder: parameter block count mismatch");
  for (int l = 1; l <= config_.layers; ++l) {
    if (config_.has_lngram(l) != params_.blocks[l - 1].lngram.has_value()) {
      throw ConfigError("decoder: lngram parameters do not match insertion layers");
    }
  }
}

template <class T>
Matrix<T> Decoder<T>::run(std::span<const int> tokens, int seq_len, Cache* cache, std::vector<Matrix<T>>* states,
                          GateTrace* trace) const {
  const int P = int(tokens.size());
  if (seq_len < 0) seq_len = P;
  if (P == 0 || seq_len < 1 || P % seq_len != 0) throw InputError("decoder: token count not a multiple of seq_len");
  const int d = config_.dim;
  const int H = config_.heads;
  const int dh = d / H;
  const int nseq = P / seq_len;
  const T eps = T(config_.norm_eps);
  const T scale = T(1) / std::sqrt(T(dh));

  Matrix<T> x(P, d);
  for (int i = 0; i < P; ++i) {
    const int tok = tokens[i];
    if (tok < 0 || tok >= config_.vocab) throw InputError("decoder: token " + std::to_string(tok) + " out of range");
    x.row(i) = params_.embed.row(tok);
  }
  if (states) states->push_back(x);

  Rotary<T> local_rot;
  Rotary<T>& rot = cache ? cache->rotary : local_rot;
  rot.ensure(seq_len, dh, config_.rope_base);
  if (cache) {
    cache->seq_len = seq_len;
    cache->tokens.assign(tokens.begin(), tokens.end());
    cache->layers.assign(config_.layers, typename Cache::Layer{});
  }

  for (int l = 0; l < config_.layers; ++l) {
    const auto& b = params_.blocks[l];
    typename Cache::Layer local;
    auto& lc = cache ? cache->layers[l] : local;
    if (b.lngram) {
      const std::size_t first = trace ? trace->entries.size() : 0;
      if (cache) lc.lngram.emplace();
      x = lngram_forward(x, *b.lngram, config_.lngram, seq_len, cache ? &*lc.lngram : nullptr, trace);
      if (trace) {
        for (std::size_t i = first; i < trace->entries.size(); ++i) trace->entries[i].layer = l + 1;
      }
    }
    if (cache) lc.x_in = x;
    lc.xn1 = norm_gain(x, b.attn_gain, eps, &lc.inv1, cache ? &lc.raw1 : nullptr);
    lc.q = lc.xn1 * b.wq;
    lc.k = lc.xn1 * b.wk;
    lc.v = lc.xn1 * b.wv;
    apply_rotary(lc.q, seq_len, H, rot, false);
    apply_rotary(lc.k, seq_len, H, rot, false);
    lc.attn = Matrix<T>::Zero(P, d);
    if (cache) lc.probs.assign(std::size_t(nseq) * H, Matrix<T>());
    for (int sq = 0; sq < nseq; ++sq) {
      for (int h = 0; h < H; ++h) {
        const auto Q = lc.q.block(sq * seq_len, h * dh, seq_len, dh);
        const auto K = lc.k.block(sq * seq_len, h * dh, seq_len, dh);
        const auto V = lc.v.block(sq * seq_len, h * dh, seq_len, dh);
        Matrix<T> A = (Q * K.transpose()) * scale;
        for (int i = 0; i < seq_len; ++i) {
          const T m = A.row(i).head(i + 1).maxCoeff();
          T total = T(0);
          for (int j = 0; j <= i; ++j) {
            A(i, j) = std::exp(A(i, j) - m);
            total += A(i, j);
          }
          A.row(i).head(i + 1) /= total;
          A.row(i).tail(seq_len - i - 1).setZero();
        }
        lc.attn.block(sq * seq_len, h * dh, seq_len, dh).noalias() = A * V;
        if (cache) lc.probs[std::size_t(sq) * H + h] = std::move(A);
      }
    }
    x.noalias() += lc.attn * b.wo;
    if (cache) lc.x_mid = x;
    lc.xn2 = norm_gain(x, b.ffn_gain, eps, &lc.inv2, cache ? &lc.raw2 : nullptr);
    lc.pre = lc.xn2 * b.w_in;
    lc.act = lc.pre.unaryExpr([](T v) { return silu_elem(v); });
    x.noalias() += lc.act * b.w_out;
    if (states) states->push_back(x);
  }

  Matrix<T> xf;
  if (cache) {
    cache->x_final = x;
    cache->xf = norm_gain(x, params_.final_gain, eps, &cache->inv_f, &cache->raw_f);
    return cache->xf * params_.head;
  }
  Vector<T> inv;
  xf = norm_gain(x, params_.final_gain, eps, &inv, static_cast<Matrix<T>*>(nullptr));
  return xf * params_.head;
}

template <class T>
Matrix<T> Decoder<T>::forward_logits(std::span<const int> tokens, int seq_len, GateTrace* trace) const {
  return run(tokens, seq_len, nullptr, nullptr, trace);
}

template <class T>
LayerStates<T> Decoder<T>::forward_with_hidden(std::span<const int> tokens, int seq_len, GateTrace* trace) const {
  LayerStates<T> out;
  out.logits = run(tokens, seq_len, nullptr, &out.hidden, trace);
  return out;
}

template <class T>
Matrix<T> Decoder<T>::head_logits(const Matrix<T>& hidden) const {
  Vector<T> inv;
  const Matrix<T> xf = norm_gain(hidden, params_.final_gain, T(config_.norm_eps), &inv, static_cast<Matrix<T>*>(nullptr));
  return xf * params_.head;
}

namespace {

// Mean cross entropy; optionally writes d(loss)/d(logits).
template <class T>
double cross_entropy(const Matrix<T>& logits, std::span<const int> targets, Matrix<T>* dlogits) {
  const Eigen::Index P = logits.rows();
  if (Eigen::Index(targets.size()) != P) throw InputError("cross_entropy: target count mismatch");
  double total = 0.0;
  if (dlogits) dlogits->resize(P, logits.cols());
  for (Eigen::Index i = 0; i < P; ++i) {
    const int y = targets[i];
    if (y < 0 || y >= logits.cols()) throw InputError("cross_entropy: target out of range");
    const T m = logits.row(i).maxCoeff();
    const auto e = (logits.row(i).array() - m).exp();
    const T z = e.sum();
    total += double(std::log(z) + m - logits(i, y));
    if (dlogits) {
      dlogits->row(i) = e / (z * T(P));
      (*dlogits)(i, y) -= T(1) / T(P);
    }
  }
  const double loss = total / double(P);
  if (!std::isfinite(loss)) throw TrainingError("non-finite loss");
  return loss;
}

template <class T>
void gain_backward(const Matrix<T>& raw, const Matrix<T>& gain, const Matrix<T>& dy, Matrix<T>& dgain, Matrix<T>& dscaled) {
  dgain += (raw.array() * dy.array()).colwise().sum().matrix();
  dscaled = dy.array().rowwise() * gain.row(0).array();
}

}  // namespace

template <class T>
double Decoder<T>::loss(std::span<const int> inputs, std::span<const int> targets, int seq_len) const {
  const Matrix<T> logits = run(inputs, seq_len, nullptr, nullptr, nullptr);
  return cross_entropy(logits, targets, static_cast<Matrix<T>*>(nullptr));
}

template <class T>
double Decoder<T>::loss_and_backward(std::span<const int> inputs, std::span<const int> targets, int seq_len,
                                     DecoderParams<T>& grads, RoutingGradient routing) const {
  Cache cache;
  const Matrix<T> logits = run(inputs, seq_len, &cache, nullptr, nullptr);
  Matrix<T> dlogits;
  const double loss_value = cross_entropy(logits, targets, &dlogits);
  seq_len = cache.seq_len;
  const int P = int(inputs.size());
  const int d = config_.dim;
  const int H = config_.heads;
  const int dh = d / H;
  const int nseq = P / seq_len;
  const T scale = T(1) / std::sqrt(T(dh));

  grads.head.noalias() += cache.xf.transpose() * dlogits;
  const Matrix<T> dxf = dlogits * params_.head.transpose();
  Matrix<T> dscaled;
  gain_backward(cache.raw_f, params_.final_gain, dxf, grads.final_gain, dscaled);
  Matrix<T> dx = rmsnorm_rows_backward(cache.x_final, cache.inv_f, dscaled);

  for (int l = config_.layers - 1; l >= 0; --l) {
    const auto& b = params_.blocks[l];
    auto& g = grads.blocks[l];
    const auto& lc = cache.layers[l];

    // Feedforward residual.
    g.w_out.noalias() += lc.act.transpose() * dx;
    Matrix<T> dpre = dx * b.w_out.transpose();
    for (Eigen::Index i = 0; i < dpre.size(); ++i) dpre.data()[i] *= silu_grad(lc.pre.data()[i]);
    g.w_in.noalias() += lc.xn2.transpose() * dpre;
    const Matrix<T> dxn2 = dpre * b.w_in.transpose();
    gain_backward(lc.raw2, b.ffn_gain, dxn2, g.ffn_gain, dscaled);
    dx += rmsnorm_rows_backward(lc.x_mid, lc.inv2, dscaled);

    // Attention residual.
    g.wo.noalias() += lc.attn.transpose() * dx;
    const Matrix<T> dattn = dx * b.wo.transpose();
    Matrix<T> dq = Matrix<T>::Zero(P, d), dk = Matrix<T>::Zero(P, d), dv = Matrix<T>::Zero(P, d);
    for (int sq = 0; sq < nseq; ++sq) {
      for (int h = 0; h < H; ++h) {
        const Matrix<T>& A = lc.probs[std::size_t(sq) * H + h];
        const auto Q = lc.q.block(sq * seq_len, h * dh, seq_len, dh);
        const auto K = lc.k.block(sq * seq_len, h * dh, seq_len, dh);
        const auto V = lc.v.block(sq * seq_len, h * dh, seq_len, dh);
        const auto dO = dattn.block(sq * seq_len, h * dh, seq_len, dh);
        const Matrix<T> dA = dO * V.transpose();
        dv.block(sq * seq_len, h * dh, seq_len, dh).noalias() = A.transpose() * dO;
        Matrix<T> dS = A.cwiseProduct(dA);
        const Vector<T> rowsum = dS.rowwise().sum();
        dS -= (A.array().colwise() * rowsum.array()).matrix();
        dS *= scale;
        dq.block(sq * seq_len, h * dh, seq_len, dh).noalias() = dS * K;
        dk.block(sq * seq_len, h * dh, seq_len, dh).noalias() = dS.transpose() * Q;
      }
    }
    apply_rotary(dq, seq_len, H, cache.rotary, true);
    apply_rotary(dk, seq_len, H, cache.rotary, true);
    g.wq.noalias() += lc.xn1.transpose() * dq;
    g.wk.noalias() += lc.xn1.transpose() * dk;
    g.wv.noalias() += lc.xn1.transpose() * dv;
    Matrix<T> dxn1 = dq * b.wq.transpose();
    dxn1.noalias() += dk * b.wk.transpose();
    dxn1.noalias() += dv * b.wv.transpose();
    gain_backward(lc.raw1, b.attn_gain, dxn1, g.attn_gain, dscaled);
    dx += rmsnorm_rows_backward(lc.x_in, lc.inv1, dscaled);

    if (b.lngram) {
      dx = lngram_backward(*lc.lngram, *b.lngram, config_.lngram, dx, *g.lngram, routing);
    }
  }
  for (int i = 0; i < P; ++i) grads.embed.row(cache.tokens[i]) += dx.row(i);
  return loss_value;
}

template <class T>
ParameterCounts Decoder<T>::parameter_counts() const {
  ParameterCounts counts;
  for_each_param(params_, [&](const std::string&, ParamGroup group, const Matrix<T>& m) {
    switch (group) {
      case ParamGroup::backbone: counts.backbone += m.size(); break;
      case ParamGroup::table: counts.table += m.size(); break;
      case ParamGroup::readout: counts.readout += m.size(); break;
      case ParamGroup::codec: counts.codec += m.size(); break;
    }
  });
  return counts;
}

template <class T>
DecodeSession<T>::DecodeSession(const Decoder<T>& model, int capacity) : model_(model), capacity_(capacity) {
  if (capacity < 1) throw ParameterError("decode session: capacity must be >= 1");
  const auto& cfg = model_.config();
  keys_.assign(cfg.layers, Matrix<T>::Zero(capacity, cfg.dim));
  values_.assign(cfg.layers, Matrix<T>::Zero(capacity, cfg.dim));
  lngram_states_.resize(cfg.layers);
  for (int l = 1; l <= cfg.layers; ++l) {
    if (cfg.has_lngram(l)) lngram_states_[l - 1].reset(cfg.lngram);
  }
  rotary_.ensure(capacity, cfg.dim / cfg.heads, cfg.rope_base);
  scores_ = Vector<T>::Zero(capacity);
}

template <class T>
void DecodeSession<T>::set_host_gather(bool on) {
  for (auto& s : lngram_states_) s.staged_gather = on;
}

template <class T>
std::size_t DecodeSession<T>::state_bytes() const {
  std::size_t bytes = 0;
  for (const auto& k : keys_) bytes += std::size_t(k.size()) * sizeof(T);
  for (const auto& v : values_) bytes += std::size_t(v.size()) * sizeof(T);
  for (const auto& s : lngram_states_) bytes += s.state_bytes();
  return bytes;
}

template <class T>
Vector<T> DecodeSession<T>::prefill(std::span<const int> prompt) {
  if (position_ != 0) throw UsageError("prefill: session already advanced");
  const int P = int(prompt.size());
  if (P < 1 || P > capacity_) throw InputError("prefill: prompt length outside [1, capacity]");
  const auto& cfg = model_.config();
  typename Decoder<T>::Cache cache;
  const Matrix<T> logits = model_.run(prompt, P, &cache, nullptr, nullptr);
  for (int l = 0; l < cfg.layers; ++l) {
    const auto& lc = cache.layers[l];
    keys_[l].topRows(P) = lc.k;
    values_[l].topRows(P) = lc.v;
    if (!lc.lngram) continue;
    auto& st = lngram_states_[l];
    const int R = cfg.lngram.routes();
    for (int s = 0; s < cfg.lngram.subtables; ++s) {
      auto& hist = st.symbol_history[s];
      const int keep = int(hist.size());
      for (int i = 0; i < keep; ++i) {
        const int t = P - keep + i;
        for (int r = 0; r < R; ++r) hist[i][r] = t >= 0 ? lc.lngram->symbols.at(s, t, r) : Symbol(0);
      }
    }
    const int keep = int(st.conv_history.size());
    for (int i = 0; i < keep; ++i) {
      const int t = P - keep + i;
      if (t >= 0) {
        st.conv_history[i] = lc.lngram->fused_normed.row(t).transpose();
      } else {
        st.conv_history[i].setZero();
      }
    }
    st.position = P;
  }
  position_ = P;
  return logits.row(P - 1).transpose();
}

template <class T>
Vector<T> DecodeSession<T>::step(int token, GateTrace* trace) {
  const auto& cfg = model_.config();
  const auto& params = model_.params();
  if (position_ >= capacity_) throw UsageError("decode: capacity exhausted");
  if (token < 0 || token >= cfg.vocab) throw InputError("decode: token out of range");
  const int d = cfg.dim;
  const int H = cfg.heads;
  const int dh = d / H;
  const int half = dh / 2;
  const T eps = T(cfg.norm_eps);
  const T scale = T(1) / std::sqrt(T(dh));
  const int pos = position_;

  Vector<T> x = params.embed.row(token).transpose();
  for (int l = 0; l < cfg.layers; ++l) {
    const auto& b = params.blocks[l];
    if (b.lngram) {
      const std::size_t first = trace ? trace->entries.size() : 0;
      x = lngram_step(x, *b.lngram, cfg.lngram, lngram_states_[l], trace);
      if (trace) {
        for (std::size_t i = first; i < trace->entries.size(); ++i) trace->entries[i].layer = l + 1;
      }
    }
    const Vector<T> xn = rmsnorm(x, eps).cwiseProduct(b.attn_gain.row(0).transpose());
    Vector<T> q = b.wq.transpose() * xn;
    Vector<T> k = b.wk.transpose() * xn;
    const Vector<T> v = b.wv.transpose() * xn;
    for (int h = 0; h < H; ++h) {
      for (int i = 0; i < half; ++i) {
        const T c = rotary_.cos(pos, i), s = rotary_.sin(pos, i);
        const int a = h * dh + i, bb = h * dh + half + i;
        const T qa = q(a), qb = q(bb), ka = k(a), kb = k(bb);
        q(a) = qa * c - qb * s;
        q(bb) = qa * s + qb * c;
        k(a) = ka * c - kb * s;
        k(bb) = ka * s + kb * c;
      }
    }
    keys_[l].row(pos) = k.transpose();
    values_[l].row(pos) = v.transpose();
    Vector<T> attn(d);
    for (int h = 0; h < H; ++h) {
      const auto K = keys_[l].block(0, h * dh, pos + 1, dh);
      const auto V = values_[l].block(0, h * dh, pos + 1, dh);
      auto sc = scores_.head(pos + 1);
      sc.noalias() = K * q.segment(h * dh, dh);
      sc *= scale;
      const T m = sc.maxCoeff();
      sc = (sc.array() - m).exp();
      sc /= sc.sum();
      attn.segment(h * dh, dh).noalias() = V.transpose() * sc;
    }
    x += b.wo.transpose() * attn;
    const Vector<T> xn2 = rmsnorm(x, eps).cwiseProduct(b.ffn_gain.row(0).transpose());
    const Vector<T> pre = b.w_in.transpose() * xn2;
    const Vector<T> act = pre.unaryExpr([](T u) { return silu(u); });
    x += b.w_out.transpose() * act;
  }
  ++position_;
  const Vector<T> xf = rmsnorm(x, eps).cwiseProduct(params.final_gain.row(0).transpose());
  return params.head.transpose() * xf;
}

DecoderConfig matched_baseline(const DecoderConfig& config) {
  DecoderConfig base = config;
  base.lngram_enabled = false;
  base.lngram.dim = base.dim;
  const Decoder<float> variant(config, 0);
  const std::int64_t target = variant.parameter_counts().dense();
  const std::int64_t current = variant.parameter_counts().backbone;
  const std::int64_t per_unit = std::int64_t(config.layers) * 2 * config.dim;
  const double extra = double(target - current) / double(per_unit);
  base.ffn_dim = std::max(1, config.ffn_dim + int(std::lround(extra)));
  return base;
}

template class Decoder<float>;
template class Decoder<double>;
template class DecodeSession<float>;
template class DecodeSession<double>;
template struct Rotary<float>;
template struct Rotary<double>;

}  // namespace lngram
