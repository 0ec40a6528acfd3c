#include "lngram/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace lngram {

namespace {

Eigen::VectorXd row_softmax(const Eigen::MatrixXd& logits, Eigen::Index i) {
  const double m = logits.row(i).maxCoeff();
  Eigen::VectorXd p = (logits.row(i).array() - m).exp().transpose();
  return p / p.sum();
}

}  // namespace

KLProfile logitlens_profile(const std::vector<std::vector<Eigen::MatrixXd>>& samples, const HeadFn& head) {
  if (samples.empty()) throw InputError("logitlens: no samples");
  const std::size_t L = samples.front().size();
  if (L == 0) throw InputError("logitlens: no captured states");
  KLProfile out;
  out.kl.assign(L, 0.0);
  for (const auto& states : samples) {
    if (states.size() != L) throw InputError("logitlens: samples capture different layer counts");
    const Eigen::Index rows = states.back().rows();
    for (const auto& h : states) {
      if (h.rows() != rows || h.cols() != states.back().cols()) throw InputError("logitlens: state shape mismatch");
    }
    const Eigen::MatrixXd final_logits = head(states.back());
    if (final_logits.rows() != rows) throw InputError("logitlens: head changed the row count");
    std::vector<Eigen::VectorXd> ref(rows);
    for (Eigen::Index t = 0; t < rows; ++t) ref[t] = row_softmax(final_logits, t);
    for (std::size_t l = 0; l < L; ++l) {
      const Eigen::MatrixXd logits = l + 1 == L ? final_logits : head(states[l]);
      if (logits.cols() != final_logits.cols()) throw InputError("logitlens: vocabulary mismatch");
      for (Eigen::Index t = 0; t < rows; ++t) out.kl[l] += kl_divergence(ref[t], row_softmax(logits, t));
    }
    out.positions += rows;
  }
  for (double& v : out.kl) v /= double(out.positions);
  return out;
}

KLProfile logitlens_profile(const Decoder<float>& model, const std::vector<LayerStates<float>>& samples) {
  std::vector<std::vector<Eigen::MatrixXd>> states;
  states.reserve(samples.size());
  for (const auto& s : samples) {
    std::vector<Eigen::MatrixXd> layers;
    for (const auto& h : s.hidden) layers.push_back(h.cast<double>());
    states.push_back(std::move(layers));
  }
  return logitlens_profile(states, [&](const Eigen::MatrixXd& h) -> Eigen::MatrixXd {
    return model.head_logits(h.cast<float>()).cast<double>();
  });
}

double linear_cka(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) throw InputError("linear_cka: sample counts differ");
  if (x.rows() < 2) throw DegenerateInputError("linear_cka: need at least 2 samples");
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd yc = y.rowwise() - y.colwise().mean();
  const double xx = (xc.transpose() * xc).squaredNorm();
  const double yy = (yc.transpose() * yc).squaredNorm();
  if (!(xx > 0) || !(yy > 0)) throw DegenerateInputError("linear_cka: zero-variance input");
  const double xy = (yc.transpose() * xc).squaredNorm();
  const double v = xy / std::sqrt(xx * yy);
  return std::clamp(v, 0.0, 1.0);
}

Eigen::MatrixXd cka_matrix(const std::vector<Eigen::MatrixXd>& base, const std::vector<Eigen::MatrixXd>& variant) {
  if (base.empty() || variant.empty()) throw InputError("cka_matrix: empty layer list");
  Eigen::MatrixXd s(base.size(), variant.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    for (std::size_t j = 0; j < variant.size(); ++j) s(Eigen::Index(i), Eigen::Index(j)) = linear_cka(base[i], variant[j]);
  }
  return s;
}

AlignmentCurve soft_alignment(const Eigen::MatrixXd& s, int k) {
  const int Lb = int(s.rows());
  if (k < 1 || k > Lb) throw ParameterError("soft_alignment: k must be in [1, baseline layers]");
  AlignmentCurve out;
  out.k = k;
  std::vector<int> idx(Lb);
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return s(a, j) > s(b, j); });
    double num = 0.0, den = 0.0;
    for (int r = 0; r < k; ++r) {
      num += double(idx[r] + 1) * s(idx[r], j);
      den += s(idx[r], j);
    }
    if (!(den > 0)) throw DegenerateInputError("soft_alignment: zero similarity column " + std::to_string(j + 1));
    const double a = num / den;
    out.aligned.push_back(a);
    out.gain.push_back(a - double(j + 1));
  }
  return out;
}

BootstrapEntry paired_bootstrap(const std::vector<int>& correct_a, const std::vector<int>& correct_b, int trials,
                                std::uint64_t seed, const std::string& name) {
  if (correct_a.size() != correct_b.size()) throw InputError("paired_bootstrap: length mismatch");
  if (correct_a.empty()) throw InputError("paired_bootstrap: empty input");
  if (trials < 1) throw ParameterError("paired_bootstrap: trials must be >= 1");
  const std::size_t n = correct_a.size();
  std::vector<int> diff(n);
  long long total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = (correct_b[i] != 0) - (correct_a[i] != 0);
    total += diff[i];
  }
  BootstrapEntry e;
  e.name = name;
  e.n = n;
  e.trials = trials;
  e.seed = seed;
  e.delta = 100.0 * double(total) / double(n);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> samples(trials);
  long long le = 0, ge = 0;
  for (int t = 0; t < trials; ++t) {
    long long s = 0;
    for (std::size_t i = 0; i < n; ++i) s += diff[pick(rng)];
    samples[t] = 100.0 * double(s) / double(n);
    le += s <= 0;
    ge += s >= 0;
  }
  std::sort(samples.begin(), samples.end());
  auto quantile = [&](double q) {
    const double pos = q * double(trials - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min<std::size_t>(lo + 1, std::size_t(trials - 1));
    return samples[lo] + (samples[hi] - samples[lo]) * (pos - double(lo));
  };
  e.ci_low = quantile(0.025);
  e.ci_high = quantile(0.975);
  e.p = std::min(1.0, 2.0 * double(std::min(le, ge) + 1) / double(trials + 1));
  e.p_adjusted = e.p;
  return e;
}

std::vector<double> holm_bonferroni(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> adj(m);
  double running = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    const double v = std::min(1.0, double(m - r) * p[order[r]]);
    running = std::max(running, v);
    adj[order[r]] = running;
  }
  return adj;
}

std::vector<BootstrapEntry> bootstrap_report(const std::vector<std::string>& names,
                                             const std::vector<std::vector<int>>& a,
                                             const std::vector<std::vector<int>>& b, int trials, std::uint64_t seed) {
  if (names.size() != a.size() || a.size() != b.size()) throw InputError("bootstrap: benchmark count mismatch");
  std::vector<BootstrapEntry> out;
  std::seed_seq seq{seed};
  std::vector<std::uint32_t> seeds(names.size() * 2);
  seq.generate(seeds.begin(), seeds.end());
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::uint64_t s = (std::uint64_t(seeds[2 * i]) << 32) | seeds[2 * i + 1];
    out.push_back(paired_bootstrap(a[i], b[i], trials, s, names[i]));
  }
  std::vector<double> p;
  for (const auto& e : out) p.push_back(e.p);
  const auto adj = holm_bonferroni(p);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].p_adjusted = adj[i];
  return out;
}

GateSummary gate_summary(const GateTrace& trace, const std::vector<EntitySpan>& entities, Split split, int layer,
                         int order, int seq_len, std::int64_t base) {
  if (trace.entries.empty()) throw InputError("gate_summary: empty trace");
  if (seq_len < 1) throw ParameterError("gate_summary: seq_len must be >= 1");
  std::int64_t max_pos = -1;
  for (const auto& e : trace.entries) {
    if (e.layer == layer && e.n == order) max_pos = std::max(max_pos, base + std::int64_t(e.sequence) * seq_len + e.t);
  }
  if (max_pos < 0) throw InputError("gate_summary: no entries for the requested layer and order");
  std::vector<double> sum(std::size_t(max_pos + 1), 0.0);
  std::vector<int> count(std::size_t(max_pos + 1), 0);
  for (const auto& e : trace.entries) {
    if (e.layer != layer || e.n != order) continue;
    const std::int64_t pos = base + std::int64_t(e.sequence) * seq_len + e.t;
    if (pos < 0) continue;
    sum[pos] += e.gate;
    ++count[pos];
  }
  GateSummary out;
  out.layer = layer;
  out.order = order;
  out.series.assign(sum.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> present;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (count[i] == 0) continue;
    out.series[i] = sum[i] / count[i];
    present.push_back(out.series[i]);
  }
  out.positions = std::int64_t(present.size());
  const std::size_t mid = present.size() / 2;
  std::nth_element(present.begin(), present.begin() + std::ptrdiff_t(mid), present.end());
  double median = present[mid];
  if (present.size() % 2 == 0) {
    const double lower = *std::max_element(present.begin(), present.begin() + std::ptrdiff_t(mid));
    median = 0.5 * (median + lower);
  }
  out.median = median;
  double acc = 0.0;
  for (const auto& span : entities) {
    if (span.split != split) continue;
    const std::int64_t last = span.end - 1;
    if (last < 0 || last >= std::int64_t(out.series.size()) || count[last] == 0) continue;
    acc += out.series[last];
    ++out.entity_finals;
  }
  if (out.entity_finals == 0) throw InputError("gate_summary: no entity-final positions covered by the trace");
  out.entity_final_mean = acc / double(out.entity_finals);
  if (!(out.median > 0)) throw DegenerateInputError("gate_summary: corpus median gate is not positive");
  out.ratio = out.entity_final_mean / out.median;
  return out;
}

void write_gate_trace_csv(const std::string& path, const GateTrace& trace) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  os << "layer,sequence,t,subtable,order,score,gate\n";
  os.precision(10);
  for (const auto& e : trace.entries) {
    os << e.layer << ',' << e.sequence << ',' << e.t << ',' << e.s << ',' << e.n << ',' << e.score << ',' << e.gate
       << '\n';
  }
}

GateTrace read_gate_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read " + path);
  std::string line;
  std::getline(is, line);
  GateTrace trace;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    GateEntry e;
    if (!(ss >> e.layer >> e.sequence >> e.t >> e.s >> e.n >> e.score >> e.gate)) {
      throw InputError("gate trace: malformed line");
    }
    trace.entries.push_back(e);
  }
  return trace;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  os.precision(12);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
    os << '\n';
  }
}

}  // namespace lngram
