#include "lngram/codec.hpp"

#include <string>

namespace lngram {

template <class T>
void CodecParams<T>::validate() const {
  if (bits < 1 || bits > kMaxBitsPerRoute) {
    throw ConfigError("codec: bits per route must be in [1, " + std::to_string(kMaxBitsPerRoute) + "]");
  }
  if (projections.empty()) throw ConfigError("codec: at least one subtable projection required");
  const auto d = projections.front().rows();
  if (d == 0 || d % bits != 0) {
    throw ConfigError("codec: model dim " + std::to_string(d) + " not divisible by bits " +
                      std::to_string(bits));
  }
  for (const auto& w : projections) {
    if (w.rows() != d || w.cols() != d) throw ConfigError("codec: projections must be d x d");
  }
}

template <class T>
CodecParams<T> make_codec(int dim, int bits, int subtables, std::mt19937_64& rng) {
  CodecParams<T> params;
  params.bits = bits;
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(dim)));
  for (int s = 0; s < subtables; ++s) {
    Eigen::MatrixXd g(dim, dim);
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
    params.projections.push_back(q.cast<T>());
  }
  params.validate();
  return params;
}

template <class T>
DiscretizeResult<T> discretize(const Matrix<T>& hidden, const CodecParams<T>& params) {
  params.validate();
  const int d = params.dim();
  if (hidden.cols() != d) {
    throw DimensionError("discretize: hidden has " + std::to_string(hidden.cols()) +
                         " columns, codec expects " + std::to_string(d));
  }
  DiscretizeResult<T> out;
  out.normalized = rmsnorm_rows(hidden, params.eps, &out.inv_rms);
  const int positions = int(hidden.rows());
  out.bits = BitGrid(positions, d, params.subtables());
  out.logits.reserve(params.projections.size());
  for (int s = 0; s < params.subtables(); ++s) {
    out.logits.push_back(out.normalized * params.projections[s]);
    const auto& z = out.logits.back();
    for (int t = 0; t < positions; ++t) {
      for (int c = 0; c < d; ++c) {
        out.bits.at(s, t, c) = z(t, c) > T(0) ? 1 : 0;
      }
    }
  }
  return out;
}

SymbolGrid pack_routes(const BitGrid& bits, int bits_per_route) {
  if (bits_per_route < 1 || bits_per_route > kMaxBitsPerRoute) {
    throw ConfigError("pack_routes: bits per route out of range");
  }
  if (bits.dim() % bits_per_route != 0) {
    throw ConfigError("pack_routes: dim " + std::to_string(bits.dim()) + " not divisible by " +
                      std::to_string(bits_per_route));
  }
  const int routes = bits.dim() / bits_per_route;
  SymbolGrid grid(bits.positions(), routes, bits.subtables(), bits_per_route);
  for (int s = 0; s < bits.subtables(); ++s) {
    for (int t = 0; t < bits.positions(); ++t) {
      for (int r = 0; r < routes; ++r) {
        Symbol a = 0;
        for (int j = 0; j < bits_per_route; ++j) {
          a |= Symbol(bits.at(s, t, r * bits_per_route + j)) << j;
        }
        grid.at(s, t, r) = a;
      }
    }
  }
  return grid;
}

template struct CodecParams<float>;
template struct CodecParams<double>;
template CodecParams<float> make_codec<float>(int, int, int, std::mt19937_64&);
template CodecParams<double> make_codec<double>(int, int, int, std::mt19937_64&);
template DiscretizeResult<float> discretize<float>(const Matrix<float>&, const CodecParams<float>&);
template DiscretizeResult<double> discretize<double>(const Matrix<double>&, const CodecParams<double>&);

}  // namespace lngram
