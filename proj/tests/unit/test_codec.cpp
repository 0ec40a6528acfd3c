#include <random>

#include "doctest.h"
#include "lngram/codec.hpp"

using namespace lngram;

namespace {

Matrix<double> gauss(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

CodecParams<double> identity_codec(int dim, int bits) {
  CodecParams<double> p;
  p.bits = bits;
  p.projections = {Matrix<double>::Identity(dim, dim)};
  return p;
}

}  // namespace

TEST_SUITE("codec") {

TEST_CASE("identity projection follows signs") {
  Matrix<double> h(1, 4);
  h << 1, -1, 2, -3;
  const auto r = discretize(h, identity_codec(4, 2));
  CHECK(r.bits.at(0, 0, 0) == 1);
  CHECK(r.bits.at(0, 0, 1) == 0);
  CHECK(r.bits.at(0, 0, 2) == 1);
  CHECK(r.bits.at(0, 0, 3) == 0);
}

TEST_CASE("zero logit gives bit 0") {
  Matrix<double> h(1, 4);
  h << 0, 1, 0, -1;
  const auto r = discretize(h, identity_codec(4, 4));
  CHECK(r.logits[0](0, 0) == 0.0);
  CHECK(r.bits.at(0, 0, 0) == 0);
  CHECK(r.bits.at(0, 0, 1) == 1);
  CHECK(r.bits.at(0, 0, 2) == 0);
}

TEST_CASE("bits match a scalar recomputation") {
  std::mt19937_64 rng(11);
  auto codec = make_codec<double>(8, 2, 3, rng);
  const Matrix<double> h = gauss(10, 8, rng);
  const auto r = discretize(h, codec);
  for (int t = 0; t < 10; ++t) {
    double ms = 0.0;
    for (int c = 0; c < 8; ++c) ms += h(t, c) * h(t, c);
    const double inv = 1.0 / std::sqrt(ms / 8.0 + codec.eps);
    for (int s = 0; s < 3; ++s) {
      for (int c = 0; c < 8; ++c) {
        double z = 0.0;
        for (int i = 0; i < 8; ++i) z += h(t, i) * inv * codec.projections[s](i, c);
        CHECK(r.bits.at(s, t, c) == (z > 0.0 ? 1 : 0));
      }
    }
  }
}

TEST_CASE("packing examples") {
  BitGrid b(3, 4, 1);
  const int pattern[4] = {1, 0, 0, 1};
  for (int c = 0; c < 4; ++c) {
    b.at(0, 0, c) = std::uint8_t(pattern[c]);
    b.at(0, 2, c) = 1;
  }
  const SymbolGrid g = pack_routes(b, 4);
  CHECK(g.routes() == 1);
  CHECK(g.at(0, 0, 0) == 9u);
  CHECK(g.at(0, 1, 0) == 0u);
  CHECK(g.at(0, 2, 0) == 15u);
}

TEST_CASE("symbols stay in range and are deterministic") {
  std::mt19937_64 rng(12);
  auto codec = make_codec<double>(12, 3, 2, rng);
  const Matrix<double> h = gauss(40, 12, rng);
  const SymbolGrid a = pack_routes(discretize(h, codec).bits, 3);
  const SymbolGrid b = pack_routes(discretize(h, codec).bits, 3);
  CHECK(a == b);
  for (Symbol s : a.raw()) CHECK(s < 8u);
}

TEST_CASE("channel partition round-trips") {
  for (int bits : {1, 2, 4, 8}) {
    for (int c = 0; c < 64; ++c) {
      const RouteChannel rc = channel_to_route(c, bits);
      CHECK(rc.bit < bits);
      CHECK(route_to_channel(rc, bits) == c);
    }
  }
}

TEST_CASE("subtables are independent") {
  std::mt19937_64 rng(13);
  auto codec = make_codec<double>(8, 4, 3, rng);
  const Matrix<double> h = gauss(20, 8, rng);
  const SymbolGrid before = pack_routes(discretize(h, codec).bits, 4);
  codec.projections[1] = gauss(8, 8, rng);
  const SymbolGrid after = pack_routes(discretize(h, codec).bits, 4);
  int changed = 0;
  for (int t = 0; t < 20; ++t) {
    for (int r = 0; r < 2; ++r) {
      CHECK(before.at(0, t, r) == after.at(0, t, r));
      CHECK(before.at(2, t, r) == after.at(2, t, r));
      changed += before.at(1, t, r) != after.at(1, t, r);
    }
  }
  CHECK(changed > 0);
}

TEST_CASE("codec validation") {
  CodecParams<double> p = identity_codec(6, 4);
  CHECK_THROWS_AS(p.validate(), ConfigError);
  std::mt19937_64 rng(1);
  const auto q = make_codec<double>(8, 4, 1, rng);
  CHECK((q.projections[0].transpose() * q.projections[0]).isIdentity(1e-12));
}

}
