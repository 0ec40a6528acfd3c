#pragma once

// Hidden state -> multi-route binary symbol streams.
//
// Rows of H are normalized (gain-free rmsnorm), projected by an independent
// d x d matrix per subtable, thresholded at zero and packed little-endian in
// contiguous blocks of M channels: channel c belongs to route c / M and
// carries weight 2^(c % M).

#include <cstdint>
#include <random>
#include <vector>

#include "lngram/numerics.hpp"

namespace lngram {

inline constexpr int kMaxBitsPerRoute = 16;

using Symbol = std::uint32_t;

struct RouteChannel {
  int route;
  int bit;
};

inline RouteChannel channel_to_route(int channel, int bits) { return {channel / bits, channel % bits}; }
inline int route_to_channel(RouteChannel rc, int bits) { return rc.route * bits + rc.bit; }

template <class T>
struct CodecParams {
  int bits = 4;
  T eps = T(kDefaultRmsEps);
  // One d x d projection per subtable, applied as Z = U * W.
  std::vector<Matrix<T>> projections;

  int dim() const { return projections.empty() ? 0 : int(projections.front().rows()); }
  int routes() const { return dim() / bits; }
  int subtables() const { return int(projections.size()); }
  std::uint32_t symbols() const { return std::uint32_t(1) << bits; }

  // Throws ConfigError when d is not divisible by M or shapes disagree.
  void validate() const;
};

// Random orthogonal projections (QR of a Gaussian draw), so that the initial
// bit distribution is balanced.
template <class T>
CodecParams<T> make_codec(int dim, int bits, int subtables, std::mt19937_64& rng);

class BitGrid {
 public:
  BitGrid() = default;
  BitGrid(int positions, int dim, int subtables)
      : positions_(positions), dim_(dim), subtables_(subtables),
        bits_(std::size_t(positions) * dim * subtables, 0) {}

  int positions() const { return positions_; }
  int dim() const { return dim_; }
  int subtables() const { return subtables_; }

  std::uint8_t at(int s, int t, int c) const { return bits_[index(s, t, c)]; }
  std::uint8_t& at(int s, int t, int c) { return bits_[index(s, t, c)]; }

 private:
  std::size_t index(int s, int t, int c) const {
    return (std::size_t(s) * positions_ + t) * dim_ + c;
  }
  int positions_ = 0;
  int dim_ = 0;
  int subtables_ = 0;
  std::vector<std::uint8_t> bits_;
};

class SymbolGrid {
 public:
  SymbolGrid() = default;
  SymbolGrid(int positions, int routes, int subtables, int bits)
      : positions_(positions), routes_(routes), subtables_(subtables), bits_(bits),
        symbols_(std::size_t(positions) * routes * subtables, 0) {}

  int positions() const { return positions_; }
  int routes() const { return routes_; }
  int subtables() const { return subtables_; }
  int bits() const { return bits_; }
  std::uint32_t alphabet() const { return std::uint32_t(1) << bits_; }

  Symbol at(int s, int t, int r) const { return symbols_[index(s, t, r)]; }
  Symbol& at(int s, int t, int r) { return symbols_[index(s, t, r)]; }

  const std::vector<Symbol>& raw() const { return symbols_; }

  friend bool operator==(const SymbolGrid&, const SymbolGrid&) = default;

 private:
  std::size_t index(int s, int t, int r) const {
    return (std::size_t(s) * positions_ + t) * routes_ + r;
  }
  int positions_ = 0;
  int routes_ = 0;
  int subtables_ = 0;
  int bits_ = 0;
  std::vector<Symbol> symbols_;
};

template <class T>
struct DiscretizeResult {
  Matrix<T> normalized;             // U = rmsnorm(H)
  Vector<T> inv_rms;                // per-row 1/rms of H
  std::vector<Matrix<T>> logits;    // Z^(s) = U W^(s)
  BitGrid bits;                     // 1 iff logit > 0
};

template <class T>
DiscretizeResult<T> discretize(const Matrix<T>& hidden, const CodecParams<T>& params);

SymbolGrid pack_routes(const BitGrid& bits, int bits_per_route);

}  // namespace lngram
