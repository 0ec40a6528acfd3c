#pragma once

// Exact route-partitioned n-gram tables.
//
// All routes of one order share a physical table; route r owns the address
// range [r K^n, (r+1) K^n). Within a window the oldest symbol carries weight
// K^0 and the newest K^(n-1), so addressing is injective and collision free.
//
// Positions are 0-based in code. The paper-style 1-based rule "t >= n" becomes
// "t >= n - 1" here, applied to the position inside each sequence.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "lngram/codec.hpp"

namespace lngram {

struct TableAddress {
  std::uint64_t value = 0;
  friend bool operator==(TableAddress, TableAddress) = default;
};

// R * K^n with overflow detection; throws CapacityError.
std::uint64_t checked_table_rows(int routes, std::uint32_t symbols, int order);

// r K^n + sum_i window[i] K^i, window ordered oldest first.
TableAddress compute_address(int route, std::span<const Symbol> window, std::uint32_t symbols);

template <class T>
struct MemoryTable {
  int order = 1;
  int routes = 1;
  std::uint32_t symbols = 2;
  int dim = 1;
  // Physical rows may exceed R K^n (padding for capacity experiments);
  // addresses only ever touch the first R K^n rows.
  Matrix<T> entries;

  MemoryTable() = default;
  MemoryTable(int order, int routes, std::uint32_t symbols, int dim, std::uint64_t row_padding = 1);

  std::uint64_t logical_rows() const { return checked_table_rows(routes, symbols, order); }
  std::uint64_t physical_rows() const { return std::uint64_t(entries.rows()); }

  auto row(TableAddress a) const { return entries.row(Eigen::Index(a.value)); }
  auto row(TableAddress a) { return entries.row(Eigen::Index(a.value)); }
};

template <class T>
struct RetrievalResult {
  Vector<T> values;  // R * d_m, route-major
  bool valid = false;
};

// Retrieval of one order for one subtable at 1-based position t of a single
// sequence. Invalid (t < n) results are all zero.
template <class T>
RetrievalResult<T> retrieve_order(const SymbolGrid& symbols, int subtable, const MemoryTable<T>& table,
                                  int position_1based);

template <class T>
struct MultiTableBank {
  std::vector<int> orders;
  // groups[s][k] is the table of order orders[k] for subtable s.
  std::vector<std::vector<MemoryTable<T>>> groups;

  int subtables() const { return int(groups.size()); }
  const MemoryTable<T>& table(int s, int k) const { return groups[s][k]; }
  MemoryTable<T>& table(int s, int k) { return groups[s][k]; }

  void validate() const;
};

template <class T>
MultiTableBank<T> make_bank(int subtables, const std::vector<int>& orders, int routes, int bits, int dim,
                            std::mt19937_64& rng, double init_std = 0.02, std::uint64_t row_padding = 1);

// Retrieval for every (position, subtable, order). Rows of the grid are split
// into sequences of seq_len positions.
template <class T>
struct RetrievalSet {
  int positions = 0;
  int seq_len = 0;
  std::vector<int> orders;
  // values[s][k]: positions x (R d_m); invalid rows are zero.
  std::vector<std::vector<Matrix<T>>> values;
  // addresses[s][k][t * R + r]; meaningful only where valid.
  std::vector<std::vector<std::vector<std::uint64_t>>> addresses;

  bool valid(int t, int k) const { return (t % seq_len) >= orders[k] - 1; }
};

// route_block is the number of routes gathered per pass; results do not
// depend on it.
template <class T>
RetrievalSet<T> retrieve_all(const SymbolGrid& symbols, const MultiTableBank<T>& bank, int route_block,
                             int seq_len = -1);

// Binary shard: "LNGRAMTB", u32 version, u32 n, u32 R, u32 K, u32 d_m,
// u64 physical rows, then rows x d_m little-endian float32.
void write_table_shard(const std::filesystem::path& path, const MemoryTable<float>& table);
MemoryTable<float> read_table_shard(const std::filesystem::path& path);

}  // namespace lngram
