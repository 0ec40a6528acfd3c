#include "lngram/memory.hpp"

#include <fstream>
#include <limits>
#include <string>

#include "lngram/binary_io.hpp"

namespace lngram {

namespace {

constexpr char kShardMagic[8] = {'L', 'N', 'G', 'R', 'A', 'M', 'T', 'B'};
constexpr std::uint32_t kShardVersion = 1;

bool mul_overflows(std::uint64_t a, std::uint64_t b, std::uint64_t& out) {
  return __builtin_mul_overflow(a, b, &out);
}

}  // namespace

std::uint64_t checked_table_rows(int routes, std::uint32_t symbols, int order) {
  if (routes < 1 || symbols < 2 || order < 1) {
    throw ConfigError("table shape: routes >= 1, symbols >= 2, order >= 1 required");
  }
  std::uint64_t rows = std::uint64_t(routes);
  for (int i = 0; i < order; ++i) {
    if (mul_overflows(rows, symbols, rows)) {
      throw CapacityError("table of order " + std::to_string(order) + " with " + std::to_string(routes) +
                          " routes and alphabet " + std::to_string(symbols) + " exceeds 64-bit addressing");
    }
  }
  return rows;
}

TableAddress compute_address(int route, std::span<const Symbol> window, std::uint32_t symbols) {
  const int order = int(window.size());
  if (order < 1) throw ParameterError("compute_address: empty window");
  if (route < 0) throw ParameterError("compute_address: negative route");
  // Capacity for routes 0..route must fit, which also bounds every partial sum.
  const std::uint64_t span_end = checked_table_rows(route + 1, symbols, order);
  (void)span_end;
  std::uint64_t weight = 1;
  std::uint64_t offset = 0;
  for (int i = 0; i < order; ++i) {
    if (window[i] >= symbols) throw ParameterError("compute_address: symbol outside alphabet");
    offset += std::uint64_t(window[i]) * weight;
    weight *= symbols;
  }
  return TableAddress{std::uint64_t(route) * weight + offset};
}

template <class T>
MemoryTable<T>::MemoryTable(int order_, int routes_, std::uint32_t symbols_, int dim_, std::uint64_t row_padding)
    : order(order_), routes(routes_), symbols(symbols_), dim(dim_) {
  if (dim < 1) throw ConfigError("memory table: d_m must be >= 1");
  if (row_padding < 1) throw ConfigError("memory table: row padding must be >= 1");
  std::uint64_t rows = checked_table_rows(routes, symbols, order);
  if (mul_overflows(rows, row_padding, rows) ||
      rows > std::uint64_t(std::numeric_limits<Eigen::Index>::max()) / std::uint64_t(dim)) {
    throw CapacityError("memory table: row count too large to materialize");
  }
  entries = Matrix<T>::Zero(Eigen::Index(rows), dim);
}

template <class T>
RetrievalResult<T> retrieve_order(const SymbolGrid& symbols, int subtable, const MemoryTable<T>& table,
                                  int position_1based) {
  const int n = table.order;
  if (position_1based < 1 || position_1based > symbols.positions()) {
    throw ParameterError("retrieve_order: position out of range");
  }
  if (symbols.routes() != table.routes || symbols.alphabet() != table.symbols) {
    throw DimensionError("retrieve_order: symbol grid does not match table shape");
  }
  RetrievalResult<T> out;
  out.values = Vector<T>::Zero(Eigen::Index(table.routes) * table.dim);
  if (position_1based < n) return out;
  out.valid = true;
  const int last = position_1based - 1;
  std::vector<Symbol> window(n);
  for (int r = 0; r < table.routes; ++r) {
    for (int i = 0; i < n; ++i) window[i] = symbols.at(subtable, last - n + 1 + i, r);
    const TableAddress a = compute_address(r, window, table.symbols);
    if (a.value >= table.logical_rows()) std::abort();
    out.values.segment(Eigen::Index(r) * table.dim, table.dim) = table.row(a).transpose();
  }
  return out;
}

template <class T>
void MultiTableBank<T>::validate() const {
  if (groups.empty()) throw ConfigError("bank: at least one subtable required");
  if (orders.empty()) throw ConfigError("bank: at least one order required");
  const auto& ref = groups.front().front();
  for (const auto& group : groups) {
    if (group.size() != orders.size()) throw ConfigError("bank: every subtable needs one table per order");
    for (std::size_t k = 0; k < group.size(); ++k) {
      const auto& tb = group[k];
      if (tb.order != orders[k] || tb.routes != ref.routes || tb.symbols != ref.symbols || tb.dim != ref.dim) {
        throw ConfigError("bank: subtables must share (R, K, d_m, orders)");
      }
    }
  }
}

template <class T>
MultiTableBank<T> make_bank(int subtables, const std::vector<int>& orders, int routes, int bits, int dim,
                            std::mt19937_64& rng, double init_std, std::uint64_t row_padding) {
  MultiTableBank<T> bank;
  bank.orders = orders;
  const std::uint32_t symbols = std::uint32_t(1) << bits;
  std::normal_distribution<double> normal(0.0, init_std);
  for (int s = 0; s < subtables; ++s) {
    std::vector<MemoryTable<T>> group;
    for (int n : orders) {
      MemoryTable<T> table(n, routes, symbols, dim, row_padding);
      if (init_std > 0.0) {
        const Eigen::Index live = Eigen::Index(table.logical_rows()) * dim;
        T* data = table.entries.data();
        for (Eigen::Index i = 0; i < live; ++i) data[i] = T(normal(rng));
      }
      group.push_back(std::move(table));
    }
    bank.groups.push_back(std::move(group));
  }
  bank.validate();
  return bank;
}

template <class T>
RetrievalSet<T> retrieve_all(const SymbolGrid& symbols, const MultiTableBank<T>& bank, int route_block,
                             int seq_len) {
  if (route_block < 1) throw ParameterError("retrieve_all: block must be >= 1");
  const int positions = symbols.positions();
  if (seq_len < 0) seq_len = positions;
  if (seq_len < 1 || positions % seq_len != 0) {
    throw DimensionError("retrieve_all: positions not a multiple of seq_len");
  }
  if (symbols.subtables() != bank.subtables()) throw DimensionError("retrieve_all: subtable count mismatch");
  const int routes = symbols.routes();
  const auto& ref = bank.table(0, 0);
  if (routes != ref.routes || symbols.alphabet() != ref.symbols) {
    throw DimensionError("retrieve_all: symbol grid does not match bank shape");
  }
  const int dm = ref.dim;
  const std::uint64_t K = ref.symbols;

  RetrievalSet<T> out;
  out.positions = positions;
  out.seq_len = seq_len;
  out.orders = bank.orders;
  out.values.resize(bank.subtables());
  out.addresses.resize(bank.subtables());
  for (int s = 0; s < bank.subtables(); ++s) {
    for (std::size_t k = 0; k < bank.orders.size(); ++k) {
      const auto& table = bank.table(s, int(k));
      const int n = table.order;
      const std::uint64_t route_stride = table.logical_rows() / std::uint64_t(routes);
      Matrix<T> vals = Matrix<T>::Zero(positions, Eigen::Index(routes) * dm);
      std::vector<std::uint64_t> addr(std::size_t(positions) * routes, 0);
      for (int r0 = 0; r0 < routes; r0 += route_block) {
        const int r1 = std::min(routes, r0 + route_block);
        for (int t = 0; t < positions; ++t) {
          if (t % seq_len < n - 1) continue;
          for (int r = r0; r < r1; ++r) {
            std::uint64_t a = std::uint64_t(r) * route_stride;
            std::uint64_t w = 1;
            for (int i = 0; i < n; ++i) {
              a += std::uint64_t(symbols.at(s, t - n + 1 + i, r)) * w;
              w *= K;
            }
            addr[std::size_t(t) * routes + r] = a;
            vals.block(t, Eigen::Index(r) * dm, 1, dm) = table.entries.row(Eigen::Index(a));
          }
        }
      }
      out.values[s].push_back(std::move(vals));
      out.addresses[s].push_back(std::move(addr));
    }
  }
  return out;
}

void write_table_shard(const std::filesystem::path& path, const MemoryTable<float>& table) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open " + path.string() + " for writing");
  os.write(kShardMagic, sizeof(kShardMagic));
  io::write_le<std::uint32_t>(os, kShardVersion);
  io::write_le<std::uint32_t>(os, std::uint32_t(table.order));
  io::write_le<std::uint32_t>(os, std::uint32_t(table.routes));
  io::write_le<std::uint32_t>(os, table.symbols);
  io::write_le<std::uint32_t>(os, std::uint32_t(table.dim));
  io::write_le<std::uint64_t>(os, table.physical_rows());
  io::write_f32(os, std::span<const float>(table.entries.data(), std::size_t(table.entries.size())));
  if (!os) throw InputError("write failed: " + path.string());
}

MemoryTable<float> read_table_shard(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kShardMagic, sizeof(magic)) != 0) {
    throw LoadError("not a table shard: " + path.string());
  }
  if (io::read_le<std::uint32_t>(is) != kShardVersion) throw LoadError("unsupported shard version");
  const int order = int(io::read_le<std::uint32_t>(is));
  const int routes = int(io::read_le<std::uint32_t>(is));
  const std::uint32_t symbols = io::read_le<std::uint32_t>(is);
  const int dim = int(io::read_le<std::uint32_t>(is));
  const std::uint64_t rows = io::read_le<std::uint64_t>(is);
  const std::uint64_t logical = checked_table_rows(routes, symbols, order);
  if (rows < logical || rows % logical != 0) throw LoadError("shard row count inconsistent with header");
  MemoryTable<float> table(order, routes, symbols, dim, rows / logical);
  io::read_f32(is, std::span<float>(table.entries.data(), std::size_t(table.entries.size())));
  return table;
}

template struct MemoryTable<float>;
template struct MemoryTable<double>;
template struct MultiTableBank<float>;
template struct MultiTableBank<double>;
template RetrievalResult<float> retrieve_order<float>(const SymbolGrid&, int, const MemoryTable<float>&, int);
template RetrievalResult<double> retrieve_order<double>(const SymbolGrid&, int, const MemoryTable<double>&, int);
template MultiTableBank<float> make_bank<float>(int, const std::vector<int>&, int, int, int, std::mt19937_64&,
                                                double, std::uint64_t);
template MultiTableBank<double> make_bank<double>(int, const std::vector<int>&, int, int, int, std::mt19937_64&,
                                                  double, std::uint64_t);
template RetrievalSet<float> retrieve_all<float>(const SymbolGrid&, const MultiTableBank<float>&, int, int);
template RetrievalSet<double> retrieve_all<double>(const SymbolGrid&, const MultiTableBank<double>&, int, int);

}  // namespace lngram
