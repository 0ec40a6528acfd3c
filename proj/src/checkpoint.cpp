#include "lngram/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lngram/binary_io.hpp"

namespace lngram {

namespace {

constexpr const char* kMagic = "LNGRAM-CKPT 1";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Entry {
  std::string group;
  Eigen::Index rows = 0, cols = 0;
  std::uint64_t offset = 0;
};

CheckpointInfo read_header(std::istream& is, std::map<std::string, Entry>* entries) {
  CheckpointInfo info;
  std::string line;
  if (!std::getline(is, line) || line != kMagic) throw LoadError("checkpoint: bad magic");
  bool ended = false;
  while (std::getline(is, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    const auto sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (key == "config_hash") {
      try {
        info.config_hash = std::stoull(rest, nullptr, 16);
      } catch (const std::exception&) {
        throw LoadError("checkpoint: bad config hash");
      }
    } else if (key == "config") {
      info.config = rest;
    } else if (key == "meta") {
      info.meta.push_back(rest);
    } else if (key == "param") {
      std::istringstream ss(rest);
      std::string name, dtype;
      Entry e;
      if (!(ss >> name >> e.group >> e.rows >> e.cols >> dtype >> e.offset) || dtype != "f32") {
        throw LoadError("checkpoint: malformed param line");
      }
      if (entries) (*entries)[name] = e;
    } else {
      throw LoadError("checkpoint: unknown header key '" + key + "'");
    }
  }
  if (!ended) throw LoadError("checkpoint: truncated header");
  return info;
}

}  // namespace

void save_checkpoint(const std::string& path, const Decoder<float>& model, const std::vector<std::string>& meta) {
  std::ostringstream header;
  header << kMagic << '\n';
  header << "config_hash " << hex64(model.config().hash()) << '\n';
  header << "config " << model.config().describe() << '\n';
  for (const auto& m : meta) header << "meta " << m << '\n';
  std::uint64_t offset = 0;
  for_each_param(model.params(), [&](const std::string& name, ParamGroup group, const Matrix<float>& m) {
    header << "param " << name << ' ' << to_string(group) << ' ' << m.rows() << ' ' << m.cols() << " f32 " << offset
           << '\n';
    offset += std::uint64_t(m.size()) * 4;
  });
  header << "end\n";
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw InputError("checkpoint: cannot write " + path);
    os << header.str();
    for_each_param(model.params(), [&](const std::string&, ParamGroup, const Matrix<float>& m) {
      io::write_f32(os, std::span<const float>(m.data(), std::size_t(m.size())));
    });
    if (!os) throw InputError("checkpoint: write failed for " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw InputError("checkpoint: cannot move into " + path);
}

CheckpointInfo read_checkpoint_info(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("checkpoint: cannot open " + path);
  return read_header(is, nullptr);
}

Decoder<float> load_checkpoint(const std::string& path, const DecoderConfig& config, CheckpointInfo* info) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("checkpoint: cannot open " + path);
  std::map<std::string, Entry> entries;
  CheckpointInfo header = read_header(is, &entries);
  DecoderConfig cfg = config;
  cfg.lngram.dim = cfg.dim;
  if (header.config_hash != cfg.hash()) {
    throw LoadError("checkpoint: config hash mismatch (file " + hex64(header.config_hash) + ", expected " +
                    hex64(cfg.hash()) + ")");
  }
  const std::streampos data_start = is.tellg();
  // Shapes come from a freshly built model; values are overwritten below.
  DecoderConfig shape_cfg = cfg;
  DecoderParams<float> params = Decoder<float>(shape_cfg, 0).params();
  std::size_t seen = 0;
  for_each_param(params, [&](const std::string& name, ParamGroup group, Matrix<float>& m) {
    const auto it = entries.find(name);
    if (it == entries.end()) throw LoadError("checkpoint: missing parameter " + name);
    const Entry& e = it->second;
    if (e.rows != m.rows() || e.cols != m.cols() || e.group != to_string(group)) {
      throw LoadError("checkpoint: shape or group mismatch for " + name);
    }
    is.seekg(data_start + std::streamoff(e.offset));
    if (!is) throw LoadError("checkpoint: truncated data for " + name);
    try {
      io::read_f32(is, std::span<float>(m.data(), std::size_t(m.size())));
    } catch (const LoadError&) {
      throw LoadError("checkpoint: truncated data for " + name);
    }
    ++seen;
  });
  if (seen != entries.size()) throw LoadError("checkpoint: unexpected extra parameters");
  if (info) *info = header;
  return Decoder<float>(cfg, std::move(params));
}

}  // namespace lngram
