#pragma once

// Checkpoint container: a text header listing every parameter's name, shape,
// dtype and byte offset plus the config hash, then little-endian float32 blobs.
//
//   LNGRAM-CKPT 1
//   config_hash 0123456789abcdef
//   config <DecoderConfig::describe()>
//   meta <free text>            (zero or more)
//   param <name> <group> <rows> <cols> f32 <offset>
//   end
//   <blobs>

#include <string>
#include <vector>

#include "lngram/backbone.hpp"

namespace lngram {

struct CheckpointInfo {
  std::uint64_t config_hash = 0;
  std::string config;
  std::vector<std::string> meta;
};

void save_checkpoint(const std::string& path, const Decoder<float>& model, const std::vector<std::string>& meta = {});

// Loads parameters for config. Throws LoadError on hash mismatch, missing or
// misshaped parameters, or truncation; nothing is returned in that case.
Decoder<float> load_checkpoint(const std::string& path, const DecoderConfig& config, CheckpointInfo* info = nullptr);

CheckpointInfo read_checkpoint_info(const std::string& path);

}  // namespace lngram
