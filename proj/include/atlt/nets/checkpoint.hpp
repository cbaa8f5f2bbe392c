#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "atlt/nets/model.hpp"

namespace atlt::nets {

// Binary checkpoint layout, all integers little-endian:
//
//   "ATLT"                      4 magic bytes
//   u32 version                 kCheckpointVersion
//   u32 n, n bytes              JSON {"model": ModelSpec, "meta": {...}}
//   u32 count                   number of parameter blobs
//   count x {
//     u32 n, n bytes            parameter name
//     u32 rank, rank x u32      shape
//     u32 m, m x f32            values
//   }
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model<float> model;
  nlohmann::json meta = nlohmann::json::object();
};

std::vector<unsigned char> encode_checkpoint(const Model<float>& model, const nlohmann::json& meta);
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, const nlohmann::json& meta = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Digest of the encoded bytes (hex).
std::string checkpoint_digest(const Model<float>& model, const nlohmann::json& meta);

}  // namespace atlt::nets
