#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "stresstomo/field.hpp"

namespace stresstomo {

/// STF1 rank codes.
enum class FieldRank : std::uint8_t { scalar = 0, covector = 1, symmetric = 2 };

constexpr FieldRank rank_of_components(int nc) {
  return nc == 1 ? FieldRank::scalar : (nc == 3 ? FieldRank::covector : FieldRank::symmetric);
}

/// Binary field file: "STF1", u8 rank, u32 x3 dims, f64 x3 spacing, f64 x3 origin, u8 domain code with
/// its parameters (box: lower, upper; ball: center, radius), then little-endian f64 values node-major.
template <int NC>
void write_field(const std::string& path, const Field<NC>& field);

template <int NC>
Field<NC> read_field(const std::string& path);

/// Rank stored in a field file header.
FieldRank field_file_rank(const std::string& path);

/// 64-bit FNV-1a over the canonical (sorted-key, compact) JSON dump.
std::uint64_t config_hash(const nlohmann::json& j);
std::string hash_hex(std::uint64_t h);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace stresstomo
