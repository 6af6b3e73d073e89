// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_CHECKPOINT_HPP
#define TMCAST_CHECKPOINT_HPP

#include <filesystem>
#include <string>

#include <json.hpp>

#include "tmcast/forecaster.hpp"

// Binary checkpoint: 8-byte magic, u32 version, u64 header length, JSON
// header (config snapshot, sections, tensor shapes and offsets, per-section
// SHA-256), then raw little-endian float64 data.
namespace tmcast::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Hex SHA-256 over the canonical serialization of one section: for every
/// tensor in registration order, its name, a NUL, the shape as int64 values
/// and the float64 data, all little-endian.
std::string section_checksum(const nn::ParamStore& store, const std::string& section);
std::string sha256_hex(const void* data, std::size_t size);

/// `metadata` is stored verbatim in the header (training summary etc.).
void save_checkpoint(const std::filesystem::path& path, const model::Forecaster& model,
                     const nlohmann::json& config_snapshot,
                     const nlohmann::json& metadata = nlohmann::json::object());

/// Header only (for inspection).
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

/// Header summary with per-section parameter counts and checksums
/// recomputed from the stored data ("verified").
nlohmann::json inspect_checkpoint(const std::filesystem::path& path);

/// Copies every stored tensor into the matching model parameter and restores
/// the noise schedule. Verifies section checksums and shapes.
void load_parameters(const std::filesystem::path& path, model::Forecaster& model);

/// Loads only the `backbone` section of a checkpoint into `store`.
void load_backbone_section(const std::filesystem::path& path, nn::ParamStore& store);

}  // namespace tmcast::io

#endif  // TMCAST_CHECKPOINT_HPP
