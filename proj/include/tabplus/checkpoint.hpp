#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tabplus/tensor.hpp"

namespace tabplus {

/// A named view of model state to save or restore.
struct StateEntry {
  enum class Kind { kParameter, kBuffer };
  std::string name;
  Kind kind = Kind::kParameter;
  Shape shape;
  std::span<double> data;
};

inline constexpr const char* kCheckpointFormatVersion = "1";

/// Writes `<manifest>` (JSON: format_version "1", blob file name, and per
/// entry name/kind/shape/byte offset/count) plus a sibling `.bin` blob of
/// little-endian float64 values. Both files are written atomically.
void save_checkpoint(const std::filesystem::path& manifest, std::span<const StateEntry> entries);

/// Restores every entry from a checkpoint. Entry names and shapes must match
/// the manifest exactly (order-insensitive); extra or missing names throw.
void load_checkpoint(const std::filesystem::path& manifest, std::span<const StateEntry> entries);

}  // namespace tabplus
