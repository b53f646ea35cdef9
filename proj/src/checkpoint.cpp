#include "tabplus/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "tabplus/io.hpp"

namespace tabplus {

namespace {

using nlohmann::json;

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

const char* kind_name(StateEntry::Kind kind) {
  return kind == StateEntry::Kind::kParameter ? "parameter" : "buffer";
}

std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  auto blob = manifest;
  blob.replace_extension(".bin");
  return blob;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& manifest, std::span<const StateEntry> entries) {
  json items = json::array();
  std::string blob;
  std::size_t offset = 0;
  for (const auto& e : entries) {
    if (numel(e.shape) != e.data.size()) {
      throw ShapeError("save_checkpoint", e.shape, Shape{e.data.size()}, e.name);
    }
    items.push_back({{"name", e.name},
                     {"kind", kind_name(e.kind)},
                     {"shape", e.shape},
                     {"offset", offset},
                     {"count", e.data.size()}});
    for (double v : e.data) {
      const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
      char bytes[8];
      std::memcpy(bytes, &bits, 8);
      blob.append(bytes, 8);
    }
    offset += e.data.size() * 8;
  }
  const auto blob_file = blob_path(manifest);
  json doc = {{"format_version", kCheckpointFormatVersion},
              {"dtype", "float64-le"},
              {"blob", blob_file.filename().string()},
              {"blob_bytes", blob.size()},
              {"entries", items}};
  io::write_file_atomic(blob_file, blob);
  io::write_file_atomic(manifest, doc.dump(2) + "\n");
}

void load_checkpoint(const std::filesystem::path& manifest, std::span<const StateEntry> entries) {
  const json doc = json::parse(io::read_file(manifest));
  if (doc.at("format_version").get<std::string>() != kCheckpointFormatVersion) {
    throw std::runtime_error("unsupported checkpoint format version " +
                             doc.at("format_version").dump());
  }
  const std::string blob = io::read_file(manifest.parent_path() / doc.at("blob").get<std::string>());

  std::map<std::string, json> by_name;
  for (const auto& item : doc.at("entries")) by_name[item.at("name").get<std::string>()] = item;
  if (by_name.size() != entries.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(by_name.size()) +
                             " entries, model expects " + std::to_string(entries.size()));
  }
  for (const auto& e : entries) {
    auto it = by_name.find(e.name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint is missing entry '" + e.name + "'");
    const auto shape = it->second.at("shape").get<Shape>();
    if (shape != e.shape) throw ShapeError("load_checkpoint", e.shape, shape, e.name);
    const auto offset = it->second.at("offset").get<std::size_t>();
    const auto count = it->second.at("count").get<std::size_t>();
    if (count != e.data.size() || offset + count * 8 > blob.size()) {
      throw std::runtime_error("checkpoint entry '" + e.name + "' is truncated or inconsistent");
    }
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, blob.data() + offset + i * 8, 8);
      e.data[i] = std::bit_cast<double>(to_little_endian(bits));
    }
  }
}

}  // namespace tabplus
