#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tnz/network.hpp"
#include "tnz/tensor.hpp"

namespace tnz {

/// Single-file container:
///
///   offset 0   magic "TNZ1"
///   offset 4   u32 LE version (= 1)
///   offset 8   u64 LE manifest length in bytes
///   offset 16  manifest, UTF-8 JSON
///   then       zero padding to an 8-byte boundary, followed by the data
///              region. Tensor offsets are relative to the data region start,
///              8-byte aligned, and each block is zero-padded to 8 bytes.
///
/// Manifest schema:
///   { "tensors":  [ { "name", "shape", "labels", "roles", "dtype": "f64"|"f32",
///                     "offset", "length" } ],
///     "networks": [ { "name", "kind", "tensors": [names],
///                     "bonds": [[tensor, label, tensor, label]], "meta": {} } ] }
/// Fields the reader does not know are kept and written back unchanged.
inline constexpr std::uint32_t container_version = 1;

enum class ElementType { f64, f32 };

struct TensorEntry {
  std::string name;
  DenseTensor tensor;
  ElementType dtype = ElementType::f64;
  nlohmann::json extra = nlohmann::json::object();
};

struct NetworkEntry {
  std::string name;
  std::string kind;  // dense|mps|mpo|tucker|cp|general|stack|plan
  std::vector<std::string> tensors;
  std::vector<Bond> bonds;
  nlohmann::json meta = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();
};

struct Container {
  std::vector<TensorEntry> tensors;
  std::vector<NetworkEntry> networks;
  nlohmann::json extra = nlohmann::json::object();

  const TensorEntry& tensor(const std::string& name) const;
  const NetworkEntry* find_network(const std::string& name) const;
  void add_tensor(std::string name, DenseTensor t, ElementType dtype = ElementType::f64);
  /// Every tensor entry written as f32 (or f64).
  void set_dtype(ElementType dtype);
};

bool is_known_kind(const std::string& kind);

std::vector<std::uint8_t> write_container(const Container& c);
Container read_container(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace tnz
