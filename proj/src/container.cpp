#include "tnz/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

namespace tnz {

using nlohmann::json;

namespace {

constexpr char magic[4] = {'T', 'N', 'Z', '1'};
constexpr std::size_t header_size = 16;

constexpr std::size_t align8(std::size_t n) { return (n + 7) & ~std::size_t{7}; }

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t k = 0; k < sizeof(T); ++k)
    out.push_back(static_cast<std::uint8_t>((value >> (8 * k)) & 0xFF));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(p[k]) << (8 * k);
  return v;
}

std::size_t width(ElementType t) { return t == ElementType::f64 ? 8 : 4; }

const char* dtype_name(ElementType t) { return t == ElementType::f64 ? "f64" : "f32"; }

void encode(std::vector<std::uint8_t>& out, const DenseTensor& t, ElementType dtype) {
  for (double v : t.data()) {
    if (dtype == ElementType::f64) {
      put_le(out, std::bit_cast<std::uint64_t>(v));
    } else {
      put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
}

[[noreturn]] void manifest_error(const std::string& what) {
  fail(ErrorCode::manifest_mismatch, "container manifest: " + what);
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) manifest_error(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    manifest_error(std::string("field '") + key + "' has the wrong type");
  }
}

json without(const json& j, std::initializer_list<const char*> keys) {
  json out = j;
  for (const char* k : keys) out.erase(k);
  return out;
}

}  // namespace

const TensorEntry& Container::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  fail(ErrorCode::manifest_mismatch, "container has no tensor named '" + name + "'");
}

const NetworkEntry* Container::find_network(const std::string& name) const {
  for (const auto& n : networks)
    if (n.name == name) return &n;
  return nullptr;
}

void Container::add_tensor(std::string name, DenseTensor t, ElementType dtype) {
  for (const auto& e : tensors)
    require(e.name != name, ErrorCode::label_collision, "duplicate tensor name '" + name + "'");
  tensors.push_back({std::move(name), std::move(t), dtype, json::object()});
}

void Container::set_dtype(ElementType dtype) {
  for (auto& t : tensors) t.dtype = dtype;
}

bool is_known_kind(const std::string& kind) {
  static const std::set<std::string> kinds = {"dense", "mps",     "mpo",   "tucker",
                                              "cp",    "general", "stack", "plan"};
  return kinds.count(kind) > 0;
}

std::vector<std::uint8_t> write_container(const Container& c) {
  json manifest = c.extra.is_object() ? c.extra : json::object();
  json tensors = json::array();
  std::size_t offset = 0;
  std::set<std::string> names;
  for (const auto& t : c.tensors) {
    require(names.insert(t.name).second, ErrorCode::label_collision,
            "duplicate tensor name '" + t.name + "'");
    json e = t.extra.is_object() ? t.extra : json::object();
    json labels = json::array(), roles = json::array();
    for (const auto& idx : t.tensor.indices()) {
      labels.push_back(idx.label);
      roles.push_back(to_string(idx.role));
    }
    const std::size_t length = t.tensor.size() * width(t.dtype);
    e["name"] = t.name;
    e["shape"] = t.tensor.shape();
    e["labels"] = std::move(labels);
    e["roles"] = std::move(roles);
    e["dtype"] = dtype_name(t.dtype);
    e["offset"] = offset;
    e["length"] = length;
    tensors.push_back(std::move(e));
    offset += align8(length);
  }
  json networks = json::array();
  for (const auto& n : c.networks) {
    require(is_known_kind(n.kind), ErrorCode::invalid_argument, "unknown network kind '" + n.kind + "'");
    for (const auto& member : n.tensors)
      require(names.count(member) > 0, ErrorCode::manifest_mismatch,
              "network '" + n.name + "' references missing tensor '" + member + "'");
    json e = n.extra.is_object() ? n.extra : json::object();
    json bonds = json::array();
    for (const auto& b : n.bonds) bonds.push_back({b.node_a, b.label_a, b.node_b, b.label_b});
    e["name"] = n.name;
    e["kind"] = n.kind;
    e["tensors"] = n.tensors;
    e["bonds"] = std::move(bonds);
    e["meta"] = n.meta;
    networks.push_back(std::move(e));
  }
  manifest["tensors"] = std::move(tensors);
  manifest["networks"] = std::move(networks);
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out(magic, magic + 4);
  put_le(out, container_version);
  put_le(out, static_cast<std::uint64_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.resize(align8(out.size()), 0);
  for (const auto& t : c.tensors) {
    encode(out, t.tensor, t.dtype);
    out.resize(align8(out.size()), 0);
  }
  return out;
}

Container read_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < header_size) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), magic, 4) != 0)
      fail(ErrorCode::bad_magic, "not a TNZ1 container");
    fail(ErrorCode::truncated, "container shorter than its 16-byte header");
  }
  if (std::memcmp(bytes.data(), magic, 4) != 0) fail(ErrorCode::bad_magic, "not a TNZ1 container");
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != container_version)
    fail(ErrorCode::unsupported_version,
         "container version " + std::to_string(version) + " is not supported (expected 1)");
  const auto manifest_len = get_le<std::uint64_t>(bytes.data() + 8);
  if (manifest_len > bytes.size() - header_size)
    fail(ErrorCode::truncated, "manifest length exceeds the file size");

  json manifest;
  try {
    manifest = json::parse(bytes.begin() + header_size,
                           bytes.begin() + static_cast<std::ptrdiff_t>(header_size + manifest_len));
  } catch (const json::exception& e) {
    manifest_error(std::string("invalid JSON: ") + e.what());
  }
  if (!manifest.is_object()) manifest_error("top level must be an object");
  const std::size_t data_start = align8(header_size + manifest_len);

  Container c;
  c.extra = without(manifest, {"tensors", "networks"});
  const json tensors = manifest.value("tensors", json::array());
  const json networks = manifest.value("networks", json::array());
  if (!tensors.is_array() || !networks.is_array()) manifest_error("tensors/networks must be arrays");

  for (const auto& e : tensors) {
    TensorEntry t;
    t.name = field<std::string>(e, "name");
    const auto shape = field<Shape>(e, "shape");
    const auto labels = field<std::vector<std::string>>(e, "labels");
    const auto roles = field<std::vector<std::string>>(e, "roles");
    const auto dtype = field<std::string>(e, "dtype");
    const auto offset = field<std::uint64_t>(e, "offset");
    const auto length = field<std::uint64_t>(e, "length");
    if (labels.size() != shape.size() || roles.size() != shape.size())
      manifest_error("tensor '" + t.name + "' labels/roles do not match its shape");
    if (dtype == "f64") {
      t.dtype = ElementType::f64;
    } else if (dtype == "f32") {
      t.dtype = ElementType::f32;
    } else {
      manifest_error("tensor '" + t.name + "' has unknown dtype '" + dtype + "'");
    }
    const std::size_t count = shape_product(shape);
    if (length != count * width(t.dtype))
      manifest_error("tensor '" + t.name + "' byte length does not match its shape");
    if (offset % 8 != 0) manifest_error("tensor '" + t.name + "' offset is not 8-byte aligned");
    if (data_start > bytes.size() || offset > bytes.size() - data_start ||
        length > bytes.size() - data_start - offset)
      fail(ErrorCode::truncated, "data for tensor '" + t.name + "' extends past the end of file");

    const std::uint8_t* p = bytes.data() + data_start + offset;
    std::vector<double> data(count);
    for (std::size_t k = 0; k < count; ++k) {
      if (t.dtype == ElementType::f64) {
        data[k] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * k));
      } else {
        data[k] = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * k)));
      }
    }
    std::vector<Index> idx;
    for (std::size_t k = 0; k < shape.size(); ++k) {
      try {
        idx.push_back({labels[k], shape[k], role_from_string(roles[k])});
      } catch (const Error& err) {
        manifest_error(err.what());
      }
    }
    try {
      t.tensor = DenseTensor(std::move(idx), std::move(data));
    } catch (const Error& err) {
      if (err.code() == ErrorCode::non_finite) throw;
      manifest_error("tensor '" + t.name + "': " + err.what());
    }
    t.extra = without(e, {"name", "shape", "labels", "roles", "dtype", "offset", "length"});
    c.tensors.push_back(std::move(t));
  }

  std::set<std::string> names;
  for (const auto& t : c.tensors)
    if (!names.insert(t.name).second) manifest_error("duplicate tensor name '" + t.name + "'");

  for (const auto& e : networks) {
    NetworkEntry n;
    n.name = field<std::string>(e, "name");
    n.kind = field<std::string>(e, "kind");
    if (!is_known_kind(n.kind)) manifest_error("unknown network kind '" + n.kind + "'");
    n.tensors = field<std::vector<std::string>>(e, "tensors");
    for (const auto& member : n.tensors)
      if (!names.count(member))
        manifest_error("network '" + n.name + "' references missing tensor '" + member + "'");
    for (const auto& b : field<std::vector<std::vector<std::string>>>(e, "bonds")) {
      if (b.size() != 4) manifest_error("bond entries must have four strings");
      n.bonds.push_back({b[0], b[1], b[2], b[3]});
    }
    n.meta = e.value("meta", json::object());
    n.extra = without(e, {"name", "kind", "tensors", "bonds", "meta"});
    c.networks.push_back(std::move(n));
  }
  return c;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::io, "error reading '" + path.string() + "'");
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io, "error writing '" + path.string() + "'");
}

}  // namespace tnz
