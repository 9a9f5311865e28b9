#include <string>
#include <vector>

#include "internal.hpp"
#include "tnz/codec.hpp"

namespace tnz::capi {

namespace {
thread_local std::string last_error;
}

void set_last_error(std::string message) { last_error = std::move(message); }

tnz_status status_of(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return TNZ_ERR_INVALID_ARGUMENT;
    case ErrorCode::shape_mismatch: return TNZ_ERR_SHAPE_MISMATCH;
    case ErrorCode::label_collision: return TNZ_ERR_LABEL_COLLISION;
    case ErrorCode::non_finite: return TNZ_ERR_NON_FINITE;
    case ErrorCode::factorization_failed: return TNZ_ERR_FACTORIZATION;
    case ErrorCode::singular: return TNZ_ERR_SINGULAR;
    case ErrorCode::bad_magic: return TNZ_ERR_BAD_MAGIC;
    case ErrorCode::unsupported_version: return TNZ_ERR_UNSUPPORTED_VERSION;
    case ErrorCode::truncated: return TNZ_ERR_TRUNCATED;
    case ErrorCode::manifest_mismatch: return TNZ_ERR_MANIFEST_MISMATCH;
    case ErrorCode::io: return TNZ_ERR_IO;
  }
  return TNZ_ERR_INTERNAL;
}

}  // namespace tnz::capi

using tnz::capi::guarded;

namespace {

tnz_status null_argument(const char* what) {
  tnz::capi::set_last_error(std::string("null argument: ") + what);
  return TNZ_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* tnz_last_error(void) { return tnz::capi::last_error.c_str(); }

const char* tnz_status_string(tnz_status status) {
  switch (status) {
    case TNZ_OK: return "ok";
    case TNZ_ERR_INVALID_ARGUMENT: return "invalid argument";
    case TNZ_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case TNZ_ERR_LABEL_COLLISION: return "label collision";
    case TNZ_ERR_NON_FINITE: return "non-finite value";
    case TNZ_ERR_FACTORIZATION: return "factorization failed";
    case TNZ_ERR_SINGULAR: return "singular matrix";
    case TNZ_ERR_BAD_MAGIC: return "bad magic";
    case TNZ_ERR_UNSUPPORTED_VERSION: return "unsupported version";
    case TNZ_ERR_TRUNCATED: return "truncated file";
    case TNZ_ERR_MANIFEST_MISMATCH: return "manifest mismatch";
    case TNZ_ERR_IO: return "i/o error";
    case TNZ_ERR_VALIDATION: return "validation failed";
    case TNZ_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* tnz_buffer_data(const tnz_buffer* b) { return b ? b->bytes.c_str() : nullptr; }
size_t tnz_buffer_size(const tnz_buffer* b) { return b ? b->bytes.size() : 0; }
void tnz_buffer_free(tnz_buffer* b) { delete b; }

tnz_status tnz_tensor_create(size_t rank, const size_t* dims, const char* const* labels,
                             const double* data, tnz_tensor** out) {
  if (!out) return null_argument("out");
  if (rank > 0 && !dims) return null_argument("dims");
  return guarded([&] {
    std::vector<tnz::Index> idx;
    std::size_t size = 1;
    for (std::size_t k = 0; k < rank; ++k) {
      idx.push_back({labels ? std::string(labels[k]) : "x" + std::to_string(k), dims[k],
                     tnz::IndexRole::bond});
      size *= dims[k];
    }
    tnz::require(data != nullptr || size == 0, tnz::ErrorCode::invalid_argument,
                 "null tensor data");
    std::vector<double> values(data, data + size);
    *out = new tnz_tensor{tnz::DenseTensor(std::move(idx), std::move(values))};
    return TNZ_OK;
  });
}

size_t tnz_tensor_rank(const tnz_tensor* t) { return t ? t->value.rank() : 0; }

size_t tnz_tensor_dim(const tnz_tensor* t, size_t position) {
  return t && position < t->value.rank() ? t->value.dim(position) : 0;
}

const char* tnz_tensor_label(const tnz_tensor* t, size_t position) {
  return t && position < t->value.rank() ? t->value.index(position).label.c_str() : nullptr;
}

size_t tnz_tensor_size(const tnz_tensor* t) { return t ? t->value.size() : 0; }
const double* tnz_tensor_data(const tnz_tensor* t) { return t ? t->value.data().data() : nullptr; }
void tnz_tensor_free(tnz_tensor* t) { delete t; }

tnz_status tnz_container_create(tnz_container** out) {
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = new tnz_container{};
    return TNZ_OK;
  });
}

tnz_status tnz_container_read_file(const char* path, tnz_container** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  return guarded([&] {
    const auto bytes = tnz::read_file_bytes(path);
    *out = new tnz_container{tnz::read_container(bytes)};
    return TNZ_OK;
  });
}

tnz_status tnz_container_read_bytes(const void* bytes, size_t size, tnz_container** out) {
  if (!bytes && size) return null_argument("bytes");
  if (!out) return null_argument("out");
  return guarded([&] {
    const auto* p = static_cast<const std::uint8_t*>(bytes);
    *out = new tnz_container{tnz::read_container({p, size})};
    return TNZ_OK;
  });
}

tnz_status tnz_container_write_file(const tnz_container* c, const char* path, int f32) {
  if (!c) return null_argument("container");
  if (!path) return null_argument("path");
  return guarded([&] {
    tnz::Container copy = c->value;
    if (f32) copy.set_dtype(tnz::ElementType::f32);
    tnz::write_file_bytes(path, tnz::write_container(copy));
    return TNZ_OK;
  });
}

tnz_status tnz_container_to_bytes(const tnz_container* c, int f32, tnz_buffer** out) {
  if (!c) return null_argument("container");
  if (!out) return null_argument("out");
  return guarded([&] {
    tnz::Container copy = c->value;
    if (f32) copy.set_dtype(tnz::ElementType::f32);
    const auto bytes = tnz::write_container(copy);
    *out = new tnz_buffer{std::string(bytes.begin(), bytes.end())};
    return TNZ_OK;
  });
}

tnz_status tnz_container_add_dense(tnz_container* c, const char* name, const tnz_tensor* t) {
  if (!c) return null_argument("container");
  if (!name) return null_argument("name");
  if (!t) return null_argument("tensor");
  return guarded([&] {
    tnz::require(c->value.find_network(name) == nullptr, tnz::ErrorCode::label_collision,
                 std::string("duplicate object name '") + name + "'");
    tnz::put_dense(c->value, name, t->value);
    return TNZ_OK;
  });
}

size_t tnz_container_object_count(const tnz_container* c) { return c ? c->value.networks.size() : 0; }

const char* tnz_container_object_name(const tnz_container* c, size_t k) {
  return c && k < c->value.networks.size() ? c->value.networks[k].name.c_str() : nullptr;
}

const char* tnz_container_object_kind(const tnz_container* c, size_t k) {
  return c && k < c->value.networks.size() ? c->value.networks[k].kind.c_str() : nullptr;
}

tnz_status tnz_container_reconstruct(const tnz_container* c, const char* name, tnz_tensor** out) {
  if (!c) return null_argument("container");
  if (!name) return null_argument("name");
  if (!out) return null_argument("out");
  return guarded([&] {
    const auto* n = c->value.find_network(name);
    tnz::require(n != nullptr, tnz::ErrorCode::invalid_argument,
                 std::string("no object named '") + name + "'");
    *out = new tnz_tensor{tnz::reconstruct_object(c->value, *n)};
    return TNZ_OK;
  });
}

void tnz_container_free(tnz_container* c) { delete c; }

}  // extern "C"
