#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "tnz/tnz.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("tnz_capi_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const char* name) const { return (path / name).string(); }
};

std::string text(tnz_buffer* b) {
  std::string s = b ? std::string(tnz_buffer_data(b), tnz_buffer_size(b)) : "";
  tnz_buffer_free(b);
  return s;
}

/// Writes a dense matrix container through the handle API.
void write_matrix(const std::string& path, std::size_t rows, std::size_t cols, const std::vector<double>& v) {
  tnz_tensor* t = nullptr;
  const size_t dims[] = {rows, cols};
  REQUIRE(tnz_tensor_create(2, dims, nullptr, v.data(), &t) == TNZ_OK);
  tnz_container* c = nullptr;
  REQUIRE(tnz_container_create(&c) == TNZ_OK);
  REQUIRE(tnz_container_add_dense(c, "w", t) == TNZ_OK);
  REQUIRE(tnz_container_write_file(c, path.c_str(), 0) == TNZ_OK);
  tnz_container_free(c);
  tnz_tensor_free(t);
}

}  // namespace

TEST_CASE("tensor handles") {
  const size_t dims[] = {2, 3};
  const char* labels[] = {"r", "c"};
  const double data[] = {1, 2, 3, 4, 5, 6};
  tnz_tensor* t = nullptr;
  REQUIRE(tnz_tensor_create(2, dims, labels, data, &t) == TNZ_OK);
  CHECK(tnz_tensor_rank(t) == 2);
  CHECK(tnz_tensor_dim(t, 1) == 3);
  CHECK(std::string(tnz_tensor_label(t, 0)) == "r");
  CHECK(tnz_tensor_size(t) == 6);
  CHECK(tnz_tensor_data(t)[5] == 6.0);
  CHECK(tnz_tensor_label(t, 9) == nullptr);
  tnz_tensor_free(t);

  const char* dup[] = {"a", "a"};
  tnz_tensor* bad = nullptr;
  CHECK(tnz_tensor_create(2, dims, dup, data, &bad) == TNZ_ERR_LABEL_COLLISION);
  CHECK(std::string(tnz_last_error()).find("a") != std::string::npos);
  const double nan[] = {1, 2, 3, 4, 5, 0.0 / 0.0};
  CHECK(tnz_tensor_create(2, dims, nullptr, nan, &bad) == TNZ_ERR_NON_FINITE);
  CHECK(tnz_tensor_create(2, dims, nullptr, data, nullptr) == TNZ_ERR_INVALID_ARGUMENT);
  CHECK(std::string(tnz_status_string(TNZ_ERR_TRUNCATED)) == "truncated file");
}

TEST_CASE("container handles round trip through bytes") {
  const size_t dims[] = {4};
  const double data[] = {0.5, -1, 2, 8};
  tnz_tensor* t = nullptr;
  REQUIRE(tnz_tensor_create(1, dims, nullptr, data, &t) == TNZ_OK);
  tnz_container* c = nullptr;
  REQUIRE(tnz_container_create(&c) == TNZ_OK);
  REQUIRE(tnz_container_add_dense(c, "v", t) == TNZ_OK);
  CHECK(tnz_container_add_dense(c, "v", t) == TNZ_ERR_LABEL_COLLISION);
  tnz_buffer* bytes = nullptr;
  REQUIRE(tnz_container_to_bytes(c, 0, &bytes) == TNZ_OK);

  tnz_container* back = nullptr;
  REQUIRE(tnz_container_read_bytes(tnz_buffer_data(bytes), tnz_buffer_size(bytes), &back) == TNZ_OK);
  CHECK(tnz_container_object_count(back) == 1);
  CHECK(std::string(tnz_container_object_name(back, 0)) == "v");
  CHECK(std::string(tnz_container_object_kind(back, 0)) == "dense");
  tnz_tensor* r = nullptr;
  REQUIRE(tnz_container_reconstruct(back, "v", &r) == TNZ_OK);
  CHECK(tnz_tensor_data(r)[3] == 8.0);
  CHECK(tnz_container_reconstruct(back, "missing", &r) == TNZ_ERR_INVALID_ARGUMENT);

  tnz_buffer* again = nullptr;
  REQUIRE(tnz_container_to_bytes(back, 0, &again) == TNZ_OK);
  CHECK(text(again) == std::string(tnz_buffer_data(bytes), tnz_buffer_size(bytes)));

  std::string corrupt(tnz_buffer_data(bytes), tnz_buffer_size(bytes));
  corrupt[0] = 'Q';
  tnz_container* junk = nullptr;
  CHECK(tnz_container_read_bytes(corrupt.data(), corrupt.size(), &junk) == TNZ_ERR_BAD_MAGIC);
  CHECK(tnz_container_read_file("/nonexistent/file.tnz", &junk) == TNZ_ERR_IO);

  tnz_buffer_free(bytes);
  tnz_tensor_free(r);
  tnz_tensor_free(t);
  tnz_container_free(back);
  tnz_container_free(c);
}

TEST_CASE("decompose, reconstruct and verify commands") {
  TempDir dir;
  std::vector<double> eye(256, 0.0);
  for (int k = 0; k < 16; ++k) eye[k * 17] = 1.0;
  write_matrix(dir / "eye.tnz", 16, 16, eye);

  const size_t dims[] = {2, 2, 2, 2};
  const auto in = dir / "eye.tnz", out = dir / "eye_mpo.tnz", dense = dir / "eye_dense.tnz";
  tnz_decompose_options d{};
  d.in_path = in.c_str();
  d.out_path = out.c_str();
  d.kind = "mpo";
  d.in_dims = dims;
  d.in_dims_len = 4;
  tnz_buffer* report = nullptr;
  REQUIRE(tnz_decompose(&d, &report) == TNZ_OK);
  CHECK(text(report).find("bond_dims=1,1,1") != std::string::npos);

  tnz_info_options i{out.c_str()};
  REQUIRE(tnz_info(&i, &report) == TNZ_OK);
  const auto info = text(report);
  CHECK(info.find("bond_dims=1,1,1") != std::string::npos);
  CHECK(info.find("entropies=0,0,0") != std::string::npos);

  tnz_reconstruct_options r{out.c_str(), dense.c_str(), 0};
  REQUIRE(tnz_reconstruct(&r, &report) == TNZ_OK);
  text(report);

  tnz_verify_options v{out.c_str(), in.c_str(), 0.0};
  REQUIRE(tnz_verify(&v, &report) == TNZ_OK);
  CHECK(text(report).find("0 failed") != std::string::npos);

  tnz_decompose_options bad = d;
  const size_t wrong[] = {3, 5};
  bad.in_dims = wrong;
  bad.in_dims_len = 2;
  CHECK(tnz_decompose(&bad, &report) == TNZ_ERR_SHAPE_MISMATCH);
  CHECK(report == nullptr);
}

TEST_CASE("gauge-check and train-demo commands") {
  tnz_gauge_check_options g{};
  g.seed = 3;
  g.trials = 10;
  tnz_buffer* report = nullptr;
  REQUIRE(tnz_gauge_check(&g, &report) == TNZ_OK);
  const auto first = text(report);
  REQUIRE(tnz_gauge_check(&g, &report) == TNZ_OK);
  CHECK(text(report) == first);

  tnz_train_demo_options t{};
  t.epochs = 20;
  REQUIRE(tnz_train_demo(&t, &report) == TNZ_OK);
  CHECK(text(report).find("relative_loss=") != std::string::npos);
  t.lr = 1e6;
  CHECK(tnz_train_demo(&t, &report) == TNZ_ERR_NON_FINITE);
}

TEST_CASE("null options are rejected") {
  tnz_buffer* report = nullptr;
  CHECK(tnz_info(nullptr, &report) == TNZ_ERR_INVALID_ARGUMENT);
  tnz_info_options i{};
  CHECK(tnz_info(&i, &report) == TNZ_ERR_INVALID_ARGUMENT);
}
