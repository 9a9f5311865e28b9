#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "tnz/decompose.hpp"
#include "tnz/layers.hpp"

using namespace tnz;
using oracle::Mat;

namespace {

DenseTensor batch(std::size_t rows, std::size_t cols, oracle::Vec data) {
  return DenseTensor::from_shape({rows, cols}, {"batch", "features"}, std::move(data));
}

Mat dense_forward(const Mat& x, const MPO& m) { return oracle::matmul(x, oracle::mpo_dense(m)); }

MPO with_site(const MPO& m, std::size_t n, std::vector<double> data) {
  MPO out = m;
  out.sites[n] = DenseTensor(m.sites[n].indices(), std::move(data));
  out.cut_spectra.clear();
  out.cut_discarded.clear();
  return out;
}

}  // namespace

TEST_CASE("identity layer passes the batch through") {
  std::vector<DenseTensor> padded;
  for (int n = 0; n < 3; ++n)
    padded.push_back(DenseTensor::from_shape({1, 2, 2, 1}, {"l", "i", "j", "r"}, {1, 0, 0, 1}));
  const MpoLinearLayer layer(MPO::from_padded(padded), std::vector<double>(8, 0.0));
  oracle::Rng rng(1);
  const auto x = batch(5, 8, oracle::randn(rng, 40));
  CHECK(mpo_forward(x, layer).y.data() == x.data());
}

TEST_CASE("forward matches the dense oracle") {
  oracle::Rng rng(2);
  std::uniform_int_distribution<std::size_t> d(1, 4), len(1, 4), bd(1, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = len(rng);
    Shape in, out, bonds;
    for (std::size_t k = 0; k < n; ++k) {
      in.push_back(d(rng));
      out.push_back(d(rng));
      if (k + 1 < n) bonds.push_back(bd(rng));
    }
    const auto m = oracle::random_mpo(rng, in, out, bonds);
    const std::size_t b = 1 + trial % 4;
    const Mat x(b, oracle::product(in), oracle::randn(rng, b * oracle::product(in)));
    const auto bias = oracle::randn(rng, oracle::product(out));
    const MpoLinearLayer layer(m, bias);
    const auto y = mpo_forward(batch(x.rows, x.cols, x.v), layer).y;
    auto ref = dense_forward(x, m);
    for (std::size_t r = 0; r < b; ++r)
      for (std::size_t c = 0; c < ref.cols; ++c) ref(r, c) += bias[c];
    CHECK(oracle::rel_diff(y.data(), ref.v) <= 1e-10);
  }
}

TEST_CASE("forward is strategy independent") {
  oracle::Rng rng(3);
  const auto m = oracle::random_mpo(rng, {2, 3, 2, 2}, {3, 2, 2, 2}, {3, 2, 4});
  const MpoLinearLayer layer(m);
  const auto x = batch(3, 24, oracle::randn(rng, 72));
  const auto ex = mpo_forward(x, layer, {ForwardStrategy::Kind::exhaustive, {}});
  const auto gr = mpo_forward(x, layer, {ForwardStrategy::Kind::greedy, {}});
  ForwardStrategy seq{ForwardStrategy::Kind::fixed, {{0, 1}, {5, 2}, {6, 3}, {7, 4}}};
  const auto fx = mpo_forward(x, layer, seq);
  CHECK(relative_difference(gr.y, ex.y) <= 1e-10);
  CHECK(relative_difference(fx.y, ex.y) <= 1e-10);
  CHECK(ex.est_flops <= gr.est_flops);
  CHECK(ex.est_flops <= fx.est_flops);
}

TEST_CASE("planned forward beats dense-first on the four-site case") {
  oracle::Rng rng(4);
  const auto m = oracle::random_mpo(rng, {2, 2, 2, 2}, {2, 2, 2, 2}, {4, 4, 4});
  const MpoLinearLayer layer(m);
  const auto x = batch(8, 16, oracle::randn(rng, 128));
  const auto r = mpo_forward(x, layer, {ForwardStrategy::Kind::exhaustive, {}});
  // Dense-first by hand: (((ab)c)d) then X * W, each step the product of its distinct legs.
  const std::uint64_t ab = (2 * 2) * 4 * (2 * 2 * 4);     // i1 j1 | b1 | i2 j2 b2
  const std::uint64_t abc = 16 * 4 * (2 * 2) * 4;          // i1 j1 i2 j2 | b2 | i3 j3 b3
  const std::uint64_t abcd = (64 * 4) * (2 * 2);           // i1..j3 | b3 | i4 j4
  const std::uint64_t xw = 8 * 16 * 16;
  CHECK(dense_first_cost(m, 8) == ab + abc + abcd + xw);
  CHECK(r.est_flops < dense_first_cost(m, 8));
}

TEST_CASE("plan cache reuses plans") {
  oracle::Rng rng(5);
  const MpoLinearLayer layer(oracle::random_mpo(rng, {2, 2}, {2, 2}, {2}));
  const auto a = layer.plan_for(4, {});
  const MpoLinearLayer copy = layer;
  CHECK(copy.plan_for(4, {}) == a);
  CHECK(layer.plan_for(4, {ForwardStrategy::Kind::greedy, {}}).steps.size() == 2);
}

TEST_CASE("backward matches central differences") {
  oracle::Rng rng(6);
  std::uniform_int_distribution<std::size_t> d(1, 3), len(1, 3), bd(1, 3);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = len(rng);
    Shape in, out, bonds;
    for (std::size_t k = 0; k < n; ++k) {
      in.push_back(d(rng));
      out.push_back(d(rng));
      if (k + 1 < n) bonds.push_back(bd(rng));
    }
    const auto m = oracle::random_mpo(rng, in, out, bonds);
    const std::size_t b = 1 + trial % 4, I = oracle::product(in), O = oracle::product(out);
    const auto bias = oracle::randn(rng, O);
    const auto x = oracle::randn(rng, b * I), g = oracle::randn(rng, b * O);
    // L = sum(g * y)
    auto loss = [&](const MPO& mm, const oracle::Vec& xx, const oracle::Vec& bb) {
      const auto y = mpo_forward(batch(b, I, xx), MpoLinearLayer(mm, bb)).y.data();
      double s = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) s += g[k] * y[k];
      return s;
    };
    const auto grads = mpo_backward(batch(b, I, x), MpoLinearLayer(m, bias), batch(b, O, g));
    auto close = [](double a, double fd) { return std::abs(a - fd) <= std::max(1e-8, 1e-5 * std::abs(fd)); };
    for (std::size_t s = 0; s < n; ++s) {
      REQUIRE(grads.d_sites[s].indices() == m.sites[s].indices());
      for (std::size_t k = 0; k < m.sites[s].size(); ++k) {
        auto plus = m.sites[s].data(), minus = plus;
        plus[k] += h;
        minus[k] -= h;
        const double fd = (loss(with_site(m, s, plus), x, bias) - loss(with_site(m, s, minus), x, bias)) / (2 * h);
        CHECK(close(grads.d_sites[s].data()[k], fd));
      }
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
      auto plus = x, minus = x;
      plus[k] += h;
      minus[k] -= h;
      CHECK(close(grads.d_x.data()[k], (loss(m, plus, bias) - loss(m, minus, bias)) / (2 * h)));
    }
    for (std::size_t k = 0; k < O; ++k) {
      double s = 0.0;
      for (std::size_t r = 0; r < b; ++r) s += g[r * O + k];
      CHECK(std::abs(grads.d_bias[k] - s) <= 1e-12);
    }
  }
}

TEST_CASE("backward special cases") {
  oracle::Rng rng(7);
  SUBCASE("zero upstream gradient") {
    const auto m = oracle::random_mpo(rng, {2, 3}, {2, 2}, {2});
    const auto grads = mpo_backward(batch(3, 6, oracle::randn(rng, 18)), MpoLinearLayer(m),
                                    batch(3, 4, std::vector<double>(12, 0.0)));
    for (const auto& s : grads.d_sites)
      for (double v : s.data()) CHECK(v == 0.0);
    for (double v : grads.d_x.data()) CHECK(v == 0.0);
  }
  SUBCASE("single site reduces to a dense layer") {
    const auto m = oracle::random_mpo(rng, {3}, {4}, {});
    const Mat x(5, 3, oracle::randn(rng, 15)), g(5, 4, oracle::randn(rng, 20));
    const auto grads = mpo_backward(batch(5, 3, x.v), MpoLinearLayer(m), batch(5, 4, g.v));
    // y = x W, so dW = x^T g.
    CHECK(oracle::max_abs(grads.d_sites[0].data(), oracle::matmul(oracle::transpose(x), g).v) <= 1e-12);
    CHECK(oracle::max_abs(grads.d_x.data(),
                          oracle::matmul(g, oracle::transpose(oracle::mpo_dense(m))).v) <= 1e-12);
    CHECK(grads.d_bias.empty());
  }
  SUBCASE("shape mismatch") {
    const auto m = oracle::random_mpo(rng, {2, 2}, {2, 2}, {2});
    CHECK_THROWS_AS(mpo_backward(batch(2, 4, oracle::randn(rng, 8)), MpoLinearLayer(m),
                                 batch(3, 4, oracle::randn(rng, 12))),
                    Error);
  }
}

TEST_CASE("compression report") {
  oracle::Rng rng(8);
  const auto m = oracle::random_mpo(rng, {4, 4, 4}, {4, 4, 4}, {2, 2});
  const auto r = compression_report(m);
  CHECK(r.per_site_counts == std::vector<std::uint64_t>{32, 64, 32});
  CHECK(r.n_params_tn == 128);
  CHECK(r.n_params_dense == 4096);
  CHECK(r.ratio == 0.03125);

  const auto ones = compression_report(oracle::random_mpo(rng, {2, 2, 2}, {2, 2, 2}, {1, 1}));
  CHECK(ones.n_params_tn == 12);
  CHECK(ones.n_params_dense == 64);

  const auto full = matrix_to_mpo(oracle::matrix(16, 16, oracle::randn(rng, 256)), {4, 4}, {4, 4});
  CHECK(full.bond_dims() == Shape{16});
  CHECK(compression_report(full).ratio >= 1.0);
}

TEST_CASE("bond_inflate") {
  oracle::Rng rng(9);
  const auto m = oracle::random_mpo(rng, {2, 3, 2}, {2, 2, 3}, {2, 3});
  const auto dense = oracle::mpo_dense(m);
  const auto z = bond_inflate(m, 0, 4);
  CHECK(z.bond_dims() == Shape{4, 3});
  CHECK(oracle::max_abs(oracle::mpo_dense(z).v, dense.v) <= 1e-12);
  const auto back = mpo_recompress(z, unbounded, 1e-12);
  CHECK(back.bond_dims() == m.bond_dims());
  CHECK(oracle::rel_diff(oracle::mpo_dense(back).v, dense.v) <= 1e-10);

  const auto noisy = bond_inflate(m, 1, 5, {InflateInit::Kind::seeded_noise, 1e-3, 42});
  CHECK(noisy.bond_dims() == Shape{2, 5});
  CHECK(oracle::diff_norm(oracle::mpo_dense(noisy).v, dense.v) > 0.0);
  CHECK(mpo_to_matrix(noisy) == mpo_to_matrix(bond_inflate(m, 1, 5, {InflateInit::Kind::seeded_noise, 1e-3, 42})));

  CHECK_THROWS_AS(bond_inflate(m, 0, 1), Error);
  CHECK_THROWS_AS(bond_inflate(m, 2, 4), Error);
}

TEST_CASE("insert_site") {
  oracle::Rng rng(10);
  const auto m = oracle::random_mpo(rng, {2, 3}, {3, 2}, {2});
  const auto W = oracle::mpo_dense(m);
  SUBCASE("append gives W kron I") {
    const auto e = insert_site(m, 2, 2, 2);
    CHECK(oracle::max_abs(oracle::mpo_dense(e).v, oracle::kron(W, oracle::identity(2)).v) <= 1e-12);
  }
  SUBCASE("prepend gives I kron W") {
    const auto e = insert_site(m, 0, 3, 3);
    CHECK(oracle::max_abs(oracle::mpo_dense(e).v, oracle::kron(oracle::identity(3), W).v) <= 1e-12);
  }
  SUBCASE("middle insertion follows the delta pattern") {
    const auto e = insert_site(m, 1, 2, 2);
    const auto E = oracle::mpo_dense(e);
    for (std::size_t row = 0; row < E.rows; ++row)
      for (std::size_t col = 0; col < E.cols; ++col) {
        const auto i = oracle::unravel(row, {2, 2, 3});
        const auto j = oracle::unravel(col, {3, 2, 2});
        const double expect = i[1] == j[1] ? W(i[0] * 3 + i[2], j[0] * 2 + j[2]) : 0.0;
        CHECK(std::abs(E(row, col) - expect) <= 1e-12);
      }
  }
  SUBCASE("singleton site leaves W unchanged") {
    const auto e = insert_site(m, 1, 1, 1);
    CHECK(oracle::max_abs(oracle::mpo_dense(e).v, W.v) <= 1e-12);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(insert_site(m, 1, 2, 3), Error);
    CHECK_NOTHROW(insert_site(m, 1, 2, 3, {true, 0.1, 3}));
    CHECK_THROWS_AS(insert_site(m, 3, 2, 2), Error);
  }
}

TEST_CASE("training") {
  oracle::Rng rng(11);
  const auto teacher = oracle::random_mpo(rng, {2, 2}, {2, 2}, {2}, 0.5);
  const auto student = oracle::random_mpo(rng, {2, 2}, {2, 2}, {2}, 0.5);
  const auto x = batch(6, 4, oracle::randn(rng, 24));
  const auto y = mpo_forward(x, MpoLinearLayer(teacher)).y;

  SUBCASE("lr 0 keeps the loss constant") {
    const auto r = train_mpo_regression(x, y, MpoLinearLayer(student), {0.0, 5, 0, 0, {}});
    REQUIRE(r.losses.size() == 6);
    for (double l : r.losses) CHECK(l == r.losses[0]);
  }
  SUBCASE("one full-batch epoch is one gradient step") {
    const double lr = 0.1;
    const auto r = train_mpo_regression(x, y, MpoLinearLayer(student), {lr, 1, 0, 0, {}});
    // Hand step: L = mean((xW - y)^2), dL/dsite from central differences.
    const std::size_t count = y.size();
    auto loss = [&](const MPO& mm) {
      const auto p = oracle::matmul(oracle::as_mat(x), oracle::mpo_dense(mm));
      double s = 0.0;
      for (std::size_t k = 0; k < count; ++k) s += (p.v[k] - y.data()[k]) * (p.v[k] - y.data()[k]);
      return s / static_cast<double>(count);
    };
    for (std::size_t s = 0; s < 2; ++s) {
      for (std::size_t k = 0; k < student.sites[s].size(); ++k) {
        auto plus = student.sites[s].data(), minus = plus;
        plus[k] += 1e-6;
        minus[k] -= 1e-6;
        const double grad = (loss(with_site(student, s, plus)) - loss(with_site(student, s, minus))) / 2e-6;
        const double expect = student.sites[s].data()[k] - lr * grad;
        CHECK(std::abs(r.layer.mpo().sites[s].data()[k] - expect) <= 1e-8);
      }
    }
    CHECK(r.losses[0] == doctest::Approx(loss(student)).epsilon(1e-12));
  }
  SUBCASE("frozen sites do not move") {
    const auto r = train_mpo_regression(x, y, MpoLinearLayer(student), {0.05, 3, 0, 0, {true, false}});
    CHECK(r.layer.mpo().sites[0] == student.sites[0]);
    CHECK(!(r.layer.mpo().sites[1] == student.sites[1]));
  }
  SUBCASE("minibatches are seeded") {
    const TrainOptions o{0.05, 4, 7, 2, {}};
    CHECK(train_mpo_regression(x, y, MpoLinearLayer(student), o).losses ==
          train_mpo_regression(x, y, MpoLinearLayer(student), o).losses);
  }
  SUBCASE("divergence is reported") {
    CHECK_THROWS_AS(train_mpo_regression(x, y, MpoLinearLayer(student), {1e6, 50, 0, 0, {}}), Error);
  }
}
