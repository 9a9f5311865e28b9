#include <doctest.h>

#include <algorithm>
#include <limits>
#include <vector>

#include "helpers.hpp"
#include "tnz/network.hpp"

using namespace tnz;

namespace {

std::uint64_t recount(const TensorNetwork& net, const ContractionPlan& plan) {
  oracle::LegGraph g(net);
  std::vector<std::set<int>> live = g.nodes;
  std::uint64_t total = 0;
  for (const auto& s : plan.steps) {
    total += g.step_cost(live[s.left], live[s.right]);
    live.push_back(oracle::LegGraph::merge(live[s.left], live[s.right]));
  }
  return total;
}

TensorNetwork ring(oracle::Rng& rng) {
  std::vector<NamedTensor> nodes;
  for (int k = 0; k < 4; ++k)
    nodes.push_back({"t" + std::to_string(k),
                     DenseTensor::from_shape({2, 2, 2}, {"l", "p" + std::to_string(k), "r"},
                                             oracle::randn(rng, 8))});
  std::vector<Bond> bonds;
  for (int k = 0; k < 4; ++k)
    bonds.push_back({"t" + std::to_string(k), "r", "t" + std::to_string((k + 1) % 4), "l"});
  return TensorNetwork(std::move(nodes), std::move(bonds));
}

}  // namespace

TEST_CASE("pairwise_cost examples") {
  const std::size_t a[] = {4, 8}, b[] = {8, 5}, k[] = {8};
  CHECK(pairwise_cost(a, b, k) == 160);
  const std::size_t t[] = {3, 5, 2};
  CHECK(pairwise_cost({}, t, {}) == 30);
  const std::size_t u[] = {3}, v[] = {4};
  CHECK(pairwise_cost(u, v, {}) == 12);
  const std::size_t big[] = {std::size_t{1} << 40};
  CHECK(pairwise_cost(big, big, {}) == std::numeric_limits<std::uint64_t>::max());
}

TEST_CASE("network validation") {
  oracle::Rng rng(1);
  auto a = oracle::random_dense(rng, {2, 3}, "a");
  auto b = oracle::random_dense(rng, {4, 2}, "b");
  CHECK_THROWS_AS(TensorNetwork({{"A", a}, {"B", b}}, {{"A", "a1", "B", "b0"}}), Error);
  // Same label used in two bonds.
  auto c = oracle::random_dense(rng, {3, 3}, "c");
  CHECK_THROWS_AS(TensorNetwork({{"A", a}, {"C", c}},
                                {{"A", "a1", "C", "c0"}, {"A", "a1", "C", "c1"}}),
                  Error);
  // Colliding open labels.
  auto d = oracle::random_dense(rng, {2}, "a");
  CHECK_THROWS_AS(TensorNetwork({{"A", a}, {"D", d}}, {}), Error);
}

TEST_CASE("single node plan is empty and returns the tensor") {
  oracle::Rng rng(2);
  const auto t = oracle::random_dense(rng, {2, 3});
  const TensorNetwork net({{"only", t}}, {});
  for (auto s : {PlanStrategy::exhaustive, PlanStrategy::greedy}) {
    const auto plan = plan_contraction(net, s);
    CHECK(plan.steps.empty());
    CHECK(plan.est_flops == 0);
    CHECK(execute_plan(net, plan) == t);
  }
}

TEST_CASE("three-tensor orders agree") {
  oracle::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> d(1, 4);
    const std::size_t i = d(rng), a = d(rng), b = d(rng), c = d(rng), j = d(rng), k = d(rng);
    const TensorNetwork net(
        {{"P", DenseTensor::from_shape({i, a, c}, {"i", "pa", "pc"}, oracle::randn(rng, i * a * c))},
         {"Q", DenseTensor::from_shape({a, j, b}, {"qa", "j", "qb"}, oracle::randn(rng, a * j * b))},
         {"R", DenseTensor::from_shape({b, c, k}, {"rb", "rc", "k"}, oracle::randn(rng, b * c * k))}},
        {{"P", "pa", "Q", "qa"}, {"Q", "qb", "R", "rb"}, {"P", "pc", "R", "rc"}});
    const std::pair<NodeId, NodeId> pq_r[] = {{0, 1}, {3, 2}}, p_qr[] = {{1, 2}, {0, 3}};
    const auto s1 = execute_plan(net, plan_fixed(net, pq_r));
    const auto s2 = execute_plan(net, plan_fixed(net, p_qr));
    CHECK(relative_difference(s1, s2) <= 1e-10);
  }
}

TEST_CASE("ring of four tensors is plan independent") {
  oracle::Rng rng(4);
  const auto net = ring(rng);
  const auto ex = plan_contraction(net, PlanStrategy::exhaustive);
  const auto gr = plan_contraction(net, PlanStrategy::greedy);
  const auto a = execute_plan(net, ex), b = execute_plan(net, gr);
  CHECK(a.shape() == Shape{2, 2, 2, 2});
  CHECK(relative_difference(a, b) <= 1e-10);
  CHECK(ex.est_flops <= gr.est_flops);
  // Brute force: trace of the product of the four 2x2 slices.
  for (std::size_t flat = 0; flat < 16; ++flat) {
    const auto p = oracle::unravel(flat, {2, 2, 2, 2});
    double s = 0.0;
    for (std::size_t b0 = 0; b0 < 2; ++b0)
      for (std::size_t b1 = 0; b1 < 2; ++b1)
        for (std::size_t b2 = 0; b2 < 2; ++b2)
          for (std::size_t b3 = 0; b3 < 2; ++b3) {
            // t_k(l, p, r): bond between t_k.r and t_{k+1}.l
            const std::size_t l[] = {b3, b0, b1, b2}, r[] = {b0, b1, b2, b3};
            double term = 1.0;
            for (int k = 0; k < 4; ++k) term *= net.nodes()[k].tensor.data()[(l[k] * 2 + p[k]) * 2 + r[k]];
            s += term;
          }
    CHECK(std::abs(a.data()[flat] - s) <= 1e-12);
  }
}

TEST_CASE("plans are validated") {
  oracle::Rng rng(5);
  const auto net = ring(rng);
  const std::pair<NodeId, NodeId> short_order[] = {{0, 1}};
  CHECK_THROWS_AS(plan_fixed(net, short_order), Error);
  const std::pair<NodeId, NodeId> reuse[] = {{0, 1}, {0, 2}, {4, 5}};
  CHECK_THROWS_AS(plan_fixed(net, reuse), Error);
  auto plan = plan_contraction(net, PlanStrategy::greedy);
  plan.est_flops += 1;
  CHECK_THROWS_AS(validate_plan(net, plan), Error);

  std::vector<NamedTensor> many;
  for (int k = 0; k < 11; ++k)
    many.push_back({"n" + std::to_string(k), DenseTensor::from_shape({2}, {"o" + std::to_string(k)}, {1, 2})});
  const TensorNetwork wide(std::move(many), {});
  CHECK_THROWS_AS(plan_contraction(wide, PlanStrategy::exhaustive), Error);
  CHECK_NOTHROW(plan_contraction(wide, PlanStrategy::greedy));
}

TEST_CASE("greedy is deterministic with lexicographic ties") {
  // Four identical vectors with no bonds: every pair costs the same.
  std::vector<NamedTensor> nodes;
  for (int k = 0; k < 4; ++k)
    nodes.push_back({"n" + std::to_string(k), DenseTensor::from_shape({2}, {"o" + std::to_string(k)}, {1, 1})});
  const TensorNetwork net(std::move(nodes), {});
  const auto plan = plan_contraction(net, PlanStrategy::greedy);
  REQUIRE(plan.steps.size() == 3);
  CHECK(plan.steps[0] == PlanStep{0, 1, 4});
  CHECK(plan == plan_contraction(net, PlanStrategy::greedy));
}

TEST_CASE("exhaustive is minimal over full enumeration") {
  oracle::Rng rng(6);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + trial % 4;
    const auto net = oracle::random_network(rng, n, 4);
    const auto plan = plan_contraction(net, PlanStrategy::exhaustive);
    std::vector<oracle::Order> orders;
    oracle::enumerate_orders(oracle::LegGraph(net), orders);
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    for (const auto& o : orders) best = std::min(best, o.cost);
    CHECK(plan.est_flops == best);
    CHECK(recount(net, plan) == plan.est_flops);
  }
}

TEST_CASE("exhaustive never loses to greedy and results agree") {
  oracle::Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto net = oracle::random_network(rng, 5, 4);
    const auto ex = plan_contraction(net, PlanStrategy::exhaustive);
    const auto gr = plan_contraction(net, PlanStrategy::greedy);
    CHECK(ex.est_flops <= gr.est_flops);
    CHECK(recount(net, gr) == gr.est_flops);
    CHECK(relative_difference(execute_plan(net, gr), execute_plan(net, ex)) <= 1e-10);
  }
}
