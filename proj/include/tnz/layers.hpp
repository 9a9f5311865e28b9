#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "tnz/decompose.hpp"
#include "tnz/network.hpp"

namespace tnz {

/// How a forward pass chooses its contraction order. `automatic` is
/// exhaustive when the network is small enough, greedy otherwise.
struct ForwardStrategy {
  enum class Kind { automatic, exhaustive, greedy, fixed };
  Kind kind = Kind::automatic;
  /// Used with Kind::fixed. Node 0 is the input batch, node n+1 is site n.
  std::vector<std::pair<NodeId, NodeId>> order;
};

/// Fully-connected layer whose weight is held as an MPO. Immutable; the plan
/// cache is shared between copies and keyed by batch size and strategy.
class MpoLinearLayer {
 public:
  explicit MpoLinearLayer(MPO mpo, std::optional<std::vector<double>> bias = std::nullopt);

  const MPO& mpo() const noexcept { return mpo_; }
  const std::optional<std::vector<double>>& bias() const noexcept { return bias_; }
  std::size_t in_size() const noexcept { return in_size_; }
  std::size_t out_size() const noexcept { return out_size_; }

  ContractionPlan plan_for(std::size_t batch, const ForwardStrategy& strategy) const;

 private:
  struct PlanCache {
    std::mutex mutex;
    std::map<std::pair<std::size_t, int>, ContractionPlan> plans;
  };

  MPO mpo_;
  std::optional<std::vector<double>> bias_;
  std::size_t in_size_ = 0;
  std::size_t out_size_ = 0;
  std::shared_ptr<PlanCache> cache_;
};

/// Forward network for a batch: node "x" (batch, i0..) then "site<n>".
TensorNetwork forward_network(const DenseTensor& x, const MPO& mpo);

struct ForwardResult {
  DenseTensor y;  // (batch, out)
  ContractionPlan plan;
  std::uint64_t est_flops = 0;
};

/// `x` is (batch x in_size); returns (batch x out_size).
ForwardResult mpo_forward(const DenseTensor& x, const MpoLinearLayer& layer,
                          const ForwardStrategy& strategy = {});

/// Cost of contracting the sites left to right into the dense matrix and then
/// multiplying the batch by it.
std::uint64_t dense_first_cost(const MPO& mpo, std::size_t batch);

struct BackwardResult {
  DenseTensor d_x;                  // (batch, in)
  std::vector<DenseTensor> d_sites; // same indices as the sites
  std::vector<double> d_bias;       // empty when the layer has no bias
};

BackwardResult mpo_backward(const DenseTensor& x, const MpoLinearLayer& layer,
                            const DenseTensor& d_out);

struct CompressionReport {
  std::uint64_t n_params_tn = 0;
  std::uint64_t n_params_dense = 0;
  double ratio = 0.0;
  std::vector<std::uint64_t> per_site_counts;
};

CompressionReport compression_report(const MPO& mpo);

struct InflateInit {
  enum class Kind { zeros, seeded_noise };
  Kind kind = Kind::zeros;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

/// Pads the bond at `cut` (between sites cut and cut+1) to `new_dim`.
MPO bond_inflate(const MPO& mpo, std::size_t cut, std::size_t new_dim, const InflateInit& init = {});

struct InsertOptions {
  /// Random site instead of the identity; required when new_in != new_out.
  bool random_init = false;
  double scale = 1.0;
  std::uint64_t seed = 0;
};

/// Inserts a new site before `position` (position == length appends). The
/// identity form carries the bond through unchanged, so the new dense matrix
/// is W'[(i_<p, a, i_>=p), (j_<p, b, j_>=p)] = W[(i), (j)] * delta(a, b).
/// Appending therefore gives W kron I and prepending gives I kron W.
MPO insert_site(const MPO& mpo, std::size_t position, std::size_t new_in, std::size_t new_out,
                const InsertOptions& options = {});

struct TrainOptions {
  double lr = 0.01;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  /// 0 means full batch; otherwise shuffled minibatches drawn with `seed`.
  std::size_t batch_size = 0;
  /// Per-site freeze mask; frozen sites are not updated.
  std::vector<bool> frozen;
};

struct TrainResult {
  MpoLinearLayer layer;
  /// Mean-squared error on the full data after each epoch; entry 0 is the
  /// loss before training.
  std::vector<double> losses;
};

double mse_loss(const DenseTensor& prediction, const DenseTensor& target);

/// Plain gradient descent on mean-squared error.
TrainResult train_mpo_regression(const DenseTensor& x, const DenseTensor& y,
                                 const MpoLinearLayer& layer, const TrainOptions& options);

}  // namespace tnz
