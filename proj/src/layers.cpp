#include "tnz/layers.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <limits>
#include <mutex>
#include <cmath>
#include <numeric>
#include <random>

namespace tnz {

namespace {

DenseTensor split_features(const DenseTensor& m, const Shape& dims,
                           const std::function<std::string(std::size_t)>& label,
                           IndexRole role) {
  std::vector<Index> idx{{"batch", m.dim(0), IndexRole::bond}};
  for (std::size_t n = 0; n < dims.size(); ++n) idx.push_back({label(n), dims[n], role});
  return m.reshaped(std::move(idx));
}

void require_batch(const DenseTensor& x, std::size_t features, const char* what) {
  require(x.rank() == 2, ErrorCode::invalid_argument, std::string(what) + " must be 2-index");
  require(x.dim(1) == features, ErrorCode::shape_mismatch,
          std::string(what) + " has " + std::to_string(x.dim(1)) + " features, expected " +
              std::to_string(features));
}

ContractionPlan auto_plan(const TensorNetwork& net) {
  return plan_contraction(net, net.node_count() <= max_exhaustive_nodes ? PlanStrategy::exhaustive
                                                                        : PlanStrategy::greedy);
}

std::string site_name(std::size_t n) { return "site" + std::to_string(n); }

}  // namespace

MpoLinearLayer::MpoLinearLayer(MPO mpo, std::optional<std::vector<double>> bias)
    : mpo_(std::move(mpo)), bias_(std::move(bias)), cache_(std::make_shared<PlanCache>()) {
  mpo_.validate();
  in_size_ = mpo_.in_size();
  out_size_ = mpo_.out_size();
  if (bias_) {
    require(bias_->size() == out_size_, ErrorCode::shape_mismatch,
            "bias length " + std::to_string(bias_->size()) + " != output size " +
                std::to_string(out_size_));
    for (double v : *bias_)
      require(std::isfinite(v), ErrorCode::non_finite, "bias contains NaN or Inf");
  }
}

ContractionPlan MpoLinearLayer::plan_for(std::size_t batch, const ForwardStrategy& strategy) const {
  require(batch >= 1, ErrorCode::invalid_argument, "batch size must be >= 1");
  const auto probe = DenseTensor::zeros(
      {{"batch", batch, IndexRole::bond}, {"features", in_size_, IndexRole::input}});
  const TensorNetwork net = forward_network(probe, mpo_);
  if (strategy.kind == ForwardStrategy::Kind::fixed) return plan_fixed(net, strategy.order);

  const auto key = std::make_pair(batch, static_cast<int>(strategy.kind));
  std::lock_guard lock(cache_->mutex);
  if (auto it = cache_->plans.find(key); it != cache_->plans.end()) return it->second;
  ContractionPlan plan;
  switch (strategy.kind) {
    case ForwardStrategy::Kind::exhaustive:
      plan = plan_contraction(net, PlanStrategy::exhaustive);
      break;
    case ForwardStrategy::Kind::greedy:
      plan = plan_contraction(net, PlanStrategy::greedy);
      break;
    default:
      plan = auto_plan(net);
      break;
  }
  cache_->plans.emplace(key, plan);
  return plan;
}

TensorNetwork forward_network(const DenseTensor& x, const MPO& mpo) {
  require_batch(x, mpo.in_size(), "input batch");
  std::vector<NamedTensor> nodes{{"x", split_features(x, mpo.in_dims(), in_label, IndexRole::input)}};
  std::vector<Bond> bonds;
  for (std::size_t n = 0; n < mpo.length(); ++n) {
    nodes.push_back({site_name(n), mpo.sites[n]});
    bonds.push_back({"x", in_label(n), site_name(n), in_label(n)});
    if (n + 1 < mpo.length())
      bonds.push_back({site_name(n), bond_label(n), site_name(n + 1), bond_label(n)});
  }
  return TensorNetwork(std::move(nodes), std::move(bonds));
}

ForwardResult mpo_forward(const DenseTensor& x, const MpoLinearLayer& layer,
                          const ForwardStrategy& strategy) {
  require_batch(x, layer.in_size(), "input batch");
  const TensorNetwork net = forward_network(x, layer.mpo());
  ForwardResult out;
  out.plan = layer.plan_for(x.dim(0), strategy);
  out.est_flops = out.plan.est_flops;
  const DenseTensor open = execute_plan(net, out.plan);  // (batch, j0, j1, ...)
  auto data = open.data();
  if (const auto& bias = layer.bias()) {
    const std::size_t cols = layer.out_size();
    for (std::size_t r = 0; r < x.dim(0); ++r)
      for (std::size_t c = 0; c < cols; ++c) data[r * cols + c] += (*bias)[c];
  }
  out.y = DenseTensor({{"batch", x.dim(0), IndexRole::bond},
                       {"features", layer.out_size(), IndexRole::output}},
                      std::move(data));
  return out;
}

std::uint64_t dense_first_cost(const MPO& mpo, std::size_t batch) {
  mpo.validate();
  std::vector<NamedTensor> nodes;
  std::vector<Bond> bonds;
  std::vector<std::pair<NodeId, NodeId>> order;
  const std::size_t len = mpo.length();
  for (std::size_t n = 0; n < len; ++n) {
    nodes.push_back({site_name(n), mpo.sites[n]});
    if (n + 1 < len) bonds.push_back({site_name(n), bond_label(n), site_name(n + 1), bond_label(n)});
    if (n > 0) order.emplace_back(n == 1 ? 0 : len + n - 2, n);
  }
  const TensorNetwork chain(std::move(nodes), std::move(bonds));
  const std::uint64_t rebuild = plan_fixed(chain, order).est_flops;
  const std::array<std::size_t, 2> xd{batch, mpo.in_size()};
  const std::array<std::size_t, 2> md{mpo.in_size(), mpo.out_size()};
  const std::array<std::size_t, 1> shared{mpo.in_size()};
  const std::uint64_t apply = pairwise_cost(xd, md, shared);
  return rebuild > UINT64_MAX - apply ? UINT64_MAX : rebuild + apply;
}

BackwardResult mpo_backward(const DenseTensor& x, const MpoLinearLayer& layer,
                            const DenseTensor& d_out) {
  const MPO& mpo = layer.mpo();
  require_batch(x, layer.in_size(), "input batch");
  require_batch(d_out, layer.out_size(), "output gradient");
  require(x.dim(0) == d_out.dim(0), ErrorCode::shape_mismatch,
          "input and output gradient batch sizes differ");
  const std::size_t len = mpo.length();
  const DenseTensor xs = split_features(x, mpo.in_dims(), in_label, IndexRole::input);
  const DenseTensor gs = split_features(d_out, mpo.out_dims(), out_label, IndexRole::output);

  BackwardResult out;
  if (layer.bias()) {
    out.d_bias.assign(layer.out_size(), 0.0);
    for (std::size_t r = 0; r < d_out.dim(0); ++r)
      for (std::size_t c = 0; c < layer.out_size(); ++c)
        out.d_bias[c] += d_out.data()[r * layer.out_size() + c];
  }

  {
    std::vector<NamedTensor> nodes{{"g", gs}};
    std::vector<Bond> bonds;
    for (std::size_t n = 0; n < len; ++n) {
      nodes.push_back({site_name(n), mpo.sites[n]});
      bonds.push_back({"g", out_label(n), site_name(n), out_label(n)});
      if (n + 1 < len) bonds.push_back({site_name(n), bond_label(n), site_name(n + 1), bond_label(n)});
    }
    const TensorNetwork net(std::move(nodes), std::move(bonds));
    const DenseTensor dx = execute_plan(net, auto_plan(net));  // (batch, i0, i1, ...)
    out.d_x = dx.reshaped({{"batch", x.dim(0), IndexRole::bond},
                           {"features", layer.in_size(), IndexRole::input}});
  }

  // Gradient of site n: the network with site n removed.
  for (std::size_t n = 0; n < len; ++n) {
    std::vector<NamedTensor> nodes{{"x", xs}, {"g", gs}};
    std::vector<Bond> bonds{{"x", "batch", "g", "batch"}};
    for (std::size_t m = 0; m < len; ++m) {
      if (m == n) continue;
      nodes.push_back({site_name(m), mpo.sites[m]});
      bonds.push_back({"x", in_label(m), site_name(m), in_label(m)});
      bonds.push_back({"g", out_label(m), site_name(m), out_label(m)});
      if (m + 1 < len && m + 1 != n)
        bonds.push_back({site_name(m), bond_label(m), site_name(m + 1), bond_label(m)});
    }
    const TensorNetwork net(std::move(nodes), std::move(bonds));
    const DenseTensor hole = execute_plan(net, auto_plan(net));
    const DenseTensor& site = mpo.sites[n];
    std::vector<std::size_t> order;
    for (const auto& idx : site.indices()) order.push_back(hole.position_of(idx.label));
    out.d_sites.push_back(permute(hole, order).reshaped(site.indices()));
  }
  return out;
}

CompressionReport compression_report(const MPO& mpo) {
  mpo.validate();
  CompressionReport r;
  for (const auto& s : mpo.sites) {
    r.per_site_counts.push_back(s.size());
    r.n_params_tn += s.size();
  }
  r.n_params_dense = static_cast<std::uint64_t>(mpo.in_size()) * mpo.out_size();
  r.ratio = static_cast<double>(r.n_params_tn) / static_cast<double>(r.n_params_dense);
  return r;
}

MPO bond_inflate(const MPO& mpo, std::size_t cut, std::size_t new_dim, const InflateInit& init) {
  mpo.validate();
  require(cut + 1 < mpo.length(), ErrorCode::invalid_argument,
          "bond_inflate: cut " + std::to_string(cut) + " out of range");
  const std::size_t old_dim = mpo.bond_dims()[cut];
  require(new_dim >= old_dim, ErrorCode::invalid_argument,
          "bond_inflate: new_dim " + std::to_string(new_dim) + " is below the current " +
              std::to_string(old_dim) + " (use recompression to shrink)");
  require(init.kind == InflateInit::Kind::zeros || init.epsilon >= 0.0,
          ErrorCode::invalid_argument, "bond_inflate: epsilon must be >= 0");

  std::mt19937_64 rng(init.seed);
  std::uniform_real_distribution<double> noise(-init.epsilon, init.epsilon);
  auto fill = [&] { return init.kind == InflateInit::Kind::zeros ? 0.0 : noise(rng); };

  std::vector<DenseTensor> padded;
  for (std::size_t n = 0; n < mpo.length(); ++n) padded.push_back(mpo.padded_site(n));

  {  // left site: pad its right bond
    const auto& s = padded[cut];
    const std::size_t outer = s.dim(0) * s.dim(1) * s.dim(2);
    std::vector<double> data(outer * new_dim);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t r = 0; r < new_dim; ++r)
        data[o * new_dim + r] = r < old_dim ? s.data()[o * old_dim + r] : fill();
    padded[cut] = DenseTensor::from_shape({s.dim(0), s.dim(1), s.dim(2), new_dim},
                                          {"l", "i", "j", "r"}, std::move(data));
  }
  {  // right site: pad its left bond
    const auto& s = padded[cut + 1];
    const std::size_t inner = s.dim(1) * s.dim(2) * s.dim(3);
    std::vector<double> data(new_dim * inner);
    for (std::size_t l = 0; l < new_dim; ++l)
      for (std::size_t q = 0; q < inner; ++q)
        data[l * inner + q] = l < old_dim ? s.data()[l * inner + q] : fill();
    padded[cut + 1] = DenseTensor::from_shape({new_dim, s.dim(1), s.dim(2), s.dim(3)},
                                              {"l", "i", "j", "r"}, std::move(data));
  }
  return MPO::from_padded(padded);
}

MPO insert_site(const MPO& mpo, std::size_t position, std::size_t new_in, std::size_t new_out,
                const InsertOptions& options) {
  mpo.validate();
  const std::size_t len = mpo.length();
  require(position <= len, ErrorCode::invalid_argument,
          "insert_site: position " + std::to_string(position) + " out of range");
  require(new_in >= 1 && new_out >= 1, ErrorCode::invalid_argument,
          "insert_site: dims must be >= 1");
  require(new_in == new_out || options.random_init, ErrorCode::invalid_argument,
          "insert_site: non-square site requires random_init");

  std::vector<DenseTensor> padded;
  for (std::size_t n = 0; n < len; ++n) padded.push_back(mpo.padded_site(n));
  const std::size_t chi = (position == 0 || position == len) ? 1 : padded[position].dim(0);

  std::vector<double> data(chi * new_in * new_out * chi, 0.0);
  if (options.random_init) {
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> noise(-options.scale, options.scale);
    for (double& v : data) v = noise(rng);
  } else {
    for (std::size_t b = 0; b < chi; ++b)
      for (std::size_t a = 0; a < new_in; ++a)
        data[((b * new_in + a) * new_out + a) * chi + b] = 1.0;
  }
  padded.insert(padded.begin() + static_cast<std::ptrdiff_t>(position),
                DenseTensor::from_shape({chi, new_in, new_out, chi}, {"l", "i", "j", "r"},
                                        std::move(data)));
  return MPO::from_padded(padded);
}

double mse_loss(const DenseTensor& prediction, const DenseTensor& target) {
  require(prediction.size() == target.size(), ErrorCode::shape_mismatch, "mse_loss: size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < prediction.size(); ++k) {
    const double d = prediction.data()[k] - target.data()[k];
    s += d * d;
  }
  return s / static_cast<double>(prediction.size());
}

TrainResult train_mpo_regression(const DenseTensor& x, const DenseTensor& y,
                                 const MpoLinearLayer& layer, const TrainOptions& options) {
  require(options.lr >= 0.0 && std::isfinite(options.lr), ErrorCode::invalid_argument,
          "train_mpo_regression: lr must be finite and >= 0");
  require_batch(x, layer.in_size(), "training inputs");
  require_batch(y, layer.out_size(), "training targets");
  require(x.dim(0) == y.dim(0) && x.dim(0) >= 1, ErrorCode::shape_mismatch,
          "training inputs and targets must have the same non-zero row count");
  require(options.frozen.empty() || options.frozen.size() == layer.mpo().length(),
          ErrorCode::invalid_argument, "freeze mask length must equal the site count");

  const std::size_t rows = x.dim(0);
  const std::size_t batch = options.batch_size == 0 ? rows : std::min(options.batch_size, rows);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> perm(rows);
  std::iota(perm.begin(), perm.end(), 0);

  auto take_rows = [](const DenseTensor& m, std::span<const std::size_t> which) {
    const std::size_t cols = m.dim(1);
    std::vector<double> d;
    d.reserve(which.size() * cols);
    for (auto r : which)
      d.insert(d.end(), m.data().begin() + static_cast<std::ptrdiff_t>(r * cols),
               m.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
    return DenseTensor({{"batch", which.size(), IndexRole::bond}, m.index(1)}, std::move(d));
  };

  MpoLinearLayer current = layer;
  TrainResult result{layer, {}};
  auto record_loss = [&](std::size_t epoch) {
    double loss = 0.0;
    try {
      loss = mse_loss(mpo_forward(x, current).y, y);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::non_finite) throw;
      loss = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(loss))
      fail(ErrorCode::non_finite,
           "train_mpo_regression: loss became non-finite at epoch " + std::to_string(epoch) +
               " (try a smaller learning rate)");
    result.losses.push_back(loss);
  };
  record_loss(0);

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    if (batch < rows) std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t start = 0; start < rows; start += batch) {
      const std::size_t stop = std::min(rows, start + batch);
      const std::span<const std::size_t> which(perm.data() + start, stop - start);
      const DenseTensor xb = batch < rows ? take_rows(x, which) : x;
      const DenseTensor yb = batch < rows ? take_rows(y, which) : y;

      DenseTensor pred;
      BackwardResult grads;
      try {
        pred = mpo_forward(xb, current).y;
        auto diff = pred.data();
        const double scale = 2.0 / static_cast<double>(pred.size());
        for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = scale * (diff[k] - yb.data()[k]);
        grads = mpo_backward(xb, current, DenseTensor(pred.indices(), std::move(diff)));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::non_finite) throw;
        fail(ErrorCode::non_finite, "train_mpo_regression: non-finite values at epoch " +
                                        std::to_string(epoch) + " (try a smaller learning rate)");
      }

      MPO next = current.mpo();
      for (std::size_t n = 0; n < next.length(); ++n) {
        if (!options.frozen.empty() && options.frozen[n]) continue;
        auto d = next.sites[n].data();
        for (std::size_t k = 0; k < d.size(); ++k) d[k] -= options.lr * grads.d_sites[n].data()[k];
        next.sites[n] = DenseTensor(next.sites[n].indices(), std::move(d));
      }
      next.cut_spectra.clear();
      next.cut_discarded.clear();
      auto bias = current.bias();
      if (bias)
        for (std::size_t c = 0; c < bias->size(); ++c) (*bias)[c] -= options.lr * grads.d_bias[c];
      current = MpoLinearLayer(std::move(next), std::move(bias));
    }
    record_loss(epoch);
  }
  result.layer = current;
  return result;
}

}  // namespace tnz
