#include "tnz/tensorized.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include "tnz/network.hpp"

namespace tnz {

const char* to_string(ActivationSpec::Kind kind) noexcept {
  switch (kind) {
    case ActivationSpec::Kind::identity: return "identity";
    case ActivationSpec::Kind::relu: return "relu";
    case ActivationSpec::Kind::tanh: return "tanh";
  }
  return "identity";
}

ActivationSpec::Kind activation_kind_from_string(const std::string& s) {
  if (s == "identity") return ActivationSpec::Kind::identity;
  if (s == "relu") return ActivationSpec::Kind::relu;
  if (s == "tanh") return ActivationSpec::Kind::tanh;
  fail(ErrorCode::invalid_argument, "unknown activation '" + s + "'");
}

double activate(ActivationSpec::Kind kind, double v) {
  switch (kind) {
    case ActivationSpec::Kind::identity: return v;
    case ActivationSpec::Kind::relu: return v > 0.0 ? v : 0.0;
    case ActivationSpec::Kind::tanh: return std::tanh(v);
  }
  return v;
}

namespace {

std::string join_dims(const Shape& s) {
  std::string out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k) out += ",";
    out += std::to_string(s[k]);
  }
  return out.empty() ? "-" : out;
}

void require_compatible(const MPO& layer, const MPS& x) {
  require(layer.length() == x.length(), ErrorCode::shape_mismatch,
          "layer has " + std::to_string(layer.length()) + " sites, input has " +
              std::to_string(x.length()));
  require(layer.in_dims() == x.site_dims(), ErrorCode::shape_mismatch,
          "layer input dims do not match the input site dims");
}

}  // namespace

std::string PassTrace::to_text() const {
  std::string out;
  char buf[64];
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    char retensorize[64];
    std::snprintf(buf, sizeof buf, "%.12g", l.truncation_error);
    std::snprintf(retensorize, sizeof retensorize, "%.12g", l.retensorize_error);
    out += "layer=" + std::to_string(k) + " bonds_before=" + join_dims(l.bonds_before) +
           " bonds_after=" + join_dims(l.bonds_after) + " truncation_error=" + buf +
           " retensorize_error=" + retensorize + " est_flops=" + std::to_string(l.est_flops) +
           (l.experimental_local ? " activation=local(experimental)" : "") + "\n";
  }
  return out;
}

MPS apply_mpo_to_mps(const MPO& layer, const MPS& x) {
  layer.validate();
  x.validate();
  require_compatible(layer, x);
  std::vector<DenseTensor> padded;
  const std::array<IndexPair, 1> over_input{IndexPair{1, 1}};
  const std::array<std::size_t, 5> order{0, 3, 1, 2, 4};
  for (std::size_t n = 0; n < layer.length(); ++n) {
    const DenseTensor w = layer.padded_site(n).relabeled({"lw", "i", "j", "rw"});
    const DenseTensor v = x.padded_site(n).relabeled({"lx", "i", "rx"});
    // (lw, j, rw, lx, rx) -> (lw, lx, j, rw, rx)
    const DenseTensor c = permute(contract_pair(w, v, over_input), order);
    padded.push_back(DenseTensor::from_shape(
        {w.dim(0) * v.dim(0), w.dim(2), w.dim(3) * v.dim(2)}, {"l", "p", "r"}, c.data()));
  }
  return MPS::from_padded(padded);
}

std::uint64_t apply_cost(const MPO& layer, const MPS& x) {
  require_compatible(layer, x);
  std::uint64_t total = 0;
  for (std::size_t n = 0; n < layer.length(); ++n) {
    const Shape w = layer.padded_site(n).shape();
    const Shape v = x.padded_site(n).shape();
    const std::array<std::size_t, 1> shared{w[1]};
    total += pairwise_cost(w, v, shared);
  }
  return total;
}

MPS local_activation(const MPS& x, const ActivationSpec& f) {
  require(f.application == ActivationSpec::Application::local, ErrorCode::invalid_argument,
          "local_activation requires a local activation spec");
  x.validate();
  if (f.kind == ActivationSpec::Kind::identity) return x;
  MPS out;
  for (const auto& s : x.sites) {
    auto d = s.data();
    for (double& v : d) v = activate(f.kind, v);
    out.sites.emplace_back(s.indices(), std::move(d));
  }
  return out;
}

TensorizedResult tensorized_forward(const std::vector<TensorizedLayer>& layers, const MPS& x,
                                    std::size_t chi_max, double tol) {
  require(!layers.empty(), ErrorCode::invalid_argument, "tensorized_forward: no layers");
  TensorizedResult result;
  MPS cur = x;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& layer = layers[k];
    try {
      LayerTrace t;
      t.est_flops = apply_cost(layer.mpo, cur);
      const MPS grown = apply_mpo_to_mps(layer.mpo, cur);
      t.bonds_before = grown.bond_dims();
      MPS trimmed = mps_recompress(grown, chi_max, tol);
      double sq = 0.0;
      for (double d : trimmed.cut_discarded) sq += d * d;
      t.truncation_error = std::sqrt(sq);
      t.bonds_after = trimmed.bond_dims();

      const auto& act = layer.activation;
      if (act.kind == ActivationSpec::Kind::identity) {
        cur = std::move(trimmed);
      } else if (act.application == ActivationSpec::Application::local) {
        t.experimental_local = true;
        cur = local_activation(trimmed, act);
      } else {
        const Shape dims = trimmed.site_dims();
        auto v = mps_to_vector(trimmed).data();
        for (double& e : v) e = activate(act.kind, e);
        const std::size_t len = v.size();
        cur = vector_to_mps(DenseTensor::from_shape({len}, {"s"}, std::move(v)), dims, chi_max, tol);
        double rsq = 0.0;
        for (double d : cur.cut_discarded) rsq += d * d;
        t.retensorize_error = std::sqrt(rsq);
      }
      result.trace.layers.push_back(std::move(t));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::non_finite && e.code() != ErrorCode::shape_mismatch) throw;
      fail(e.code(), "tensorized_forward: layer " + std::to_string(k) + ": " + e.what());
    }
  }
  result.output = std::move(cur);
  return result;
}

}  // namespace tnz
