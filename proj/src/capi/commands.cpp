#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "internal.hpp"
#include "tnz/codec.hpp"
#include "tnz/layers.hpp"
#include "tnz/stack.hpp"
#include "tnz/tensorized.hpp"

namespace tnz::capi {

namespace {

constexpr double stack_tolerance = 1e-10;
constexpr double gauge_tolerance = 1e-9;
constexpr double cp_column_tolerance = 1e-9;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string join(const Shape& s) {
  std::string out;
  for (std::size_t k = 0; k < s.size(); ++k) out += (k ? "," : "") + std::to_string(s[k]);
  return out.empty() ? "-" : out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + num(v[k]);
  return out.empty() ? "-" : out;
}

Shape to_shape(const std::size_t* p, std::size_t n) {
  return p ? Shape(p, p + n) : Shape{};
}

/// Dense input as a 4-index kernel (x, y, w, h); `dims` reshapes it when given.
DenseTensor as_kernel(const DenseTensor& t, const Shape& dims) {
  if (dims.empty()) return t;
  require(dims.size() == 4, ErrorCode::invalid_argument, "kernel --in-dims must list 4 modes");
  require(shape_product(dims) == t.size(), ErrorCode::shape_mismatch,
          "kernel --in-dims product " + std::to_string(shape_product(dims)) + " != input size " +
              std::to_string(t.size()));
  return DenseTensor::from_shape(dims, {"x", "y", "w", "h"}, t.data());
}

void require_path(const char* path, const char* what) {
  require(path != nullptr && *path != '\0', ErrorCode::invalid_argument,
          std::string("missing required path: ") + what);
}

Container load(const char* path) { return read_container(read_file_bytes(path)); }

void save(Container c, const char* path, int f32) {
  if (f32) c.set_dtype(ElementType::f32);
  write_file_bytes(path, write_container(c));
}

const NetworkEntry& first_of(const Container& c, std::initializer_list<const char*> kinds,
                             const char* path) {
  for (const auto& n : c.networks)
    for (const char* k : kinds)
      if (n.kind == k) return n;
  std::string wanted;
  for (const char* k : kinds) wanted += (wanted.empty() ? "" : "|") + std::string(k);
  fail(ErrorCode::invalid_argument,
       std::string("'") + path + "' holds no object of kind " + wanted);
}

bool reconstructible(const std::string& kind) {
  return kind == "dense" || kind == "mps" || kind == "mpo" || kind == "tucker" ||
         kind == "cp" || kind == "general";
}

/// Copies an object and every tensor it references into `dst`.
void copy_object(Container& dst, const Container& src, const NetworkEntry& n) {
  std::vector<std::string> names = n.tensors;
  if (n.meta.contains("bias") && n.meta["bias"].is_string())
    names.push_back(n.meta["bias"].get<std::string>());
  for (const auto& name : names) {
    const auto& t = src.tensor(name);
    dst.add_tensor(t.name, t.tensor, t.dtype);
    dst.tensors.back().extra = t.extra;
  }
  dst.networks.push_back(n);
}

std::size_t bound(std::size_t max_bond) { return max_bond == 0 ? unbounded : max_bond; }

DenseTensor random_tensor(std::mt19937_64& rng, std::vector<Index> idx, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> data(shape_product(DenseTensor::zeros(idx).shape()));
  for (double& v : data) v = normal(rng);
  return DenseTensor(std::move(idx), std::move(data));
}

MPO random_mpo(std::mt19937_64& rng, const Shape& in, const Shape& out, std::size_t bond,
               double scale) {
  std::vector<DenseTensor> padded;
  for (std::size_t n = 0; n < in.size(); ++n) {
    const std::size_t l = n == 0 ? 1 : bond;
    const std::size_t r = n + 1 == in.size() ? 1 : bond;
    padded.push_back(random_tensor(
        rng, {{"l", l, IndexRole::bond}, {"i", in[n], IndexRole::input},
              {"j", out[n], IndexRole::output}, {"r", r, IndexRole::bond}},
        scale));
  }
  return MPO::from_padded(padded);
}

DenseTensor batch_matrix(std::vector<double> data, std::size_t rows, std::size_t cols) {
  return DenseTensor::from_shape({rows, cols}, {"batch", "features"}, std::move(data));
}

/// Composed stack operator, built row by row from basis vectors.
DenseTensor compose_stack(const Stack& s) {
  const std::size_t in = s.layers.front().in_size();
  const std::size_t out = s.layers.back().out_size();
  std::vector<double> data;
  data.reserve(in * out);
  std::vector<double> e(in, 0.0);
  for (std::size_t r = 0; r < in; ++r) {
    e[r] = 1.0;
    const auto rows = intermediate_features(s, e);
    data.insert(data.end(), rows.back().begin(), rows.back().end());
    e[r] = 0.0;
  }
  return DenseTensor::from_shape({in, out}, {"i", "j"}, std::move(data));
}

ForwardStrategy parse_forward_strategy(const char* s) {
  const std::string v = s ? s : "auto";
  if (v == "auto") return {};
  if (v == "exhaustive") return {ForwardStrategy::Kind::exhaustive, {}};
  if (v == "greedy") return {ForwardStrategy::Kind::greedy, {}};
  fail(ErrorCode::invalid_argument, "unknown strategy '" + v + "'");
}

PlanStrategy parse_plan_strategy(const char* s) {
  const std::string v = s ? s : "exhaustive";
  if (v == "exhaustive") return PlanStrategy::exhaustive;
  if (v == "greedy") return PlanStrategy::greedy;
  fail(ErrorCode::invalid_argument, "unknown strategy '" + v + "'");
}

ActivationSpec parse_activation(const char* s) {
  std::string v = s ? s : "identity";
  ActivationSpec spec;
  const auto colon = v.find(':');
  if (colon != std::string::npos) {
    const std::string mode = v.substr(colon + 1);
    require(mode == "local" || mode == "dense", ErrorCode::invalid_argument,
            "unknown activation mode '" + mode + "'");
    if (mode == "local") spec.application = ActivationSpec::Application::local;
    v = v.substr(0, colon);
  }
  spec.kind = activation_kind_from_string(v);
  return spec;
}

std::string plan_text(const ContractionPlan& p) {
  std::string out;
  for (std::size_t k = 0; k < p.steps.size(); ++k)
    out += "step " + std::to_string(k) + ": " + std::to_string(p.steps[k].left) + " + " +
           std::to_string(p.steps[k].right) + " -> " + std::to_string(p.steps[k].result) + "\n";
  return out;
}

ContractionPlan sequential_plan(const TensorNetwork& net) {
  std::vector<std::pair<NodeId, NodeId>> order;
  NodeId acc = 0;
  for (NodeId k = 1; k < net.node_count(); ++k) {
    order.emplace_back(acc, k);
    acc = net.node_count() + k - 1;
  }
  return plan_fixed(net, order);
}

std::vector<double> entropies(const MPO& m) {
  std::vector<double> out;
  if (m.length() < 2) return out;
  for (const auto& s : mpo_recompress(m).cut_spectra) out.push_back(bond_entropy(s));
  return out;
}

std::vector<double> entropies(const MPS& m) {
  std::vector<double> out;
  if (m.length() < 2) return out;
  for (const auto& s : mps_recompress(m).cut_spectra) out.push_back(bond_entropy(s));
  return out;
}

// Verify ------------------------------------------------------------------

class Checks {
 public:
  void record(const std::string& object, const std::string& check, bool ok,
              const std::string& detail = {}) {
    ++total_;
    if (!ok) ++failed_;
    text_ += object + ": " + check + (ok ? " pass" : " FAIL");
    if (!detail.empty()) text_ += " (" + detail + ")";
    text_ += "\n";
  }

  template <typename Fn>
  void run(const std::string& object, const std::string& check, Fn&& fn) {
    try {
      std::string detail;
      const bool ok = fn(detail);
      record(object, check, ok, detail);
    } catch (const Error& e) {
      record(object, check, false, e.what());
    }
  }

  std::size_t failed() const { return failed_; }
  std::string summary() const {
    return text_ + "verify: " + std::to_string(total_) + " checks, " + std::to_string(failed_) +
           " failed\n";
  }

 private:
  std::string text_;
  std::size_t total_ = 0;
  std::size_t failed_ = 0;
};

bool spectra_consistent(const std::vector<std::vector<double>>& spectra,
                        const std::vector<double>& discarded, const Shape& bonds,
                        std::string& detail) {
  if (spectra.empty() && discarded.empty()) {
    detail = "no spectra recorded";
    return true;
  }
  if (spectra.size() != bonds.size() || discarded.size() != bonds.size()) {
    detail = "spectra count does not match the number of cuts";
    return false;
  }
  for (std::size_t k = 0; k < bonds.size(); ++k) {
    const auto& s = spectra[k];
    if (s.size() != bonds[k]) {
      detail = "cut " + std::to_string(k) + " spectrum length " + std::to_string(s.size()) +
               " != bond dim " + std::to_string(bonds[k]);
      return false;
    }
    for (std::size_t q = 0; q < s.size(); ++q)
      if (s[q] < 0.0 || (q && s[q] > s[q - 1])) {
        detail = "cut " + std::to_string(k) + " spectrum is not non-negative and descending";
        return false;
      }
    if (discarded[k] < 0.0) {
      detail = "negative discarded weight at cut " + std::to_string(k);
      return false;
    }
  }
  return true;
}

void verify_object(Checks& checks, const Container& c, const NetworkEntry& n) {
  const std::string& name = n.name;
  if (n.kind == "dense") {
    checks.run(name, "dense", [&](std::string&) {
      get_dense(c, n);
      return true;
    });
  } else if (n.kind == "mpo") {
    checks.run(name, "mpo-structure", [&](std::string&) {
      get_layer(c, n);
      return true;
    });
    checks.run(name, "mpo-spectra", [&](std::string& d) {
      const MPO m = get_mpo(c, n);
      return spectra_consistent(m.cut_spectra, m.cut_discarded, m.bond_dims(), d);
    });
    checks.run(name, "mpo-compression", [&](std::string& d) {
      const MPO m = get_mpo(c, n);
      const auto r = compression_report(m);
      std::uint64_t total = 0;
      for (std::size_t k = 0; k < m.length(); ++k) total += m.sites[k].size();
      d = "ratio=" + num(r.ratio);
      return r.n_params_tn == total &&
             r.n_params_dense == static_cast<std::uint64_t>(m.in_size()) * m.out_size();
    });
  } else if (n.kind == "mps") {
    checks.run(name, "mps-structure", [&](std::string&) {
      get_mps(c, n);
      return true;
    });
    checks.run(name, "mps-spectra", [&](std::string& d) {
      const MPS m = get_mps(c, n);
      return spectra_consistent(m.cut_spectra, m.cut_discarded, m.bond_dims(), d);
    });
  } else if (n.kind == "tucker") {
    checks.run(name, "tucker-structure", [&](std::string& d) {
      const TuckerKernel t = get_tucker(c, n);
      if (t.core.rank() != 4) {
        d = "core must have four indices";
        return false;
      }
      for (std::size_t m = 0; m < 4; ++m)
        if (t.factors[m].rank() != 2 || t.factors[m].dim(1) != t.core.dim(m)) {
          d = "factor " + std::to_string(m) + " does not match core rank";
          return false;
        }
      tucker_reconstruct(t);
      return true;
    });
  } else if (n.kind == "cp") {
    checks.run(name, "cp-structure", [&](std::string& d) {
      const CPKernel k = get_cp(c, n);
      for (std::size_t m = 0; m < k.factors.size(); ++m) {
        const auto& f = k.factors[m];
        if (f.rank() != 2 || f.dim(1) != k.rank()) {
          d = "factor " + std::to_string(m) + " does not have R columns";
          return false;
        }
        for (std::size_t r = 0; r < k.rank(); ++r) {
          double sq = 0.0;
          for (std::size_t q = 0; q < f.dim(0); ++q) sq += f.data()[q * k.rank() + r] * f.data()[q * k.rank() + r];
          if (std::abs(std::sqrt(sq) - 1.0) > cp_column_tolerance) {
            d = "factor " + std::to_string(m) + " column " + std::to_string(r) + " is not unit norm";
            return false;
          }
        }
      }
      cp_reconstruct(k);
      return true;
    });
  } else if (n.kind == "general") {
    checks.run(name, "general-structure", [&](std::string&) {
      get_general(c, n);
      return true;
    });
  } else if (n.kind == "stack") {
    checks.run(name, "stack-structure", [&](std::string& d) {
      const Stack s = get_stack(c, n);
      if (s.layers.empty() || s.stage_dims.size() != s.layers.size() + 1) {
        d = "stage dims do not match the layer count";
        return false;
      }
      for (std::size_t k = 0; k < s.layers.size(); ++k) {
        if (s.layers[k].in_size() != shape_product(s.stage_dims[k]) ||
            s.layers[k].out_size() != shape_product(s.stage_dims[k + 1])) {
          d = "stage " + std::to_string(k) + " does not chain";
          return false;
        }
      }
      return true;
    });
    const std::string source = n.meta.value("source", std::string{});
    if (const auto* src = source.empty() ? nullptr : c.find_network(source)) {
      checks.run(name, "stack-equivalence", [&](std::string& d) {
        const double diff =
            max_abs_difference(compose_stack(get_stack(c, n)), mpo_to_matrix(get_mpo(c, *src)));
        d = "max_abs_diff=" + num(diff);
        return diff <= stack_tolerance;
      });
    }
  } else if (n.kind == "plan") {
    checks.run(name, "plan-structure", [&](std::string& d) {
      const ContractionPlan p = get_plan(n);
      const std::string target = n.meta.value("network", std::string{});
      const auto* src = target.empty() ? nullptr : c.find_network(target);
      if (!src) {
        d = "target network not stored; steps not replayed";
        return true;
      }
      if (src->kind == "mpo") {
        const MPO m = get_mpo(c, *src);
        const std::size_t batch = n.meta.value("batch", std::size_t{1});
        validate_plan(forward_network(DenseTensor::zeros({{"batch", batch, IndexRole::bond},
                                                          {"features", m.in_size(), IndexRole::input}}),
                                      m),
                      p);
      } else {
        validate_plan(get_general(c, *src), p);
      }
      d = "est_flops=" + std::to_string(p.est_flops);
      return true;
    });
  }
}

}  // namespace

}  // namespace tnz::capi

using namespace tnz;
using tnz::capi::emit;
using tnz::capi::guarded;

extern "C" {

tnz_status tnz_pack(const tnz_pack_options* o, tnz_buffer** report) {
  return guarded(report, [&] {
    require(o != nullptr, ErrorCode::invalid_argument, "null options");
    capi::require_path(o->in_path, "--in");
    capi::require_path(o->out_path, "--out");
    const Shape shape = capi::to_shape(o->shape, o->shape_len);
    require(!shape.empty(), ErrorCode::invalid_argument, "--shape is required");
    std::ifstream in(o->in_path);
    require(static_cast<bool>(in), ErrorCode::io,
            std::string("cannot open '") + o->in_path + "' for reading");
    std::vector<double> values;
    std::string token;
    while (in >> token) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(token, &used));
        require(used == token.size(), ErrorCode::invalid_argument, "bad number '" + token + "'");
      } catch (const std::logic_error&) {
        fail(ErrorCode::invalid_argument, "bad number '" + token + "'");
      }
    }
    require(values.size() == shape_product(shape), ErrorCode::shape_mismatch,
            "read " + std::to_string(values.size()) + " numbers, shape needs " +
                std::to_string(shape_product(shape)));
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < shape.size(); ++k) labels.push_back("x" + std::to_string(k));
    Container c;
    const std::string name = o->name ? o->name : "w";
    put_dense(c, name, DenseTensor::from_shape(shape, labels, std::move(values)));
    capi::save(std::move(c), o->out_path, o->f32);
    emit(report, "packed " + name + " shape=" + capi::join(shape) + "\n");
    return TNZ_OK;
  });
}

tnz_status tnz_decompose(const tnz_decompose_options* o, tnz_buffer** report) {
  return guarded(report, [&] {
    require(o != nullptr, ErrorCode::invalid_argument, "null options");
    capi::require_path(o->in_path, "--in");
    capi::require_path(o->out_path, "--out");
    require(o->tol >= 0.0 && std::isfinite(o->tol), ErrorCode::invalid_argument,
            "--tol must be finite and non-negative");
    const std::string kind = o->kind ? o->kind : "mpo";
    const Container in = capi::load(o->in_path);
    const NetworkEntry& src = capi::first_of(in, {"dense"}, o->in_path);
    const DenseTensor t = get_dense(in, src);
    const Shape in_dims = capi::to_shape(o->in_dims, o->in_dims_len);
    Shape out_dims = capi::to_shape(o->out_dims, o->out_dims_len);
    Container out;
    std::string text = "object " + src.name + " kind=" + kind + "\n";

    if (kind == "mpo") {
      require(!in_dims.empty(), ErrorCode::invalid_argument, "--in-dims is required for mpo");
      if (out_dims.empty()) out_dims = in_dims;
      require(t.rank() == 2, ErrorCode::shape_mismatch, "mpo input must be a matrix");
      const MPO m = matrix_to_mpo(t, in_dims, out_dims, capi::bound(o->max_bond), o->tol);
      put_mpo(out, src.name, m);
      text += "bond_dims=" + capi::join(m.bond_dims()) + "\n";
      text += "cut_discarded=" + capi::join(m.cut_discarded) + "\n";
      text += "relative_error=" + capi::num(relative_difference(mpo_to_matrix(m).reshaped(t.indices()), t)) + "\n";
    } else if (kind == "mps") {
      require(!in_dims.empty(), ErrorCode::invalid_argument, "--in-dims is required for mps");
      const DenseTensor v = DenseTensor::from_shape({t.size()}, {"s"}, t.data());
      const MPS m = vector_to_mps(v, in_dims, capi::bound(o->max_bond), o->tol);
      put_mps(out, src.name, m);
      text += "bond_dims=" + capi::join(m.bond_dims()) + "\n";
      text += "cut_discarded=" + capi::join(m.cut_discarded) + "\n";
      text += "relative_error=" + capi::num(relative_difference(mps_to_vector(m), v)) + "\n";
    } else if (kind == "tucker") {
      const DenseTensor k = capi::as_kernel(t, in_dims);
      TuckerRequest req;
      req.tol = o->tol;
      if (o->ranks_len) req.ranks = capi::to_shape(o->ranks, o->ranks_len);
      const TuckerKernel tk = tucker_decompose(k, req);
      put_tucker(out, src.name, tk);
      text += "ranks=" + capi::join(tk.ranks()) + "\n";
      text += "relative_error=" + capi::num(relative_difference(tucker_reconstruct(tk), k)) + "\n";
    } else if (kind == "cp") {
      require(o->cp_rank > 0, ErrorCode::invalid_argument, "--cp-rank is required for cp");
      CPOptions opts;
      opts.rank = o->cp_rank;
      opts.seed = o->seed;
      const CPResult r = cp_decompose(capi::as_kernel(t, in_dims), opts);
      put_cp(out, src.name, r.kernel);
      text += "rank=" + std::to_string(r.kernel.rank()) + "\n";
      text += "iterations=" + std::to_string(r.iterations) + "\n";
      text += "relative_error=" + capi::num(r.relative_error) + "\n";
    } else {
      fail(ErrorCode::invalid_argument, "unknown kind '" + kind + "' (mpo|mps|tucker|cp)");
    }
    capi::save(std::move(out), o->out_path, o->f32);
    emit(report, std::move(text));
    return TNZ_OK;
  });
}

tnz_status tnz_reconstruct(const tnz_reconstruct_options* o, tnz_buffer** report) {
  return guarded(report, [&] {
    require(o != nullptr, ErrorCode::invalid_argument, "null options");
    capi::require_path(o->in_path, "--in");
    capi::require_path(o->out_path, "--out");
    const Container in = capi::load(o->in_path);
    Container out;
    std::string text;
    for (const auto& n : in.networks) {
      if (!capi::reconstructible(n.kind)) {
        text += "skipped " + n.name + " kind=" + n.kind + "\n";
        continue;
      }
      const DenseTensor t = reconstruct_object(in, n);
      put_dense(out, n.name, t);
      text += "reconstructed " + n.name + " kind=" + n.kind + " shape=" + capi::join(t.shape()) + "\n";
    }
    require(!out.networks.empty(), ErrorCode::invalid_argument,
            std::string("'") + o->in_path + "' holds no reconstructible object");
    capi::save(std::move(out), o->out_path, o->f32);
    emit(report, std::move(text));
    return TNZ_OK;
  });
}

tnz_status tnz_info(const tnz_info_options* o, tnz_buffer** report) {
  return guarded(report, [&] {
    require(o != nullptr, ErrorCode::invalid_argument, "null options");
    capi::require_path(o->in_path, "--in");
    const Container c = capi::load(o->in_path);
    std::string text = "tensors=" + std::to_string(c.tensors.size()) +
                       " objects=" + std::to_string(c.networks.size()) + "\n";
    for (const auto& n : c.networks) {
      text += "object " + n.name + " kind=" + n.kind + "\n";
      if (n.kind == "dense") {
        text += "  shape=" + capi::join(get_dense(c, n).shape()) + "\n";
      } else if (n.kind == "mpo") {
        const MPO m = get_mpo(c, n);
        const auto r = compression_report(m);
        text += "  sites=" + std::to_string(m.length()) + " in_dims=" + capi::join(m.in_dims()) +
                " out_dims=" + capi::join(m.out_dims()) + "\n";
        for (std::size_t k = 0; k < m.length(); ++k)
          text += "  site" + std::to_string(k) + " shape=" + capi::join(m.sites[k].shape()) + "\n";
        text += "  bond_dims=" + capi::join(m.bond_dims()) + "\n";
        text += "  entropies=" + capi::join(capi::entropies(m)) + "\n";
        text += "  n_params_tn=" + std::to_string(r.n_params_tn) +
                " n_params_dense=" + std::to_string(r.n_params_dense) +
                " ratio=" + capi::num(r.ratio) + "\n";
        if (n.meta.contains("bias") && n.meta["bias"].is_string()) text += "  bias=yes\n";
      } else if (n.kind == "mps") {
        const MPS m = get_mps(c, n);
        text += "  sites=" + std::to_string(m.length()) + " site_dims=" + capi::join(m.site_dims()) + "\n";
        text += "  bond_dims=" + capi::join(m.bond_dims()) + "\n";
        text += "  entropies=" + capi::join(capi::entropies(m)) + "\n";
      } else if (n.kind == "tucker") {
        const TuckerKernel t = get_tucker(c, n);
        std::uint64_t params = t.core.size();
        Shape dims;
        for (const auto& f : t.factors) {
          params += f.size();
          dims.push_back(f.dim(0));
        }
        text += "  dims=" + capi::join(dims) + " ranks=" + capi::join(t.ranks()) + "\n";
        text += "  n_params=" + std::to_string(params) + " n_params_dense=" +
                std::to_string(shape_product(dims)) + "\n";
      } else if (n.kind == "cp") {
        const CPKernel k = get_cp(c, n);
        std::uint64_t params = k.rank();
        Shape dims;
        for (const auto& f : k.factors) {
          params += f.size();
          dims.push_back(f.dim(0));
        }
        text += "  dims=" + capi::join(dims) + " rank=" + std::to_string(k.rank()) + "\n";
        text += "  n_params=" + std::to_string(params) + " n_params_dense=" +
                std::to_string(shape_product(dims)) + "\n";
      } else if (n.kind == "general") {
        const TensorNetwork net = get_general(c, n);
        text += "  nodes=" + std::to_string(net.node_count()) +
                " bonds=" + std::to_string(net.bonds().size()) + "\n";
      } else if (n.kind == "stack") {
        const Stack s = get_stack(c, n);
        for (std::size_t k = 0; k < s.stage_dims.size(); ++k)
          text += "  stage" + std::to_string(k) + " dims=" + capi::join(s.stage_dims[k]) + "\n";
      } else if (n.kind == "plan") {
        const ContractionPlan p = get_plan(n);
        text += "  steps=" + std::to_string(p.steps.size()) +
                " est_flops=" + std::to_string(p.est_flops) + "\n";
      }
    }
    emit(report, std::move(text));
    return TNZ_OK;
  });
}

tnz_status tnz_report(const tnz_report_options* o, tnz_buffer** report) {
  return guarded(report, [&] {
    require(o != nullptr, ErrorCode::invalid_argument, "null options");
    capi::require_path(o->in_path, "--in");
    const Container c = capi::load(o->in_path);
    std::string text;
    for (const auto& n : c.networks) {
      if (n.kind != "mpo") continue;
      const auto r = compression_report(get_mpo(c, n));
      text += "object " + n.name + "\n";
      text += "  per_site_counts=" + capi::join(Shape(r.per_site_counts.begin(), r.per_site_counts.end())) + "\n";
      text += "  n_params_tn=" + std::to_string(r.n_params_tn) + "\n";
      text += "  n_params_dense=" + std::to_string(r.n_params_dense) + "\n";
      text += "  ratio=" + capi::num(r.ratio) + "\n";
    }
    require(!text.empty(), ErrorCode::invalid_argument,
            std::string("'") + o->in_path + "' holds no mpo object");
    emit(report, std::move(text));
    return TNZ_OK;
  });
}

tnz_status tnz_plan(const tnz_plan_options* o, tnz_buffer** report) {
  return guarded(report, [&] {
    require(o != nullptr, ErrorCode::invalid_argument, "null options");
    capi::require_path(o->in_path, "--in");
    const PlanStrategy strategy = capi::parse_plan_strategy(o->strategy);
    const Container in = capi::load(o->in_path);
    const NetworkEntry& src = capi::first_of(in, {"mpo", "general"}, o->in_path);
    const std::size_t batch = o->batch ? o->batch : 1;

    ContractionPlan plan;
    std::uint64_t naive = 0;
    std::string text = "object " + src.name + " kind=" + src.kind + "\n";
    if (src.kind == "mpo") {
      const MPO m = get_mpo(in, src);
      const auto net = forward_network(
          DenseTensor::zeros({{"batch", batch, IndexRole::bond},
                              {"features", m.in_size(), IndexRole::input}}),
          m);
      plan = plan_contraction(net, strategy);
      naive = dense_first_cost(m, batch);
      text += "batch=" + std::to_string(batch) + "\n";
    } else {
      const auto net = get_general(in, src);
      plan = plan_contraction(net, strategy);
      naive = capi::sequential_plan(net).est_flops;
    }
    text += std::string("strategy=") + (strategy == PlanStrategy::exhaustive ? "exhaustive" : "greedy") + "\n";
    text += "plan_flops=" + std::to_string(plan.est_flops) + "\n";
    text += "naive_flops=" + std::to_string(naive) + "\n";
    text += capi::plan_text(plan);

    if (o->out_path && *o->out_path) {
      Container out;
      capi::copy_object(out, in, src);
      nlohmann::json meta = {{"naive_flops", naive},
                             {"strategy", strategy == PlanStrategy::exhaustive ? "exhaustive" : "greedy"}};
      if (src.kind == "mpo") meta["batch"] = batch;
      put_plan(out, src.name + ".plan", plan, src.name, meta);
      capi::save(std::move(out), o->out_path, o->f32);
    }
    emit(report, std::move(text));
    return TNZ_OK;
  });
}

tnz_status tnz_forward(const tnz_forward_options* o, tnz_buffer** report) {
  return guarded(report, [&] {
    require(o != nullptr, ErrorCode::invalid_argument, "null options");
    capi::require_path(o->layer_path, "--layer");
    capi::require_path(o->input_path, "--input");
    const ForwardStrategy strategy = capi::parse_forward_strategy(o->strategy);
    const Container lc = capi::load(o->layer_path);
    const MpoLinearLayer layer = get_layer(lc, capi::first_of(lc, {"mpo"}, o->layer_path));
    const Container ic = capi::load(o->input_path);
    const DenseTensor raw = get_dense(ic, capi::first_of(ic, {"dense"}, o->input_path));
    const std::size_t in = layer.in_size();
    std::size_t batch = o->batch;
    if (batch == 0) {
      require(raw.size() % in == 0, ErrorCode::shape_mismatch,
              "input size " + std::to_string(raw.size()) + " is not a multiple of the layer input size " +
                  std::to_string(in));
      batch = raw.size() / in;
    }
    require(raw.size() == batch * in, ErrorCode::shape_mismatch,
            "input holds " + std::to_string(raw.size()) + " values, expected batch " +
                std::to_string(batch) + " x " + std::to_string(in));
    const DenseTensor x = capi::batch_matrix(raw.data(), batch, in);
    const ForwardResult r = mpo_forward(x, layer, strategy);
    std::string text = "batch=" + std::to_string(batch) + " in=" + std::to_string(in) +
                       " out=" + std::to_string(layer.out_size()) + "\n";
    text += "plan_flops=" + std::to_string(r.est_flops) + "\n";
    text += "dense_first_flops=" + std::to_string(dense_first_cost(layer.mpo(), batch)) + "\n";
    if (o->out_path && *o->out_path) {
      Container out;
      put_dense(out, "y", r.y);
      capi::save(std::move(out), o->out_path, o->f32);
    } else {
      const auto& d = r.y.data();
      for (std::size_t b = 0; b < batch; ++b) {
        std::string row;
        for (std::size_t c = 0; c < layer.out_size(); ++c)
          row += (c ? " " : "") + capi::num(d[b * layer.out_size() + c]);
        text += row + "\n";
      }
    }
    emit(report, std::move(text));
    return TNZ_OK;
  });
}

tnz_status tnz_stack(const tnz_stack_options* o, tnz_buffer** report) {
  return guarded(report, [&] {
    require(o != nullptr, ErrorCode::invalid_argument, "null options");
    capi::require_path(o->in_path, "--in");
    const Container in = capi::load(o->in_path);
    const NetworkEntry& src = capi::first_of(in, {"mpo"}, o->in_path);
    const MPO m = get_mpo(in, src);
    StackSchedule schedule = StackSchedule::sequential(m.length());
    if (o->schedule_len) schedule.stage_of_site = capi::to_shape(o->schedule, o->schedule_len);
    const Stack s = build_stack(m, schedule);
    std::string text = "object " + src.name + " schedule=" + capi::join(schedule.stage_of_site) + "\n";
    for (std::size_t k = 0; k < s.layers.size(); ++k)
      text += "stage " + std::to_string(k) + ": site=" + std::to_string(s.layers[k].site) +
              " in=" + capi::join(s.stage_dims[k]) + " out=" + capi::join(s.stage_dims[k + 1]) +
              " site_matrix=" + capi::join(s.layers[k].site_matrix.shape()) + "\n";
    const double diff = max_abs_difference(capi::compose_stack(s), mpo_to_matrix(m));
    const bool ok = diff <= capi::stack_tolerance;
    text += "max_abs_diff=" + capi::num(diff) + (ok ? " pass\n" : " FAIL\n");
    if (o->out_path && *o->out_path) {
      Container out;
      capi::copy_object(out, in, src);
      put_stack(out, src.name + ".stack", s, schedule);
      out.networks.back().meta["source"] = src.name;
      capi::save(std::move(out), o->out_path, o->f32);
    }
    emit(report, std::move(text));
    if (!ok) capi::set_last_error("composed stack differs from the dense matrix");
    return ok ? TNZ_OK : TNZ_ERR_VALIDATION;
  });
}

tnz_status tnz_gauge_check(const tnz_gauge_check_options* o, tnz_buffer** report) {
  return guarded(report, [&] {
    require(o != nullptr, ErrorCode::invalid_argument, "null options");
    std::mt19937_64 rng(o->seed);
    MPO m;
    if (o->in_path && *o->in_path) {
      const Container in = capi::load(o->in_path);
      m = get_mpo(in, capi::first_of(in, {"mpo"}, o->in_path));
    } else {
      m = capi::random_mpo(rng, {2, 3, 2}, {3, 2, 2}, 3, 0.5);
    }
    require(m.length() >= 2, ErrorCode::invalid_argument, "gauge-check needs at least two sites");
    const std::size_t trials = o->trials ? o->trials : 100;
    const DenseTensor w = mpo_to_matrix(m);
    const DenseTensor x = capi::random_tensor(
        rng, {{"batch", 4, IndexRole::bond}, {"features", m.in_size(), IndexRole::input}}, 1.0);
    const MpoLinearLayer base(m);
    const DenseTensor y = mpo_forward(x, base).y;
    double worst_matrix = 0.0, worst_forward = 0.0;
    std::size_t rejected = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t cut = rng() % (m.length() - 1);
      const std::size_t chi = m.bond_dims()[cut];
      std::optional<GaugeTransform> g;
      while (!g) {
        auto xg = capi::random_tensor(rng, {{"g0", chi, IndexRole::bond}, {"g1", chi, IndexRole::bond}}, 0.5);
        auto d = xg.data();
        for (std::size_t q = 0; q < chi; ++q) d[q * chi + q] += 1.0;
        try {
          g = GaugeTransform::from_matrix(cut, DenseTensor(xg.indices(), std::move(d)));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::singular) throw;
          ++rejected;
        }
      }
      const MPO gauged = apply_gauge(m, *g);
      worst_matrix = std::max(worst_matrix, relative_difference(mpo_to_matrix(gauged), w));
      worst_forward = std::max(worst_forward, relative_difference(mpo_forward(x, MpoLinearLayer(gauged)).y, y));
    }
    const bool ok = worst_matrix <= capi::gauge_tolerance && worst_forward <= capi::gauge_tolerance;
    std::string text = "seed=" + std::to_string(o->seed) + " trials=" + std::to_string(trials) +
                       " rejected=" + std::to_string(rejected) + "\n";
    text += "bond_dims=" + capi::join(m.bond_dims()) + "\n";
    text += "max_rel_diff_matrix=" + capi::num(worst_matrix) + "\n";
    text += "max_rel_diff_forward=" + capi::num(worst_forward) + "\n";
    text += ok ? "gauge-check pass\n" : "gauge-check FAIL\n";
    emit(report, std::move(text));
    if (!ok) capi::set_last_error("gauge transform changed the layer output");
    return ok ? TNZ_OK : TNZ_ERR_VALIDATION;
  });
}

tnz_status tnz_ft_forward(const tnz_ft_forward_options* o, tnz_buffer** report) {
  return guarded(report, [&] {
    require(o != nullptr, ErrorCode::invalid_argument, "null options");
    require(o->layer_count > 0 && o->layer_paths, ErrorCode::invalid_argument,
            "--layers needs at least one file");
    capi::require_path(o->input_path, "--input");
    require(o->tol >= 0.0 && std::isfinite(o->tol), ErrorCode::invalid_argument,
            "--tol must be finite and non-negative");
    const ActivationSpec act = capi::parse_activation(o->activation);
    std::vector<TensorizedLayer> layers;
    for (std::size_t k = 0; k < o->layer_count; ++k) {
      capi::require_path(o->layer_paths[k], "--layers");
      const Container c = capi::load(o->layer_paths[k]);
      layers.push_back({get_mpo(c, capi::first_of(c, {"mpo"}, o->layer_paths[k])), act});
    }
    const Container ic = capi::load(o->input_path);
    const NetworkEntry& src = capi::first_of(ic, {"mps", "dense"}, o->input_path);
    MPS x;
    if (src.kind == "mps") {
      x = get_mps(ic, src);
    } else {
      const DenseTensor raw = get_dense(ic, src);
      x = vector_to_mps(DenseTensor::from_shape({raw.size()}, {"s"}, raw.data()),
                        layers.front().mpo.in_dims());
    }
    const TensorizedResult r = tensorized_forward(layers, x, capi::bound(o->max_bond), o->tol);
    std::string text = "activation=" + std::string(to_string(act.kind)) +
                       (act.application == ActivationSpec::Application::local ? ":local" : "") + "\n";
    text += r.trace.to_text();
    text += "output_site_dims=" + capi::join(r.output.site_dims()) +
            " output_bonds=" + capi::join(r.output.bond_dims()) + "\n";
    text += "output_norm=" + capi::num(mps_to_vector(r.output).frobenius_norm()) + "\n";
    if (o->out_path && *o->out_path) {
      Container out;
      put_mps(out, "y", r.output, &r.trace);
      capi::save(std::move(out), o->out_path, o->f32);
    }
    emit(report, std::move(text));
    return TNZ_OK;
  });
}

tnz_status tnz_train_demo(const tnz_train_demo_options* o, tnz_buffer** report) {
  return guarded(report, [&] {
    require(o != nullptr, ErrorCode::invalid_argument, "null options");
    const double lr = o->lr > 0.0 ? o->lr : 0.05;
    const std::size_t epochs = o->epochs ? o->epochs : 2000;
    std::mt19937_64 rng(o->seed);
    const Shape dims{4, 4};
    const MPO teacher = capi::random_mpo(rng, dims, dims, 2, 0.5);
    const MPO student = capi::random_mpo(rng, dims, dims, 2, 0.5);
    const std::size_t batch = 64;
    const DenseTensor x = capi::random_tensor(
        rng, {{"batch", batch, IndexRole::bond}, {"features", 16, IndexRole::input}}, 1.0);
    const DenseTensor y = mpo_forward(x, MpoLinearLayer(teacher)).y;

    TrainOptions opts;
    opts.lr = lr;
    opts.epochs = epochs;
    opts.seed = o->seed;
    const TrainResult r = train_mpo_regression(x, y, MpoLinearLayer(student), opts);
    const double scale = mse_loss(DenseTensor::zeros(y.indices()), y);
    std::string text = "seed=" + std::to_string(o->seed) + " lr=" + capi::num(lr) +
                       " epochs=" + std::to_string(epochs) + " features=16 bond=2 batch=64\n";
    const std::size_t every = std::max<std::size_t>(1, epochs / 10);
    for (std::size_t e = 0; e < r.losses.size(); ++e)
      if (e % every == 0 || e + 1 == r.losses.size())
        text += "epoch " + std::to_string(e) + " loss=" + capi::num(r.losses[e]) + "\n";
    text += "relative_loss=" + capi::num(r.losses.back() / scale) + "\n";
    if (o->out_path && *o->out_path) {
      Container out;
      put_mpo(out, "student", r.layer.mpo());
      put_mpo(out, "teacher", teacher);
      capi::save(std::move(out), o->out_path, o->f32);
    }
    emit(report, std::move(text));
    return TNZ_OK;
  });
}

tnz_status tnz_verify(const tnz_verify_options* o, tnz_buffer** report) {
  return guarded(report, [&] {
    require(o != nullptr, ErrorCode::invalid_argument, "null options");
    capi::require_path(o->in_path, "--in");
    const double tol = o->tol > 0.0 ? o->tol : 1e-10;
    const Container c = capi::load(o->in_path);
    capi::Checks checks;
    checks.record("container", "format", true,
                  std::to_string(c.tensors.size()) + " tensors, " +
                      std::to_string(c.networks.size()) + " objects");
    for (const auto& n : c.networks) capi::verify_object(checks, c, n);

    if (o->reference_path && *o->reference_path) {
      const Container ref = capi::load(o->reference_path);
      std::size_t matched = 0;
      for (const auto& n : c.networks) {
        if (!capi::reconstructible(n.kind)) continue;
        const auto* r = ref.find_network(n.name);
        if (!r || r->kind != "dense") continue;
        ++matched;
        checks.run(n.name, "reference", [&](std::string& d) {
          const DenseTensor a = reconstruct_object(c, n);
          const DenseTensor b = get_dense(ref, *r);
          if (a.size() != b.size()) {
            d = "size " + std::to_string(a.size()) + " != reference " + std::to_string(b.size());
            return false;
          }
          double diff = 0.0;
          for (std::size_t k = 0; k < a.size(); ++k)
            diff = std::max(diff, std::abs(a.data()[k] - b.data()[k]));
          d = "max_abs_diff=" + capi::num(diff) + " tol=" + capi::num(tol);
          return diff <= tol;
        });
      }
      checks.record("reference", "matched", matched > 0, std::to_string(matched) + " objects");
    }
    emit(report, checks.summary());
    if (checks.failed()) capi::set_last_error(std::to_string(checks.failed()) + " checks failed");
    return checks.failed() ? TNZ_ERR_VALIDATION : TNZ_OK;
  });
}

}  // extern "C"
