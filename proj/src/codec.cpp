#include "tnz/codec.hpp"

namespace tnz {

using nlohmann::json;

namespace {

void require_kind(const NetworkEntry& n, const char* kind) {
  require(n.kind == kind, ErrorCode::manifest_mismatch,
          "object '" + n.name + "' has kind '" + n.kind + "', expected '" + kind + "'");
}

std::vector<DenseTensor> members(const Container& c, const NetworkEntry& n) {
  std::vector<DenseTensor> out;
  for (const auto& name : n.tensors) out.push_back(c.tensor(name).tensor);
  return out;
}

template <typename T>
T meta_or(const NetworkEntry& n, const char* key, T fallback) {
  if (!n.meta.contains(key) || n.meta.at(key).is_null()) return fallback;
  try {
    return n.meta.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::manifest_mismatch,
         "object '" + n.name + "' meta field '" + key + "' has the wrong type");
  }
}

const char* route_name(BondRoute r) { return r == BondRoute::produced ? "produced" : "consumed"; }

BondRoute route_from(const std::string& s) {
  if (s == "produced") return BondRoute::produced;
  if (s == "consumed") return BondRoute::consumed;
  fail(ErrorCode::manifest_mismatch, "unknown bond route '" + s + "'");
}

json trace_json(const PassTrace& t) {
  json out = json::array();
  for (const auto& l : t.layers)
    out.push_back({{"bonds_before", l.bonds_before},
                   {"bonds_after", l.bonds_after},
                   {"truncation_error", l.truncation_error},
                   {"retensorize_error", l.retensorize_error},
                   {"est_flops", l.est_flops},
                   {"experimental_local", l.experimental_local}});
  return out;
}

std::vector<Bond> chain_bonds(const std::string& name, std::size_t len) {
  std::vector<Bond> b;
  for (std::size_t n = 0; n + 1 < len; ++n)
    b.push_back({name + "/site" + std::to_string(n), bond_label(n),
                 name + "/site" + std::to_string(n + 1), bond_label(n)});
  return b;
}

/// Stored bonds must join consecutive members on b<n>.
void require_chain(const NetworkEntry& n) {
  std::vector<Bond> expected;
  for (std::size_t k = 0; k + 1 < n.tensors.size(); ++k)
    expected.push_back({n.tensors[k], bond_label(k), n.tensors[k + 1], bond_label(k)});
  require(n.bonds == expected, ErrorCode::manifest_mismatch,
          "object '" + n.name + "': bonds do not form the site chain");
}

}  // namespace

void put_dense(Container& c, const std::string& name, const DenseTensor& t) {
  c.add_tensor(name, t);
  NetworkEntry n;
  n.name = name;
  n.kind = "dense";
  n.tensors = {name};
  c.networks.push_back(std::move(n));
}

DenseTensor get_dense(const Container& c, const NetworkEntry& n) {
  require_kind(n, "dense");
  require(n.tensors.size() == 1, ErrorCode::manifest_mismatch,
          "dense object '" + n.name + "' must hold exactly one tensor");
  return c.tensor(n.tensors.front()).tensor;
}

void put_mpo(Container& c, const std::string& name, const MPO& mpo,
             const std::optional<std::vector<double>>& bias) {
  mpo.validate();
  NetworkEntry n;
  n.name = name;
  n.kind = "mpo";
  for (std::size_t k = 0; k < mpo.length(); ++k) {
    n.tensors.push_back(name + "/site" + std::to_string(k));
    c.add_tensor(n.tensors.back(), mpo.sites[k]);
  }
  n.bonds = chain_bonds(name, mpo.length());
  n.meta["in_dims"] = mpo.in_dims();
  n.meta["out_dims"] = mpo.out_dims();
  n.meta["bond_dims"] = mpo.bond_dims();
  n.meta["cut_spectra"] = mpo.cut_spectra;
  n.meta["cut_discarded"] = mpo.cut_discarded;
  if (bias) {
    const std::string bname = name + "/bias";
    c.add_tensor(bname, DenseTensor::from_shape({bias->size()}, {"j"}, *bias, IndexRole::output));
    n.meta["bias"] = bname;
  }
  c.networks.push_back(std::move(n));
}

MPO get_mpo(const Container& c, const NetworkEntry& n) {
  require_kind(n, "mpo");
  require_chain(n);
  MPO m;
  m.sites = members(c, n);
  m.cut_spectra = meta_or(n, "cut_spectra", std::vector<std::vector<double>>{});
  m.cut_discarded = meta_or(n, "cut_discarded", std::vector<double>{});
  try {
    m.validate();
  } catch (const Error& e) {
    fail(ErrorCode::manifest_mismatch, "object '" + n.name + "': " + e.what());
  }
  return m;
}

MpoLinearLayer get_layer(const Container& c, const NetworkEntry& n) {
  MPO m = get_mpo(c, n);
  std::optional<std::vector<double>> bias;
  const auto bname = meta_or(n, "bias", std::string{});
  if (!bname.empty()) bias = c.tensor(bname).tensor.data();
  return MpoLinearLayer(std::move(m), std::move(bias));
}

void put_mps(Container& c, const std::string& name, const MPS& mps, const PassTrace* trace) {
  mps.validate();
  NetworkEntry n;
  n.name = name;
  n.kind = "mps";
  for (std::size_t k = 0; k < mps.length(); ++k) {
    n.tensors.push_back(name + "/site" + std::to_string(k));
    c.add_tensor(n.tensors.back(), mps.sites[k]);
  }
  n.bonds = chain_bonds(name, mps.length());
  n.meta["site_dims"] = mps.site_dims();
  n.meta["bond_dims"] = mps.bond_dims();
  n.meta["cut_spectra"] = mps.cut_spectra;
  n.meta["cut_discarded"] = mps.cut_discarded;
  if (trace) n.meta["trace"] = trace_json(*trace);
  c.networks.push_back(std::move(n));
}

MPS get_mps(const Container& c, const NetworkEntry& n) {
  require_kind(n, "mps");
  require_chain(n);
  MPS m;
  m.sites = members(c, n);
  m.cut_spectra = meta_or(n, "cut_spectra", std::vector<std::vector<double>>{});
  m.cut_discarded = meta_or(n, "cut_discarded", std::vector<double>{});
  try {
    m.validate();
  } catch (const Error& e) {
    fail(ErrorCode::manifest_mismatch, "object '" + n.name + "': " + e.what());
  }
  return m;
}

void put_tucker(Container& c, const std::string& name, const TuckerKernel& t) {
  NetworkEntry n;
  n.name = name;
  n.kind = "tucker";
  n.tensors.push_back(name + "/core");
  c.add_tensor(n.tensors.back(), t.core);
  for (std::size_t m = 0; m < t.factors.size(); ++m) {
    n.tensors.push_back(name + "/factor" + std::to_string(m));
    c.add_tensor(n.tensors.back(), t.factors[m]);
    n.bonds.push_back({name + "/core", t.core.index(m).label, n.tensors.back(),
                       t.factors[m].index(1).label});
  }
  n.meta["ranks"] = t.ranks();
  c.networks.push_back(std::move(n));
}

TuckerKernel get_tucker(const Container& c, const NetworkEntry& n) {
  require_kind(n, "tucker");
  auto parts = members(c, n);
  require(parts.size() == 5, ErrorCode::manifest_mismatch,
          "tucker object '" + n.name + "' must hold a core and four factors");
  TuckerKernel t;
  t.core = parts[0];
  t.factors.assign(parts.begin() + 1, parts.end());
  return t;
}

void put_cp(Container& c, const std::string& name, const CPKernel& k) {
  NetworkEntry n;
  n.name = name;
  n.kind = "cp";
  n.tensors.push_back(name + "/weights");
  c.add_tensor(n.tensors.back(), DenseTensor::from_shape({k.rank()}, {"r"}, k.weights));
  for (std::size_t m = 0; m < k.factors.size(); ++m) {
    n.tensors.push_back(name + "/factor" + std::to_string(m));
    c.add_tensor(n.tensors.back(), k.factors[m]);
  }
  n.meta["rank"] = k.rank();
  c.networks.push_back(std::move(n));
}

CPKernel get_cp(const Container& c, const NetworkEntry& n) {
  require_kind(n, "cp");
  auto parts = members(c, n);
  require(parts.size() == 5 && parts[0].rank() == 1, ErrorCode::manifest_mismatch,
          "cp object '" + n.name + "' must hold weights and four factors");
  CPKernel k;
  k.weights = parts[0].data();
  k.factors.assign(parts.begin() + 1, parts.end());
  return k;
}

void put_general(Container& c, const std::string& name, const TensorNetwork& net) {
  NetworkEntry n;
  n.name = name;
  n.kind = "general";
  for (const auto& node : net.nodes()) {
    n.tensors.push_back(name + "/" + node.name);
    c.add_tensor(n.tensors.back(), node.tensor);
  }
  for (const auto& b : net.bonds())
    n.bonds.push_back({name + "/" + b.node_a, b.label_a, name + "/" + b.node_b, b.label_b});
  c.networks.push_back(std::move(n));
}

TensorNetwork get_general(const Container& c, const NetworkEntry& n) {
  require(n.kind == "general" || n.kind == "mpo" || n.kind == "mps" || n.kind == "tucker",
          ErrorCode::manifest_mismatch,
          "object '" + n.name + "' of kind '" + n.kind + "' is not a contractible network");
  std::vector<NamedTensor> nodes;
  for (const auto& name : n.tensors) nodes.push_back({name, c.tensor(name).tensor});
  try {
    return TensorNetwork(std::move(nodes), n.bonds);
  } catch (const Error& e) {
    fail(ErrorCode::manifest_mismatch, "object '" + n.name + "': " + e.what());
  }
}

void put_stack(Container& c, const std::string& name, const Stack& s,
               const StackSchedule& schedule) {
  NetworkEntry n;
  n.name = name;
  n.kind = "stack";
  json layers = json::array();
  for (std::size_t k = 0; k < s.layers.size(); ++k) {
    const auto& l = s.layers[k];
    n.tensors.push_back(name + "/stage" + std::to_string(k));
    c.add_tensor(n.tensors.back(), l.site_matrix);
    layers.push_back({{"site", l.site},
                      {"left_identity_dims", l.left_identity_dims},
                      {"right_identity_dims", l.right_identity_dims},
                      {"left_route", route_name(l.left_route)},
                      {"right_route", route_name(l.right_route)}});
  }
  n.meta["schedule"] = schedule.stage_of_site;
  n.meta["layers"] = std::move(layers);
  n.meta["stage_dims"] = s.stage_dims;
  c.networks.push_back(std::move(n));
}

Stack get_stack(const Container& c, const NetworkEntry& n) {
  require_kind(n, "stack");
  Stack s;
  const auto parts = members(c, n);
  const json layers = n.meta.value("layers", json::array());
  require(layers.is_array() && layers.size() == parts.size(), ErrorCode::manifest_mismatch,
          "stack object '" + n.name + "' layer metadata does not match its tensors");
  try {
    for (std::size_t k = 0; k < parts.size(); ++k) {
      StackLayer l;
      l.site = layers[k].at("site").get<std::size_t>();
      l.site_matrix = parts[k];
      l.left_identity_dims = layers[k].at("left_identity_dims").get<Shape>();
      l.right_identity_dims = layers[k].at("right_identity_dims").get<Shape>();
      l.left_route = route_from(layers[k].at("left_route").get<std::string>());
      l.right_route = route_from(layers[k].at("right_route").get<std::string>());
      s.layers.push_back(std::move(l));
    }
    s.stage_dims = n.meta.at("stage_dims").get<std::vector<Shape>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::manifest_mismatch, "stack object '" + n.name + "': " + e.what());
  }
  return s;
}

void put_plan(Container& c, const std::string& name, const ContractionPlan& plan,
              const std::string& network, const json& extra_meta) {
  NetworkEntry n;
  n.name = name;
  n.kind = "plan";
  n.meta = extra_meta.is_object() ? extra_meta : json::object();
  json steps = json::array();
  for (const auto& s : plan.steps) steps.push_back({s.left, s.right, s.result});
  n.meta["steps"] = std::move(steps);
  n.meta["est_flops"] = plan.est_flops;
  n.meta["network"] = network;
  c.networks.push_back(std::move(n));
}

ContractionPlan get_plan(const NetworkEntry& n) {
  require_kind(n, "plan");
  ContractionPlan p;
  try {
    for (const auto& s : n.meta.at("steps")) {
      const auto v = s.get<std::vector<std::size_t>>();
      require(v.size() == 3, ErrorCode::manifest_mismatch, "plan steps must have three ids");
      p.steps.push_back({v[0], v[1], v[2]});
    }
    p.est_flops = n.meta.at("est_flops").get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::manifest_mismatch, "plan object '" + n.name + "': " + e.what());
  }
  return p;
}

DenseTensor reconstruct_object(const Container& c, const NetworkEntry& n) {
  if (n.kind == "dense") return get_dense(c, n);
  if (n.kind == "mpo") return mpo_to_matrix(get_mpo(c, n));
  if (n.kind == "mps") return mps_to_vector(get_mps(c, n));
  if (n.kind == "tucker") return tucker_reconstruct(get_tucker(c, n));
  if (n.kind == "cp") return cp_reconstruct(get_cp(c, n));
  if (n.kind == "general") {
    const auto net = get_general(c, n);
    const auto strategy = net.node_count() <= max_exhaustive_nodes ? PlanStrategy::exhaustive
                                                                    : PlanStrategy::greedy;
    return execute_plan(net, plan_contraction(net, strategy));
  }
  fail(ErrorCode::invalid_argument, "object '" + n.name + "' of kind '" + n.kind +
                                        "' has no dense reconstruction");
}

}  // namespace tnz
