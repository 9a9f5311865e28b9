// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tnz/tnz.h"

namespace {

int exit_code(tnz_status s) {
  switch (s) {
    case TNZ_OK: return 0;
    case TNZ_ERR_VALIDATION:
    case TNZ_ERR_NON_FINITE:
    case TNZ_ERR_FACTORIZATION:
    case TNZ_ERR_SINGULAR: return 1;
    default: return 2;
  }
}

int finish(tnz_status s, tnz_buffer* report) {
  if (report) {
    std::fwrite(tnz_buffer_data(report), 1, tnz_buffer_size(report), stdout);
    tnz_buffer_free(report);
  }
  std::fflush(stdout);
  if (s != TNZ_OK) std::fprintf(stderr, "tnz: %s: %s\n", tnz_status_string(s), tnz_last_error());
  return exit_code(s);
}

/// --seed when given, else TNZ_SEED, else 0.
bool resolve_seed(const CLI::Option* opt, std::uint64_t& seed) {
  if (opt->count()) return true;
  const char* env = std::getenv("TNZ_SEED");
  if (!env || !*env) {
    seed = 0;
    return true;
  }
  try {
    std::size_t used = 0;
    seed = std::stoull(env, &used);
    return used == std::string(env).size();
  } catch (const std::exception&) {
    return false;
  }
}

const char* opt_path(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-network layer toolkit", "tnz"};
  app.require_subcommand(1);

  std::string in, out, kind = "mpo", reference, layer, input, strategy, activation = "identity";
  std::string name = "w";
  std::vector<std::size_t> in_dims, out_dims, ranks, schedule, shape;
  std::vector<std::string> layers;
  std::size_t max_bond = 0, cp_rank = 0, batch = 0, trials = 0, epochs = 2000;
  double tol = 0.0, lr = 0.05, verify_tol = 1e-10;
  std::uint64_t seed = 0;
  bool f32 = false;

  auto* pack = app.add_subcommand("pack", "Store whitespace-separated numbers as a dense tensor");
  pack->add_option("--in", in, "Text file of numbers")->required();
  pack->add_option("--out", out, "Output container")->required();
  pack->add_option("--shape", shape, "Tensor shape, comma separated")->required()->delimiter(',');
  pack->add_option("--name", name, "Object name");
  pack->add_flag("--f32", f32, "Write f32 payloads");

  auto* decompose = app.add_subcommand("decompose", "Decompose the first dense object");
  decompose->add_option("--in", in, "Input container")->required();
  decompose->add_option("--out", out, "Output container")->required();
  decompose->add_option("--kind", kind, "mpo|mps|tucker|cp")
      ->check(CLI::IsMember({"mpo", "mps", "tucker", "cp"}));
  decompose->add_option("--in-dims", in_dims, "Input dims (mpo), site dims (mps) or kernel modes (tucker, cp)")->delimiter(',');
  decompose->add_option("--out-dims", out_dims, "Output dims (default: --in-dims)")->delimiter(',');
  decompose->add_option("--max-bond", max_bond, "Bond cap, 0 for none");
  decompose->add_option("--tol", tol, "Relative truncation tolerance");
  decompose->add_option("--ranks", ranks, "Tucker ranks")->delimiter(',');
  decompose->add_option("--cp-rank", cp_rank, "CP rank");
  auto* decompose_seed = decompose->add_option("--seed", seed, "Seed (default: TNZ_SEED or 0)");
  decompose->add_flag("--f32", f32, "Write f32 payloads");

  auto* reconstruct = app.add_subcommand("reconstruct", "Contract every object to a dense tensor");
  reconstruct->add_option("--in", in, "Input container")->required();
  reconstruct->add_option("--out", out, "Output container")->required();
  reconstruct->add_flag("--f32", f32, "Write f32 payloads");

  auto* info = app.add_subcommand("info", "Describe the objects in a container");
  info->add_option("--in", in, "Input container")->required();

  auto* report_cmd = app.add_subcommand("report", "Compression report for every MPO object");
  report_cmd->add_option("--in", in, "Input container")->required();

  auto* plan = app.add_subcommand("plan", "Plan the contraction of an MPO forward pass or network");
  plan->add_option("--in", in, "Input container")->required();
  plan->add_option("--out", out, "Write the plan to this container");
  plan->add_option("--strategy", strategy, "exhaustive|greedy")
      ->check(CLI::IsMember({"exhaustive", "greedy"}));
  plan->add_option("--batch", batch, "Forward-pass batch size");
  plan->add_flag("--f32", f32, "Write f32 payloads");

  auto* forward = app.add_subcommand("forward", "Apply an MPO layer to a batch");
  forward->add_option("--layer", layer, "Layer container")->required();
  forward->add_option("--input", input, "Input container")->required();
  forward->add_option("--out", out, "Output container (values printed when absent)");
  forward->add_option("--batch", batch, "Batch size (default: from the input)");
  forward->add_option("--strategy", strategy, "auto|exhaustive|greedy")
      ->check(CLI::IsMember({"auto", "exhaustive", "greedy"}));
  forward->add_flag("--f32", f32, "Write f32 payloads");

  auto* stack = app.add_subcommand("stack", "Rewrite an MPO as a stack of sparse layers");
  stack->add_option("--in", in, "Input container")->required();
  stack->add_option("--out", out, "Write the stack to this container");
  stack->add_option("--schedule", schedule, "Stage of each site")->delimiter(',');
  stack->add_flag("--f32", f32, "Write f32 payloads");

  auto* gauge = app.add_subcommand("gauge-check", "Check invariance under random bond gauges");
  gauge->add_option("--in", in, "MPO container (default: seeded random MPO)");
  auto* gauge_seed = gauge->add_option("--seed", seed, "Seed (default: TNZ_SEED or 0)");
  gauge->add_option("--trials", trials, "Number of gauges");

  auto* ft = app.add_subcommand("ft-forward", "Run MPO layers on an MPS input");
  ft->add_option("--layers", layers, "Layer containers, comma separated")->required()->delimiter(',');
  ft->add_option("--input", input, "Input container (mps or dense vector)")->required();
  ft->add_option("--out", out, "Output container");
  ft->add_option("--max-bond", max_bond, "Bond cap, 0 for none");
  ft->add_option("--tol", tol, "Relative truncation tolerance");
  ft->add_option("--activation", activation, "identity|relu|tanh, optional :local suffix");
  ft->add_flag("--f32", f32, "Write f32 payloads");

  auto* train = app.add_subcommand("train-demo", "Fit an MPO layer to a realizable target");
  auto* train_seed = train->add_option("--seed", seed, "Seed (default: TNZ_SEED or 0)");
  train->add_option("--lr", lr, "Learning rate");
  train->add_option("--epochs", epochs, "Epochs");
  train->add_option("--out", out, "Write the trained layer");
  train->add_flag("--f32", f32, "Write f32 payloads");

  auto* verify = app.add_subcommand("verify", "Check every object in a container");
  verify->add_option("--in", in, "Input container")->required();
  verify->add_option("--reference", reference, "Container of dense reference objects");
  verify->add_option("--tol", verify_tol, "Reference comparison tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "tnz: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  const auto bad_seed = [] {
    std::cerr << "tnz: TNZ_SEED must be an unsigned integer\n";
    return 2;
  };
  tnz_buffer* report = nullptr;

  if (*pack) {
    tnz_pack_options o{};
    o.in_path = in.c_str();
    o.out_path = out.c_str();
    o.shape = shape.data();
    o.shape_len = shape.size();
    o.name = name.c_str();
    o.f32 = f32;
    const auto s = tnz_pack(&o, &report);
    return finish(s, report);
  }
  if (*decompose) {
    if (!resolve_seed(decompose_seed, seed)) return bad_seed();
    tnz_decompose_options o{};
    o.in_path = in.c_str();
    o.out_path = out.c_str();
    o.kind = kind.c_str();
    o.in_dims = in_dims.data();
    o.in_dims_len = in_dims.size();
    o.out_dims = out_dims.data();
    o.out_dims_len = out_dims.size();
    o.max_bond = max_bond;
    o.tol = tol;
    o.ranks = ranks.data();
    o.ranks_len = ranks.size();
    o.cp_rank = cp_rank;
    o.seed = seed;
    o.f32 = f32;
    const auto s = tnz_decompose(&o, &report);
    return finish(s, report);
  }
  if (*reconstruct) {
    tnz_reconstruct_options o{in.c_str(), out.c_str(), f32};
    const auto s = tnz_reconstruct(&o, &report);
    return finish(s, report);
  }
  if (*info) {
    tnz_info_options o{in.c_str()};
    const auto s = tnz_info(&o, &report);
    return finish(s, report);
  }
  if (*report_cmd) {
    tnz_report_options o{in.c_str()};
    const auto s = tnz_report(&o, &report);
    return finish(s, report);
  }
  if (*plan) {
    tnz_plan_options o{in.c_str(), opt_path(out), opt_path(strategy), batch, f32};
    const auto s = tnz_plan(&o, &report);
    return finish(s, report);
  }
  if (*forward) {
    tnz_forward_options o{layer.c_str(), input.c_str(), opt_path(out), batch, opt_path(strategy), f32};
    const auto s = tnz_forward(&o, &report);
    return finish(s, report);
  }
  if (*stack) {
    tnz_stack_options o{in.c_str(), opt_path(out), schedule.data(), schedule.size(), f32};
    const auto s = tnz_stack(&o, &report);
    return finish(s, report);
  }
  if (*gauge) {
    if (!resolve_seed(gauge_seed, seed)) return bad_seed();
    tnz_gauge_check_options o{opt_path(in), seed, trials};
    const auto s = tnz_gauge_check(&o, &report);
    return finish(s, report);
  }
  if (*ft) {
    std::vector<const char*> paths;
    for (const auto& p : layers) paths.push_back(p.c_str());
    tnz_ft_forward_options o{};
    o.layer_paths = paths.data();
    o.layer_count = paths.size();
    o.input_path = input.c_str();
    o.out_path = opt_path(out);
    o.max_bond = max_bond;
    o.tol = tol;
    o.activation = activation.c_str();
    o.f32 = f32;
    const auto s = tnz_ft_forward(&o, &report);
    return finish(s, report);
  }
  if (*train) {
    if (!resolve_seed(train_seed, seed)) return bad_seed();
    tnz_train_demo_options o{seed, lr, epochs, opt_path(out), f32};
    const auto s = tnz_train_demo(&o, &report);
    return finish(s, report);
  }
  if (*verify) {
    tnz_verify_options o{in.c_str(), opt_path(reference), verify_tol};
    const auto s = tnz_verify(&o, &report);
    return finish(s, report);
  }
  return 2;
}
