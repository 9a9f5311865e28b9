#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tnz/decompose.hpp"

namespace tnz {

struct ActivationSpec {
  enum class Kind { identity, relu, tanh };
  /// dense_oracle contracts to a dense vector, applies the function and
  /// re-tensorizes. local applies it to every site tensor separately, which
  /// does not equal the dense activation for more than one site.
  enum class Application { dense_oracle, local };

  Kind kind = Kind::identity;
  Application application = Application::dense_oracle;
};

const char* to_string(ActivationSpec::Kind kind) noexcept;
ActivationSpec::Kind activation_kind_from_string(const std::string& s);

double activate(ActivationSpec::Kind kind, double v);

struct LayerTrace {
  Shape bonds_before;  // after contraction, before recompression
  Shape bonds_after;
  /// Frobenius error introduced by recompression.
  double truncation_error = 0.0;
  /// Error of re-tensorizing after a dense-oracle activation.
  double retensorize_error = 0.0;
  std::uint64_t est_flops = 0;
  bool experimental_local = false;
};

struct PassTrace {
  std::vector<LayerTrace> layers;

  /// One line per layer, `key=value` pairs separated by spaces.
  std::string to_text() const;
};

/// Site-wise product; bond n of the result is (layer bond n) x (input bond n).
MPS apply_mpo_to_mps(const MPO& layer, const MPS& x);

/// Cost of apply_mpo_to_mps under the pairwise product rule.
std::uint64_t apply_cost(const MPO& layer, const MPS& x);

MPS local_activation(const MPS& x, const ActivationSpec& f);

struct TensorizedLayer {
  MPO mpo;
  ActivationSpec activation;
};

struct TensorizedResult {
  MPS output;
  PassTrace trace;
};

/// Per layer: contract, recompress(chi_max, tol), then activate.
TensorizedResult tensorized_forward(const std::vector<TensorizedLayer>& layers, const MPS& x,
                                    std::size_t chi_max = unbounded, double tol = 0.0);

}  // namespace tnz
