#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tnz/container.hpp"
#include "tnz/decompose.hpp"
#include "tnz/layers.hpp"
#include "tnz/stack.hpp"
#include "tnz/tensorized.hpp"

namespace tnz {

// Each object is stored as one network entry whose member tensors are named
// "<object>/<part>". Encoders append to the container; decoders take the
// network entry and reject a kind mismatch.

void put_dense(Container& c, const std::string& name, const DenseTensor& t);
DenseTensor get_dense(const Container& c, const NetworkEntry& n);

void put_mpo(Container& c, const std::string& name, const MPO& mpo,
             const std::optional<std::vector<double>>& bias = std::nullopt);
MPO get_mpo(const Container& c, const NetworkEntry& n);
MpoLinearLayer get_layer(const Container& c, const NetworkEntry& n);

void put_mps(Container& c, const std::string& name, const MPS& mps,
             const PassTrace* trace = nullptr);
MPS get_mps(const Container& c, const NetworkEntry& n);

void put_tucker(Container& c, const std::string& name, const TuckerKernel& t);
TuckerKernel get_tucker(const Container& c, const NetworkEntry& n);

void put_cp(Container& c, const std::string& name, const CPKernel& k);
CPKernel get_cp(const Container& c, const NetworkEntry& n);

void put_general(Container& c, const std::string& name, const TensorNetwork& net);
TensorNetwork get_general(const Container& c, const NetworkEntry& n);

void put_stack(Container& c, const std::string& name, const Stack& s,
               const StackSchedule& schedule);
Stack get_stack(const Container& c, const NetworkEntry& n);

/// `network` names the object the plan was computed for (may be empty).
void put_plan(Container& c, const std::string& name, const ContractionPlan& plan,
              const std::string& network, const nlohmann::json& extra_meta = nlohmann::json::object());
ContractionPlan get_plan(const NetworkEntry& n);

/// Dense tensor represented by any reconstructible object (dense, mps, mpo,
/// tucker, cp, general). Throws for stack and plan.
DenseTensor reconstruct_object(const Container& c, const NetworkEntry& n);

}  // namespace tnz
