#include "mse2c/models.hpp"

namespace mse2c {

std::string to_string(DynamicsVariant v) {
  switch (v) {
    case DynamicsVariant::LocalLinear: return "local_linear";
    case DynamicsVariant::GlobalLinear: return "global_linear";
    case DynamicsVariant::NonLinear: return "non_linear";
  }
  throw ValidationError("to_string: unknown dynamics variant");
}

DynamicsVariant dynamics_variant_from_string(const std::string& s) {
  if (s == "local_linear") return DynamicsVariant::LocalLinear;
  if (s == "global_linear") return DynamicsVariant::GlobalLinear;
  if (s == "non_linear") return DynamicsVariant::NonLinear;
  throw ValidationError("unknown dynamics variant: " + s);
}

}  // namespace mse2c
