#pragma once

#include <cmath>
#include <string>

#include "lyapnet/errors.hpp"

namespace lyapnet {

// Hidden-layer activations. RePU is max(0,x)^2, which is C^1 with
// RePU'(x) = 2*max(0,x); tanh and softplus are smooth.
enum class Activation { kRePU, kTanh, kSoftplus };

inline double act_value(Activation a, double z) {
  switch (a) {
    case Activation::kRePU: {
      const double p = z > 0.0 ? z : 0.0;
      return p * p;
    }
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kSoftplus:
      return z > 30.0 ? z : std::log1p(std::exp(z));
  }
  return 0.0;
}

inline double act_deriv(Activation a, double z) {
  switch (a) {
    case Activation::kRePU:
      return z > 0.0 ? 2.0 * z : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::kSoftplus:
      return 1.0 / (1.0 + std::exp(-z));
  }
  return 0.0;
}

// Second derivative; subgradient convention 0 at the RePU kink z=0.
inline double act_second(Activation a, double z) {
  switch (a) {
    case Activation::kRePU:
      return z > 0.0 ? 2.0 : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return -2.0 * t * (1.0 - t * t);
    }
    case Activation::kSoftplus: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
  }
  return 0.0;
}

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kRePU: return "repu";
    case Activation::kTanh: return "tanh";
    case Activation::kSoftplus: return "softplus";
  }
  return "?";
}

inline Activation activation_from_name(const std::string& name) {
  if (name == "repu") return Activation::kRePU;
  if (name == "tanh") return Activation::kTanh;
  if (name == "softplus") return Activation::kSoftplus;
  throw InputError("unknown activation '" + name + "' (expected repu|tanh|softplus)");
}

}  // namespace lyapnet
