// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace fusegraph {

// Affine map between float and integer domains: q = round(x * s + z),
// x' = (q - z) / s. Float 0.0 always maps exactly to z.
struct QuantParams {
  float s = 1.0f;    // float -> int multiplier
  int32_t z = 0;     // zero point
  int32_t qmin = -128;
  int32_t qmax = 127;

  bool operator==(const QuantParams& other) const {
    return s == other.s && z == other.z && qmin == other.qmin &&
           qmax == other.qmax;
  }
};

}  // namespace fusegraph
