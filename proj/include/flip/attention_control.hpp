#pragma once

#include "flip/denoiser.hpp"
#include "flip/field.hpp"

namespace flip {

struct GuidanceConfig {
    double alpha = 0.15;  // appearance-guidance strength
};

// V' = v_per + alpha * (v_per - v_ref), elementwise. alpha == 0 returns
// v_per unchanged.
Field value_guidance(const Field& v_per, const Field& v_ref, double alpha);

// Builds the replace_kv tap for the reference branch: per block,
// K := K_per and V := value_guidance(V_per, V_ref, alpha).
AttentionTap make_guided_tap(const AttentionTap& recorded_per, const AttentionTap& recorded_ref,
                             const GuidanceConfig& cfg);

}  // namespace flip
