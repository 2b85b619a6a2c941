#include "flip/attention_control.hpp"

#include <cmath>
#include <string>

namespace flip {

Field value_guidance(const Field& v_per, const Field& v_ref, double alpha) {
    if (!v_per.same_shape(v_ref)) throw DimensionError("value_guidance shape mismatch");
    if (!std::isfinite(alpha)) throw ParameterError("value_guidance alpha must be finite");
    if (alpha == 0.0) return v_per;
    Field out(v_per.shape);
    for (std::size_t i = 0; i < v_per.size(); ++i) {
        const double p = v_per.data[i];
        out.data[i] = static_cast<float>(p + alpha * (p - static_cast<double>(v_ref.data[i])));
    }
    return out;
}

AttentionTap make_guided_tap(const AttentionTap& recorded_per, const AttentionTap& recorded_ref,
                             const GuidanceConfig& cfg) {
    const std::size_t n = recorded_per.recorded_k.size();
    if (n == 0 || recorded_per.recorded_v.size() != n) {
        throw ParameterError("make_guided_tap: per-branch recording is empty or inconsistent");
    }
    if (recorded_ref.recorded_k.size() != n || recorded_ref.recorded_v.size() != n) {
        throw DimensionError("make_guided_tap: block counts of the two recordings disagree");
    }
    AttentionTap tap;
    tap.mode = AttentionTap::Mode::replace_kv;
    tap.override_k.reserve(n);
    tap.override_v.reserve(n);
    for (std::size_t b = 0; b < n; ++b) {
        if (!recorded_per.recorded_k[b].same_shape(recorded_ref.recorded_k[b]) ||
            !recorded_per.recorded_v[b].same_shape(recorded_ref.recorded_v[b])) {
            throw DimensionError("make_guided_tap: recording shapes disagree at block " + std::to_string(b));
        }
        tap.override_k.push_back(recorded_per.recorded_k[b]);
        tap.override_v.push_back(value_guidance(recorded_per.recorded_v[b], recorded_ref.recorded_v[b], cfg.alpha));
    }
    return tap;
}

}  // namespace flip
