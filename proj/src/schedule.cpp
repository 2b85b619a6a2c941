#include "flip/schedule.hpp"

#include <cmath>
#include <string>

namespace flip {

std::size_t NoiseSchedule::check(int t) const {
    if (t < 1 || t > T) throw ParameterError("timestep out of range: t=" + std::to_string(t));
    return static_cast<std::size_t>(t - 1);
}

NoiseSchedule linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw ParameterError("schedule needs T >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw ParameterError("schedule needs 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.T = T;
    s.beta_v.resize(T);
    s.alpha_v.resize(T);
    s.alpha_bar_v.resize(T);
    s.sigma_v.resize(T);
    double bar = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
        const double b = beta_start + (beta_end - beta_start) * frac;
        s.beta_v[t - 1] = b;
        s.alpha_v[t - 1] = 1.0 - b;
        bar *= 1.0 - b;
        s.alpha_bar_v[t - 1] = bar;
    }
    for (int t = 1; t <= T; ++t) {
        const double prev = s.alpha_bar(t - 1);
        s.sigma_v[t - 1] = std::sqrt(s.beta(t) * (1.0 - prev) / (1.0 - s.alpha_bar(t)));
    }
    return s;
}

Field posterior_mean(const Field& x_t, const Field& eps_pred, int t, const NoiseSchedule& s) {
    if (!x_t.same_shape(eps_pred)) throw DimensionError("posterior_mean shape mismatch");
    const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
    const double eps_coef = s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t));
    Field out(x_t.shape);
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        out.data[i] = static_cast<float>(inv_sqrt_alpha * (static_cast<double>(x_t.data[i]) - eps_coef * static_cast<double>(eps_pred.data[i])));
    }
    return out;
}

double posterior_sigma(int t, const NoiseSchedule& s) {
    return s.sigma(t);
}

Field reverse_step(const Field& x_t, const Field& eps_pred, const Field& z, int t, const NoiseSchedule& s) {
    Field mu = posterior_mean(x_t, eps_pred, t, s);
    if (!mu.same_shape(z)) throw DimensionError("reverse_step noise shape mismatch");
    const double sg = s.sigma(t);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        mu.data[i] = static_cast<float>(static_cast<double>(mu.data[i]) + sg * static_cast<double>(z.data[i]));
    }
    return mu;
}

}  // namespace flip
