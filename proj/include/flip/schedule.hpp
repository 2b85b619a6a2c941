#pragma once

#include <cstdint>
#include <vector>

#include "flip/field.hpp"

namespace flip {

// Per-timestep noise schedule. Arrays are 1-indexed through the accessors;
// t runs 1..T. alpha_bar(0) is defined as 1, which makes sigma(1) == 0 and
// the final reverse step deterministic.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta_v;       // beta_v[t-1]
    std::vector<double> alpha_v;      // 1 - beta
    std::vector<double> alpha_bar_v;  // running product of alpha
    std::vector<double> sigma_v;      // posterior std

    double beta(int t) const { return beta_v[check(t)]; }
    double alpha(int t) const { return alpha_v[check(t)]; }
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_v[check(t)]; }
    double sigma(int t) const { return sigma_v[check(t)]; }

  private:
    std::size_t check(int t) const;
};

NoiseSchedule linear_schedule(int T, double beta_start = 1e-4, double beta_end = 0.02);

Field posterior_mean(const Field& x_t, const Field& eps_pred, int t, const NoiseSchedule& s);
double posterior_sigma(int t, const NoiseSchedule& s);

// x_{t-1} = posterior_mean(x_t, eps_pred, t) + sigma_t * z
Field reverse_step(const Field& x_t, const Field& eps_pred, const Field& z, int t, const NoiseSchedule& s);

struct ScheduleParams {
    int T = 50;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    NoiseSchedule make() const { return linear_schedule(T, beta_start, beta_end); }
    bool operator==(const ScheduleParams&) const = default;
};

}  // namespace flip
