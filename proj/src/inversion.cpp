#include "flip/inversion.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "flip/ltf.hpp"

namespace flip {

namespace {

// The final reverse step is deterministic (sigma_1 = 0), so the replayed
// x_1 must satisfy posterior_mean(x_1, eps(x_1, 1), 1) == x0 for the
// round trip to close. Solves the fixed point
//   x = sqrt(alpha_1) * x0 + sqrt(beta_1) * eps(x, 1, cond)
// by damped iteration from the path's x_1.
Field solve_final_latent(const Field& x0, const Field& x1_init, const Denoiser& d, const PromptEmbedding& cond,
                         const NoiseSchedule& s) {
    const double sqrt_alpha = std::sqrt(s.alpha(1));
    const double sqrt_beta = std::sqrt(1.0 - s.alpha_bar(1));
    Field x = x1_init;
    float prev_delta = std::numeric_limits<float>::max();
    double damp = 1.0;
    for (int iter = 0; iter < 200; ++iter) {
        const Field eps = predict_noise(d, x, 1, cond);
        Field next(x.shape);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double target = sqrt_alpha * static_cast<double>(x0.data[i]) + sqrt_beta * static_cast<double>(eps.data[i]);
            next.data[i] = static_cast<float>((1.0 - damp) * static_cast<double>(x.data[i]) + damp * target);
        }
        const float delta = max_abs_diff(next, x);
        x = std::move(next);
        if (delta < 1e-7f) break;
        if (delta > prev_delta) damp = std::max(0.125, damp * 0.5);
        prev_delta = delta;
    }
    return x;
}

}  // namespace

Field forward_marginal(const Field& x0, double alpha_bar, const Field& eps) {
    if (!x0.same_shape(eps)) throw DimensionError("forward_marginal shape mismatch");
    const double a = std::sqrt(alpha_bar);
    const double b = std::sqrt(1.0 - alpha_bar);
    Field out(x0.shape);
    for (std::size_t i = 0; i < x0.size(); ++i) {
        out.data[i] = static_cast<float>(a * static_cast<double>(x0.data[i]) + b * static_cast<double>(eps.data[i]));
    }
    return out;
}

std::vector<Field> noising_path(const Field& x0, const NoiseSchedule& s, Rng& rng) {
    if (!x0.all_finite()) throw NumericError("noising_path input must be finite");
    std::vector<Field> path;
    path.reserve(s.T);
    for (int t = 1; t <= s.T; ++t) {
        const Field eps = randn(rng, x0.shape);
        path.push_back(forward_marginal(x0, s.alpha_bar(t), eps));
    }
    return path;
}

NoiseMapTrack extract_noise_maps(const Field& x0, const std::vector<Field>& path, const Denoiser& d,
                                 const PromptEmbedding& cond, const NoiseSchedule& s) {
    if (static_cast<int>(path.size()) != s.T) throw DimensionError("path length does not match schedule");
    for (const Field& x : path) {
        if (!x.same_shape(x0)) throw DimensionError("path latent shape mismatch");
    }

    NoiseMapTrack track;
    track.cond_tokens = cond.tokens;
    track.schedule = ScheduleParams{s.T, s.beta(1), s.beta(s.T)};
    track.x_terminal = path[s.T - 1];
    track.z.assign(s.T, Field(x0.shape));

    // Re-anchored working copy: after each z_t is fixed, x_{t-1} becomes
    // exactly what replay will produce, so float drift cannot accumulate.
    std::vector<Field> x(path);

    const Field x1_exact = solve_final_latent(x0, path[0], d, cond, s);
    if (s.T == 1) {
        track.x_terminal = x1_exact;
    } else {
        x[0] = x1_exact;
    }

    for (int t = s.T; t >= 2; --t) {
        const double sg = s.sigma(t);
        if (!(sg > 0.0)) throw NumericError("posterior sigma vanished at t=" + std::to_string(t));
        const Field eps = predict_noise(d, x[t - 1], t, cond);
        const Field mu = posterior_mean(x[t - 1], eps, t, s);
        Field& zt = track.z[t - 1];
        const Field& target = x[t - 2];
        for (std::size_t i = 0; i < zt.size(); ++i) {
            zt.data[i] = static_cast<float>((static_cast<double>(target.data[i]) - static_cast<double>(mu.data[i])) / sg);
        }
        x[t - 2] = reverse_step(x[t - 1], eps, zt, t, s);
    }

    const Field x1 = s.T == 1 ? track.x_terminal : x[0];
    const Field eps1 = predict_noise(d, x1, 1, cond);
    track.final_step_residual = max_abs_diff(posterior_mean(x1, eps1, 1, s), x0);
    return track;
}

NoiseMapTrack invert(const Field& x0, const Denoiser& d, const PromptEmbedding& cond, const NoiseSchedule& s,
                     Rng& rng) {
    return extract_noise_maps(x0, noising_path(x0, s, rng), d, cond, s);
}

Field replay_step(const Field& x_t, int t, const NoiseMapTrack& track, const Denoiser& d,
                  const PromptEmbedding& cond, const NoiseSchedule& s, AttentionTap* tap) {
    const Field eps = predict_noise(d, x_t, t, cond, tap);
    return reverse_step(x_t, eps, track.z[t - 1], t, s);
}

Field replay(const NoiseMapTrack& track, const Denoiser& d, const PromptEmbedding& cond, const NoiseSchedule& s,
             const TapProvider& taps) {
    if (static_cast<int>(track.z.size()) != s.T) throw DimensionError("track does not match schedule");
    Field x = track.x_terminal;
    for (int t = s.T; t >= 1; --t) {
        AttentionTap* tap = taps ? taps(t) : nullptr;
        x = replay_step(x, t, track, d, cond, s, tap);
    }
    return x;
}

std::vector<Field> replay_trajectory(const NoiseMapTrack& track, const Denoiser& d, const PromptEmbedding& cond,
                                     const NoiseSchedule& s) {
    if (static_cast<int>(track.z.size()) != s.T) throw DimensionError("track does not match schedule");
    std::vector<Field> xs;
    xs.reserve(s.T + 1);
    xs.push_back(track.x_terminal);
    for (int t = s.T; t >= 1; --t) {
        xs.push_back(replay_step(xs.back(), t, track, d, cond, s));
    }
    return xs;
}

namespace {

Field ddim_predicted_x0(const Field& x_t, const Field& eps, double alpha_bar) {
    Field out(x_t.shape);
    const double sa = std::sqrt(alpha_bar);
    const double sb = std::sqrt(1.0 - alpha_bar);
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        out.data[i] = static_cast<float>((static_cast<double>(x_t.data[i]) - sb * static_cast<double>(eps.data[i])) / sa);
    }
    return out;
}

}  // namespace

NoiseMapTrack ddim_invert(const Field& x0, const Denoiser& d, const PromptEmbedding& cond, const NoiseSchedule& s) {
    if (!x0.all_finite()) throw NumericError("ddim_invert input must be finite");
    std::vector<Field> path;
    path.reserve(s.T + 1);
    path.push_back(x0);
    for (int t = 1; t <= s.T; ++t) {
        const Field& xt = path.back();
        const Field eps = predict_noise(d, xt, t, cond);
        const Field pred_x0 = ddim_predicted_x0(xt, eps, s.alpha_bar(t - 1));
        path.push_back(forward_marginal(pred_x0, s.alpha_bar(t), eps));
    }

    NoiseMapTrack track;
    track.cond_tokens = cond.tokens;
    track.schedule = ScheduleParams{s.T, s.beta(1), s.beta(s.T)};
    track.x_terminal = path[s.T];
    track.z.assign(s.T, Field(x0.shape));
    for (int t = s.T; t >= 2; --t) {
        const double sg = s.sigma(t);
        const Field eps = predict_noise(d, path[t], t, cond);
        const Field mu = posterior_mean(path[t], eps, t, s);
        Field& zt = track.z[t - 1];
        for (std::size_t i = 0; i < zt.size(); ++i) {
            zt.data[i] = static_cast<float>((static_cast<double>(path[t - 1].data[i]) - static_cast<double>(mu.data[i])) / sg);
        }
    }
    const Field eps1 = predict_noise(d, path[1], 1, cond);
    track.final_step_residual = max_abs_diff(posterior_mean(path[1], eps1, 1, s), x0);
    return track;
}

Field ddim_reconstruct(const NoiseMapTrack& track, const Denoiser& d, const PromptEmbedding& cond,
                       const NoiseSchedule& s) {
    Field x = track.x_terminal;
    for (int t = s.T; t >= 1; --t) {
        const Field eps = predict_noise(d, x, t, cond);
        const Field pred_x0 = ddim_predicted_x0(x, eps, s.alpha_bar(t));
        x = forward_marginal(pred_x0, s.alpha_bar(t - 1), eps);
    }
    return x;
}

void save_track(const NoiseMapTrack& track, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_ltf(track.x_terminal, dir / "x_T.ltf");
    const int T = static_cast<int>(track.z.size());
    char name[32];
    for (int t = 2; t <= T; ++t) {
        std::snprintf(name, sizeof(name), "z_%04d.ltf", t);
        write_ltf(track.z[t - 1], dir / name);
    }
    nlohmann::json manifest;
    manifest["schedule"] = {{"T", track.schedule.T},
                            {"beta_start", track.schedule.beta_start},
                            {"beta_end", track.schedule.beta_end}};
    manifest["cond_tokens"] = track.cond_tokens;
    manifest["shape"] = track.x_terminal.shape;
    manifest["final_step_residual"] = track.final_step_residual;
    std::ofstream os(dir / "manifest.json");
    if (!os) throw IoError("cannot write track manifest in " + dir.string());
    os << manifest.dump(2) << "\n";
}

NoiseMapTrack load_track(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw IoError("cannot open track manifest in " + dir.string());
    nlohmann::json manifest;
    try {
        is >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed track manifest in " + dir.string() + ": " + e.what());
    }
    NoiseMapTrack track;
    try {
        track.schedule.T = manifest.at("schedule").at("T").get<int>();
        track.schedule.beta_start = manifest.at("schedule").at("beta_start").get<double>();
        track.schedule.beta_end = manifest.at("schedule").at("beta_end").get<double>();
        track.cond_tokens = manifest.at("cond_tokens").get<std::vector<std::string>>();
        track.final_step_residual = manifest.value("final_step_residual", 0.0f);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("track manifest missing fields in " + dir.string() + ": " + e.what());
    }
    track.x_terminal = read_ltf(dir / "x_T.ltf");
    track.z.assign(track.schedule.T, Field(track.x_terminal.shape));
    char name[32];
    for (int t = 2; t <= track.schedule.T; ++t) {
        std::snprintf(name, sizeof(name), "z_%04d.ltf", t);
        track.z[t - 1] = read_ltf(dir / name);
        if (!track.z[t - 1].same_shape(track.x_terminal)) {
            throw IoError("track noise map shape mismatch in " + dir.string());
        }
    }
    return track;
}

}  // namespace flip
