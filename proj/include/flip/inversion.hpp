#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "flip/denoiser.hpp"
#include "flip/field.hpp"
#include "flip/schedule.hpp"

namespace flip {

// Per-timestep noise maps extracted from one inverted image. z is indexed
// z[t-1] for t = 1..T; z[0] stays all-zeros because the final reverse step
// is deterministic. Replaying the track reconstructs the source image.
struct NoiseMapTrack {
    Field x_terminal;  // x_T
    std::vector<Field> z;
    std::vector<std::string> cond_tokens;
    ScheduleParams schedule;

    // Residual of the deterministic final step against the source image,
    // measured at extraction time.
    float final_step_residual = 0.0f;
};

// x_t = sqrt(abar) * x0 + sqrt(1 - abar) * eps
Field forward_marginal(const Field& x0, double alpha_bar, const Field& eps);

// Independent-noise forward path x_1..x_T, one fresh draw per step, drawn
// in ascending t order.
std::vector<Field> noising_path(const Field& x0, const NoiseSchedule& s, Rng& rng);

NoiseMapTrack extract_noise_maps(const Field& x0, const std::vector<Field>& path, const Denoiser& d,
                                 const PromptEmbedding& cond, const NoiseSchedule& s);

// Convenience: noising_path + extract_noise_maps.
NoiseMapTrack invert(const Field& x0, const Denoiser& d, const PromptEmbedding& cond, const NoiseSchedule& s,
                     Rng& rng);

// Optional per-step tap lookup for the reverse loop; may return nullptr.
using TapProvider = std::function<AttentionTap*(int t)>;

// One reverse step of the track replay; shared with the blend loop.
Field replay_step(const Field& x_t, int t, const NoiseMapTrack& track, const Denoiser& d,
                  const PromptEmbedding& cond, const NoiseSchedule& s, AttentionTap* tap = nullptr);

Field replay(const NoiseMapTrack& track, const Denoiser& d, const PromptEmbedding& cond, const NoiseSchedule& s,
             const TapProvider& taps = {});

// Full reverse trajectory x_T..x_0 (index 0 = x_T, index T = x_0).
std::vector<Field> replay_trajectory(const NoiseMapTrack& track, const Denoiser& d, const PromptEmbedding& cond,
                                     const NoiseSchedule& s);

// Deterministic DDIM forward inversion (eta = 0). The returned track holds
// the DDIM terminal latent and the residuals implied by the DDPM posterior
// along the DDIM path, for variance/correlation diagnostics.
NoiseMapTrack ddim_invert(const Field& x0, const Denoiser& d, const PromptEmbedding& cond, const NoiseSchedule& s);

// Deterministic DDIM reverse pass (eta = 0) from the track's terminal
// latent; ignores the stored residuals.
Field ddim_reconstruct(const NoiseMapTrack& track, const Denoiser& d, const PromptEmbedding& cond,
                       const NoiseSchedule& s);

// Track directory layout: x_T.ltf, z_0002.ltf .. z_{T:04}.ltf plus
// manifest.json (schedule params, cond token list, shape).
void save_track(const NoiseMapTrack& track, const std::filesystem::path& dir);
NoiseMapTrack load_track(const std::filesystem::path& dir);

}  // namespace flip
