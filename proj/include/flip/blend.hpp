#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "flip/denoiser.hpp"
#include "flip/field.hpp"
#include "flip/image.hpp"
#include "flip/inversion.hpp"
#include "flip/mask.hpp"
#include "flip/schedule.hpp"

namespace flip {

// Pipeline stage toggles for ablation runs.
struct StageFlags {
    bool guided_attention = true;
    bool background_dilution = true;
    bool ref_noise_resynthesis = true;
};

struct StageCounters {
    long guided_taps = 0;        // guided replace_kv passes
    long dilution_mixes = 0;     // expanded-box latent mixes
    long resynthesis_mixes = 0;  // reference-noise re-syntheses
};

struct BlendConfig {
    double alpha = 0.15;
    double beta = 0.8;
    ScheduleParams schedule;
    std::uint64_t seed = 0;
    int box_margin = 2;
    StageFlags stages;
    // Guided attention applies for t in [attn_step_lo, attn_step_hi];
    // attn_step_hi == 0 means "up to T".
    int attn_step_lo = 1;
    int attn_step_hi = 0;
    int max_threads = 0;  // 0 = auto
    // Reserved post-mix hook (e.g. swap guidance); unused by default.
    std::function<void(Field& eps_gui, int t)> post_mix_hook;
};

struct ConceptInput {
    Field image;
    BinaryMask mask;  // at latent resolution
    std::vector<std::string> prompt_tokens;
    NoiseMapTrack track;  // filled by prepare
};

struct BackgroundInput {
    Field image;
    std::vector<std::string> prompt_tokens;
};

struct BlendState {
    int t = 0;  // next step consumes this timestep
    Field z_out, z_back;
    std::vector<Field> z_per, z_ref;
    BinaryMask mask_back;
    std::vector<BinaryMask> mask_obj;
    std::vector<BinaryMask> mask_box;
    NoiseMapTrack track_back;
    std::vector<NoiseMapTrack> track_per;
    PromptEmbedding cond_back;
    PromptEmbedding cond_out;  // composite prompt; recorded, not consumed
    std::vector<PromptEmbedding> cond_per;
    NoiseSchedule schedule;
    StageCounters counters;
};

// Per-step probe for tests and diagnostics.
struct StepTrace {
    Field eps_back;
    Field eps_gui;
    std::vector<Field> eps_ref;
};

struct GenerateReport {
    StageCounters counters;
    std::vector<double> step_ms;
};

// Inverts the background and every concept image, replicates the
// background terminal latent into the out and reference branches, and
// derives the background and expanded-box masks.
BlendState prepare(const BackgroundInput& background, std::vector<ConceptInput> concepts, const BlendConfig& cfg,
                   const Denoiser& d);

// Advances every branch from state.t to state.t - 1.
void step(BlendState& state, const Denoiser& d, const BlendConfig& cfg, StepTrace* trace = nullptr);

Field generate(const BackgroundInput& background, std::vector<ConceptInput> concepts, const BlendConfig& cfg,
               const Denoiser& d, GenerateReport* report = nullptr);

}  // namespace flip
