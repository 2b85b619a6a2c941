#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flip/field.hpp"

namespace flip {

// Condition vector stand-in: one embed_dim vector per token, derived by
// hashing the token text into an Rng seed. Equal tokens always map to
// equal vectors. The pooled mean is what the denoiser consumes.
struct PromptEmbedding {
    int embed_dim = 0;
    std::vector<std::string> tokens;
    std::vector<Field> vectors;  // one [embed_dim] field per token

    Field pooled() const;
};

PromptEmbedding make_prompt_embedding(const std::vector<std::string>& tokens, int embed_dim);
std::vector<std::string> tokenize(const std::string& prompt);

// Interception point for self-attention K/V. record captures each block's
// K and V; replace_kv substitutes the provided K and V. When
// value_guidance_alpha is set, the substituted V is extrapolated against
// the live V of the current pass: V' = V_ov + alpha * (V_ov - V_live).
struct AttentionTap {
    enum class Mode { passthrough, record, replace_kv };
    Mode mode = Mode::passthrough;
    std::vector<Field> recorded_k;
    std::vector<Field> recorded_v;
    std::vector<Field> override_k;
    std::vector<Field> override_v;
    std::optional<double> value_guidance_alpha;

    static AttentionTap recording() {
        AttentionTap t;
        t.mode = Mode::record;
        return t;
    }
};

// Small deterministic patch-attention network with the eps(z_t, t, c)
// interface. Weights come from a seeded stream and are never trained.
struct Denoiser {
    int patch_size = 4;
    int embed_dim = 32;
    int n_blocks = 2;
    int channels = 1;

    struct Block {
        Field w_q, w_k, w_v;  // [D, D] projections
        Field w_ff;           // [D, D] per-position map
    };

    Field w_embed;  // [patch_size^2 * channels, D]
    std::vector<Block> blocks;
    Field w_head;  // [D, patch_size^2 * channels]
};

// Weight draw order, one stream from `seed`: w_embed, then per block
// (w_q, w_k, w_v, w_ff), then w_head; every matrix is scaled by
// 1/sqrt(fan_in).
Denoiser build_denoiser(std::uint64_t seed, int patch_size = 4, int embed_dim = 32, int n_blocks = 2,
                        int channels = 1);

Field predict_noise(const Denoiser& d, const Field& z_t, int t, const PromptEmbedding& cond,
                    AttentionTap* tap = nullptr);

}  // namespace flip
