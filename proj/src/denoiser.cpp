#include "flip/denoiser.hpp"

#include <cmath>
#include <sstream>

#include "flip/attention_control.hpp"

namespace flip {

Field PromptEmbedding::pooled() const {
    Field out({embed_dim});
    if (vectors.empty()) return out;
    for (int i = 0; i < embed_dim; ++i) {
        double acc = 0.0;
        for (const Field& v : vectors) acc += v.data[i];
        out.data[i] = static_cast<float>(acc / static_cast<double>(vectors.size()));
    }
    return out;
}

PromptEmbedding make_prompt_embedding(const std::vector<std::string>& tokens, int embed_dim) {
    if (embed_dim < 2) throw ParameterError("embed_dim must be >= 2");
    PromptEmbedding p;
    p.embed_dim = embed_dim;
    p.tokens = tokens;
    p.vectors.reserve(tokens.size());
    for (const std::string& tok : tokens) {
        Rng rng(fnv1a64(tok));
        p.vectors.push_back(randn(rng, {embed_dim}));
    }
    return p;
}

std::vector<std::string> tokenize(const std::string& prompt) {
    std::vector<std::string> tokens;
    std::istringstream is(prompt);
    std::string tok;
    while (is >> tok) tokens.push_back(tok);
    return tokens;
}

namespace {

Field scaled_randn(Rng& rng, int rows, int cols, int fan_in) {
    Field w = randn(rng, {rows, cols});
    const float s = static_cast<float>(1.0 / std::sqrt(static_cast<double>(fan_in)));
    for (float& v : w.data) v *= s;
    return w;
}

// Standard sinusoidal embedding of the integer timestep.
Field time_embedding(int t, int dim) {
    Field out({dim});
    for (int i = 0; i < dim / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / dim);
        out.data[2 * i] = static_cast<float>(std::sin(t * freq));
        out.data[2 * i + 1] = static_cast<float>(std::cos(t * freq));
    }
    return out;
}

Field patchify(const Field& z, int p) {
    const int h = z.shape[0], w = z.shape[1], c = z.shape[2];
    const int gy = h / p, gx = w / p;
    Field tokens({gy * gx, p * p * c});
    for (int ty = 0; ty < gy; ++ty) {
        for (int tx = 0; tx < gx; ++tx) {
            const int tok = ty * gx + tx;
            for (int dy = 0; dy < p; ++dy) {
                for (int dx = 0; dx < p; ++dx) {
                    for (int k = 0; k < c; ++k) {
                        tokens.at(tok, (dy * p + dx) * c + k) = z.at(ty * p + dy, tx * p + dx, k);
                    }
                }
            }
        }
    }
    return tokens;
}

Field unpatchify(const Field& tokens, int h, int w, int c, int p) {
    const int gx = w / p;
    Field z({h, w, c});
    for (int tok = 0; tok < tokens.shape[0]; ++tok) {
        const int ty = tok / gx, tx = tok % gx;
        for (int dy = 0; dy < p; ++dy) {
            for (int dx = 0; dx < p; ++dx) {
                for (int k = 0; k < c; ++k) {
                    z.at(ty * p + dy, tx * p + dx, k) = tokens.at(tok, (dy * p + dx) * c + k);
                }
            }
        }
    }
    return z;
}

void check_override(const AttentionTap& tap, int block, const Field& k_live, const Field& v_live) {
    if (tap.override_k.size() <= static_cast<std::size_t>(block) ||
        tap.override_v.size() <= static_cast<std::size_t>(block)) {
        throw DimensionError("tap override missing for block " + std::to_string(block));
    }
    if (!tap.override_k[block].same_shape(k_live) || !tap.override_v[block].same_shape(v_live)) {
        throw DimensionError("tap override shape mismatch at block " + std::to_string(block));
    }
}

}  // namespace

Denoiser build_denoiser(std::uint64_t seed, int patch_size, int embed_dim, int n_blocks, int channels) {
    if (patch_size < 1 || n_blocks < 1 || channels < 1) throw ParameterError("denoiser dims must be positive");
    if (embed_dim < 2 || embed_dim % 2 != 0) throw ParameterError("embed_dim must be even and >= 2");
    Denoiser d;
    d.patch_size = patch_size;
    d.embed_dim = embed_dim;
    d.n_blocks = n_blocks;
    d.channels = channels;
    const int f = patch_size * patch_size * channels;
    Rng rng(seed);
    d.w_embed = scaled_randn(rng, f, embed_dim, f);
    d.blocks.resize(n_blocks);
    for (Denoiser::Block& b : d.blocks) {
        b.w_q = scaled_randn(rng, embed_dim, embed_dim, embed_dim);
        b.w_k = scaled_randn(rng, embed_dim, embed_dim, embed_dim);
        b.w_v = scaled_randn(rng, embed_dim, embed_dim, embed_dim);
        b.w_ff = scaled_randn(rng, embed_dim, embed_dim, embed_dim);
    }
    d.w_head = scaled_randn(rng, embed_dim, f, embed_dim);
    return d;
}

Field predict_noise(const Denoiser& d, const Field& z_t, int t, const PromptEmbedding& cond, AttentionTap* tap) {
    if (z_t.rank() != 3) throw DimensionError("predict_noise expects an [H,W,C] latent");
    const int h = z_t.shape[0], w = z_t.shape[1], c = z_t.shape[2];
    if (c != d.channels) throw DimensionError("latent channel count does not match denoiser");
    if (h % d.patch_size != 0 || w % d.patch_size != 0) {
        throw DimensionError("patch size must divide latent H and W");
    }
    Field cv({d.embed_dim});
    if (!cond.tokens.empty()) {
        if (cond.embed_dim != d.embed_dim) throw DimensionError("prompt embedding dim does not match denoiser");
        cv = cond.pooled();
    }

    Field x = matmul(patchify(z_t, d.patch_size), d.w_embed);
    const Field te = time_embedding(t, d.embed_dim);
    for (int i = 0; i < x.shape[0]; ++i) {
        for (int j = 0; j < d.embed_dim; ++j) x.at(i, j) += te.data[j] + cv.data[j];
    }

    const bool record = tap != nullptr && tap->mode == AttentionTap::Mode::record;
    const bool replace = tap != nullptr && tap->mode == AttentionTap::Mode::replace_kv;
    if (record) {
        tap->recorded_k.clear();
        tap->recorded_v.clear();
    }

    const float attn_scale = static_cast<float>(1.0 / std::sqrt(static_cast<double>(d.embed_dim)));
    for (int bi = 0; bi < d.n_blocks; ++bi) {
        const Denoiser::Block& b = d.blocks[bi];
        const Field q = matmul(x, b.w_q);
        Field k = matmul(x, b.w_k);
        Field v = matmul(x, b.w_v);
        if (record) {
            tap->recorded_k.push_back(k);
            tap->recorded_v.push_back(v);
        }
        if (replace) {
            check_override(*tap, bi, k, v);
            if (tap->value_guidance_alpha.has_value()) {
                v = value_guidance(tap->override_v[bi], v, *tap->value_guidance_alpha);
            } else {
                v = tap->override_v[bi];
            }
            k = tap->override_k[bi];
        }
        const Field attn = matmul(softmax_rows(scale(matmul_transpose_b(q, k), attn_scale)), v);
        x = add(x, attn);
        Field ff = matmul(x, b.w_ff);
        for (float& u : ff.data) u = std::tanh(u);
        x = add(x, ff);
    }

    return unpatchify(matmul(x, d.w_head), h, w, c, d.patch_size);
}

}  // namespace flip
