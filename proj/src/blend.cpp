#include "flip/blend.hpp"

#include <chrono>
#include <utility>

#include "flip/attention_control.hpp"
#include "flip/parallel.hpp"

namespace flip {

namespace {

void check_inputs(const BackgroundInput& background, const std::vector<ConceptInput>& concepts) {
    if (background.image.rank() != 3) throw DimensionError("background latent must be [H,W,C]");
    if (!background.image.all_finite()) throw NumericError("background latent must be finite");
    const int h = background.image.shape[0], w = background.image.shape[1];
    for (const ConceptInput& c : concepts) {
        if (!c.image.same_shape(background.image)) throw DimensionError("concept latent shape mismatch");
        if (!c.image.all_finite()) throw NumericError("concept latent must be finite");
        if (c.mask.h != h || c.mask.w != w) throw DimensionError("concept mask does not match latent size");
        if (c.mask.empty_support()) throw EmptyMaskError("concept mask has empty support");
    }
}

}  // namespace

BlendState prepare(const BackgroundInput& background, std::vector<ConceptInput> concepts, const BlendConfig& cfg,
                   const Denoiser& d) {
    check_inputs(background, concepts);
    const std::size_t n = concepts.size();

    BlendState st;
    st.schedule = cfg.schedule.make();
    st.t = st.schedule.T;

    std::vector<BinaryMask> masks;
    masks.reserve(n);
    for (const ConceptInput& c : concepts) masks.push_back(c.mask);
    st.mask_back = background_mask(background.image.shape[0], background.image.shape[1], masks);
    st.mask_obj = std::move(masks);
    st.mask_box.reserve(n);
    for (const BinaryMask& m : st.mask_obj) st.mask_box.push_back(expanded_box_mask(m, cfg.box_margin));

    st.cond_back = make_prompt_embedding(background.prompt_tokens, d.embed_dim);
    std::vector<std::string> composite = background.prompt_tokens;
    st.cond_per.reserve(n);
    for (const ConceptInput& c : concepts) {
        st.cond_per.push_back(make_prompt_embedding(c.prompt_tokens, d.embed_dim));
        composite.insert(composite.end(), c.prompt_tokens.begin(), c.prompt_tokens.end());
    }
    st.cond_out = make_prompt_embedding(composite, d.embed_dim);

    // Each branch inverts with an independently derived noise stream and
    // with the same condition its replay will use.
    run_parallel(n + 1, cfg.max_threads, [&](std::size_t i) {
        Rng rng(mix_seed(cfg.seed, i));
        if (i == 0) {
            st.track_back = invert(background.image, d, st.cond_back, st.schedule, rng);
        } else {
            concepts[i - 1].track = invert(concepts[i - 1].image, d, st.cond_per[i - 1], st.schedule, rng);
        }
    });
    st.track_per.reserve(n);
    for (std::size_t i = 0; i < n; ++i) st.track_per.push_back(std::move(concepts[i].track));

    // Replication: n+1 copies of the background terminal latent seed the
    // out branch and every reference branch.
    st.z_back = st.track_back.x_terminal;
    st.z_out = st.track_back.x_terminal;
    st.z_ref.assign(n, st.track_back.x_terminal);
    st.z_per.reserve(n);
    for (std::size_t i = 0; i < n; ++i) st.z_per.push_back(st.track_per[i].x_terminal);
    return st;
}

void step(BlendState& st, const Denoiser& d, const BlendConfig& cfg, StepTrace* trace) {
    if (st.t < 1) throw ParameterError("step called with no timesteps left");
    const int t = st.t;
    const NoiseSchedule& s = st.schedule;
    const std::size_t n = st.z_ref.size();
    const int attn_hi = cfg.attn_step_hi == 0 ? s.T : cfg.attn_step_hi;
    const bool guided = cfg.stages.guided_attention && t >= cfg.attn_step_lo && t <= attn_hi;

    const Field eps_back = predict_noise(d, st.z_back, t, st.cond_back);

    // Per-concept branches are data-independent; taps stay branch-local.
    std::vector<Field> eps_ref(n);
    std::vector<Field> z_per_next(n);
    std::vector<long> taps_used(n, 0);
    run_parallel(n, cfg.max_threads, [&](std::size_t i) {
        AttentionTap rec_per = AttentionTap::recording();
        z_per_next[i] = replay_step(st.z_per[i], t, st.track_per[i], d, st.cond_per[i], s,
                                    guided ? &rec_per : nullptr);
        if (guided) {
            AttentionTap rec_ref = AttentionTap::recording();
            predict_noise(d, st.z_ref[i], t, st.cond_per[i], &rec_ref);
            AttentionTap guided_tap = make_guided_tap(rec_per, rec_ref, GuidanceConfig{cfg.alpha});
            eps_ref[i] = predict_noise(d, st.z_ref[i], t, st.cond_per[i], &guided_tap);
            taps_used[i] = 1;
        } else {
            eps_ref[i] = predict_noise(d, st.z_ref[i], t, st.cond_per[i]);
        }
    });
    for (long c : taps_used) st.counters.guided_taps += c;
    st.z_per = std::move(z_per_next);

    Field eps_gui = hadamard(eps_back, st.mask_back.to_field());
    for (std::size_t i = 0; i < n; ++i) {
        eps_gui = add(eps_gui, hadamard(eps_ref[i], st.mask_obj[i].to_field()));
    }
    if (cfg.post_mix_hook) cfg.post_mix_hook(eps_gui, t);

    if (trace) {
        trace->eps_back = eps_back;
        trace->eps_gui = eps_gui;
        trace->eps_ref = eps_ref;
    }

    if (cfg.stages.ref_noise_resynthesis) {
        for (std::size_t i = 0; i < n; ++i) {
            eps_ref[i] = add(hadamard(eps_ref[i], st.mask_obj[i].to_field()),
                             hadamard(eps_back, complement(st.mask_obj[i]).to_field()));
            ++st.counters.resynthesis_mixes;
        }
    }

    // Every branch reverses with the background track's noise map.
    const Field& z_noise = st.track_back.z[t - 1];
    Field z_back_next = reverse_step(st.z_back, eps_back, z_noise, t, s);
    st.z_out = reverse_step(st.z_out, eps_gui, z_noise, t, s);
    for (std::size_t i = 0; i < n; ++i) {
        st.z_ref[i] = reverse_step(st.z_ref[i], eps_ref[i], z_noise, t, s);
    }
    st.z_back = std::move(z_back_next);

    if (cfg.stages.background_dilution) {
        for (std::size_t i = 0; i < n; ++i) {
            const Field outer = scale(complement(st.mask_box[i]).to_field(), static_cast<float>(cfg.beta));
            st.z_ref[i] = add(hadamard(st.z_back, outer), hadamard(st.z_ref[i], st.mask_box[i].to_field()));
            ++st.counters.dilution_mixes;
        }
    }

    st.t = t - 1;
}

Field generate(const BackgroundInput& background, std::vector<ConceptInput> concepts, const BlendConfig& cfg,
               const Denoiser& d, GenerateReport* report) {
    BlendState st = prepare(background, std::move(concepts), cfg, d);
    if (report) report->step_ms.reserve(st.schedule.T);
    while (st.t >= 1) {
        const auto t0 = std::chrono::steady_clock::now();
        step(st, d, cfg);
        if (report) {
            const auto t1 = std::chrono::steady_clock::now();
            report->step_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
    }
    if (report) report->counters = st.counters;
    return st.z_out;
}

}  // namespace flip
