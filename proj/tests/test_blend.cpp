#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flip/blend.hpp"

using namespace flip;

namespace {

Field uniform_pm1(Rng& rng, std::vector<int> shape) {
    Field f(std::move(shape));
    for (float& v : f.data) v = static_cast<float>(rng.next_unit() * 2.0 - 1.0);
    return f;
}

BinaryMask block_mask(int h, int w, int top, int left, int size) {
    BinaryMask m(h, w);
    for (int y = top; y < top + size; ++y) {
        for (int x = left; x < left + size; ++x) m.at(y, x) = 1.0f;
    }
    return m;
}

BackgroundInput test_background(std::uint64_t seed, int hw = 16) {
    Rng rng(seed);
    return BackgroundInput{uniform_pm1(rng, {hw, hw, 1}), {"plain", "backdrop"}};
}

ConceptInput test_concept(std::uint64_t seed, const BinaryMask& mask, const std::string& word, int hw = 16) {
    Rng rng(seed);
    return ConceptInput{uniform_pm1(rng, {hw, hw, 1}), mask, {word}, {}};
}

BlendConfig fast_config() {
    BlendConfig cfg;
    cfg.schedule = ScheduleParams{8, 1e-4, 0.02};
    cfg.seed = 99;
    return cfg;
}

}  // namespace

TEST_CASE("prepare: replication rule and branch layout") {
    const Denoiser d = build_denoiser(31);
    const BlendConfig cfg = fast_config();

    SUBCASE("zero concepts") {
        const BlendState st = prepare(test_background(1), {}, cfg, d);
        CHECK(st.z_ref.empty());
        CHECK(st.z_per.empty());
        CHECK(st.mask_back.count_ones() == 16 * 16);
        CHECK(exactly_equal(st.z_out, st.track_back.x_terminal));
        CHECK(st.t == cfg.schedule.T);
    }

    SUBCASE("two concepts: three copies of the background terminal latent") {
        std::vector<ConceptInput> concepts;
        concepts.push_back(test_concept(2, block_mask(16, 16, 2, 2, 4), "disk"));
        concepts.push_back(test_concept(3, block_mask(16, 16, 10, 10, 4), "tile"));
        const BlendState st = prepare(test_background(1), std::move(concepts), cfg, d);
        CHECK(st.z_ref.size() == 2);
        CHECK(exactly_equal(st.z_out, st.track_back.x_terminal));
        CHECK(exactly_equal(st.z_ref[0], st.track_back.x_terminal));
        CHECK(exactly_equal(st.z_ref[1], st.track_back.x_terminal));
        // per branches start from their own inversions
        CHECK(exactly_equal(st.z_per[0], st.track_per[0].x_terminal));
        CHECK_FALSE(exactly_equal(st.z_per[0], st.track_back.x_terminal));
        // background mask is the complement of the object masks
        CHECK(st.mask_back.count_ones() == 16 * 16 - 32);
    }

    SUBCASE("prepare is deterministic") {
        std::vector<ConceptInput> a, b;
        a.push_back(test_concept(2, block_mask(16, 16, 2, 2, 4), "disk"));
        b.push_back(test_concept(2, block_mask(16, 16, 2, 2, 4), "disk"));
        const BlendState s1 = prepare(test_background(1), std::move(a), cfg, d);
        const BlendState s2 = prepare(test_background(1), std::move(b), cfg, d);
        CHECK(exactly_equal(s1.z_out, s2.z_out));
        CHECK(exactly_equal(s1.track_per[0].x_terminal, s2.track_per[0].x_terminal));
        CHECK(exactly_equal(s1.track_back.z[3], s2.track_back.z[3]));
    }
}

TEST_CASE("prepare rejects bad inputs") {
    const Denoiser d = build_denoiser(31);
    const BlendConfig cfg = fast_config();

    std::vector<ConceptInput> overlapping;
    overlapping.push_back(test_concept(2, block_mask(16, 16, 2, 2, 4), "a"));
    overlapping.push_back(test_concept(3, block_mask(16, 16, 3, 3, 4), "b"));
    CHECK_THROWS_AS(prepare(test_background(1), std::move(overlapping), cfg, d), DisjointnessError);

    std::vector<ConceptInput> empty_mask;
    empty_mask.push_back(test_concept(2, BinaryMask(16, 16), "a"));
    CHECK_THROWS_AS(prepare(test_background(1), std::move(empty_mask), cfg, d), EmptyMaskError);

    std::vector<ConceptInput> wrong_shape;
    wrong_shape.push_back(test_concept(2, block_mask(8, 8, 2, 2, 2), "a", 8));
    CHECK_THROWS_AS(prepare(test_background(1), std::move(wrong_shape), cfg, d), DimensionError);
}

TEST_CASE("zero concepts degenerate to background replay") {
    const Denoiser d = build_denoiser(32);
    const BlendConfig cfg = fast_config();
    const BackgroundInput bg = test_background(5);

    BlendState st = prepare(bg, {}, cfg, d);
    const NoiseMapTrack track = st.track_back;
    while (st.t >= 1) step(st, d, cfg);

    const PromptEmbedding cond = make_prompt_embedding(bg.prompt_tokens, d.embed_dim);
    const NoiseSchedule s = cfg.schedule.make();
    const Field recon = replay(track, d, cond, s);
    CHECK(exactly_equal(st.z_out, recon));
    CHECK(max_abs_diff(st.z_out, bg.image) < 1e-4f);
    CHECK(st.counters.guided_taps == 0);
    CHECK(st.counters.dilution_mixes == 0);
    CHECK(st.counters.resynthesis_mixes == 0);
}

TEST_CASE("all-ones concept mask routes the whole frame to the reference branch") {
    const Denoiser d = build_denoiser(33);
    BlendConfig cfg = fast_config();
    cfg.stages.background_dilution = false;  // full-frame box would be all-ones anyway

    BinaryMask full(16, 16);
    for (float& v : full.v) v = 1.0f;
    std::vector<ConceptInput> concepts;
    concepts.push_back(test_concept(6, full, "everything"));

    BlendState st = prepare(test_background(5), std::move(concepts), cfg, d);
    while (st.t >= 1) {
        StepTrace trace;
        step(st, d, cfg, &trace);
        CHECK(exactly_equal(trace.eps_gui, trace.eps_ref[0]));
    }
}

TEST_CASE("background region noise is preserved bitwise at every step") {
    const Denoiser d = build_denoiser(34);
    const BlendConfig cfg = fast_config();
    std::vector<ConceptInput> concepts;
    concepts.push_back(test_concept(2, block_mask(16, 16, 2, 2, 4), "disk"));
    concepts.push_back(test_concept(3, block_mask(16, 16, 10, 4, 4), "tile"));

    BlendState st = prepare(test_background(7), std::move(concepts), cfg, d);
    const BinaryMask back = st.mask_back;
    while (st.t >= 1) {
        StepTrace trace;
        step(st, d, cfg, &trace);
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                if (back.at(y, x) == 1.0f) {
                    CHECK(trace.eps_gui.at(y, x, 0) == trace.eps_back.at(y, x, 0));
                }
            }
        }
    }
}

TEST_CASE("adding a disjoint concept never changes the mix outside its mask") {
    const Denoiser d = build_denoiser(35);
    const BlendConfig cfg = fast_config();
    const BinaryMask mask_a = block_mask(16, 16, 2, 2, 4);
    const BinaryMask mask_b = block_mask(16, 16, 10, 10, 4);

    std::vector<ConceptInput> one;
    one.push_back(test_concept(2, mask_a, "disk"));
    std::vector<ConceptInput> two;
    two.push_back(test_concept(2, mask_a, "disk"));
    two.push_back(test_concept(3, mask_b, "tile"));

    BlendState st1 = prepare(test_background(7), std::move(one), cfg, d);
    BlendState st2 = prepare(test_background(7), std::move(two), cfg, d);
    while (st1.t >= 1) {
        StepTrace tr1, tr2;
        step(st1, d, cfg, &tr1);
        step(st2, d, cfg, &tr2);
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                if (mask_b.at(y, x) == 0.0f) {
                    CHECK(tr1.eps_gui.at(y, x, 0) == tr2.eps_gui.at(y, x, 0));
                }
            }
        }
    }
}

TEST_CASE("stage counters match the enabled flags exactly") {
    const Denoiser d = build_denoiser(36);
    std::vector<ConceptInput> concepts;
    concepts.push_back(test_concept(2, block_mask(16, 16, 2, 2, 4), "disk"));
    concepts.push_back(test_concept(3, block_mask(16, 16, 10, 10, 4), "tile"));

    BlendConfig cfg = fast_config();
    const long n = 2, T = cfg.schedule.T;

    SUBCASE("all off") {
        cfg.stages = StageFlags{false, false, false};
        GenerateReport rep;
        generate(test_background(7), concepts, cfg, d, &rep);
        CHECK(rep.counters.guided_taps == 0);
        CHECK(rep.counters.dilution_mixes == 0);
        CHECK(rep.counters.resynthesis_mixes == 0);
    }
    SUBCASE("all on") {
        GenerateReport rep;
        generate(test_background(7), concepts, cfg, d, &rep);
        CHECK(rep.counters.guided_taps == n * T);
        CHECK(rep.counters.dilution_mixes == n * T);
        CHECK(rep.counters.resynthesis_mixes == n * T);
    }
    SUBCASE("guided attention restricted to a step range") {
        cfg.attn_step_lo = 3;
        cfg.attn_step_hi = 5;
        GenerateReport rep;
        generate(test_background(7), concepts, cfg, d, &rep);
        CHECK(rep.counters.guided_taps == n * 3);
    }
}

TEST_CASE("beta=1 with an all-ones box mask makes dilution a no-op") {
    const Denoiser d = build_denoiser(37);
    // corner pixels force the expanded box to cover the whole frame
    BinaryMask corners(16, 16);
    corners.at(0, 0) = 1.0f;
    corners.at(15, 15) = 1.0f;

    BlendConfig on = fast_config();
    on.beta = 1.0;
    on.box_margin = 0;
    BlendConfig off = on;
    off.stages.background_dilution = false;

    std::vector<ConceptInput> a, b;
    a.push_back(test_concept(2, corners, "spread"));
    b.push_back(test_concept(2, corners, "spread"));

    GenerateReport rep_on, rep_off;
    const Field out_on = generate(test_background(9), std::move(a), on, d, &rep_on);
    const Field out_off = generate(test_background(9), std::move(b), off, d, &rep_off);
    CHECK(exactly_equal(out_on, out_off));
    CHECK(rep_on.counters.dilution_mixes == on.schedule.T);
    CHECK(rep_off.counters.dilution_mixes == 0);
}

TEST_CASE("beta=1 all-ones box: reference latents are untouched step by step") {
    const Denoiser d = build_denoiser(40);
    BinaryMask corners(16, 16);
    corners.at(0, 0) = 1.0f;
    corners.at(15, 15) = 1.0f;

    BlendConfig on = fast_config();
    on.beta = 1.0;
    on.box_margin = 0;
    BlendConfig off = on;
    off.stages.background_dilution = false;

    std::vector<ConceptInput> a, b;
    a.push_back(test_concept(2, corners, "spread"));
    b.push_back(test_concept(2, corners, "spread"));
    BlendState st_on = prepare(test_background(9), std::move(a), on, d);
    BlendState st_off = prepare(test_background(9), std::move(b), off, d);
    while (st_on.t >= 1) {
        step(st_on, d, on);
        step(st_off, d, off);
        CHECK(exactly_equal(st_on.z_ref[0], st_off.z_ref[0]));
    }
}

TEST_CASE("generate is deterministic and thread-count independent") {
    const Denoiser d = build_denoiser(38);
    std::vector<ConceptInput> a, b, c;
    for (auto* v : {&a, &b, &c}) {
        v->push_back(test_concept(2, block_mask(16, 16, 2, 2, 4), "disk"));
        v->push_back(test_concept(3, block_mask(16, 16, 10, 10, 4), "tile"));
    }
    BlendConfig cfg = fast_config();
    const Field o1 = generate(test_background(7), std::move(a), cfg, d);
    const Field o2 = generate(test_background(7), std::move(b), cfg, d);
    CHECK(exactly_equal(o1, o2));

    cfg.max_threads = 1;
    const Field o3 = generate(test_background(7), std::move(c), cfg, d);
    CHECK(exactly_equal(o1, o3));
}

TEST_CASE("step refuses to run past the last timestep") {
    const Denoiser d = build_denoiser(39);
    const BlendConfig cfg = fast_config();
    BlendState st = prepare(test_background(1), {}, cfg, d);
    while (st.t >= 1) step(st, d, cfg);
    CHECK_THROWS_AS(step(st, d, cfg), ParameterError);
}

TEST_CASE("decode: endpoints, midpoint rounding, clamping, channels") {
    const Field z({1, 4, 1}, {-1.0f, 0.0f, 1.0f, 2.0f});
    const Image img = decode(z);
    CHECK(img.pix[0] == 0);
    CHECK(img.pix[1] == 128);  // round(127.5) half away from zero
    CHECK(img.pix[2] == 255);
    CHECK(img.pix[3] == 255);  // clamped

    const Field rgb({1, 1, 3}, {-1.0f, 0.0f, 1.0f});
    const Image img3 = decode(rgb);
    CHECK(img3.c == 3);
    CHECK(img3.pix == std::vector<std::uint8_t>{0, 128, 255});

    CHECK_THROWS_AS(decode(Field({2, 2, 2})), ParameterError);
}
