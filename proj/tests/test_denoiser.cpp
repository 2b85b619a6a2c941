#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "flip/denoiser.hpp"
#include "flip/ltf.hpp"

using namespace flip;

namespace {

PromptEmbedding empty_cond(const Denoiser& d) {
    return make_prompt_embedding({}, d.embed_dim);
}

double sq_norm(const Field& f) {
    double n = 0.0;
    for (float v : f.data) n += static_cast<double>(v) * v;
    return n;
}

}  // namespace

TEST_CASE("build is seed-deterministic, seeds differ") {
    const Denoiser a = build_denoiser(1);
    const Denoiser b = build_denoiser(1);
    const Denoiser c = build_denoiser(2);
    CHECK(exactly_equal(a.w_embed, b.w_embed));
    CHECK(exactly_equal(a.w_head, b.w_head));
    for (int i = 0; i < a.n_blocks; ++i) {
        CHECK(exactly_equal(a.blocks[i].w_q, b.blocks[i].w_q));
        CHECK(exactly_equal(a.blocks[i].w_v, b.blocks[i].w_v));
    }
    CHECK_FALSE(exactly_equal(a.w_embed, c.w_embed));
}

TEST_CASE("weight variance tracks 1/fan_in") {
    const Denoiser d = build_denoiser(7);
    // 32x32 projection, fan_in = 32
    const double var = variance(d.blocks[0].w_q);
    CHECK(var > (1.0 / 32.0) * 0.8);
    CHECK(var < (1.0 / 32.0) * 1.2);
}

TEST_CASE("build parameter validation") {
    CHECK_THROWS_AS(build_denoiser(1, 4, 31), ParameterError);
    CHECK_THROWS_AS(build_denoiser(1, 0), ParameterError);
    CHECK_THROWS_AS(build_denoiser(1, 4, 32, 0), ParameterError);
}

TEST_CASE("output shape is preserved across sizes and channels") {
    for (int c : {1, 3}) {
        const Denoiser d = build_denoiser(5, 4, 32, 2, c);
        const PromptEmbedding cond = empty_cond(d);
        for (int hw : {8, 16, 32}) {
            Rng rng(hw + c);
            const Field z = randn(rng, {hw, hw, c});
            const Field out = predict_noise(d, z, 3, cond);
            CHECK(out.shape == z.shape);
            CHECK(out.all_finite());
        }
    }
}

TEST_CASE("latent validation: channels and patch divisibility") {
    const Denoiser d = build_denoiser(5);
    const PromptEmbedding cond = empty_cond(d);
    CHECK_THROWS_AS(predict_noise(d, Field({8, 8, 2}), 1, cond), DimensionError);
    CHECK_THROWS_AS(predict_noise(d, Field({6, 8, 1}), 1, cond), DimensionError);
    CHECK_THROWS_AS(predict_noise(d, Field({8, 8}), 1, cond), DimensionError);
}

TEST_CASE("passthrough tap equals no tap bitwise") {
    const Denoiser d = build_denoiser(9);
    const PromptEmbedding cond = make_prompt_embedding({"a", "b"}, d.embed_dim);
    Rng rng(1);
    const Field z = randn(rng, {16, 16, 1});
    AttentionTap pass;  // passthrough
    const Field with_tap = predict_noise(d, z, 5, cond, &pass);
    const Field without = predict_noise(d, z, 5, cond);
    CHECK(exactly_equal(with_tap, without));
}

TEST_CASE("self-replacement identity: recorded K/V substituted back") {
    const Denoiser d = build_denoiser(10);
    const PromptEmbedding cond = empty_cond(d);
    Rng rng(2);
    const Field z = randn(rng, {16, 16, 1});

    AttentionTap rec = AttentionTap::recording();
    const Field plain = predict_noise(d, z, 4, cond, &rec);
    CHECK(rec.recorded_k.size() == static_cast<std::size_t>(d.n_blocks));
    CHECK(rec.recorded_v.size() == static_cast<std::size_t>(d.n_blocks));

    AttentionTap replace;
    replace.mode = AttentionTap::Mode::replace_kv;
    replace.override_k = rec.recorded_k;
    replace.override_v = rec.recorded_v;
    const Field replayed = predict_noise(d, z, 4, cond, &replace);
    CHECK(exactly_equal(replayed, plain));
}

TEST_CASE("replace tap validates override shapes") {
    const Denoiser d = build_denoiser(10);
    const PromptEmbedding cond = empty_cond(d);
    Rng rng(3);
    const Field z = randn(rng, {16, 16, 1});

    AttentionTap bad;
    bad.mode = AttentionTap::Mode::replace_kv;
    CHECK_THROWS_AS(predict_noise(d, z, 4, cond, &bad), DimensionError);

    AttentionTap rec = AttentionTap::recording();
    predict_noise(d, z, 4, cond, &rec);
    AttentionTap wrong;
    wrong.mode = AttentionTap::Mode::replace_kv;
    wrong.override_k = rec.recorded_k;
    wrong.override_v = rec.recorded_v;
    wrong.override_k[0] = Field({2, d.embed_dim});
    CHECK_THROWS_AS(predict_noise(d, z, 4, cond, &wrong), DimensionError);
}

TEST_CASE("golden fixture: zero input, t=1, seed 42") {
    const Denoiser d = build_denoiser(42);
    const Field z({8, 8, 1});
    const Field out = predict_noise(d, z, 1, empty_cond(d));
    const Field golden = read_ltf(std::filesystem::path(FLIP_TEST_FIXTURE_DIR) / "denoiser_golden_8x8.ltf");
    CHECK(exactly_equal(out, golden));
}

TEST_CASE("small perturbation stays bounded") {
    const Denoiser d = build_denoiser(11);
    const PromptEmbedding cond = empty_cond(d);
    Rng rng(4);
    Field z = randn(rng, {16, 16, 1});
    const Field base = predict_noise(d, z, 7, cond);
    z.at(5, 5, 0) += 1e-3f;
    const Field bumped = predict_noise(d, z, 7, cond);
    const double delta = std::sqrt(sq_norm(sub(bumped, base)));
    CHECK(delta < 1.0);
    CHECK(delta > 0.0);
}

TEST_CASE("prompt embedding: equal tokens map to equal vectors") {
    const PromptEmbedding a = make_prompt_embedding({"cat", "hat", "cat"}, 32);
    CHECK(a.vectors.size() == 3);
    CHECK(exactly_equal(a.vectors[0], a.vectors[2]));
    CHECK_FALSE(exactly_equal(a.vectors[0], a.vectors[1]));

    const PromptEmbedding b = make_prompt_embedding({"cat"}, 32);
    CHECK(exactly_equal(a.vectors[0], b.vectors[0]));

    CHECK(tokenize("  a photo of a cat ") == std::vector<std::string>{"a", "photo", "of", "a", "cat"});
    CHECK(tokenize("").empty());
}

TEST_CASE("prompt changes the prediction") {
    const Denoiser d = build_denoiser(12);
    Rng rng(5);
    const Field z = randn(rng, {8, 8, 1});
    const Field with_prompt = predict_noise(d, z, 2, make_prompt_embedding({"cat"}, d.embed_dim));
    const Field without = predict_noise(d, z, 2, empty_cond(d));
    CHECK_FALSE(exactly_equal(with_prompt, without));
}

TEST_CASE("timestep changes the prediction") {
    const Denoiser d = build_denoiser(13);
    Rng rng(6);
    const Field z = randn(rng, {8, 8, 1});
    const PromptEmbedding cond = empty_cond(d);
    CHECK_FALSE(exactly_equal(predict_noise(d, z, 1, cond), predict_noise(d, z, 2, cond)));
}
