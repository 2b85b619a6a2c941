#include "flip/fixtures.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "flip/image.hpp"
#include "flip/ltf.hpp"

namespace flip {

namespace {

Field gradient_background(Rng& rng, int h, int w) {
    const double phase = rng.next_unit() * 2.0 * std::numbers::pi;
    const double tilt = 0.3 + 0.4 * rng.next_unit();
    Field f({h, w, 1});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = w > 1 ? 2.0 * x / (w - 1) - 1.0 : 0.0;
            const double gy = h > 1 ? 2.0 * y / (h - 1) - 1.0 : 0.0;
            const double wave = 0.2 * std::sin(2.0 * std::numbers::pi * gy + phase);
            f.at(y, x, 0) = static_cast<float>(0.45 * gx + tilt * 0.4 * gy + wave);
        }
    }
    return f;
}

Field disk_pattern(Rng& rng, int h, int w) {
    const double cy = h * (0.35 + 0.3 * rng.next_unit());
    const double cx = w * (0.35 + 0.3 * rng.next_unit());
    const double radius = 0.28 * std::min(h, w);
    Field f({h, w, 1});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double r = std::hypot(y - cy, x - cx);
            f.at(y, x, 0) = r < radius ? 0.85f : -0.6f;
        }
    }
    return f;
}

Field stripe_pattern(Rng& rng, int h, int w) {
    const double freq = 0.5 + 0.5 * rng.next_unit();
    Field f({h, w, 1});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = std::sin(freq * (y + x));
            f.at(y, x, 0) = v >= 0.0 ? 0.7f : -0.7f;
        }
    }
    return f;
}

BinaryMask block_mask(int h, int w, int top, int left) {
    BinaryMask m(h, w);
    for (int y = top; y < top + kFixtureMaskBlock; ++y) {
        for (int x = left; x < left + kFixtureMaskBlock; ++x) m.at(y, x) = 1.0f;
    }
    return m;
}

}  // namespace

FixtureSet make_fixture_set(std::uint64_t seed, int h, int w) {
    if (h < 2 * kFixtureMaskBlock + 4 || w < 2 * kFixtureMaskBlock + 8) {
        throw ParameterError("fixture frame too small for two disjoint masks");
    }
    FixtureSet fx;
    Rng rng(mix_seed(seed, 0xF1));
    fx.background = gradient_background(rng, h, w);
    fx.concept1 = disk_pattern(rng, h, w);
    fx.concept2 = stripe_pattern(rng, h, w);

    // One block in each horizontal half keeps the two masks disjoint for
    // any seed.
    const int span_y = h - kFixtureMaskBlock - 2;
    const int span_x = w / 2 - kFixtureMaskBlock - 2;
    const int top1 = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(span_y));
    const int left1 = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(span_x));
    const int top2 = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(span_y));
    const int left2 = w / 2 + 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(span_x));
    fx.mask1 = block_mask(h, w, top1, left1);
    fx.mask2 = block_mask(h, w, top2, left2);
    return fx;
}

std::filesystem::path write_fixture_files(const FixtureSet& fx, const std::filesystem::path& dir,
                                          std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    write_ltf(fx.background, dir / "background.ltf");
    write_ltf(fx.concept1, dir / "concept_1.ltf");
    write_ltf(fx.concept2, dir / "concept_2.ltf");
    write_image(decode(fx.background), dir / "background.pgm");
    write_image(decode(fx.concept1), dir / "concept_1.pgm");
    write_image(decode(fx.concept2), dir / "concept_2.pgm");
    save_mask(fx.mask1, dir / "mask_1.pgm");
    save_mask(fx.mask2, dir / "mask_2.pgm");

    nlohmann::json cfg;
    cfg["image_size"] = {{"h", fx.background.shape[0]}, {"w", fx.background.shape[1]}, {"c", fx.background.shape[2]}};
    cfg["latent_factor"] = 1;
    cfg["schedule"] = {{"T", 50}, {"beta_start", 1e-4}, {"beta_end", 0.02}};
    cfg["seed"] = seed;
    cfg["alpha"] = 0.15;
    cfg["beta"] = 0.8;
    cfg["box_margin"] = 2;
    cfg["stages"] = {{"guided_attention", true}, {"background_dilution", true}, {"ref_noise_resynthesis", true}};
    cfg["background"] = {{"image_path", "background.ltf"}, {"prompt", fx.background_prompt}};
    cfg["concepts"] = nlohmann::json::array({
        nlohmann::json{{"image_path", "concept_1.ltf"}, {"mask_path", "mask_1.pgm"}, {"prompt", fx.concept1_prompt}},
        nlohmann::json{{"image_path", "concept_2.ltf"}, {"mask_path", "mask_2.pgm"}, {"prompt", fx.concept2_prompt}},
    });
    cfg["output_dir"] = "out";

    const std::filesystem::path cfg_path = dir / "config.json";
    std::ofstream os(cfg_path);
    if (!os) throw IoError("cannot write " + cfg_path.string());
    os << cfg.dump(2) << "\n";
    if (!os) throw IoError("write failed: " + cfg_path.string());
    return cfg_path;
}

}  // namespace flip
