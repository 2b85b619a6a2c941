#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "flip/blend.hpp"
#include "flip/config.hpp"
#include "flip/fixtures.hpp"
#include "flip/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes: 0 success, 1 config error, 2 I/O error, 3 numeric-contract
// failure, 4 mask-disjointness failure.
constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kIoError = 2;
constexpr int kNumericError = 3;
constexpr int kDisjointError = 4;

int threads_from_env() {
    const char* env = std::getenv("FLIPCONCEPT_THREADS");
    if (env == nullptr || *env == '\0') return 0;
    try {
        const int n = std::stoi(env);
        return n < 0 ? 0 : n;
    } catch (...) {
        throw flip::ParameterError("FLIPCONCEPT_THREADS must be an integer");
    }
}

struct LoadedInputs {
    flip::BackgroundInput background;
    std::vector<flip::ConceptInput> concepts;
    int latent_h = 0, latent_w = 0;
};

LoadedInputs load_inputs(const flip::RunConfig& rc) {
    LoadedInputs in;
    const int f = rc.latent_factor;
    in.latent_h = rc.image_h / f;
    in.latent_w = rc.image_w / f;
    in.background.image =
        flip::block_mean_hw(flip::load_image_field(rc.background_image, rc.image_h, rc.image_w, rc.image_c), f);
    in.background.prompt_tokens = flip::tokenize(rc.background_prompt);
    for (const auto& c : rc.concepts) {
        flip::ConceptInput ci;
        ci.image = flip::block_mean_hw(flip::load_image_field(c.image_path, rc.image_h, rc.image_w, rc.image_c), f);
        const flip::BinaryMask m = flip::load_mask(c.mask_path);
        if (m.h != rc.image_h || m.w != rc.image_w) {
            throw flip::DimensionError("mask dims do not match config: " + c.mask_path.string());
        }
        ci.mask = flip::downsample_mask(m, f);
        ci.prompt_tokens = flip::tokenize(c.prompt);
        in.concepts.push_back(std::move(ci));
    }
    return in;
}

flip::Denoiser denoiser_for(const flip::RunConfig& rc) {
    return flip::build_denoiser(flip::mix_seed(rc.seed, 0xDE), 4, 32, 2, rc.image_c);
}

void write_image_atomic(const flip::Image& img, const fs::path& path) {
    const fs::path tmp = path.string() + ".tmp";
    flip::write_image(img, tmp);
    fs::rename(tmp, path);
}

json config_echo(const flip::RunConfig& rc) {
    json j;
    j["image_size"] = {{"h", rc.image_h}, {"w", rc.image_w}, {"c", rc.image_c}};
    j["latent_factor"] = rc.latent_factor;
    j["schedule"] = {{"T", rc.schedule.T}, {"beta_start", rc.schedule.beta_start}, {"beta_end", rc.schedule.beta_end}};
    j["seed"] = rc.seed;
    j["alpha"] = rc.alpha;
    j["beta"] = rc.beta;
    j["box_margin"] = rc.box_margin;
    j["stages"] = {{"guided_attention", rc.stages.guided_attention},
                   {"background_dilution", rc.stages.background_dilution},
                   {"ref_noise_resynthesis", rc.stages.ref_noise_resynthesis}};
    j["background"] = {{"image_path", rc.background_image.string()}, {"prompt", rc.background_prompt}};
    j["concepts"] = json::array();
    for (const auto& c : rc.concepts) {
        j["concepts"].push_back({{"image_path", c.image_path.string()},
                                 {"mask_path", c.mask_path.string()},
                                 {"prompt", c.prompt}});
    }
    return j;
}

int cmd_make_fixtures(const fs::path& out_dir, std::uint64_t seed, int size) {
    const flip::FixtureSet fx = flip::make_fixture_set(seed, size, size);
    const fs::path cfg = flip::write_fixture_files(fx, out_dir, seed);
    std::printf("fixtures written to %s (config: %s)\n", out_dir.string().c_str(), cfg.string().c_str());
    return kOk;
}

int cmd_invert(const flip::RunConfig& rc) {
    const LoadedInputs in = load_inputs(rc);
    const flip::Denoiser den = denoiser_for(rc);
    const flip::NoiseSchedule s = rc.schedule.make();
    const flip::PromptEmbedding cond = flip::make_prompt_embedding(in.background.prompt_tokens, den.embed_dim);

    flip::Rng rng(flip::mix_seed(rc.seed, 0));
    const flip::NoiseMapTrack track = flip::invert(in.background.image, den, cond, s, rng);
    const flip::Field recon = flip::replay(track, den, cond, s);
    const float err = flip::max_abs_diff(recon, in.background.image);

    fs::create_directories(rc.output_dir);
    flip::save_track(track, rc.output_dir / "track_background");
    json report;
    report["max_abs_err"] = err;
    report["T"] = rc.schedule.T;
    report["seed"] = rc.seed;
    flip::write_file_atomic(rc.output_dir / "report.json", report.dump(2) + "\n");

    std::printf("reconstruction max-abs error: %.3g\n", static_cast<double>(err));
    if (!(err < 1e-4f)) {
        std::fprintf(stderr, "reconstruction error exceeds 1e-4\n");
        return kNumericError;
    }
    return kOk;
}

int cmd_generate(const flip::RunConfig& rc) {
    LoadedInputs in = load_inputs(rc);
    const flip::Denoiser den = denoiser_for(rc);
    flip::BlendConfig cfg = rc.blend_config();
    cfg.max_threads = threads_from_env();

    flip::GenerateReport report;
    const flip::Field z_out = flip::generate(in.background, std::move(in.concepts), cfg, den, &report);
    const flip::Image img = flip::decode(z_out);

    fs::create_directories(rc.output_dir);
    const std::string out_name = img.c == 1 ? "out.pgm" : "out.ppm";
    write_image_atomic(img, rc.output_dir / out_name);

    json manifest;
    manifest["config"] = config_echo(rc);
    manifest["output"] = out_name;
    manifest["counters"] = {{"guided_taps", report.counters.guided_taps},
                            {"dilution_mixes", report.counters.dilution_mixes},
                            {"resynthesis_mixes", report.counters.resynthesis_mixes}};
    double total_ms = 0.0;
    for (double ms : report.step_ms) total_ms += ms;
    manifest["timing"] = {{"per_step_ms", report.step_ms}, {"total_ms", total_ms}};
    flip::write_file_atomic(rc.output_dir / "manifest.json", manifest.dump(2) + "\n");

    std::printf("wrote %s (%ld guided taps, %ld dilution mixes, %ld resynthesis mixes)\n",
                (rc.output_dir / out_name).string().c_str(), report.counters.guided_taps,
                report.counters.dilution_mixes, report.counters.resynthesis_mixes);
    return kOk;
}

int cmd_diagnose(const flip::RunConfig& rc) {
    const LoadedInputs in = load_inputs(rc);
    const flip::Denoiser den = denoiser_for(rc);
    const flip::NoiseSchedule s = rc.schedule.make();
    const flip::PromptEmbedding cond = flip::make_prompt_embedding(in.background.prompt_tokens, den.embed_dim);

    flip::Rng rng(flip::mix_seed(rc.seed, 0));
    const flip::NoiseMapTrack ef = flip::invert(in.background.image, den, cond, s, rng);
    const flip::NoiseMapTrack dd = flip::ddim_invert(in.background.image, den, cond, s);

    std::string csv = "t,var_ef,var_ddim,adj_corr\n";
    double sum_ef = 0.0, sum_dd = 0.0, sum_corr = 0.0;
    int n_var = 0, n_corr = 0;
    char line[160];
    for (int t = 2; t <= s.T; ++t) {
        const double var_ef = flip::variance(ef.z[t - 1]);
        const double var_dd = flip::variance(dd.z[t - 1]);
        sum_ef += var_ef;
        sum_dd += var_dd;
        ++n_var;
        if (t < s.T) {
            const double corr = flip::pearson_corr(ef.z[t - 1], ef.z[t]);
            sum_corr += corr;
            ++n_corr;
            std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g\n", t, var_ef, var_dd, corr);
        } else {
            std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,nan\n", t, var_ef, var_dd);
        }
        csv += line;
    }
    const double mean_ef = n_var ? sum_ef / n_var : 0.0;
    const double mean_dd = n_var ? sum_dd / n_var : 0.0;
    const double mean_corr = n_corr ? sum_corr / n_corr : 0.0;
    std::snprintf(line, sizeof(line), "mean,%.9g,%.9g,%.9g\n", mean_ef, mean_dd, mean_corr);
    csv += line;

    fs::create_directories(rc.output_dir);
    flip::write_file_atomic(rc.output_dir / "diagnose.csv", csv);
    std::printf("mean var_ef=%.4g var_ddim=%.4g adj_corr=%.4g\n", mean_ef, mean_dd, mean_corr);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic multi-concept image blending over a toy diffusion stack"};
    app.require_subcommand(1);

    std::string out_dir = "fixtures";
    std::uint64_t fx_seed = 0;
    int fx_size = 32;
    CLI::App* mk = app.add_subcommand("make-fixtures", "Write synthetic background/concept/mask fixtures");
    mk->add_option("--out", out_dir, "Output directory");
    mk->add_option("--seed", fx_seed, "Fixture seed");
    mk->add_option("--size", fx_size, "Square frame size");

    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool have_seed_override = false;

    auto add_config_opts = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run config JSON")->required();
        sub->add_option("--out", out_override, "Override output directory");
        sub->add_option("--seed", seed_override, "Override seed")->each([&](const std::string&) {
            have_seed_override = true;
        });
    };
    CLI::App* inv = app.add_subcommand("invert", "Invert the background image and save its noise-map track");
    add_config_opts(inv);
    CLI::App* gen = app.add_subcommand("generate", "Run the full blending pipeline");
    add_config_opts(gen);
    CLI::App* diag = app.add_subcommand("diagnose", "Compare noise-map statistics against the DDIM baseline");
    add_config_opts(diag);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e);
        app.exit(e);
        return kConfigError;
    }

    try {
        if (mk->parsed()) return cmd_make_fixtures(out_dir, fx_seed, fx_size);
        flip::RunConfig rc = flip::load_run_config(config_path);
        if (!out_override.empty()) rc.output_dir = out_override;
        if (have_seed_override) rc.seed = seed_override;
        if (inv->parsed()) return cmd_invert(rc);
        if (gen->parsed()) return cmd_generate(rc);
        if (diag->parsed()) return cmd_diagnose(rc);
        return kConfigError;
    } catch (const flip::DisjointnessError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kDisjointError;
    } catch (const flip::NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kNumericError;
    } catch (const flip::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIoError;
    } catch (const flip::ParameterError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    }
}
