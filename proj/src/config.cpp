#include "flip/config.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "flip/image.hpp"
#include "flip/ltf.hpp"

namespace flip {

BlendConfig RunConfig::blend_config() const {
    BlendConfig cfg;
    cfg.alpha = alpha;
    cfg.beta = beta;
    cfg.schedule = schedule;
    cfg.seed = seed;
    cfg.box_margin = box_margin;
    cfg.stages = stages;
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ParameterError("cannot open config: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError("malformed config JSON: " + std::string(e.what()));
    }

    RunConfig rc;
    const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
    auto resolve = [&](const std::string& p) -> std::filesystem::path {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };

    try {
        const auto& sz = j.at("image_size");
        rc.image_h = sz.at("h").get<int>();
        rc.image_w = sz.at("w").get<int>();
        rc.image_c = sz.value("c", 1);
        rc.latent_factor = j.value("latent_factor", 1);
        const auto& sch = j.at("schedule");
        rc.schedule.T = sch.at("T").get<int>();
        rc.schedule.beta_start = sch.value("beta_start", 1e-4);
        rc.schedule.beta_end = sch.value("beta_end", 0.02);
        rc.seed = j.value("seed", 0ull);
        rc.alpha = j.value("alpha", 0.15);
        rc.beta = j.value("beta", 0.8);
        rc.box_margin = j.value("box_margin", 2);
        if (j.contains("stages")) {
            const auto& st = j.at("stages");
            rc.stages.guided_attention = st.value("guided_attention", true);
            rc.stages.background_dilution = st.value("background_dilution", true);
            rc.stages.ref_noise_resynthesis = st.value("ref_noise_resynthesis", true);
        }
        const auto& bg = j.at("background");
        rc.background_image = resolve(bg.at("image_path").get<std::string>());
        rc.background_prompt = bg.value("prompt", "");
        for (const auto& c : j.value("concepts", nlohmann::json::array())) {
            RunConfig::Concept ci;
            ci.image_path = resolve(c.at("image_path").get<std::string>());
            ci.mask_path = resolve(c.at("mask_path").get<std::string>());
            ci.prompt = c.value("prompt", "");
            rc.concepts.push_back(std::move(ci));
        }
        rc.output_dir = resolve(j.value("output_dir", "out"));
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError("config missing or mistyped field: " + std::string(e.what()));
    }

    if (rc.image_h < 1 || rc.image_w < 1) throw ParameterError("config: image_size must be positive");
    if (rc.image_c != 1 && rc.image_c != 3) throw ParameterError("config: image_size.c must be 1 or 3");
    if (rc.latent_factor < 1 || rc.image_h % rc.latent_factor != 0 || rc.image_w % rc.latent_factor != 0) {
        throw ParameterError("config: latent_factor must divide image height and width");
    }
    if (rc.schedule.T < 1 || rc.schedule.T > 100000) throw ParameterError("config: schedule.T out of range");
    if (!(rc.schedule.beta_start > 0.0) || !(rc.schedule.beta_start <= rc.schedule.beta_end) ||
        !(rc.schedule.beta_end < 1.0)) {
        throw ParameterError("config: schedule betas must satisfy 0 < start <= end < 1");
    }
    if (!std::isfinite(rc.alpha)) throw ParameterError("config: alpha must be finite");
    if (!(rc.beta >= 0.0 && rc.beta <= 1.0)) throw ParameterError("config: beta must lie in [0, 1]");
    if (rc.box_margin < 0) throw ParameterError("config: box_margin must be >= 0");
    if (!std::filesystem::exists(rc.background_image)) {
        throw ParameterError("config: background image not found: " + rc.background_image.string());
    }
    for (const auto& c : rc.concepts) {
        if (!std::filesystem::exists(c.image_path)) {
            throw ParameterError("config: concept image not found: " + c.image_path.string());
        }
        if (!std::filesystem::exists(c.mask_path)) {
            throw ParameterError("config: concept mask not found: " + c.mask_path.string());
        }
    }
    return rc;
}

Field load_image_field(const std::filesystem::path& path, int h, int w, int c) {
    Field f;
    const std::string ext = path.extension().string();
    if (ext == ".ltf") {
        f = read_ltf(path);
        if (f.rank() == 2) f = Field({f.shape[0], f.shape[1], 1}, f.data);
    } else if (ext == ".pgm" || ext == ".ppm") {
        f = field_from_image(read_image(path));
    } else {
        throw ParameterError("unsupported image extension: " + path.string());
    }
    if (f.rank() != 3 || f.shape[0] != h || f.shape[1] != w || f.shape[2] != c) {
        throw DimensionError("image dims do not match config: " + path.string());
    }
    return f;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot open for write: " + tmp.string());
        os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!os) throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace flip
