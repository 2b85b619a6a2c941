#include "flip/image.hpp"

#include <cmath>
#include <fstream>
#include <string>

namespace flip {

namespace {

// Reads one PNM header token, skipping whitespace and '#' comment lines.
std::string next_token(std::istream& is, const std::string& path) {
    std::string tok;
    int ch = is.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = is.get();
        } else if (std::isspace(ch)) {
            ch = is.get();
        } else {
            break;
        }
    }
    while (ch != EOF && !std::isspace(ch)) {
        tok.push_back(static_cast<char>(ch));
        ch = is.get();
    }
    if (tok.empty()) throw IoError("truncated PNM header in " + path);
    return tok;
}

int parse_dim(const std::string& tok, const std::string& path) {
    try {
        const int v = std::stoi(tok);
        if (v <= 0 || v > (1 << 20)) throw IoError("PNM dim out of range in " + path);
        return v;
    } catch (const IoError&) {
        throw;
    } catch (...) {
        throw IoError("malformed PNM header in " + path);
    }
}

}  // namespace

void write_image(const Image& img, const std::filesystem::path& path) {
    if (img.c != 1 && img.c != 3) throw ParameterError("image must have 1 or 3 channels");
    if (img.pix.size() != static_cast<std::size_t>(img.h) * img.w * img.c) {
        throw DimensionError("image pixel count does not match dims");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path.string());
    os << (img.c == 1 ? "P5" : "P6") << "\n" << img.w << " " << img.h << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pix.data()), static_cast<std::streamsize>(img.pix.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

Image read_image(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    const std::string magic = next_token(is, path.string());
    Image img;
    if (magic == "P5") {
        img.c = 1;
    } else if (magic == "P6") {
        img.c = 3;
    } else {
        throw IoError("unsupported PNM magic '" + magic + "' in " + path.string());
    }
    img.w = parse_dim(next_token(is, path.string()), path.string());
    img.h = parse_dim(next_token(is, path.string()), path.string());
    const int maxval = parse_dim(next_token(is, path.string()), path.string());
    if (maxval != 255) throw IoError("PNM maxval must be 255 in " + path.string());
    img.pix.resize(static_cast<std::size_t>(img.h) * img.w * img.c);
    if (!is.read(reinterpret_cast<char*>(img.pix.data()), static_cast<std::streamsize>(img.pix.size()))) {
        throw IoError("truncated PNM payload in " + path.string());
    }
    return img;
}

Image decode(const Field& z0) {
    if (z0.rank() != 3) throw DimensionError("decode expects an [H,W,C] field");
    const int c = z0.shape[2];
    if (c != 1 && c != 3) throw ParameterError("decode supports 1 or 3 channels");
    Image img;
    img.h = z0.shape[0];
    img.w = z0.shape[1];
    img.c = c;
    img.pix.resize(z0.size());
    for (std::size_t i = 0; i < z0.size(); ++i) {
        double v = (static_cast<double>(z0.data[i]) + 1.0) / 2.0;
        v = std::min(1.0, std::max(0.0, v));
        img.pix[i] = static_cast<std::uint8_t>(std::round(v * 255.0));
    }
    return img;
}

Field field_from_image(const Image& img) {
    Field f({img.h, img.w, img.c});
    for (std::size_t i = 0; i < img.pix.size(); ++i) {
        f.data[i] = static_cast<float>(static_cast<double>(img.pix[i]) / 255.0 * 2.0 - 1.0);
    }
    return f;
}

}  // namespace flip
