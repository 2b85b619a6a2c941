#include "flip/mask.hpp"

#include <algorithm>
#include <string>

#include "flip/image.hpp"

namespace flip {

std::size_t BinaryMask::count_ones() const {
    std::size_t n = 0;
    for (float x : v) n += x == 1.0f;
    return n;
}

Field BinaryMask::to_field() const {
    return Field({h, w}, v);
}

BinaryMask background_mask(int h, int w, std::span<const BinaryMask> masks) {
    for (const BinaryMask& m : masks) {
        if (m.h != h || m.w != w) throw DimensionError("mask shapes disagree");
    }
    BinaryMask out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float sum = 0.0f;
            for (const BinaryMask& m : masks) sum += m.at(y, x);
            if (sum > 1.0f) {
                throw DisjointnessError("object masks overlap at pixel (" + std::to_string(y) + "," + std::to_string(x) + ")");
            }
            out.at(y, x) = 1.0f - sum;
        }
    }
    return out;
}

BinaryMask expanded_box_mask(const BinaryMask& m, int margin) {
    if (margin < 0) throw ParameterError("box margin must be >= 0");
    int y0 = m.h, y1 = -1, x0 = m.w, x1 = -1;
    for (int y = 0; y < m.h; ++y) {
        for (int x = 0; x < m.w; ++x) {
            if (m.at(y, x) == 1.0f) {
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
            }
        }
    }
    if (y1 < 0) throw EmptyMaskError("expanded_box_mask: mask has empty support");
    y0 = std::max(0, y0 - margin);
    x0 = std::max(0, x0 - margin);
    y1 = std::min(m.h - 1, y1 + margin);
    x1 = std::min(m.w - 1, x1 + margin);
    BinaryMask out(m.h, m.w);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) out.at(y, x) = 1.0f;
    }
    return out;
}

BinaryMask complement(const BinaryMask& m) {
    BinaryMask out(m.h, m.w);
    for (std::size_t i = 0; i < m.v.size(); ++i) out.v[i] = 1.0f - m.v[i];
    return out;
}

BinaryMask downsample_mask(const BinaryMask& m, int factor) {
    if (factor < 1) throw ParameterError("downsample factor must be >= 1");
    if (m.h % factor != 0 || m.w % factor != 0) throw DimensionError("downsample factor must divide H and W");
    if (factor == 1) return m;
    BinaryMask out(m.h / factor, m.w / factor);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            float any = 0.0f;
            for (int dy = 0; dy < factor && any == 0.0f; ++dy) {
                for (int dx = 0; dx < factor; ++dx) {
                    if (m.at(y * factor + dy, x * factor + dx) == 1.0f) {
                        any = 1.0f;
                        break;
                    }
                }
            }
            out.at(y, x) = any;
        }
    }
    return out;
}

BinaryMask load_mask(const std::filesystem::path& path) {
    const Image img = read_image(path);
    if (img.c != 1) throw IoError("mask must be a single-channel PGM: " + path.string());
    BinaryMask m(img.h, img.w);
    for (std::size_t i = 0; i < img.pix.size(); ++i) m.v[i] = img.pix[i] >= 128 ? 1.0f : 0.0f;
    return m;
}

void save_mask(const BinaryMask& m, const std::filesystem::path& path) {
    Image img;
    img.h = m.h;
    img.w = m.w;
    img.c = 1;
    img.pix.resize(m.v.size());
    for (std::size_t i = 0; i < m.v.size(); ++i) img.pix[i] = m.v[i] == 1.0f ? 255 : 0;
    write_image(img, path);
}

}  // namespace flip
