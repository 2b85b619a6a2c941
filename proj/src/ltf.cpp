#include "flip/ltf.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace flip {

namespace {

constexpr char kMagic[4] = {'L', 'T', 'F', '1'};
constexpr int kMaxRank = 8;

void put_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::istream& is, const std::string& what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated LTF1 file: " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_ltf(const Field& f, const std::filesystem::path& path) {
    if (f.rank() < 1 || f.rank() > kMaxRank) throw ParameterError("LTF1 rank out of range");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path.string());
    os.write(kMagic, 4);
    const unsigned char rank = static_cast<unsigned char>(f.rank());
    os.write(reinterpret_cast<const char*>(&rank), 1);
    for (int d : f.shape) put_u32_le(os, static_cast<std::uint32_t>(d));
    static_assert(sizeof(float) == 4);
    for (float v : f.data) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32_le(os, bits);
    }
    if (!os) throw IoError("write failed: " + path.string());
}

Field read_ltf(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("bad LTF1 magic in " + path.string());
    }
    unsigned char rank = 0;
    if (!is.read(reinterpret_cast<char*>(&rank), 1)) throw IoError("truncated LTF1 file: " + path.string());
    if (rank < 1 || rank > kMaxRank) throw IoError("LTF1 rank out of range in " + path.string());
    std::vector<int> dims(rank);
    for (int i = 0; i < rank; ++i) {
        const std::uint32_t d = get_u32_le(is, path.string());
        if (d == 0 || d > (1u << 24)) throw IoError("LTF1 dim out of range in " + path.string());
        dims[i] = static_cast<int>(d);
    }
    const std::size_t n = shape_product(dims);
    std::vector<float> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = get_u32_le(is, path.string());
        float v;
        std::memcpy(&v, &bits, 4);
        if (!std::isfinite(v)) throw IoError("non-finite value in " + path.string());
        values[i] = v;
    }
    return Field(std::move(dims), std::move(values));
}

}  // namespace flip
