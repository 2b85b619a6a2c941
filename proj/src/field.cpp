#include "flip/field.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

namespace flip {

std::size_t shape_product(const std::vector<int>& dims) {
    std::size_t n = 1;
    for (int d : dims) {
        if (d <= 0) throw DimensionError("field dims must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Field::Field(std::vector<int> dims) : shape(std::move(dims)) {
    data.assign(shape_product(shape), 0.0f);
}

Field::Field(std::vector<int> dims, std::vector<float> values) : shape(std::move(dims)), data(std::move(values)) {
    if (data.size() != shape_product(shape)) {
        throw DimensionError("field data length does not match shape");
    }
}

Field Field::full(std::vector<int> dims, float value) {
    Field f(std::move(dims));
    for (float& v : f.data) v = value;
    return f;
}

Field Field::zeros_like(const Field& other) {
    return Field(other.shape);
}

float& Field::at(int i, int j) {
    return data[static_cast<std::size_t>(i) * shape[1] + j];
}

float Field::at(int i, int j) const {
    return data[static_cast<std::size_t>(i) * shape[1] + j];
}

float& Field::at(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
}

float Field::at(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
}

bool Field::all_finite() const {
    for (float v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::uint64_t Rng::next_u64() {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double Rng::next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

void Rng::next_gauss_pair(double& g0, double& g1) {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    g0 = r * std::cos(a);
    g1 = r * std::sin(a);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ull * (stream + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

// Mask broadcast: b may omit the trailing channel axis of a, or carry it as 1.
enum class PairKind { elementwise, channel_broadcast };

PairKind classify_pair(const Field& a, const Field& b) {
    if (a.shape == b.shape) return PairKind::elementwise;
    if (b.rank() + 1 == a.rank()) {
        bool prefix = true;
        for (int i = 0; i < b.rank(); ++i) prefix = prefix && a.shape[i] == b.shape[i];
        if (prefix) return PairKind::channel_broadcast;
    }
    if (b.rank() == a.rank() && b.rank() >= 1 && b.shape.back() == 1) {
        bool prefix = true;
        for (int i = 0; i + 1 < b.rank(); ++i) prefix = prefix && a.shape[i] == b.shape[i];
        if (prefix) return PairKind::channel_broadcast;
    }
    throw DimensionError("hadamard shape mismatch");
}

}  // namespace

Field hadamard(const Field& a, const Field& b) {
    Field out(a.shape);
    if (classify_pair(a, b) == PairKind::elementwise) {
        for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * b.data[i];
        return out;
    }
    const std::size_t channels = a.size() / b.size();
    for (std::size_t i = 0; i < b.size(); ++i) {
        const float m = b.data[i];
        for (std::size_t c = 0; c < channels; ++c) {
            out.data[i * channels + c] = a.data[i * channels + c] * m;
        }
    }
    return out;
}

Field matmul(const Field& a, const Field& b) {
    if (a.rank() != 2 || b.rank() != 2) throw DimensionError("matmul expects rank-2 fields");
    if (a.shape[1] != b.shape[0]) throw DimensionError("matmul inner dims disagree");
    const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Field out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;  // 64-bit accumulation, rounded on store
            for (int l = 0; l < k; ++l) {
                acc += static_cast<double>(a.at(i, l)) * static_cast<double>(b.at(l, j));
            }
            out.at(i, j) = static_cast<float>(acc);
        }
    }
    return out;
}

Field matmul_transpose_b(const Field& a, const Field& b) {
    if (a.rank() != 2 || b.rank() != 2) throw DimensionError("matmul expects rank-2 fields");
    if (a.shape[1] != b.shape[1]) throw DimensionError("matmul inner dims disagree");
    const int m = a.shape[0], k = a.shape[1], n = b.shape[0];
    Field out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int l = 0; l < k; ++l) {
                acc += static_cast<double>(a.at(i, l)) * static_cast<double>(b.at(j, l));
            }
            out.at(i, j) = static_cast<float>(acc);
        }
    }
    return out;
}

Field softmax_rows(const Field& a) {
    if (a.rank() != 2) throw DimensionError("softmax_rows expects a rank-2 field");
    const int m = a.shape[0], n = a.shape[1];
    Field out({m, n});
    for (int i = 0; i < m; ++i) {
        double rmax = a.at(i, 0);
        for (int j = 1; j < n; ++j) rmax = std::max(rmax, static_cast<double>(a.at(i, j)));
        double sum = 0.0;
        for (int j = 0; j < n; ++j) sum += std::exp(static_cast<double>(a.at(i, j)) - rmax);
        for (int j = 0; j < n; ++j) {
            out.at(i, j) = static_cast<float>(std::exp(static_cast<double>(a.at(i, j)) - rmax) / sum);
        }
    }
    return out;
}

Field randn(Rng& rng, std::vector<int> dims) {
    Field out(std::move(dims));
    const std::size_t n = out.size();
    double g0, g1;
    for (std::size_t i = 0; i + 1 < n; i += 2) {
        rng.next_gauss_pair(g0, g1);
        out.data[i] = static_cast<float>(g0);
        out.data[i + 1] = static_cast<float>(g1);
    }
    if (n % 2 == 1) {
        rng.next_gauss_pair(g0, g1);  // second output discarded, never cached
        out.data[n - 1] = static_cast<float>(g0);
    }
    return out;
}

Field axpy(float a, const Field& x, const Field& y) {
    if (!x.same_shape(y)) throw DimensionError("axpy shape mismatch");
    Field out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = a * x.data[i] + y.data[i];
    return out;
}

Field add(const Field& a, const Field& b) {
    if (!a.same_shape(b)) throw DimensionError("add shape mismatch");
    Field out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] + b.data[i];
    return out;
}

Field sub(const Field& a, const Field& b) {
    if (!a.same_shape(b)) throw DimensionError("sub shape mismatch");
    Field out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] - b.data[i];
    return out;
}

Field scale(const Field& a, float s) {
    Field out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * s;
    return out;
}

Field block_mean_hw(const Field& a, int factor) {
    if (a.rank() != 3) throw DimensionError("block_mean_hw expects an [H,W,C] field");
    if (factor < 1) throw ParameterError("block_mean_hw factor must be >= 1");
    const int h = a.shape[0], w = a.shape[1], c = a.shape[2];
    if (h % factor != 0 || w % factor != 0) throw DimensionError("block_mean_hw factor must divide H and W");
    if (factor == 1) return a;
    Field out({h / factor, w / factor, c});
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int y = 0; y < h / factor; ++y) {
        for (int x = 0; x < w / factor; ++x) {
            for (int k = 0; k < c; ++k) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) {
                        acc += a.at(y * factor + dy, x * factor + dx, k);
                    }
                }
                out.at(y, x, k) = static_cast<float>(acc * inv);
            }
        }
    }
    return out;
}

float max_abs(const Field& a) {
    float m = 0.0f;
    for (float v : a.data) m = std::max(m, std::fabs(v));
    return m;
}

float max_abs_diff(const Field& a, const Field& b) {
    if (!a.same_shape(b)) throw DimensionError("max_abs_diff shape mismatch");
    float m = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

bool exactly_equal(const Field& a, const Field& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.data[i] != b.data[i]) return false;
    }
    return true;
}

double mean(const Field& a) {
    double acc = 0.0;
    for (float v : a.data) acc += v;
    return a.size() ? acc / static_cast<double>(a.size()) : 0.0;
}

double variance(const Field& a) {
    if (a.size() == 0) return 0.0;
    const double mu = mean(a);
    double acc = 0.0;
    for (float v : a.data) acc += (v - mu) * (v - mu);
    return acc / static_cast<double>(a.size());
}

double pearson_corr(const Field& a, const Field& b) {
    if (!a.same_shape(b)) throw DimensionError("pearson_corr shape mismatch");
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a.data[i] - ma;
        const double db = b.data[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace flip
