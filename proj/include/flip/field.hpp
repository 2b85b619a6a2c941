#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flip/error.hpp"

namespace flip {

// Dense n-dimensional array of 32-bit floats, row-major.
struct Field {
    std::vector<int> shape;
    std::vector<float> data;

    Field() = default;
    explicit Field(std::vector<int> dims);
    Field(std::vector<int> dims, std::vector<float> values);

    static Field full(std::vector<int> dims, float value);
    static Field zeros_like(const Field& other);

    int rank() const { return static_cast<int>(shape.size()); }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Field& other) const { return shape == other.shape; }

    float& at(int i, int j);
    float at(int i, int j) const;
    float& at(int i, int j, int k);
    float at(int i, int j, int k) const;

    bool all_finite() const;
};

std::size_t shape_product(const std::vector<int>& dims);

// splitmix64 stream; gaussians via Box-Muller on consecutive uniform draws.
struct Rng {
    std::uint64_t state = 0;

    Rng() = default;
    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64();
    double next_unit();  // uniform in (0, 1]
    void next_gauss_pair(double& g0, double& g1);
};

// Stable per-branch seed derivation for independent streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// 64-bit FNV-1a, used to turn token text into Rng seeds.
std::uint64_t fnv1a64(const std::string& text);

Field hadamard(const Field& a, const Field& b);
Field matmul(const Field& a, const Field& b);
Field matmul_transpose_b(const Field& a, const Field& b);
Field softmax_rows(const Field& a);
Field randn(Rng& rng, std::vector<int> dims);
Field axpy(float a, const Field& x, const Field& y);

Field add(const Field& a, const Field& b);
Field sub(const Field& a, const Field& b);
Field scale(const Field& a, float s);

// Block-mean pooling over the leading H,W axes of an [H,W,C] field.
Field block_mean_hw(const Field& a, int factor);

float max_abs(const Field& a);
float max_abs_diff(const Field& a, const Field& b);
bool exactly_equal(const Field& a, const Field& b);
double mean(const Field& a);
double variance(const Field& a);
double pearson_corr(const Field& a, const Field& b);

}  // namespace flip
