#pragma once

#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <vector>

#include "vcx/rng.hpp"
#include "vcx/tensor.hpp"

namespace vcx::testing {

inline bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

inline double l2_norm(const std::vector<float>& v) {
    double acc = 0.0;
    for (float x : v) acc += static_cast<double>(x) * x;
    return std::sqrt(acc);
}

/// ||a - b|| / max(||b||, floor)
inline double relative_error(const std::vector<float>& a, const std::vector<float>& b,
                             double floor = 1e-12) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        num += d * d;
        den += static_cast<double>(b[i]) * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), floor);
}

/// Central finite differences of a scalar function over a flat input vector.
inline std::vector<float> finite_difference_grad(std::vector<float> x,
                                                 const std::function<double(const std::vector<float>&)>& f,
                                                 double step = 1e-3) {
    std::vector<float> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const float saved = x[i];
        x[i] = static_cast<float>(saved + step);
        const double up = f(x);
        x[i] = static_cast<float>(saved - step);
        const double down = f(x);
        x[i] = saved;
        grad[i] = static_cast<float>((up - down) / (2.0 * step));
    }
    return grad;
}

inline std::vector<float> random_vector(std::size_t n, RandomStream& stream, double scale = 1.0) {
    std::vector<float> out(n);
    for (auto& v : out) v = static_cast<float>(stream.next_gaussian() * scale);
    return out;
}

inline LatentTensor random_latent(std::size_t f, std::size_t h, std::size_t w, std::size_t c,
                                  RandomStream& stream, double scale = 1.0) {
    LatentTensor z(f, h, w, c);
    for (auto& v : z.values) v = static_cast<float>(stream.next_gaussian() * scale);
    return z;
}

inline VideoTensor random_video(std::size_t f, std::size_t h, std::size_t w, std::size_t c,
                                RandomStream& stream) {
    VideoTensor x(f, h, w, c);
    for (auto& v : x.values) v = static_cast<float>(stream.next_double());
    return x;
}

inline std::filesystem::path fresh_temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "vcx_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace vcx::testing
