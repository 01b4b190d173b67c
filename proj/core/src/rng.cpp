#include "vcx/rng.hpp"

#include <cmath>
#include <cstring>

namespace vcx {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

} // namespace

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t state) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        state ^= p[i];
        state *= 0x100000001b3ull;
    }
    return state;
}

std::uint64_t stream_key(const SeedSpec& spec) {
    unsigned char seed_bytes[8];
    std::uint64_t s = spec.master_seed;
    for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<unsigned char>((s >> (8 * i)) & 0xff);
    std::uint64_t h = fnv1a64(seed_bytes, 8);
    h = fnv1a64(spec.stream_label.data(), spec.stream_label.size(), h);
    return mix64(h);
}

RandomStream::RandomStream(const SeedSpec& spec) : key_(stream_key(spec)) {}

std::uint64_t RandomStream::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
}

double RandomStream::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::next_below(std::uint64_t n) {
    if (n == 0) throw ConfigError("next_below: n must be positive");
    return next_u64() % n;
}

double RandomStream::next_range(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

void RandomStream::next_gaussian_pair(float& a, float& b) {
    // u1 in (0,1] keeps the log finite
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    a = static_cast<float>(r * std::cos(kTwoPi * u2));
    b = static_cast<float>(r * std::sin(kTwoPi * u2));
}

float RandomStream::next_gaussian() {
    float a, b;
    next_gaussian_pair(a, b);
    return a;
}

std::vector<float> gaussian_sample(const SeedSpec& seed, const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw ShapeError("gaussian_sample: empty shape");
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("gaussian_sample: zero-size dimension");
        n *= d;
    }
    std::vector<float> out(n);
    RandomStream stream(seed);
    std::size_t i = 0;
    while (i + 1 < n) {
        stream.next_gaussian_pair(out[i], out[i + 1]);
        i += 2;
    }
    if (i < n) {
        float a, b;
        stream.next_gaussian_pair(a, b);
        out[i] = a;
    }
    return out;
}

} // namespace vcx
