#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcx/errors.hpp"

namespace vcx {

/// Identifies an independent random stream. Identical (master_seed, stream_label)
/// pairs always produce identical streams.
struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::string stream_label;

    /// Child stream: same master seed, label extended with "/suffix".
    SeedSpec derived(const std::string& suffix) const {
        return SeedSpec{master_seed, stream_label.empty() ? suffix : stream_label + "/" + suffix};
    }
};

/// Counter-based generator. Block i is a mix of hash(seed) + i, so the stream is
/// a pure function of the SeedSpec and the draw index; no global state anywhere.
class RandomStream {
public:
    explicit RandomStream(const SeedSpec& spec);

    std::uint64_t next_u64();

    /// Uniform in [0,1).
    double next_double();

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n);

    /// Uniform in [lo, hi).
    double next_range(double lo, double hi);

    /// Standard normal via Box-Muller. Each call consumes exactly two uniforms.
    void next_gaussian_pair(float& a, float& b);
    float next_gaussian();

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

/// i.i.d. standard normal tensor of the given shape; pure function of (seed, shape).
/// Throws ShapeError if the shape is empty or any dim is zero.
std::vector<float> gaussian_sample(const SeedSpec& seed, const std::vector<std::size_t>& shape);

/// 64-bit FNV-1a over arbitrary bytes.
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t state = 0xcbf29ce484222325ull);

/// Hash of a (master_seed, stream_label) pair; the stream key.
std::uint64_t stream_key(const SeedSpec& spec);

} // namespace vcx
