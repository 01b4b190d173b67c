#pragma once

#include <cstdint>
#include <vector>

#include "vcx/guidance.hpp"

namespace vcx {

/// Per-voxel channel-summed absolute difference, F x H x W, nonnegative.
struct DeltaMap {
    std::size_t frames = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> values;

    DeltaMap() = default;
    DeltaMap(std::size_t f, std::size_t h, std::size_t w)
        : frames(f), height(h), width(w), values(f * h * w, 0.0f) {}

    float& at(std::size_t f, std::size_t h, std::size_t w) {
        return values[(f * height + h) * width + w];
    }
    float at(std::size_t f, std::size_t h, std::size_t w) const {
        return values[(f * height + h) * width + w];
    }
};

/// Binary F x H x W mask; 1 exactly where delta > t_sup (strict).
struct RefinementMask {
    std::size_t frames = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> values;

    RefinementMask() = default;
    RefinementMask(std::size_t f, std::size_t h, std::size_t w)
        : frames(f), height(h), width(w), values(f * h * w, 0) {}

    std::uint8_t at(std::size_t f, std::size_t h, std::size_t w) const {
        return values[(f * height + h) * width + w];
    }
    /// Fraction of ones.
    double density() const;
};

struct RefineConfig {
    double t_sup = 0.1; // threshold on the channel-summed scale
};

DeltaMap delta_map(const VideoTensor& x_cf, const VideoTensor& x_den);
RefinementMask make_mask(const DeltaMap& delta, double t_sup);

/// x_mask_cf = (1-M) . x_f + M . x_cf with the mask broadcast over channels.
/// Unmasked voxels are bitwise x_f; masked voxels bitwise x_cf.
VideoTensor blend(const VideoTensor& x_f, const VideoTensor& x_cf, const RefinementMask& mask);

struct RefineOutput {
    VideoTensor x_den; // unguided reference from the stored z_T
    DeltaMap delta;
    RefinementMask mask;
    double mask_density = 0.0;
};

/// Re-denoises the run's z_T without guidance (same timestep map and
/// conditioning as the guided pass), builds the mask, and fills run.x_mask_cf.
/// Throws StateError if the run lost its z_T.
RefineOutput refine(CounterfactualResult& run, const RefineConfig& config, const Codec& codec,
                    const NoiseSchedule& schedule, const Denoiser& denoiser);

} // namespace vcx
