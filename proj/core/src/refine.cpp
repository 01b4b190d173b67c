#include "vcx/refine.hpp"

#include <cmath>

namespace vcx {

double RefinementMask::density() const {
    if (values.empty()) return 0.0;
    std::size_t ones = 0;
    for (std::uint8_t v : values) ones += v;
    return static_cast<double>(ones) / static_cast<double>(values.size());
}

DeltaMap delta_map(const VideoTensor& x_cf, const VideoTensor& x_den) {
    if (!x_cf.same_shape(x_den)) throw ShapeError("delta_map: shape mismatch");
    DeltaMap delta(x_cf.frames, x_cf.height, x_cf.width);
    const std::size_t c_count = x_cf.channels;
    const std::size_t voxels = delta.values.size();
    for (std::size_t i = 0; i < voxels; ++i) {
        double acc = 0.0;
        const float* a = x_cf.values.data() + i * c_count;
        const float* b = x_den.values.data() + i * c_count;
        for (std::size_t c = 0; c < c_count; ++c)
            acc += std::fabs(static_cast<double>(a[c]) - static_cast<double>(b[c]));
        delta.values[i] = static_cast<float>(acc);
    }
    return delta;
}

RefinementMask make_mask(const DeltaMap& delta, double t_sup) {
    if (t_sup < 0.0) throw ConfigError("make_mask: t_sup must be >= 0");
    RefinementMask mask(delta.frames, delta.height, delta.width);
    const float thr = static_cast<float>(t_sup);
    for (std::size_t i = 0; i < delta.values.size(); ++i)
        mask.values[i] = delta.values[i] > thr ? 1 : 0;
    return mask;
}

VideoTensor blend(const VideoTensor& x_f, const VideoTensor& x_cf, const RefinementMask& mask) {
    if (!x_f.same_shape(x_cf)) throw ShapeError("blend: factual/counterfactual shape mismatch");
    if (mask.frames != x_f.frames || mask.height != x_f.height || mask.width != x_f.width)
        throw ShapeError("blend: mask shape mismatch");
    VideoTensor out = x_f;
    const std::size_t c_count = x_f.channels;
    for (std::size_t i = 0; i < mask.values.size(); ++i) {
        if (mask.values[i]) {
            const float* src = x_cf.values.data() + i * c_count;
            float* dst = out.values.data() + i * c_count;
            for (std::size_t c = 0; c < c_count; ++c) dst[c] = src[c];
        }
    }
    return out;
}

RefineOutput refine(CounterfactualResult& run, const RefineConfig& config, const Codec& codec,
                    const NoiseSchedule& schedule, const Denoiser& denoiser) {
    if (run.z_T.values.empty())
        throw StateError("refine: counterfactual run has no stored z_T");
    const TimestepMap map = make_timestep_map(schedule, run.config.inference_steps);

    RefineOutput out;
    UnguidedResult reference = sample_unguided(run.z_T, run.y_prime, map, schedule, denoiser);
    out.x_den = codec.decode(reference.z0);
    out.delta = delta_map(run.x_cf, out.x_den);
    out.mask = make_mask(out.delta, config.t_sup);
    out.mask_density = out.mask.density();
    run.x_mask_cf = blend(run.x_f, run.x_cf, out.mask);
    run.mask_density = out.mask_density;
    return out;
}

} // namespace vcx
