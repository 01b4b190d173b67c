#pragma once

#include <cstddef>

namespace vcx {

/// Returned by every component trainer. val_metric is component-specific:
/// PSNR dB (codec), noise MSE (denoiser), accuracy or R^2 (target).
struct TrainStats {
    double final_loss = 0.0;
    double val_metric = 0.0;
    std::size_t steps = 0;
};

} // namespace vcx
