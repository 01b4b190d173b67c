#pragma once

#include <string>
#include <vector>

#include "vcx/guidance.hpp"
#include "vcx/target.hpp"
#include "vcx/task.hpp"
#include "vcx/tensor.hpp"

namespace vcx {

/// Aligned (target, prediction) pairs for the regression accuracy metrics.
struct PredictionPairSet {
    std::vector<double> targets;
    std::vector<double> predictions;

    std::size_t size() const { return targets.size(); }
};

/// 1 - sum (y'-yhat)^2 / sum (y'-ybar)^2, ybar the mean of the targets.
/// Throws MetricError when the targets have zero variance or N < 2.
double r_squared(const PredictionPairSet& pairs);
double mae(const PredictionPairSet& pairs);
double rmse(const PredictionPairSet& pairs);

/// Fraction of exact class matches.
double flip_ratio(const std::vector<int>& predictions, const std::vector<int>& targets);

/// Whole-frame, channel-pooled SSIM with C1=(0.01)^2, C2=(0.03)^2 (L=1),
/// averaged over frames. This is the global form the evaluation pins to.
double ssim_global(const VideoTensor& x, const VideoTensor& y);

/// Conventional sliding-window SSIM (gaussian 11x11, sigma 1.5), provided for
/// comparison only; not used by the evaluation path.
double ssim_windowed(const VideoTensor& x, const VideoTensor& y);

/// Feature-space perceptual distance: per frame, channel-unit-normalized layer
/// features, squared differences averaged over positions, summed over layers,
/// averaged over frames.
double perceptual_distance(const VideoTensor& x, const VideoTensor& y, const TargetModel& target,
                           const std::vector<std::string>& layers);

/// Default layer set for the perceptual distance.
const std::vector<std::string>& perceptual_layers();

enum class FeatureMode { PerFrame, TemporalPooled };

struct FeatureStats {
    std::size_t dim = 0;
    std::size_t count = 0;
    std::vector<double> mean; // dim
    std::vector<double> cov;  // dim x dim, row-major, unbiased
    bool dim_exceeds_count = false;
};

/// Gaussian fit of target-model features over a video collection. PerFrame
/// uses the "frame_pool" layer (one vector per frame per video); TemporalPooled
/// uses "video_embed" (one vector per video).
FeatureStats feature_stats(const std::vector<const VideoTensor*>& videos,
                           const TargetModel& target, FeatureMode mode);

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

/// L1 distance between two videos (sum of absolute differences).
double l1_distance(const VideoTensor& a, const VideoTensor& b);

/// Spearman rank correlation with average ranks for ties; 0 when either side
/// has no rank variance.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct VariantMetrics {
    bool present = false;
    double fr = 0.0;   // classification
    double r2 = 0.0;   // regression
    double mae_v = 0.0;
    double rmse_v = 0.0;
    double ssim = 0.0;
    double perceptual = 0.0;
    double l1 = 0.0;
    double fid = 0.0; // classification only
    double fvd = 0.0; // classification only
};

struct MetricsReport {
    Task task = Task::Classification;
    std::size_t runs = 0;
    VariantMetrics cf;     // metrics on x_cf
    VariantMetrics masked; // metrics on x_mask_cf when every run has one
    double mask_density = 0.0;
    bool feature_dim_advisory = false; // feature dim exceeded the sample count
    std::vector<double> per_run_ssim;  // on x_cf, run order
    std::vector<double> per_run_perceptual;
};

/// Aggregate evaluation of a run collection. Predictions are recomputed with
/// the supplied target model. Throws ConfigError if runs mix tasks or shapes.
MetricsReport evaluate_run_set(const std::vector<const CounterfactualResult*>& results,
                               const TargetModel& target, Task task);

} // namespace vcx
