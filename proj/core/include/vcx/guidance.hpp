#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vcx/codec.hpp"
#include "vcx/diffusion.hpp"
#include "vcx/target.hpp"
#include "vcx/task.hpp"

namespace vcx {

enum class GuidanceVariant { RG, SG, SGA };

std::string variant_name(GuidanceVariant v);
GuidanceVariant variant_from_name(const std::string& name);

/// Counterfactual generation knobs. RG behaves identically to SG with
/// (n_perturbations=1, sigma=0); SGA generates like SG and adds refinement.
struct GuidanceConfig {
    double lambda_c = 1.0;           // gradient loss scale
    std::size_t n_perturbations = 10;
    double sigma = 0.1;              // SmoothGrad noise std, pixel units
    GuidanceVariant variant = GuidanceVariant::SG;
    std::size_t inference_steps = 5; // T
    Task task = Task::Classification;
    SeedSpec seed{0, "generate"};
};

/// Classification: cross-entropy of softmaxed logits against the target class.
/// Regression: squared error (prediction - target)^2.
double task_loss(const std::vector<float>& prediction, const Conditioning& target);

/// d task_loss / d prediction.
std::vector<float> task_loss_grad(const std::vector<float>& prediction, const Conditioning& target);

/// Exact gradient of lambda_c * L(f(D(v)), y') with respect to v.
LatentTensor raw_guidance_grad(const LatentTensor& v, const Codec& codec,
                               const TargetModel& target, const Conditioning& y_prime,
                               double lambda_c);

/// Mean of n gradients with pixel-space perturbations eps_i ~ N(0, sigma^2 I)
/// added to the decoded video; the decode runs once and the perturbations
/// reuse it. sigma == 0 degenerates exactly to raw_guidance_grad.
LatentTensor smoothgrad_guidance(const LatentTensor& v, const Codec& codec,
                                 const TargetModel& target, const Conditioning& y_prime,
                                 double lambda_c, std::size_t n, double sigma,
                                 RandomStream& stream);
LatentTensor smoothgrad_guidance(const LatentTensor& v, const Codec& codec,
                                 const TargetModel& target, const Conditioning& y_prime,
                                 double lambda_c, std::size_t n, double sigma,
                                 const SeedSpec& seed);

/// z_{t-1} = z~_{t-1} - sqrt((1-a_t)/a_t) * grad, with a_t at the current step.
LatentTensor apply_guidance(const LatentTensor& z_tilde_prev, const LatentTensor& grad,
                            std::size_t t, const NoiseSchedule& schedule);

struct TargetSelectConfig {
    double offset = 20.0; // regression: |y' - prediction| in label units
    enum class Sign { Plus, Minus, Auto } sign = Sign::Auto;
    double value_lo = 10.0; // clamp range for regression targets
    double value_hi = 90.0;
};

/// Classification: uniform draw over classes != argmax(prediction).
/// Regression: prediction +/- offset, clamped to the label range; Auto picks
/// the direction pointing away from the nearer bound.
Conditioning select_target(const std::vector<float>& prediction, Task task,
                           const TargetSelectConfig& config, const SeedSpec& seed);

struct StepTrace {
    std::size_t t = 0;
    double loss = 0.0;      // task loss at the unperturbed decoded v_t
    double grad_norm = 0.0; // L2 norm of the applied latent gradient
};

/// Everything a single counterfactual run produces, minus the refinement
/// artifacts (those live next to it in the run store).
struct CounterfactualResult {
    VideoTensor x_f;
    VideoTensor x_cf;
    std::optional<VideoTensor> x_mask_cf;
    std::vector<float> pred_factual;
    std::vector<float> pred_cf;
    std::vector<float> pred_mask_cf; // empty until refined and re-predicted
    Conditioning y_prime;
    std::vector<StepTrace> trace;
    LatentTensor z_T;
    GuidanceConfig config;
    double mask_density = 0.0;
};

/// The full guided reverse loop: noising to the map's depth, then per step
/// predict_noise -> ddim_step -> decode v_t -> guidance gradient -> update.
/// Exactly T denoiser calls; SG runs n*T target gradient evaluations when
/// sigma > 0. Pure function of its inputs.
CounterfactualResult generate_counterfactual(const VideoTensor& x_f, const Conditioning& y_prime,
                                             const GuidanceConfig& config, const Codec& codec,
                                             const NoiseSchedule& schedule,
                                             const Denoiser& denoiser, const TargetModel& target);

} // namespace vcx
