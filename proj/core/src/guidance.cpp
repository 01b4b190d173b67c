#include "vcx/guidance.hpp"

#include <cmath>

namespace vcx {

std::string variant_name(GuidanceVariant v) {
    switch (v) {
        case GuidanceVariant::RG: return "RG";
        case GuidanceVariant::SG: return "SG";
        case GuidanceVariant::SGA: return "SGA";
    }
    return "SG";
}

GuidanceVariant variant_from_name(const std::string& name) {
    if (name == "RG") return GuidanceVariant::RG;
    if (name == "SG") return GuidanceVariant::SG;
    if (name == "SGA") return GuidanceVariant::SGA;
    throw ConfigError("unknown guidance variant '" + name + "'");
}

double task_loss(const std::vector<float>& prediction, const Conditioning& target) {
    if (target.task == Task::Classification) {
        if (target.class_id < 0 || static_cast<std::size_t>(target.class_id) >= prediction.size())
            throw ConditionError("task_loss: class id " + std::to_string(target.class_id) +
                                 " outside logit range");
        double mx = prediction[0];
        for (float v : prediction) mx = std::max(mx, static_cast<double>(v));
        double denom = 0.0;
        for (float v : prediction) denom += std::exp(static_cast<double>(v) - mx);
        return -(static_cast<double>(prediction[target.class_id]) - mx - std::log(denom));
    }
    if (!std::isfinite(target.value)) throw ConditionError("task_loss: non-finite target value");
    if (prediction.size() != 1) throw ShapeError("task_loss: regression expects a scalar prediction");
    const double d = static_cast<double>(prediction[0]) - static_cast<double>(target.value);
    return d * d;
}

std::vector<float> task_loss_grad(const std::vector<float>& prediction,
                                  const Conditioning& target) {
    if (target.task == Task::Classification) {
        if (target.class_id < 0 || static_cast<std::size_t>(target.class_id) >= prediction.size())
            throw ConditionError("task_loss_grad: class id outside logit range");
        double mx = prediction[0];
        for (float v : prediction) mx = std::max(mx, static_cast<double>(v));
        double denom = 0.0;
        for (float v : prediction) denom += std::exp(static_cast<double>(v) - mx);
        std::vector<float> grad(prediction.size());
        for (std::size_t k = 0; k < prediction.size(); ++k) {
            const double p = std::exp(static_cast<double>(prediction[k]) - mx) / denom;
            grad[k] = static_cast<float>(p - (static_cast<int>(k) == target.class_id ? 1.0 : 0.0));
        }
        return grad;
    }
    if (!std::isfinite(target.value))
        throw ConditionError("task_loss_grad: non-finite target value");
    const double d = static_cast<double>(prediction[0]) - static_cast<double>(target.value);
    return {static_cast<float>(2.0 * d)};
}

namespace {

// Video-space gradient of lambda_c * L(f(x), y') at x.
VideoTensor video_loss_grad(const VideoTensor& x, const TargetModel& target,
                            const Conditioning& y_prime, double lambda_c) {
    std::vector<float> pred = target.predict(x);
    std::vector<float> cot = task_loss_grad(pred, y_prime);
    for (float& c : cot) c = static_cast<float>(lambda_c * c);
    return target.input_pullback(x, cot);
}

// SmoothGrad mean gradient in video space, given the already-decoded x.
VideoTensor smoothgrad_video_grad(const VideoTensor& x, const TargetModel& target,
                                  const Conditioning& y_prime, double lambda_c, std::size_t n,
                                  double sigma, RandomStream& stream) {
    VideoTensor g_mean(x.frames, x.height, x.width, x.channels);
    VideoTensor perturbed = x;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = 0;
        const std::size_t count = x.values.size();
        while (j + 1 < count) {
            float a, b;
            stream.next_gaussian_pair(a, b);
            perturbed.values[j] = x.values[j] + static_cast<float>(sigma) * a;
            perturbed.values[j + 1] = x.values[j + 1] + static_cast<float>(sigma) * b;
            j += 2;
        }
        if (j < count) {
            float a, b;
            stream.next_gaussian_pair(a, b);
            perturbed.values[j] = x.values[j] + static_cast<float>(sigma) * a;
        }
        VideoTensor g = video_loss_grad(perturbed, target, y_prime, lambda_c);
        for (std::size_t k = 0; k < g_mean.values.size(); ++k) g_mean.values[k] += g.values[k];
    }
    const float inv_n = 1.0f / static_cast<float>(n);
    for (float& g : g_mean.values) g *= inv_n;
    return g_mean;
}

} // namespace

LatentTensor raw_guidance_grad(const LatentTensor& v, const Codec& codec,
                               const TargetModel& target, const Conditioning& y_prime,
                               double lambda_c) {
    VideoTensor x = codec.decode(v);
    VideoTensor g_video = video_loss_grad(x, target, y_prime, lambda_c);
    LatentTensor grad = codec.decode_pullback(v, g_video);
    if (!all_finite(grad.values))
        throw NumericError("raw_guidance_grad: non-finite gradient");
    return grad;
}

LatentTensor smoothgrad_guidance(const LatentTensor& v, const Codec& codec,
                                 const TargetModel& target, const Conditioning& y_prime,
                                 double lambda_c, std::size_t n, double sigma,
                                 RandomStream& stream) {
    if (n < 1) throw ConfigError("smoothgrad_guidance: n must be >= 1");
    if (sigma < 0.0) throw ConfigError("smoothgrad_guidance: sigma must be >= 0");
    if (sigma == 0.0) {
        // All perturbations vanish, so every gradient equals the raw one.
        return raw_guidance_grad(v, codec, target, y_prime, lambda_c);
    }
    VideoTensor x = codec.decode(v);
    VideoTensor g_mean = smoothgrad_video_grad(x, target, y_prime, lambda_c, n, sigma, stream);
    LatentTensor grad = codec.decode_pullback(v, g_mean);
    if (!all_finite(grad.values))
        throw NumericError("smoothgrad_guidance: non-finite gradient");
    return grad;
}

LatentTensor smoothgrad_guidance(const LatentTensor& v, const Codec& codec,
                                 const TargetModel& target, const Conditioning& y_prime,
                                 double lambda_c, std::size_t n, double sigma,
                                 const SeedSpec& seed) {
    RandomStream stream(seed.derived("smoothgrad"));
    return smoothgrad_guidance(v, codec, target, y_prime, lambda_c, n, sigma, stream);
}

LatentTensor apply_guidance(const LatentTensor& z_tilde_prev, const LatentTensor& grad,
                            std::size_t t, const NoiseSchedule& schedule) {
    if (!z_tilde_prev.same_shape(grad)) throw ShapeError("apply_guidance: shape mismatch");
    const double ab = schedule.alpha_bar(t);
    const float coeff = static_cast<float>(std::sqrt((1.0 - ab) / ab));
    LatentTensor out = z_tilde_prev;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = z_tilde_prev.values[i] - coeff * grad.values[i];
    return out;
}

Conditioning select_target(const std::vector<float>& prediction, Task task,
                           const TargetSelectConfig& config, const SeedSpec& seed) {
    if (task == Task::Classification) {
        const std::size_t k = prediction.size();
        if (k <= 1) throw ConditionError("select_target: no alternative class exists");
        std::size_t predicted = 0;
        for (std::size_t i = 1; i < k; ++i)
            if (prediction[i] > prediction[predicted]) predicted = i;
        RandomStream stream(seed.derived("target-select"));
        std::size_t pick = stream.next_below(k - 1);
        if (pick >= predicted) ++pick;
        return Conditioning::of_class(static_cast<int>(pick));
    }
    if (prediction.size() != 1)
        throw ShapeError("select_target: regression expects a scalar prediction");
    const double p = prediction[0];
    double offset = config.offset;
    switch (config.sign) {
        case TargetSelectConfig::Sign::Plus: break;
        case TargetSelectConfig::Sign::Minus: offset = -offset; break;
        case TargetSelectConfig::Sign::Auto: {
            const double mid = 0.5 * (config.value_lo + config.value_hi);
            if (p >= mid) offset = -offset;
            break;
        }
    }
    double y = p + offset;
    y = std::min(config.value_hi, std::max(config.value_lo, y));
    return Conditioning::of_value(static_cast<float>(y));
}

CounterfactualResult generate_counterfactual(const VideoTensor& x_f, const Conditioning& y_prime,
                                             const GuidanceConfig& config, const Codec& codec,
                                             const NoiseSchedule& schedule,
                                             const Denoiser& denoiser,
                                             const TargetModel& target) {
    if (y_prime.task != config.task)
        throw ConfigError("generate_counterfactual: target task does not match config task");
    CounterfactualResult result;
    result.x_f = x_f;
    result.y_prime = y_prime;
    result.config = config;
    result.pred_factual = target.predict(x_f);
    if (config.task == Task::Classification &&
        argmax(result.pred_factual) == y_prime.class_id)
        throw ConditionError("generate_counterfactual: target class equals the prediction");

    const TimestepMap map = make_timestep_map(schedule, config.inference_steps);
    LatentTensor z0 = codec.encode(x_f);
    LatentTensor eps(z0.frames, z0.height, z0.width, z0.channels);
    eps.values = gaussian_sample(config.seed.derived("noise-init"),
                                 {z0.frames, z0.height, z0.width, z0.channels});
    result.z_T = q_sample(z0, map.noising_depth(), eps, schedule);

    RandomStream sg_stream(config.seed.derived("smoothgrad"));
    LatentTensor z = result.z_T;
    result.trace.reserve(map.inference_steps);
    for (std::size_t i = map.inference_steps; i >= 1; --i) {
        const std::size_t t = map.indices[i - 1];
        const std::size_t t_prev = i >= 2 ? map.indices[i - 2] : 0;
        LatentTensor eps_hat = denoiser.predict_noise(z, y_prime, t);
        DdimOutput step = ddim_step(z, eps_hat, t, t_prev, schedule);

        VideoTensor x_t = codec.decode(step.v);
        std::vector<float> pred_t = target.predict(x_t);
        const double loss_value = task_loss(pred_t, y_prime);

        VideoTensor g_video;
        if (config.variant == GuidanceVariant::RG || config.sigma == 0.0) {
            std::vector<float> cot = task_loss_grad(pred_t, y_prime);
            for (float& c : cot) c = static_cast<float>(config.lambda_c * c);
            g_video = target.input_pullback(x_t, cot);
        } else {
            g_video = smoothgrad_video_grad(x_t, target, y_prime, config.lambda_c,
                                            config.n_perturbations, config.sigma, sg_stream);
        }
        LatentTensor grad = codec.decode_pullback(step.v, g_video);
        if (!all_finite(grad.values))
            throw NumericError("guidance gradient non-finite at timestep " + std::to_string(t));
        double norm = 0.0;
        for (float g : grad.values) norm += static_cast<double>(g) * static_cast<double>(g);
        result.trace.push_back({t, loss_value, std::sqrt(norm)});

        z = apply_guidance(step.z_prev, grad, t, schedule);
        if (!all_finite(z.values))
            throw NumericError("latent became non-finite after guidance at timestep " +
                               std::to_string(t));
    }

    result.x_cf = codec.decode(z);
    result.pred_cf = target.predict(result.x_cf);
    return result;
}

} // namespace vcx
