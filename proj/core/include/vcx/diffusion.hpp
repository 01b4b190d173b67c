#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcx/codec.hpp"
#include "vcx/nn.hpp"
#include "vcx/task.hpp"
#include "vcx/tensor.hpp"

namespace vcx {

/// Variance schedule over training timesteps 1..t_train.
/// alpha_bar(t) = prod_{k<=t} (1 - beta_k), with the convention alpha_bar(0) = 1.
struct NoiseSchedule {
    std::size_t t_train = 0;
    std::vector<double> betas;      // index t-1 holds beta_t
    std::vector<double> alpha_bars; // index t-1 holds alpha_bar_t

    double alpha_bar(std::size_t t) const;
};

/// Linear betas from beta_min to beta_max inclusive.
NoiseSchedule make_schedule(std::size_t t_train, double beta_min, double beta_max);

/// Identity over (t_train, beta endpoints); used for checkpoint compatibility.
std::string schedule_hash(const NoiseSchedule& schedule);

/// T inference steps mapped onto training timesteps: t_i = round(i*t_train/T),
/// strictly increasing, t_T = t_train. The largest index is the noising depth.
struct TimestepMap {
    std::size_t inference_steps = 0;
    std::vector<std::size_t> indices; // ascending, length inference_steps

    std::size_t noising_depth() const { return indices.back(); }
};

TimestepMap make_timestep_map(const NoiseSchedule& schedule, std::size_t inference_steps);

/// z_t = sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps.
LatentTensor q_sample(const LatentTensor& z0, std::size_t t, const LatentTensor& eps,
                      const NoiseSchedule& schedule);

/// Noise-prediction interface shared by the trained network and test oracles.
struct Denoiser {
    virtual ~Denoiser() = default;
    virtual LatentTensor predict_noise(const LatentTensor& z_t, const Conditioning& cond,
                                       std::size_t t) const = 0;
};

/// Closed-form denoiser for a single-point dataset with known clean latent:
/// returns (z_t - sqrt(a_t) z0*) / sqrt(1 - a_t), the exact posterior noise.
struct OracleDenoiser final : Denoiser {
    LatentTensor z0_star;
    NoiseSchedule schedule;

    OracleDenoiser(LatentTensor z0, NoiseSchedule sched)
        : z0_star(std::move(z0)), schedule(std::move(sched)) {}

    LatentTensor predict_noise(const LatentTensor& z_t, const Conditioning& cond,
                               std::size_t t) const override;
};

struct DdimOutput {
    LatentTensor z_prev; // z~_{t-1}
    LatentTensor v;      // clean-latent estimate v_t
};

/// Deterministic DDIM step (eta = 0):
///   v_t   = (z_t - sqrt(1-a_t) eps) / sqrt(a_t)
///   z_prev = sqrt(a_prev) v_t + sqrt(1-a_prev) eps,  a_0 := 1.
DdimOutput ddim_step(const LatentTensor& z_t, const LatentTensor& eps_hat, std::size_t t,
                     std::size_t t_prev, const NoiseSchedule& schedule);

struct SampleStep {
    std::size_t t = 0;
    LatentTensor z_prev;
    LatentTensor v;
};

struct UnguidedResult {
    LatentTensor z0;
    std::vector<SampleStep> trace;
};

/// Applies ddim_step down the map from z_T; deterministic given inputs.
UnguidedResult sample_unguided(const LatentTensor& z_T, const Conditioning& cond,
                               const TimestepMap& map, const NoiseSchedule& schedule,
                               const Denoiser& denoiser);

struct DenoiserConfig {
    int latent_channels = 4;
    int width = 32;        // trunk channels; also the embedding dimension
    std::size_t classes = 0; // 0 for regression conditioning
    double value_lo = 0.0;   // regression conditioning is normalized to [0,1]
    double value_hi = 100.0;
};

/// Conditional noise-prediction network: per-frame conv trunk on the latent
/// plus added (timestep, condition) embeddings as channel biases.
class ToyDenoiser final : public Denoiser {
public:
    ToyDenoiser() = default;
    ToyDenoiser(const DenoiserConfig& config, const SeedSpec& init_seed);
    // the param pack points at member vectors, so copies must rebind it
    ToyDenoiser(const ToyDenoiser& other);
    ToyDenoiser(ToyDenoiser&& other) noexcept;
    ToyDenoiser& operator=(const ToyDenoiser& other);
    ToyDenoiser& operator=(ToyDenoiser&& other) noexcept;

    LatentTensor predict_noise(const LatentTensor& z_t, const Conditioning& cond,
                               std::size_t t) const override;

    const DenoiserConfig& config() const { return config_; }
    nn::ParamPack& params() { return pack_; }
    const nn::ParamPack& params() const { return pack_; }

    /// Loss and flat parameter gradient for one (z_t, eps, cond, t) example.
    double noise_grad(const LatentTensor& z_t, const LatentTensor& eps, const Conditioning& cond,
                      std::size_t t, std::vector<float>& grad) const;

private:
    friend ToyDenoiser load_denoiser(const std::string& path, std::string* codec_hash,
                                     std::string* sched_hash);
    void rebuild(const DenoiserConfig& config);
    void rebuild_pack();
    void embed(const Conditioning& cond, std::size_t t, std::vector<float>& bias,
               std::vector<float>* sincos_out = nullptr) const;
    void check_condition(const Conditioning& cond) const;

    DenoiserConfig config_;
    nn::Conv2d conv1_, conv2_, conv3_;
    nn::Dense time_proj_;              // 16 sinusoidal features -> width
    std::vector<float> cond_table_;    // classes x width (classification)
    std::vector<float> cond_scale_;    // width (regression affine)
    std::vector<float> cond_bias_;     // width
    nn::ParamPack pack_;
};

struct DenoiserTrainConfig {
    std::size_t steps = 3000;
    std::size_t batch = 8;
    double lr = 2e-3;
    std::size_t threads = 2;
    SeedSpec seed{7, "denoiser-train"};
};

/// Minimizes E || eps - eps_theta(q_sample(E(x), t, eps), emb(y), t) ||^2 over
/// uniform t and standard-normal eps. val_metric is the validation noise MSE.
TrainStats train_denoiser(ToyDenoiser& denoiser, const std::vector<LabeledVideo>& train,
                          const std::vector<LabeledVideo>& val, const Codec& codec,
                          const NoiseSchedule& schedule, const DenoiserTrainConfig& config);

void save_denoiser(const ToyDenoiser& denoiser, const std::string& path,
                   const std::string& codec_hash, const std::string& sched_hash,
                   double val_mse);
ToyDenoiser load_denoiser(const std::string& path, std::string* codec_hash = nullptr,
                          std::string* sched_hash = nullptr);

} // namespace vcx
