#include "vcx/diffusion.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vcx/archive.hpp"
#include "vcx/parallel.hpp"
#include "vcx/rng.hpp"

namespace vcx {

using nlohmann::json;

double NoiseSchedule::alpha_bar(std::size_t t) const {
    if (t == 0) return 1.0;
    if (t > t_train)
        throw ConfigError("timestep " + std::to_string(t) + " exceeds t_train " +
                          std::to_string(t_train));
    return alpha_bars[t - 1];
}

NoiseSchedule make_schedule(std::size_t t_train, double beta_min, double beta_max) {
    if (t_train < 1) throw ConfigError("make_schedule: t_train must be >= 1");
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0))
        throw ConfigError("make_schedule: need 0 < beta_min <= beta_max < 1");
    NoiseSchedule s;
    s.t_train = t_train;
    s.betas.resize(t_train);
    s.alpha_bars.resize(t_train);
    double prod = 1.0;
    for (std::size_t i = 0; i < t_train; ++i) {
        const double frac = t_train == 1 ? 0.0
                                         : static_cast<double>(i) / static_cast<double>(t_train - 1);
        s.betas[i] = beta_min + (beta_max - beta_min) * frac;
        prod *= 1.0 - s.betas[i];
        s.alpha_bars[i] = prod;
    }
    return s;
}

std::string schedule_hash(const NoiseSchedule& schedule) {
    std::ostringstream os;
    os << schedule.t_train;
    if (!schedule.betas.empty())
        os << ":" << schedule.betas.front() << ":" << schedule.betas.back();
    const std::string repr = os.str();
    std::uint64_t h = fnv1a64(repr.data(), repr.size());
    std::ostringstream hex;
    hex << std::hex << h;
    return hex.str();
}

TimestepMap make_timestep_map(const NoiseSchedule& schedule, std::size_t inference_steps) {
    if (inference_steps < 1 || inference_steps > schedule.t_train)
        throw ConfigError("timestep map: T must be in [1, t_train]");
    TimestepMap map;
    map.inference_steps = inference_steps;
    map.indices.resize(inference_steps);
    for (std::size_t i = 1; i <= inference_steps; ++i) {
        const double x = static_cast<double>(i) * static_cast<double>(schedule.t_train) /
                         static_cast<double>(inference_steps);
        map.indices[i - 1] = static_cast<std::size_t>(std::floor(x + 0.5));
    }
    return map;
}

LatentTensor q_sample(const LatentTensor& z0, std::size_t t, const LatentTensor& eps,
                      const NoiseSchedule& schedule) {
    if (!z0.same_shape(eps)) throw ShapeError("q_sample: z0 and eps shapes differ");
    const double ab = schedule.alpha_bar(t);
    const float a = static_cast<float>(std::sqrt(ab));
    const float b = static_cast<float>(std::sqrt(1.0 - ab));
    LatentTensor out = z0;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = a * z0.values[i] + b * eps.values[i];
    return out;
}

LatentTensor OracleDenoiser::predict_noise(const LatentTensor& z_t, const Conditioning&,
                                           std::size_t t) const {
    if (!z_t.same_shape(z0_star)) throw ShapeError("oracle denoiser: latent shape mismatch");
    const double ab = schedule.alpha_bar(t);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    if (b == 0.0) throw NumericError("oracle denoiser: alpha_bar(t) == 1 leaves noise undefined");
    LatentTensor out = z_t;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = static_cast<float>(
            (static_cast<double>(z_t.values[i]) - a * static_cast<double>(z0_star.values[i])) / b);
    return out;
}

DdimOutput ddim_step(const LatentTensor& z_t, const LatentTensor& eps_hat, std::size_t t,
                     std::size_t t_prev, const NoiseSchedule& schedule) {
    if (t_prev >= t) throw OrderingError("ddim_step: t_prev must be strictly below t");
    if (!z_t.same_shape(eps_hat)) throw ShapeError("ddim_step: z and eps shapes differ");
    const double ab_t = schedule.alpha_bar(t);
    const double ab_prev = schedule.alpha_bar(t_prev);
    const double inv_sqrt_ab = 1.0 / std::sqrt(ab_t);
    const double sqrt_om = std::sqrt(1.0 - ab_t);
    // z_prev is formed from the stored v with the same expression q_sample
    // uses, so re-deriving z_prev via q_sample(v, t_prev, eps) is exact
    const float a_prev = static_cast<float>(std::sqrt(ab_prev));
    const float b_prev = static_cast<float>(std::sqrt(1.0 - ab_prev));

    DdimOutput out;
    out.v = z_t;
    out.z_prev = z_t;
    for (std::size_t i = 0; i < z_t.values.size(); ++i) {
        const double e = eps_hat.values[i];
        const float v = static_cast<float>(
            (static_cast<double>(z_t.values[i]) - sqrt_om * e) * inv_sqrt_ab);
        out.v.values[i] = v;
        out.z_prev.values[i] = a_prev * v + b_prev * eps_hat.values[i];
    }
    return out;
}

UnguidedResult sample_unguided(const LatentTensor& z_T, const Conditioning& cond,
                               const TimestepMap& map, const NoiseSchedule& schedule,
                               const Denoiser& denoiser) {
    UnguidedResult result;
    result.trace.reserve(map.inference_steps);
    LatentTensor z = z_T;
    for (std::size_t i = map.inference_steps; i >= 1; --i) {
        const std::size_t t = map.indices[i - 1];
        const std::size_t t_prev = i >= 2 ? map.indices[i - 2] : 0;
        LatentTensor eps_hat = denoiser.predict_noise(z, cond, t);
        DdimOutput step = ddim_step(z, eps_hat, t, t_prev, schedule);
        result.trace.push_back({t, step.z_prev, step.v});
        z = std::move(step.z_prev);
    }
    result.z0 = std::move(z);
    return result;
}

// ---- toy denoiser ----

namespace {

constexpr int kTimeFeatures = 16;

void sincos_features(std::size_t t, float* out) {
    for (int j = 0; j < kTimeFeatures / 2; ++j) {
        const double freq = std::pow(10000.0, -static_cast<double>(j) / (kTimeFeatures / 2.0));
        const double arg = static_cast<double>(t) * freq;
        out[2 * j] = static_cast<float>(std::sin(arg));
        out[2 * j + 1] = static_cast<float>(std::cos(arg));
    }
}

} // namespace

ToyDenoiser::ToyDenoiser(const DenoiserConfig& config, const SeedSpec& init_seed) {
    rebuild(config);
    RandomStream stream(init_seed);
    conv1_.init(stream);
    conv2_.init(stream);
    conv3_.init(stream);
    time_proj_.init(stream);
    if (config.classes > 0) {
        for (float& x : cond_table_) x = static_cast<float>(stream.next_gaussian() * 0.5);
    } else {
        for (float& x : cond_scale_) x = static_cast<float>(stream.next_gaussian() * 0.5);
        for (float& x : cond_bias_) x = static_cast<float>(stream.next_gaussian() * 0.5);
    }
}

void ToyDenoiser::rebuild(const DenoiserConfig& config) {
    config_ = config;
    conv1_ = nn::Conv2d(config.latent_channels, config.width, 3, 1, 1);
    conv2_ = nn::Conv2d(config.width, config.width, 3, 1, 1);
    conv3_ = nn::Conv2d(config.width, config.latent_channels, 3, 1, 1);
    time_proj_ = nn::Dense(kTimeFeatures, config.width);
    if (config.classes > 0) {
        cond_table_.assign(config.classes * static_cast<std::size_t>(config.width), 0.0f);
        cond_scale_.clear();
        cond_bias_.clear();
    } else {
        cond_table_.clear();
        cond_scale_.assign(static_cast<std::size_t>(config.width), 0.0f);
        cond_bias_.assign(static_cast<std::size_t>(config.width), 0.0f);
    }
    rebuild_pack();
}

void ToyDenoiser::rebuild_pack() {
    std::vector<nn::ParamRef> refs{{"conv1.w", &conv1_.w}, {"conv1.b", &conv1_.b},
                                   {"conv2.w", &conv2_.w}, {"conv2.b", &conv2_.b},
                                   {"conv3.w", &conv3_.w}, {"conv3.b", &conv3_.b},
                                   {"time.w", &time_proj_.w}, {"time.b", &time_proj_.b}};
    if (config_.classes > 0) {
        refs.push_back({"cond.table", &cond_table_});
    } else {
        refs.push_back({"cond.scale", &cond_scale_});
        refs.push_back({"cond.bias", &cond_bias_});
    }
    pack_.build(std::move(refs));
}

ToyDenoiser::ToyDenoiser(const ToyDenoiser& other)
    : config_(other.config_), conv1_(other.conv1_), conv2_(other.conv2_), conv3_(other.conv3_),
      time_proj_(other.time_proj_), cond_table_(other.cond_table_),
      cond_scale_(other.cond_scale_), cond_bias_(other.cond_bias_) {
    rebuild_pack();
}

ToyDenoiser::ToyDenoiser(ToyDenoiser&& other) noexcept
    : config_(other.config_), conv1_(std::move(other.conv1_)), conv2_(std::move(other.conv2_)),
      conv3_(std::move(other.conv3_)), time_proj_(std::move(other.time_proj_)),
      cond_table_(std::move(other.cond_table_)), cond_scale_(std::move(other.cond_scale_)),
      cond_bias_(std::move(other.cond_bias_)) {
    rebuild_pack();
}

ToyDenoiser& ToyDenoiser::operator=(const ToyDenoiser& other) {
    if (this != &other) {
        config_ = other.config_;
        conv1_ = other.conv1_;
        conv2_ = other.conv2_;
        conv3_ = other.conv3_;
        time_proj_ = other.time_proj_;
        cond_table_ = other.cond_table_;
        cond_scale_ = other.cond_scale_;
        cond_bias_ = other.cond_bias_;
        rebuild_pack();
    }
    return *this;
}

ToyDenoiser& ToyDenoiser::operator=(ToyDenoiser&& other) noexcept {
    if (this != &other) {
        config_ = other.config_;
        conv1_ = std::move(other.conv1_);
        conv2_ = std::move(other.conv2_);
        conv3_ = std::move(other.conv3_);
        time_proj_ = std::move(other.time_proj_);
        cond_table_ = std::move(other.cond_table_);
        cond_scale_ = std::move(other.cond_scale_);
        cond_bias_ = std::move(other.cond_bias_);
        rebuild_pack();
    }
    return *this;
}

void ToyDenoiser::check_condition(const Conditioning& cond) const {
    if (config_.classes > 0) {
        if (cond.class_id < 0 || static_cast<std::size_t>(cond.class_id) >= config_.classes)
            throw ConditionError("unknown class id " + std::to_string(cond.class_id));
    } else {
        if (!std::isfinite(cond.value))
            throw ConditionError("non-finite regression conditioning value");
    }
}

void ToyDenoiser::embed(const Conditioning& cond, std::size_t t, std::vector<float>& bias,
                        std::vector<float>* sincos_out) const {
    const int width = config_.width;
    std::vector<float> feats(kTimeFeatures);
    sincos_features(t, feats.data());
    if (sincos_out) *sincos_out = feats;
    bias.assign(static_cast<std::size_t>(width), 0.0f);
    time_proj_.forward(feats.data(), bias.data());
    if (config_.classes > 0) {
        const float* row = cond_table_.data() + static_cast<std::size_t>(cond.class_id) * width;
        for (int c = 0; c < width; ++c) bias[c] += row[c];
    } else {
        const float norm = static_cast<float>((cond.value - config_.value_lo) /
                                              (config_.value_hi - config_.value_lo));
        for (int c = 0; c < width; ++c) bias[c] += cond_scale_[c] * norm + cond_bias_[c];
    }
}

LatentTensor ToyDenoiser::predict_noise(const LatentTensor& z_t, const Conditioning& cond,
                                        std::size_t t) const {
    if (z_t.channels != static_cast<std::size_t>(config_.latent_channels))
        throw ShapeError("denoiser expects " + std::to_string(config_.latent_channels) +
                         " latent channels, got " + std::to_string(z_t.channels));
    check_condition(cond);
    const int h = static_cast<int>(z_t.height);
    const int w = static_cast<int>(z_t.width);
    const int width = config_.width;
    std::vector<float> bias;
    embed(cond, t, bias);

    LatentTensor out(z_t.frames, z_t.height, z_t.width, z_t.channels);
    const std::size_t frame_px = z_t.height * z_t.width * z_t.channels;
    const std::size_t hidden_px = z_t.height * z_t.width * static_cast<std::size_t>(width);
    std::vector<float> h1(hidden_px), h2(hidden_px);
    for (std::size_t f = 0; f < z_t.frames; ++f) {
        const float* z = z_t.values.data() + f * frame_px;
        conv1_.forward(z, h, w, h1.data());
        for (std::size_t p = 0; p < z_t.height * z_t.width; ++p)
            for (int c = 0; c < width; ++c) h1[p * width + c] += bias[c];
        nn::tanh_forward(h1.data(), h1.size());
        conv2_.forward(h1.data(), h, w, h2.data());
        nn::tanh_forward(h2.data(), h2.size());
        conv3_.forward(h2.data(), h, w, out.values.data() + f * frame_px);
    }
    return out;
}

double ToyDenoiser::noise_grad(const LatentTensor& z_t, const LatentTensor& eps,
                               const Conditioning& cond, std::size_t t,
                               std::vector<float>& grad) const {
    check_condition(cond);
    const int h = static_cast<int>(z_t.height);
    const int w = static_cast<int>(z_t.width);
    const int width = config_.width;
    grad.assign(pack_.total, 0.0f);
    const std::size_t c1w = pack_.span("conv1.w").first, c1b = pack_.span("conv1.b").first;
    const std::size_t c2w = pack_.span("conv2.w").first, c2b = pack_.span("conv2.b").first;
    const std::size_t c3w = pack_.span("conv3.w").first, c3b = pack_.span("conv3.b").first;
    const std::size_t tw = pack_.span("time.w").first, tb = pack_.span("time.b").first;

    std::vector<float> bias, feats;
    embed(cond, t, bias, &feats);

    const std::size_t frame_px = z_t.height * z_t.width * z_t.channels;
    const std::size_t hidden_px = z_t.height * z_t.width * static_cast<std::size_t>(width);
    const std::size_t spatial = z_t.height * z_t.width;
    std::vector<float> h1(hidden_px), h2(hidden_px), y(frame_px);
    std::vector<float> gy(frame_px), gh2(hidden_px), gh1(hidden_px);
    std::vector<float> gbias(static_cast<std::size_t>(width), 0.0f);

    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(z_t.size());
    for (std::size_t f = 0; f < z_t.frames; ++f) {
        const float* z = z_t.values.data() + f * frame_px;
        conv1_.forward(z, h, w, h1.data());
        for (std::size_t p = 0; p < spatial; ++p)
            for (int c = 0; c < width; ++c) h1[p * width + c] += bias[c];
        nn::tanh_forward(h1.data(), h1.size());
        conv2_.forward(h1.data(), h, w, h2.data());
        nn::tanh_forward(h2.data(), h2.size());
        conv3_.forward(h2.data(), h, w, y.data());

        const float* e = eps.values.data() + f * frame_px;
        for (std::size_t i = 0; i < frame_px; ++i) {
            const double d = static_cast<double>(y[i]) - static_cast<double>(e[i]);
            loss += d * d * inv_n;
            gy[i] = static_cast<float>(2.0 * d * inv_n);
        }
        std::fill(gh2.begin(), gh2.end(), 0.0f);
        conv3_.backward(h2.data(), h, w, gy.data(), gh2.data(), grad.data() + c3w,
                        grad.data() + c3b);
        nn::tanh_backward(h2.data(), gh2.data(), gh2.size());
        std::fill(gh1.begin(), gh1.end(), 0.0f);
        conv2_.backward(h1.data(), h, w, gh2.data(), gh1.data(), grad.data() + c2w,
                        grad.data() + c2b);
        nn::tanh_backward(h1.data(), gh1.data(), gh1.size());
        for (std::size_t p = 0; p < spatial; ++p)
            for (int c = 0; c < width; ++c) gbias[c] += gh1[p * width + c];
        conv1_.backward(z, h, w, gh1.data(), nullptr, grad.data() + c1w, grad.data() + c1b);
    }

    // embedding path: bias feeds every spatial position of every frame
    time_proj_.backward(feats.data(), gbias.data(), nullptr, grad.data() + tw, grad.data() + tb);
    if (config_.classes > 0) {
        const std::size_t row = pack_.span("cond.table").first +
                                static_cast<std::size_t>(cond.class_id) * width;
        for (int c = 0; c < width; ++c) grad[row + c] += gbias[c];
    } else {
        const float norm = static_cast<float>((cond.value - config_.value_lo) /
                                              (config_.value_hi - config_.value_lo));
        const std::size_t sc = pack_.span("cond.scale").first;
        const std::size_t cb = pack_.span("cond.bias").first;
        for (int c = 0; c < width; ++c) {
            grad[sc + c] += gbias[c] * norm;
            grad[cb + c] += gbias[c];
        }
    }
    return loss;
}

TrainStats train_denoiser(ToyDenoiser& denoiser, const std::vector<LabeledVideo>& train,
                          const std::vector<LabeledVideo>& val, const Codec& codec,
                          const NoiseSchedule& schedule, const DenoiserTrainConfig& config) {
    if (train.empty()) throw ConfigError("train_denoiser: empty training split");

    // latents are fixed by the codec; encode once
    std::vector<LatentTensor> latents(train.size());
    parallel_for(train.size(), config.threads,
                 [&](std::size_t i) { latents[i] = codec.encode(train[i].video); });
    const Task task = denoiser.config().classes > 0 ? Task::Classification : Task::Regression;
    auto cond_of = [&](const LabeledVideo& s) {
        return task == Task::Classification ? Conditioning::of_class(s.class_id)
                                            : Conditioning::of_value(s.value);
    };

    nn::Adam adam;
    adam.lr = config.lr;
    std::vector<float> params = denoiser.params().gather();
    std::vector<float> snapshot = params;
    RandomStream order(config.seed.derived("batch-order"));
    RandomStream noise(config.seed.derived("noise"));

    struct Item {
        std::size_t pick = 0;
        std::size_t t = 0;
        LatentTensor z_t, eps;
    };
    std::vector<Item> items(config.batch);
    std::vector<std::vector<float>> item_grads(config.batch);
    std::vector<double> item_losses(config.batch);

    double last_loss = 0.0;
    for (std::size_t step = 0; step < config.steps; ++step) {
        for (std::size_t i = 0; i < config.batch; ++i) {
            Item& it = items[i];
            it.pick = order.next_below(train.size());
            it.t = 1 + order.next_below(schedule.t_train);
            const LatentTensor& z0 = latents[it.pick];
            it.eps = LatentTensor(z0.frames, z0.height, z0.width, z0.channels);
            for (std::size_t j = 0; j + 1 < it.eps.values.size(); j += 2)
                noise.next_gaussian_pair(it.eps.values[j], it.eps.values[j + 1]);
            if (it.eps.values.size() % 2 != 0)
                it.eps.values.back() = noise.next_gaussian();
            it.z_t = q_sample(z0, it.t, it.eps, schedule);
        }
        parallel_for(config.batch, config.threads, [&](std::size_t i) {
            const Item& it = items[i];
            item_losses[i] = denoiser.noise_grad(it.z_t, it.eps, cond_of(train[it.pick]), it.t,
                                                 item_grads[i]);
        });
        std::vector<float> grad(denoiser.params().total, 0.0f);
        double loss = 0.0;
        for (std::size_t i = 0; i < config.batch; ++i) {
            loss += item_losses[i];
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += item_grads[i][j];
        }
        loss /= static_cast<double>(config.batch);
        const float scale = 1.0f / static_cast<float>(config.batch);
        for (float& g : grad) g *= scale;
        if (!std::isfinite(loss)) {
            denoiser.params().scatter(snapshot);
            throw TrainingError("denoiser training diverged at step " + std::to_string(step) +
                                "; parameters rolled back to last finite snapshot");
        }
        snapshot = params;
        adam.step(params, grad);
        denoiser.params().scatter(params);
        last_loss = loss;
    }

    TrainStats stats;
    stats.final_loss = last_loss;
    stats.steps = config.steps;
    if (!val.empty()) {
        RandomStream vnoise(config.seed.derived("val-noise"));
        double acc = 0.0;
        std::size_t count = 0;
        for (const LabeledVideo& s : val) {
            LatentTensor z0 = codec.encode(s.video);
            const std::size_t t = 1 + vnoise.next_below(schedule.t_train);
            LatentTensor eps(z0.frames, z0.height, z0.width, z0.channels);
            for (std::size_t j = 0; j + 1 < eps.values.size(); j += 2)
                vnoise.next_gaussian_pair(eps.values[j], eps.values[j + 1]);
            if (eps.values.size() % 2 != 0) eps.values.back() = vnoise.next_gaussian();
            LatentTensor z_t = q_sample(z0, t, eps, schedule);
            LatentTensor pred = denoiser.predict_noise(z_t, cond_of(s), t);
            double mse = 0.0;
            for (std::size_t j = 0; j < pred.values.size(); ++j) {
                const double d = static_cast<double>(pred.values[j]) -
                                 static_cast<double>(eps.values[j]);
                mse += d * d;
            }
            acc += mse / static_cast<double>(pred.values.size());
            ++count;
        }
        stats.val_metric = acc / static_cast<double>(count);
    }
    return stats;
}

void save_denoiser(const ToyDenoiser& denoiser, const std::string& path,
                   const std::string& codec_hash, const std::string& sched_hash, double val_mse) {
    TensorArchive archive;
    for (const nn::ParamRef& ref : denoiser.params().refs)
        archive.put_f32(ref.name, {ref.values->size()}, *ref.values);
    archive_save(archive, path);
    const DenoiserConfig& c = denoiser.config();
    json meta{{"component", "denoiser"},
              {"latent_channels", c.latent_channels},
              {"width", c.width},
              {"classes", c.classes},
              {"value_lo", c.value_lo},
              {"value_hi", c.value_hi},
              {"codec_hash", codec_hash},
              {"schedule_hash", sched_hash},
              {"val_noise_mse", val_mse}};
    std::ofstream out(path + ".json");
    out << meta.dump(2) << "\n";
}

ToyDenoiser load_denoiser(const std::string& path, std::string* codec_hash,
                          std::string* sched_hash) {
    std::ifstream in(path + ".json");
    if (!in) throw StateError("missing denoiser metadata '" + path + ".json'");
    json meta = json::parse(in);
    DenoiserConfig config;
    config.latent_channels = meta.at("latent_channels").get<int>();
    config.width = meta.at("width").get<int>();
    config.classes = meta.at("classes").get<std::size_t>();
    config.value_lo = meta.at("value_lo").get<double>();
    config.value_hi = meta.at("value_hi").get<double>();
    if (codec_hash) *codec_hash = meta.at("codec_hash").get<std::string>();
    if (sched_hash) *sched_hash = meta.at("schedule_hash").get<std::string>();
    ToyDenoiser denoiser;
    denoiser.rebuild(config);
    TensorArchive archive = archive_load(path);
    for (nn::ParamRef& ref : denoiser.pack_.refs) {
        const ArchiveEntry& e = archive.get(ref.name);
        if (e.f32.size() != ref.values->size())
            throw CompatError("denoiser checkpoint parameter '" + ref.name + "' has wrong size");
        *ref.values = e.f32;
    }
    return denoiser;
}

} // namespace vcx
