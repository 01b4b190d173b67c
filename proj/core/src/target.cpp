#include "vcx/target.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vcx/archive.hpp"
#include "vcx/parallel.hpp"

namespace vcx {

using nlohmann::json;

namespace {

// [x_t ; x_{t+1} - x_t] per frame; the last frame pairs with itself (zero diff).
void motion_stack(const VideoTensor& video, std::size_t frame, std::vector<float>& out) {
    const std::size_t px = video.height * video.width;
    const std::size_t c = video.channels;
    out.resize(px * 2 * c);
    const float* cur = video.values.data() + frame * px * c;
    const float* next =
        video.values.data() + (frame + 1 < video.frames ? frame + 1 : frame) * px * c;
    for (std::size_t p = 0; p < px; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            out[p * 2 * c + ch] = cur[p * c + ch];
            out[p * 2 * c + c + ch] = next[p * c + ch] - cur[p * c + ch];
        }
    }
}

} // namespace

struct ToyTarget::Trace {
    std::vector<std::vector<float>> stacks; // per frame, 2C channels
    std::vector<std::vector<float>> a1;     // per frame, conv1 output (post tanh)
    std::vector<std::vector<float>> a2;     // per frame, conv2 output (post tanh)
    std::vector<std::vector<float>> pool;   // per frame, conv2_c
    std::vector<float> embed;               // conv2_c, temporal mean
    std::vector<float> hid;                 // hidden (post tanh)
    std::vector<float> out;                 // logits or raw head scalar
    int h1 = 0, w1 = 0, h2 = 0, w2 = 0;
};

ToyTarget::ToyTarget(const ToyTargetConfig& config, const SeedSpec& init_seed) {
    rebuild(config);
    RandomStream stream(init_seed);
    conv1_.init(stream);
    conv2_.init(stream);
    hidden_.init(stream);
    head_.init(stream);
}

void ToyTarget::rebuild(const ToyTargetConfig& config) {
    config_ = config;
    conv1_ = nn::Conv2d(2 * config.channels, config.conv1_c, 3, 2, 1);
    conv2_ = nn::Conv2d(config.conv1_c, config.conv2_c, 3, 2, 1);
    hidden_ = nn::Dense(config.conv2_c, config.hidden);
    head_ = nn::Dense(config.hidden, head_out());
    rebuild_pack();
}

void ToyTarget::rebuild_pack() {
    pack_.build({{"conv1.w", &conv1_.w},
                 {"conv1.b", &conv1_.b},
                 {"conv2.w", &conv2_.w},
                 {"conv2.b", &conv2_.b},
                 {"hidden.w", &hidden_.w},
                 {"hidden.b", &hidden_.b},
                 {"head.w", &head_.w},
                 {"head.b", &head_.b}});
}

ToyTarget::ToyTarget(const ToyTarget& other)
    : config_(other.config_), conv1_(other.conv1_), conv2_(other.conv2_),
      hidden_(other.hidden_), head_(other.head_) {
    rebuild_pack();
}

ToyTarget::ToyTarget(ToyTarget&& other) noexcept
    : config_(other.config_), conv1_(std::move(other.conv1_)), conv2_(std::move(other.conv2_)),
      hidden_(std::move(other.hidden_)), head_(std::move(other.head_)) {
    rebuild_pack();
}

ToyTarget& ToyTarget::operator=(const ToyTarget& other) {
    if (this != &other) {
        config_ = other.config_;
        conv1_ = other.conv1_;
        conv2_ = other.conv2_;
        hidden_ = other.hidden_;
        head_ = other.head_;
        rebuild_pack();
    }
    return *this;
}

ToyTarget& ToyTarget::operator=(ToyTarget&& other) noexcept {
    if (this != &other) {
        config_ = other.config_;
        conv1_ = std::move(other.conv1_);
        conv2_ = std::move(other.conv2_);
        hidden_ = std::move(other.hidden_);
        head_ = std::move(other.head_);
        rebuild_pack();
    }
    return *this;
}

void ToyTarget::run_forward(const VideoTensor& video, Trace& trace) const {
    if (video.channels != static_cast<std::size_t>(config_.channels))
        throw ShapeError("target expects " + std::to_string(config_.channels) +
                         " channels, got " + std::to_string(video.channels));
    const int h = static_cast<int>(video.height);
    const int w = static_cast<int>(video.width);
    trace.h1 = conv1_.out_dim(h);
    trace.w1 = conv1_.out_dim(w);
    trace.h2 = conv2_.out_dim(trace.h1);
    trace.w2 = conv2_.out_dim(trace.w1);
    const std::size_t f_count = video.frames;
    trace.stacks.resize(f_count);
    trace.a1.resize(f_count);
    trace.a2.resize(f_count);
    trace.pool.resize(f_count);
    trace.embed.assign(static_cast<std::size_t>(config_.conv2_c), 0.0f);
    std::vector<double> embed_acc(static_cast<std::size_t>(config_.conv2_c), 0.0);

    for (std::size_t f = 0; f < f_count; ++f) {
        motion_stack(video, f, trace.stacks[f]);
        trace.a1[f].assign(static_cast<std::size_t>(trace.h1) * trace.w1 * config_.conv1_c, 0.0f);
        conv1_.forward(trace.stacks[f].data(), h, w, trace.a1[f].data());
        nn::tanh_forward(trace.a1[f].data(), trace.a1[f].size());
        trace.a2[f].assign(static_cast<std::size_t>(trace.h2) * trace.w2 * config_.conv2_c, 0.0f);
        conv2_.forward(trace.a1[f].data(), trace.h1, trace.w1, trace.a2[f].data());
        nn::tanh_forward(trace.a2[f].data(), trace.a2[f].size());
        // spatial mean pool
        trace.pool[f].assign(static_cast<std::size_t>(config_.conv2_c), 0.0f);
        const std::size_t spatial = static_cast<std::size_t>(trace.h2) * trace.w2;
        std::vector<double> pool_acc(static_cast<std::size_t>(config_.conv2_c), 0.0);
        for (std::size_t p = 0; p < spatial; ++p)
            for (int c = 0; c < config_.conv2_c; ++c)
                pool_acc[c] += trace.a2[f][p * config_.conv2_c + c];
        const double inv = 1.0 / static_cast<double>(spatial);
        for (int c = 0; c < config_.conv2_c; ++c) {
            trace.pool[f][c] = static_cast<float>(pool_acc[c] * inv);
            embed_acc[c] += pool_acc[c] * inv;
        }
    }
    const double inv_f = 1.0 / static_cast<double>(f_count);
    for (int c = 0; c < config_.conv2_c; ++c)
        trace.embed[c] = static_cast<float>(embed_acc[c] * inv_f);

    trace.hid.assign(static_cast<std::size_t>(config_.hidden), 0.0f);
    hidden_.forward(trace.embed.data(), trace.hid.data());
    nn::tanh_forward(trace.hid.data(), trace.hid.size());
    trace.out.assign(static_cast<std::size_t>(head_out()), 0.0f);
    head_.forward(trace.hid.data(), trace.out.data());
}

std::vector<float> ToyTarget::predict(const VideoTensor& video) const {
    Trace trace;
    run_forward(video, trace);
    if (config_.task == Task::Regression) {
        const float s = 1.0f / (1.0f + std::exp(-trace.out[0]));
        return {static_cast<float>(config_.value_scale) * s};
    }
    return trace.out;
}

LatentTensor ToyTarget::features(const VideoTensor& video, const std::string& layer) const {
    Trace trace;
    run_forward(video, trace);
    const std::size_t f_count = video.frames;
    if (layer == "conv1") {
        LatentTensor out(f_count, trace.h1, trace.w1, config_.conv1_c);
        const std::size_t n = trace.a1[0].size();
        for (std::size_t f = 0; f < f_count; ++f)
            std::memcpy(out.values.data() + f * n, trace.a1[f].data(), n * sizeof(float));
        return out;
    }
    if (layer == "conv2") {
        LatentTensor out(f_count, trace.h2, trace.w2, config_.conv2_c);
        const std::size_t n = trace.a2[0].size();
        for (std::size_t f = 0; f < f_count; ++f)
            std::memcpy(out.values.data() + f * n, trace.a2[f].data(), n * sizeof(float));
        return out;
    }
    if (layer == "frame_pool") {
        LatentTensor out(f_count, 1, 1, config_.conv2_c);
        for (std::size_t f = 0; f < f_count; ++f)
            std::memcpy(out.values.data() + f * config_.conv2_c, trace.pool[f].data(),
                        config_.conv2_c * sizeof(float));
        return out;
    }
    if (layer == "video_embed") {
        LatentTensor out(1, 1, 1, config_.conv2_c);
        std::memcpy(out.values.data(), trace.embed.data(), config_.conv2_c * sizeof(float));
        return out;
    }
    throw ConfigError("unknown feature layer '" + layer + "'");
}

VideoTensor ToyTarget::input_pullback(const VideoTensor& video,
                                      const std::vector<float>& output_cotangent) const {
    if (output_cotangent.size() != static_cast<std::size_t>(head_out()))
        throw ShapeError("input_pullback: cotangent size " +
                         std::to_string(output_cotangent.size()) + " != output size " +
                         std::to_string(head_out()));
    Trace trace;
    run_forward(video, trace);
    const int h = static_cast<int>(video.height);
    const int w = static_cast<int>(video.width);
    const std::size_t f_count = video.frames;
    const std::size_t spatial2 = static_cast<std::size_t>(trace.h2) * trace.w2;

    std::vector<float> g_out = output_cotangent;
    if (config_.task == Task::Regression) {
        // chain through value_scale * sigmoid(raw)
        const float s = 1.0f / (1.0f + std::exp(-trace.out[0]));
        g_out[0] *= static_cast<float>(config_.value_scale) * s * (1.0f - s);
    }

    // head and hidden (weight grads discarded)
    std::vector<float> gw_head(head_.w.size()), gb_head(head_.b.size());
    std::vector<float> g_hid(trace.hid.size(), 0.0f);
    head_.backward(trace.hid.data(), g_out.data(), g_hid.data(), gw_head.data(), gb_head.data());
    nn::tanh_backward(trace.hid.data(), g_hid.data(), g_hid.size());
    std::vector<float> gw_hidden(hidden_.w.size()), gb_hidden(hidden_.b.size());
    std::vector<float> g_embed(trace.embed.size(), 0.0f);
    hidden_.backward(trace.embed.data(), g_hid.data(), g_embed.data(), gw_hidden.data(),
                     gb_hidden.data());

    const float inv_f = 1.0f / static_cast<float>(f_count);
    const float inv_sp = 1.0f / static_cast<float>(spatial2);

    VideoTensor grad(video.frames, video.height, video.width, video.channels);
    std::vector<float> ga2(spatial2 * config_.conv2_c);
    std::vector<float> ga1, g_stack;
    std::vector<float> gw_c2(conv2_.w.size()), gb_c2(conv2_.b.size());
    std::vector<float> gw_c1(conv1_.w.size()), gb_c1(conv1_.b.size());
    const std::size_t px = video.height * video.width;
    const std::size_t c = video.channels;

    for (std::size_t f = 0; f < f_count; ++f) {
        // pooled gradient spreads uniformly over frames, then spatial positions
        for (std::size_t p = 0; p < spatial2; ++p)
            for (int ch = 0; ch < config_.conv2_c; ++ch)
                ga2[p * config_.conv2_c + ch] = g_embed[ch] * inv_f * inv_sp;
        nn::tanh_backward(trace.a2[f].data(), ga2.data(), ga2.size());
        ga1.assign(trace.a1[f].size(), 0.0f);
        conv2_.backward(trace.a1[f].data(), trace.h1, trace.w1, ga2.data(), ga1.data(),
                        gw_c2.data(), gb_c2.data());
        nn::tanh_backward(trace.a1[f].data(), ga1.data(), ga1.size());
        g_stack.assign(trace.stacks[f].size(), 0.0f);
        conv1_.backward(trace.stacks[f].data(), h, w, ga1.data(), g_stack.data(), gw_c1.data(),
                        gb_c1.data());
        // unstack: current frame gets direct + negative diff part; next frame
        // gets the positive diff part. The last frame's diff is identically zero.
        float* g_cur = grad.values.data() + f * px * c;
        const bool has_next = f + 1 < f_count;
        float* g_next = has_next ? grad.values.data() + (f + 1) * px * c : nullptr;
        for (std::size_t p = 0; p < px; ++p) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                g_cur[p * c + ch] += g_stack[p * 2 * c + ch];
                if (has_next) {
                    const float gd = g_stack[p * 2 * c + c + ch];
                    g_next[p * c + ch] += gd;
                    g_cur[p * c + ch] -= gd;
                }
            }
        }
    }
    return grad;
}

double ToyTarget::example_grad(const LabeledVideo& sample, std::vector<float>& grad) const {
    Trace trace;
    run_forward(sample.video, trace);
    grad.assign(pack_.total, 0.0f);
    const std::size_t c1w = pack_.span("conv1.w").first, c1b = pack_.span("conv1.b").first;
    const std::size_t c2w = pack_.span("conv2.w").first, c2b = pack_.span("conv2.b").first;
    const std::size_t hw = pack_.span("hidden.w").first, hb = pack_.span("hidden.b").first;
    const std::size_t ow = pack_.span("head.w").first, ob = pack_.span("head.b").first;

    double loss = 0.0;
    std::vector<float> g_out(trace.out.size(), 0.0f);
    if (config_.task == Task::Classification) {
        // stable softmax cross-entropy
        double mx = trace.out[0];
        for (float v : trace.out) mx = std::max(mx, static_cast<double>(v));
        double denom = 0.0;
        for (float v : trace.out) denom += std::exp(static_cast<double>(v) - mx);
        const int y = sample.class_id;
        loss = -(static_cast<double>(trace.out[y]) - mx - std::log(denom));
        for (std::size_t k = 0; k < trace.out.size(); ++k) {
            const double p = std::exp(static_cast<double>(trace.out[k]) - mx) / denom;
            g_out[k] = static_cast<float>(p - (static_cast<int>(k) == y ? 1.0 : 0.0));
        }
    } else {
        const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(trace.out[0])));
        const double pred = s; // normalized to [0,1]
        const double label = sample.value / config_.value_scale;
        const double d = pred - label;
        loss = d * d;
        g_out[0] = static_cast<float>(2.0 * d * s * (1.0 - s));
    }

    std::vector<float> g_hid(trace.hid.size(), 0.0f);
    head_.backward(trace.hid.data(), g_out.data(), g_hid.data(), grad.data() + ow,
                   grad.data() + ob);
    nn::tanh_backward(trace.hid.data(), g_hid.data(), g_hid.size());
    std::vector<float> g_embed(trace.embed.size(), 0.0f);
    hidden_.backward(trace.embed.data(), g_hid.data(), g_embed.data(), grad.data() + hw,
                     grad.data() + hb);

    const std::size_t f_count = sample.video.frames;
    const std::size_t spatial2 = static_cast<std::size_t>(trace.h2) * trace.w2;
    const float inv_f = 1.0f / static_cast<float>(f_count);
    const float inv_sp = 1.0f / static_cast<float>(spatial2);
    const int h = static_cast<int>(sample.video.height);
    const int w = static_cast<int>(sample.video.width);
    std::vector<float> ga2(spatial2 * config_.conv2_c), ga1;
    for (std::size_t f = 0; f < f_count; ++f) {
        for (std::size_t p = 0; p < spatial2; ++p)
            for (int ch = 0; ch < config_.conv2_c; ++ch)
                ga2[p * config_.conv2_c + ch] = g_embed[ch] * inv_f * inv_sp;
        nn::tanh_backward(trace.a2[f].data(), ga2.data(), ga2.size());
        ga1.assign(trace.a1[f].size(), 0.0f);
        conv2_.backward(trace.a1[f].data(), trace.h1, trace.w1, ga2.data(), ga1.data(),
                        grad.data() + c2w, grad.data() + c2b);
        nn::tanh_backward(trace.a1[f].data(), ga1.data(), ga1.size());
        conv1_.backward(trace.stacks[f].data(), h, w, ga1.data(), nullptr, grad.data() + c1w,
                        grad.data() + c1b);
    }
    return loss;
}

TrainStats train_target(ToyTarget& target, const std::vector<LabeledVideo>& train,
                        const std::vector<LabeledVideo>& val, const TargetTrainConfig& config) {
    if (train.empty()) throw ConfigError("train_target: empty training split");
    nn::Adam adam;
    adam.lr = config.lr;
    std::vector<float> params = target.params().gather();
    std::vector<float> snapshot = params;
    RandomStream order(config.seed.derived("batch-order"));

    std::vector<std::vector<float>> item_grads(config.batch);
    std::vector<double> item_losses(config.batch);
    std::vector<std::size_t> picks(config.batch);

    double last_loss = 0.0;
    for (std::size_t step = 0; step < config.steps; ++step) {
        for (std::size_t i = 0; i < config.batch; ++i) picks[i] = order.next_below(train.size());
        parallel_for(config.batch, config.threads, [&](std::size_t i) {
            item_losses[i] = target.example_grad(train[picks[i]], item_grads[i]);
        });
        std::vector<float> grad(target.params().total, 0.0f);
        double loss = 0.0;
        for (std::size_t i = 0; i < config.batch; ++i) {
            loss += item_losses[i];
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += item_grads[i][j];
        }
        loss /= static_cast<double>(config.batch);
        const float scale = 1.0f / static_cast<float>(config.batch);
        for (float& g : grad) g *= scale;
        if (!std::isfinite(loss)) {
            target.params().scatter(snapshot);
            throw TrainingError("target training diverged at step " + std::to_string(step) +
                                "; parameters rolled back to last finite snapshot");
        }
        snapshot = params;
        adam.step(params, grad);
        target.params().scatter(params);
        last_loss = loss;
    }

    TrainStats stats;
    stats.final_loss = last_loss;
    stats.steps = config.steps;
    if (!val.empty()) {
        stats.val_metric = target.task() == Task::Classification
                               ? classification_accuracy(target, val)
                               : regression_r2(target, val);
    }
    return stats;
}

double classification_accuracy(const ToyTarget& target, const std::vector<LabeledVideo>& samples) {
    if (samples.empty()) return 0.0;
    std::size_t hits = 0;
    for (const LabeledVideo& s : samples)
        if (argmax(target.predict(s.video)) == s.class_id) ++hits;
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

double regression_r2(const ToyTarget& target, const std::vector<LabeledVideo>& samples) {
    if (samples.size() < 2) return 0.0;
    double mean = 0.0;
    std::vector<double> preds(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        preds[i] = target.predict(samples[i].video)[0];
        mean += samples[i].value;
    }
    mean /= static_cast<double>(samples.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double d = samples[i].value - preds[i];
        ss_res += d * d;
        const double m = samples[i].value - mean;
        ss_tot += m * m;
    }
    return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
}

int argmax(const std::vector<float>& logits) {
    int best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best]) best = static_cast<int>(i);
    return best;
}

void save_target(const ToyTarget& target, const std::string& path, double val_metric) {
    TensorArchive archive;
    for (const nn::ParamRef& ref : target.params().refs)
        archive.put_f32(ref.name, {ref.values->size()}, *ref.values);
    archive_save(archive, path);
    const ToyTargetConfig& c = target.config();
    json meta{{"component", "target"},
              {"task", task_name(c.task)},
              {"classes", c.classes},
              {"channels", c.channels},
              {"conv1_c", c.conv1_c},
              {"conv2_c", c.conv2_c},
              {"hidden", c.hidden},
              {"value_scale", c.value_scale},
              {"val_metric", val_metric}};
    std::ofstream out(path + ".json");
    out << meta.dump(2) << "\n";
}

ToyTarget load_target(const std::string& path) {
    std::ifstream in(path + ".json");
    if (!in) throw StateError("missing target metadata '" + path + ".json'");
    json meta = json::parse(in);
    ToyTargetConfig config;
    config.task = task_from_name(meta.at("task").get<std::string>());
    config.classes = meta.at("classes").get<std::size_t>();
    config.channels = meta.at("channels").get<int>();
    config.conv1_c = meta.at("conv1_c").get<int>();
    config.conv2_c = meta.at("conv2_c").get<int>();
    config.hidden = meta.at("hidden").get<int>();
    config.value_scale = meta.at("value_scale").get<double>();
    ToyTarget target;
    target.rebuild(config);
    TensorArchive archive = archive_load(path);
    for (nn::ParamRef& ref : target.pack_.refs) {
        const ArchiveEntry& e = archive.get(ref.name);
        if (e.f32.size() != ref.values->size())
            throw CompatError("target checkpoint parameter '" + ref.name + "' has wrong size");
        *ref.values = e.f32;
    }
    return target;
}

} // namespace vcx
