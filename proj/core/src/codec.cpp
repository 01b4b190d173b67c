#include "vcx/codec.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vcx/archive.hpp"
#include "vcx/parallel.hpp"

namespace vcx {

using nlohmann::json;

LatentTensor IdentityCodec::encode(const VideoTensor& video) const { return as_latent(video); }

VideoTensor IdentityCodec::decode(const LatentTensor& latent) const { return as_video(latent); }

LatentTensor IdentityCodec::decode_pullback(const LatentTensor& latent,
                                            const VideoTensor& cotangent) const {
    if (latent.frames != cotangent.frames || latent.height != cotangent.height ||
        latent.width != cotangent.width || latent.channels != cotangent.channels)
        throw ShapeError("identity codec pullback: shape mismatch");
    return as_latent(cotangent);
}

ConvCodec::ConvCodec(const ConvCodecConfig& config, const SeedSpec& init_seed) {
    rebuild(config);
    RandomStream stream(init_seed);
    enc1_.init(stream);
    enc2_.init(stream);
    dec1_.init(stream);
    dec2_.init(stream);
}

void ConvCodec::rebuild(const ConvCodecConfig& config) {
    config_ = config;
    enc1_ = nn::Conv2d(config.channels, config.hidden, 4, 2, 1);
    enc2_ = nn::Conv2d(config.hidden, config.latent_channels, 4, 2, 1);
    dec1_ = nn::ConvTranspose2d(config.latent_channels, config.hidden, 4, 2, 1);
    dec2_ = nn::ConvTranspose2d(config.hidden, config.channels, 4, 2, 1);
    rebuild_pack();
}

void ConvCodec::rebuild_pack() {
    pack_.build({{"enc1.w", &enc1_.w},
                 {"enc1.b", &enc1_.b},
                 {"enc2.w", &enc2_.w},
                 {"enc2.b", &enc2_.b},
                 {"dec1.w", &dec1_.w},
                 {"dec1.b", &dec1_.b},
                 {"dec2.w", &dec2_.w},
                 {"dec2.b", &dec2_.b}});
}

ConvCodec::ConvCodec(const ConvCodec& other)
    : config_(other.config_), enc1_(other.enc1_), enc2_(other.enc2_), dec1_(other.dec1_),
      dec2_(other.dec2_) {
    rebuild_pack();
}

ConvCodec::ConvCodec(ConvCodec&& other) noexcept
    : config_(other.config_), enc1_(std::move(other.enc1_)), enc2_(std::move(other.enc2_)),
      dec1_(std::move(other.dec1_)), dec2_(std::move(other.dec2_)) {
    rebuild_pack();
}

ConvCodec& ConvCodec::operator=(const ConvCodec& other) {
    if (this != &other) {
        config_ = other.config_;
        enc1_ = other.enc1_;
        enc2_ = other.enc2_;
        dec1_ = other.dec1_;
        dec2_ = other.dec2_;
        rebuild_pack();
    }
    return *this;
}

ConvCodec& ConvCodec::operator=(ConvCodec&& other) noexcept {
    if (this != &other) {
        config_ = other.config_;
        enc1_ = std::move(other.enc1_);
        enc2_ = std::move(other.enc2_);
        dec1_ = std::move(other.dec1_);
        dec2_ = std::move(other.dec2_);
        rebuild_pack();
    }
    return *this;
}

LatentTensor ConvCodec::encode(const VideoTensor& video) const {
    if (video.channels != static_cast<std::size_t>(config_.channels))
        throw ShapeError("codec expects " + std::to_string(config_.channels) + " channels, got " +
                         std::to_string(video.channels));
    if (video.height % 4 != 0 || video.width % 4 != 0)
        throw ShapeError("codec requires height and width divisible by 4");
    const int h = static_cast<int>(video.height);
    const int w = static_cast<int>(video.width);
    const int h1 = enc1_.out_dim(h), w1 = enc1_.out_dim(w);
    const int h2 = enc2_.out_dim(h1), w2 = enc2_.out_dim(w1);
    LatentTensor out(video.frames, h2, w2, config_.latent_channels);
    std::vector<float> a1(static_cast<std::size_t>(h1) * w1 * config_.hidden);
    const std::size_t frame_in = video.height * video.width * video.channels;
    const std::size_t frame_out = out.height * out.width * out.channels;
    for (std::size_t f = 0; f < video.frames; ++f) {
        enc1_.forward(video.values.data() + f * frame_in, h, w, a1.data());
        nn::tanh_forward(a1.data(), a1.size());
        enc2_.forward(a1.data(), h1, w1, out.values.data() + f * frame_out);
    }
    return out;
}

void ConvCodec::decode_frame(const float* z, int h, int w, float* out,
                             std::vector<float>* cache_h1, std::vector<float>* cache_out) const {
    const int h1 = dec1_.out_dim(h), w1 = dec1_.out_dim(w);
    std::vector<float> local_h1;
    std::vector<float>& a1 = cache_h1 ? *cache_h1 : local_h1;
    a1.assign(static_cast<std::size_t>(h1) * w1 * config_.hidden, 0.0f);
    dec1_.forward(z, h, w, a1.data());
    nn::tanh_forward(a1.data(), a1.size());
    const int h2 = dec2_.out_dim(h1), w2 = dec2_.out_dim(w1);
    dec2_.forward(a1.data(), h1, w1, out);
    nn::sigmoid_forward(out, static_cast<std::size_t>(h2) * w2 * config_.channels);
    if (cache_out) cache_out->assign(out, out + static_cast<std::size_t>(h2) * w2 * config_.channels);
}

VideoTensor ConvCodec::decode(const LatentTensor& latent) const {
    if (latent.channels != static_cast<std::size_t>(config_.latent_channels))
        throw ShapeError("codec decode expects " + std::to_string(config_.latent_channels) +
                         " latent channels, got " + std::to_string(latent.channels));
    const int h = static_cast<int>(latent.height);
    const int w = static_cast<int>(latent.width);
    VideoTensor out(latent.frames, latent.height * 4, latent.width * 4, config_.channels);
    const std::size_t frame_in = latent.height * latent.width * latent.channels;
    const std::size_t frame_out = out.height * out.width * out.channels;
    for (std::size_t f = 0; f < latent.frames; ++f)
        decode_frame(latent.values.data() + f * frame_in, h, w,
                     out.values.data() + f * frame_out);
    return out;
}

LatentTensor ConvCodec::decode_pullback(const LatentTensor& latent,
                                        const VideoTensor& cotangent) const {
    if (latent.channels != static_cast<std::size_t>(config_.latent_channels))
        throw ShapeError("codec pullback: latent channel mismatch");
    if (cotangent.frames != latent.frames || cotangent.height != latent.height * 4 ||
        cotangent.width != latent.width * 4 ||
        cotangent.channels != static_cast<std::size_t>(config_.channels))
        throw ShapeError("codec pullback: cotangent shape mismatch");

    const int h = static_cast<int>(latent.height);
    const int w = static_cast<int>(latent.width);
    const int h1 = dec1_.out_dim(h), w1 = dec1_.out_dim(w);
    LatentTensor grad(latent.frames, latent.height, latent.width, latent.channels);
    const std::size_t frame_in = latent.height * latent.width * latent.channels;
    const std::size_t frame_out = cotangent.height * cotangent.width * cotangent.channels;

    std::vector<float> a1, y, gy(frame_out), ga1;
    // weight-gradient scratch; pullback only needs the input gradient
    std::vector<float> gw_d1(dec1_.w.size()), gb_d1(dec1_.b.size());
    std::vector<float> gw_d2(dec2_.w.size()), gb_d2(dec2_.b.size());
    for (std::size_t f = 0; f < latent.frames; ++f) {
        const float* z = latent.values.data() + f * frame_in;
        y.assign(frame_out, 0.0f);
        decode_frame(z, h, w, y.data(), &a1);
        std::memcpy(gy.data(), cotangent.values.data() + f * frame_out, frame_out * sizeof(float));
        nn::sigmoid_backward(y.data(), gy.data(), frame_out);
        ga1.assign(a1.size(), 0.0f);
        dec2_.backward(a1.data(), h1, w1, gy.data(), ga1.data(), gw_d2.data(), gb_d2.data());
        nn::tanh_backward(a1.data(), ga1.data(), a1.size());
        dec1_.backward(z, h, w, ga1.data(), grad.values.data() + f * frame_in, gw_d1.data(),
                       gb_d1.data());
    }
    return grad;
}

double ConvCodec::reconstruct_grad(const VideoTensor& video, std::vector<float>& grad) const {
    const int h = static_cast<int>(video.height);
    const int w = static_cast<int>(video.width);
    const int h1 = enc1_.out_dim(h), w1 = enc1_.out_dim(w);
    const int h2 = enc2_.out_dim(h1), w2 = enc2_.out_dim(w1);

    grad.assign(pack_.total, 0.0f);
    const std::size_t e1w = pack_.span("enc1.w").first, e1b = pack_.span("enc1.b").first;
    const std::size_t e2w = pack_.span("enc2.w").first, e2b = pack_.span("enc2.b").first;
    const std::size_t d1w = pack_.span("dec1.w").first, d1b = pack_.span("dec1.b").first;
    const std::size_t d2w = pack_.span("dec2.w").first, d2b = pack_.span("dec2.b").first;

    const std::size_t frame_px = video.height * video.width * video.channels;
    const std::size_t lat_px = static_cast<std::size_t>(h2) * w2 * config_.latent_channels;
    std::vector<float> a1(static_cast<std::size_t>(h1) * w1 * config_.hidden);
    std::vector<float> z(lat_px), d1(a1.size()), y(frame_px);
    std::vector<float> gy(frame_px), gd1(a1.size()), gz(lat_px), ga1(a1.size());

    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(video.size());
    for (std::size_t f = 0; f < video.frames; ++f) {
        const float* x = video.values.data() + f * frame_px;
        // forward
        enc1_.forward(x, h, w, a1.data());
        nn::tanh_forward(a1.data(), a1.size());
        enc2_.forward(a1.data(), h1, w1, z.data());
        dec1_.forward(z.data(), h2, w2, d1.data());
        nn::tanh_forward(d1.data(), d1.size());
        dec2_.forward(d1.data(), h1, w1, y.data());
        nn::sigmoid_forward(y.data(), y.size());
        // loss and output gradient
        for (std::size_t i = 0; i < frame_px; ++i) {
            const double d = static_cast<double>(y[i]) - static_cast<double>(x[i]);
            loss += d * d * inv_n;
            gy[i] = static_cast<float>(2.0 * d * inv_n);
        }
        // backward
        nn::sigmoid_backward(y.data(), gy.data(), y.size());
        std::fill(gd1.begin(), gd1.end(), 0.0f);
        dec2_.backward(d1.data(), h1, w1, gy.data(), gd1.data(), grad.data() + d2w,
                       grad.data() + d2b);
        nn::tanh_backward(d1.data(), gd1.data(), d1.size());
        std::fill(gz.begin(), gz.end(), 0.0f);
        dec1_.backward(z.data(), h2, w2, gd1.data(), gz.data(), grad.data() + d1w,
                       grad.data() + d1b);
        std::fill(ga1.begin(), ga1.end(), 0.0f);
        enc2_.backward(a1.data(), h1, w1, gz.data(), ga1.data(), grad.data() + e2w,
                       grad.data() + e2b);
        nn::tanh_backward(a1.data(), ga1.data(), a1.size());
        enc1_.backward(x, h, w, ga1.data(), nullptr, grad.data() + e1w, grad.data() + e1b);
    }
    return loss;
}

double ConvCodec::reconstruct_loss(const VideoTensor& video) const {
    VideoTensor rec = decode(encode(video));
    return video_mse(video, rec);
}

double video_mse(const VideoTensor& a, const VideoTensor& b) {
    if (!a.same_shape(b)) throw ShapeError("video_mse: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.values.size());
}

double video_psnr(const VideoTensor& a, const VideoTensor& b) {
    const double mse = video_mse(a, b);
    if (mse <= 0.0) return 99.0;
    return -10.0 * std::log10(mse);
}

TrainStats train_codec(ConvCodec& codec, const std::vector<LabeledVideo>& train,
                       const std::vector<LabeledVideo>& val, const CodecTrainConfig& config) {
    if (train.empty()) throw ConfigError("train_codec: empty training split");
    nn::Adam adam;
    adam.lr = config.lr;
    std::vector<float> params = codec.params().gather();
    std::vector<float> snapshot = params;
    RandomStream order(config.seed.derived("batch-order"));

    std::vector<std::vector<float>> item_grads(config.batch);
    std::vector<double> item_losses(config.batch);
    std::vector<std::size_t> picks(config.batch);

    double last_loss = 0.0;
    for (std::size_t step = 0; step < config.steps; ++step) {
        for (std::size_t i = 0; i < config.batch; ++i) picks[i] = order.next_below(train.size());
        parallel_for(config.batch, config.threads, [&](std::size_t i) {
            item_losses[i] = codec.reconstruct_grad(train[picks[i]].video, item_grads[i]);
        });
        std::vector<float> grad(codec.params().total, 0.0f);
        double loss = 0.0;
        for (std::size_t i = 0; i < config.batch; ++i) {
            loss += item_losses[i];
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += item_grads[i][j];
        }
        loss /= static_cast<double>(config.batch);
        const float scale = 1.0f / static_cast<float>(config.batch);
        for (float& g : grad) g *= scale;
        if (!std::isfinite(loss)) {
            codec.params().scatter(snapshot);
            throw TrainingError("codec training diverged at step " + std::to_string(step) +
                                "; parameters rolled back to last finite snapshot");
        }
        snapshot = params;
        adam.step(params, grad);
        codec.params().scatter(params);
        last_loss = loss;
    }

    TrainStats stats;
    stats.final_loss = last_loss;
    stats.steps = config.steps;
    if (!val.empty()) {
        double acc = 0.0;
        for (const LabeledVideo& s : val) acc += video_psnr(s.video, codec.decode(codec.encode(s.video)));
        stats.val_metric = acc / static_cast<double>(val.size());
    }
    return stats;
}

void save_codec(const ConvCodec& codec, const std::string& path, double val_psnr) {
    TensorArchive archive;
    for (const nn::ParamRef& ref : codec.params().refs)
        archive.put_f32(ref.name, {ref.values->size()}, *ref.values);
    archive_save(archive, path);
    json meta{{"component", "codec"},
              {"channels", codec.config().channels},
              {"hidden", codec.config().hidden},
              {"latent_channels", codec.config().latent_channels},
              {"val_psnr", val_psnr}};
    std::ofstream out(path + ".json");
    out << meta.dump(2) << "\n";
}

ConvCodec load_codec(const std::string& path) {
    std::ifstream in(path + ".json");
    if (!in) throw StateError("missing codec metadata '" + path + ".json'");
    json meta = json::parse(in);
    ConvCodecConfig config;
    config.channels = meta.at("channels").get<int>();
    config.hidden = meta.at("hidden").get<int>();
    config.latent_channels = meta.at("latent_channels").get<int>();
    ConvCodec codec;
    codec.rebuild(config);
    TensorArchive archive = archive_load(path);
    for (nn::ParamRef& ref : codec.pack_.refs) {
        const ArchiveEntry& e = archive.get(ref.name);
        if (e.f32.size() != ref.values->size())
            throw CompatError("codec checkpoint parameter '" + ref.name + "' has wrong size");
        *ref.values = e.f32;
    }
    return codec;
}

} // namespace vcx
