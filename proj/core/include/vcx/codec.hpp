#pragma once

#include <string>
#include <vector>

#include "vcx/datasets.hpp"
#include "vcx/nn.hpp"
#include "vcx/tensor.hpp"
#include "vcx/train_stats.hpp"

namespace vcx {

/// Latent codec interface: encoder E, decoder D, and the exact vector-Jacobian
/// product of D that guidance differentiates through.
struct Codec {
    virtual ~Codec() = default;
    virtual LatentTensor encode(const VideoTensor& video) const = 0;
    virtual VideoTensor decode(const LatentTensor& latent) const = 0;
    /// Exact VJP of decode at `latent` against a video-shaped cotangent.
    virtual LatentTensor decode_pullback(const LatentTensor& latent,
                                         const VideoTensor& cotangent) const = 0;
    virtual std::size_t spatial_factor() const = 0;
    virtual std::size_t latent_channels(std::size_t video_channels) const = 0;
};

/// Test fixture: encode is a reshape, decode its inverse; round trip is bitwise.
struct IdentityCodec final : Codec {
    LatentTensor encode(const VideoTensor& video) const override;
    VideoTensor decode(const LatentTensor& latent) const override;
    LatentTensor decode_pullback(const LatentTensor& latent,
                                 const VideoTensor& cotangent) const override;
    std::size_t spatial_factor() const override { return 1; }
    std::size_t latent_channels(std::size_t video_channels) const override {
        return video_channels;
    }
};

struct ConvCodecConfig {
    int channels = 3;        // video channel count this codec is built for
    int hidden = 32;         // encoder/decoder hidden width
    int latent_channels = 4; // c_lat
};

/// Per-frame convolutional autoencoder, 4x spatial downsampling.
/// Encoder: conv k4s2 (C->hidden, tanh), conv k4s2 (hidden->c_lat, linear).
/// Decoder mirrors with transposed convs; output squashed to [0,1] by a sigmoid.
class ConvCodec final : public Codec {
public:
    ConvCodec() = default;
    ConvCodec(const ConvCodecConfig& config, const SeedSpec& init_seed);
    // the param pack points at member vectors, so copies must rebind it
    ConvCodec(const ConvCodec& other);
    ConvCodec(ConvCodec&& other) noexcept;
    ConvCodec& operator=(const ConvCodec& other);
    ConvCodec& operator=(ConvCodec&& other) noexcept;

    LatentTensor encode(const VideoTensor& video) const override;
    VideoTensor decode(const LatentTensor& latent) const override;
    LatentTensor decode_pullback(const LatentTensor& latent,
                                 const VideoTensor& cotangent) const override;
    std::size_t spatial_factor() const override { return 4; }
    std::size_t latent_channels(std::size_t) const override {
        return static_cast<std::size_t>(config_.latent_channels);
    }

    const ConvCodecConfig& config() const { return config_; }
    nn::ParamPack& params() { return pack_; }
    const nn::ParamPack& params() const { return pack_; }

    /// Reconstruction loss and flat parameter gradient for one video.
    double reconstruct_grad(const VideoTensor& video, std::vector<float>& grad) const;
    double reconstruct_loss(const VideoTensor& video) const;

private:
    friend ConvCodec load_codec(const std::string& path);
    void rebuild(const ConvCodecConfig& config);
    void rebuild_pack();
    void decode_frame(const float* z, int h, int w, float* out,
                      std::vector<float>* cache_h1 = nullptr,
                      std::vector<float>* cache_out = nullptr) const;

    ConvCodecConfig config_;
    nn::Conv2d enc1_, enc2_;
    nn::ConvTranspose2d dec1_, dec2_;
    nn::ParamPack pack_;
};

struct CodecTrainConfig {
    std::size_t steps = 1200;
    std::size_t batch = 8;
    double lr = 2e-3;
    std::size_t threads = 2;
    SeedSpec seed{7, "codec-train"};
};

/// Minimizes mean squared reconstruction error with Adam. Deterministic given
/// the seed. On divergence the codec is rolled back to the last finite
/// snapshot and TrainingError is thrown.
TrainStats train_codec(ConvCodec& codec, const std::vector<LabeledVideo>& train,
                       const std::vector<LabeledVideo>& val, const CodecTrainConfig& config);

/// Checkpoint: weights in `path` (.ldvt) plus a JSON sidecar `path + ".json"`.
void save_codec(const ConvCodec& codec, const std::string& path, double val_psnr);
ConvCodec load_codec(const std::string& path);

double video_mse(const VideoTensor& a, const VideoTensor& b);
double video_psnr(const VideoTensor& a, const VideoTensor& b);

} // namespace vcx
