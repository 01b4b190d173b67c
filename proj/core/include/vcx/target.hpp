#pragma once

#include <string>
#include <vector>

#include "vcx/datasets.hpp"
#include "vcx/nn.hpp"
#include "vcx/task.hpp"
#include "vcx/tensor.hpp"
#include "vcx/train_stats.hpp"

namespace vcx {

/// The black-box model being explained. predict returns K logits for
/// classification, a single value for regression. input_pullback is the exact
/// VJP of predict's pre-loss output path.
struct TargetModel {
    virtual ~TargetModel() = default;
    virtual std::vector<float> predict(const VideoTensor& video) const = 0;
    /// Named feature layer as a 4-d (frames, h, w, c) tensor; pooled layers
    /// use h = w = 1. Throws ConfigError on an unknown layer id.
    virtual LatentTensor features(const VideoTensor& video, const std::string& layer) const = 0;
    virtual VideoTensor input_pullback(const VideoTensor& video,
                                       const std::vector<float>& output_cotangent) const = 0;
    virtual Task task() const = 0;
    virtual std::size_t num_classes() const = 0; // 0 for regression
};

struct ToyTargetConfig {
    Task task = Task::Classification;
    std::size_t classes = 4; // ignored for regression
    int channels = 3;
    int conv1_c = 16;
    int conv2_c = 32;
    int hidden = 64;
    double value_scale = 100.0; // regression head output range [0, value_scale]
};

/// Small conv network over all frames with temporal mean pooling and one
/// hidden dense layer; smooth activations throughout. The stem stacks each
/// frame with its forward difference so motion is visible per frame.
/// Feature layers: "conv1", "conv2", "frame_pool", "video_embed".
class ToyTarget final : public TargetModel {
public:
    ToyTarget() = default;
    ToyTarget(const ToyTargetConfig& config, const SeedSpec& init_seed);
    // the param pack points at member vectors, so copies must rebind it
    ToyTarget(const ToyTarget& other);
    ToyTarget(ToyTarget&& other) noexcept;
    ToyTarget& operator=(const ToyTarget& other);
    ToyTarget& operator=(ToyTarget&& other) noexcept;

    std::vector<float> predict(const VideoTensor& video) const override;
    LatentTensor features(const VideoTensor& video, const std::string& layer) const override;
    VideoTensor input_pullback(const VideoTensor& video,
                               const std::vector<float>& output_cotangent) const override;
    Task task() const override { return config_.task; }
    std::size_t num_classes() const override {
        return config_.task == Task::Classification ? config_.classes : 0;
    }

    const ToyTargetConfig& config() const { return config_; }
    nn::ParamPack& params() { return pack_; }
    const nn::ParamPack& params() const { return pack_; }

    /// Loss and flat parameter gradient for one labeled example.
    /// Classification: softmax cross-entropy on the logits. Regression:
    /// squared error on the value_scale-normalized output.
    double example_grad(const LabeledVideo& sample, std::vector<float>& grad) const;

private:
    friend ToyTarget load_target(const std::string& path);
    void rebuild(const ToyTargetConfig& config);
    void rebuild_pack();

    struct Trace; // forward activations, defined in the .cpp
    void run_forward(const VideoTensor& video, Trace& trace) const;
    int head_out() const {
        return config_.task == Task::Classification ? static_cast<int>(config_.classes) : 1;
    }

    ToyTargetConfig config_;
    nn::Conv2d conv1_, conv2_;
    nn::Dense hidden_, head_;
    nn::ParamPack pack_;
};

struct TargetTrainConfig {
    std::size_t steps = 1500;
    std::size_t batch = 8;
    double lr = 2e-3;
    std::size_t threads = 2;
    SeedSpec seed{7, "target-train"};
};

/// val_metric is accuracy (classification) or R^2 in label units (regression).
TrainStats train_target(ToyTarget& target, const std::vector<LabeledVideo>& train,
                        const std::vector<LabeledVideo>& val, const TargetTrainConfig& config);

void save_target(const ToyTarget& target, const std::string& path, double val_metric);
ToyTarget load_target(const std::string& path);

double classification_accuracy(const ToyTarget& target, const std::vector<LabeledVideo>& samples);
double regression_r2(const ToyTarget& target, const std::vector<LabeledVideo>& samples);

int argmax(const std::vector<float>& logits);

} // namespace vcx
