#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcx/rng.hpp"
#include "vcx/tensor.hpp"

namespace vcx {

enum class DatasetKind { MovingShape, Pulse };

/// Everything needed to regenerate a dataset bit-identically.
struct DatasetConfig {
    DatasetKind kind = DatasetKind::MovingShape;
    std::size_t train_count = 256;
    std::size_t val_count = 64;
    std::size_t test_count = 64;
    std::size_t frames = 16;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t classes = 4;    // moving-shape motion directions
    double ef_min = 10.0;       // pulse label range
    double ef_max = 90.0;
    double shape_size = 8.0;    // square side, pixels
    double speed = 1.0;         // pixels per frame
    double max_radius = 10.0;   // pulse disc at full dilation
    double noise_amp = 0.02;    // symmetric uniform background noise
    SeedSpec seed{1234, "dataset"};

    std::size_t channels() const { return kind == DatasetKind::MovingShape ? 3 : 1; }
    std::size_t total_count() const { return train_count + val_count + test_count; }
};

/// Classification sample: a square translating at constant speed; the label is
/// the motion direction (0=up, 1=down, 2=left, 3=right).
struct MovingShapeSample {
    VideoTensor video;
    int label = 0;
};

/// Regression sample: a pulsating disc through one full cycle; ef is the toy
/// ejection fraction 100*(A_max - A_min)/A_max realized by the radius law.
struct PulseSample {
    VideoTensor video;
    float ef = 0.0f;
};

/// Uniform record for training and evaluation loops.
struct LabeledVideo {
    VideoTensor video;
    int class_id = -1;
    float value = 0.0f;
};

MovingShapeSample gen_moving_shape(const DatasetConfig& config, std::size_t index);
PulseSample gen_pulse(const DatasetConfig& config, std::size_t index);

/// Sample `index` of either kind, as a LabeledVideo.
LabeledVideo gen_sample(const DatasetConfig& config, std::size_t index);

/// Split materialized in memory. Split index ranges are disjoint:
/// train [0,n_t), val [n_t, n_t+n_v), test [n_t+n_v, total).
std::vector<LabeledVideo> generate_split(const DatasetConfig& config, const std::string& split);

/// Writes {train,val,test}.ldvt archives plus JSON label sidecars and a
/// dataset.json config echo into `directory`.
void make_splits(const DatasetConfig& config, const std::string& directory);

/// Reads one split written by make_splits. Throws ConfigError on a bad split
/// name, StateError if files are missing.
std::vector<LabeledVideo> load_split(const std::string& directory, const std::string& split);

/// Config echo parsed back from dataset.json.
DatasetConfig load_dataset_config(const std::string& directory);

/// Intensity-weighted centroid row/col of one frame (noise-free heuristics).
void frame_centroid(const VideoTensor& video, std::size_t frame, double& row, double& col);

} // namespace vcx
