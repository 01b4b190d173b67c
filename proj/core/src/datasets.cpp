#include "vcx/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vcx/archive.hpp"

namespace vcx {

namespace {

using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;
constexpr float kShapeBackground = 0.08f;
constexpr float kPulseBackground = 0.10f;

void add_noise_and_clamp(VideoTensor& video, double amp, RandomStream& stream) {
    if (amp > 0.0) {
        for (float& v : video.values) {
            v += static_cast<float>(stream.next_range(-amp, amp));
            v = std::min(1.0f, std::max(0.0f, v));
        }
    } else {
        for (float& v : video.values) v = std::min(1.0f, std::max(0.0f, v));
    }
}

// Coverage of pixel [y,y+1)x[x,x+1) by the axis-aligned square [r0,r0+s)x[c0,c0+s).
double square_coverage(double y, double x, double r0, double c0, double s) {
    double oy = std::min(r0 + s, y + 1.0) - std::max(r0, y);
    double ox = std::min(c0 + s, x + 1.0) - std::max(c0, x);
    if (oy <= 0.0 || ox <= 0.0) return 0.0;
    return oy * ox;
}

// Coverage of a pixel by a disc, 8x8 supersampling on boundary pixels.
double disc_coverage(double py, double px, double cy, double cx, double r) {
    double dy = py + 0.5 - cy;
    double dx = px + 0.5 - cx;
    double d = std::sqrt(dy * dy + dx * dx);
    if (d <= r - 0.75) return 1.0;
    if (d >= r + 0.75) return 0.0;
    int inside = 0;
    for (int sy = 0; sy < 8; ++sy) {
        for (int sx = 0; sx < 8; ++sx) {
            double yy = py + (sy + 0.5) / 8.0 - cy;
            double xx = px + (sx + 0.5) / 8.0 - cx;
            if (yy * yy + xx * xx <= r * r) ++inside;
        }
    }
    return inside / 64.0;
}

void validate_shape_config(const DatasetConfig& c) {
    if (c.frames == 0 || c.height == 0 || c.width == 0) throw ConfigError("dataset: empty dimensions");
    if (c.classes < 2 || c.classes > 4)
        throw ConfigError("moving-shape: class count must be in [2,4], got " +
                          std::to_string(c.classes));
    if (c.speed <= 0.0) throw ConfigError("moving-shape: zero speed makes classes indistinguishable");
    if (c.shape_size < 1.0) throw ConfigError("moving-shape: shape size below 1 pixel");
    double travel = c.speed * static_cast<double>(c.frames - 1);
    if (travel + c.shape_size > static_cast<double>(std::min(c.height, c.width)))
        throw ConfigError("moving-shape: speed/size combination exits the frame");
}

void validate_pulse_config(const DatasetConfig& c) {
    if (c.frames == 0 || c.height == 0 || c.width == 0) throw ConfigError("dataset: empty dimensions");
    if (c.ef_min < 0.0 || c.ef_max >= 100.0 || c.ef_min > c.ef_max)
        throw ConfigError("pulse: ef range must lie inside [0,100)");
    double r_min = c.max_radius * std::sqrt(1.0 - c.ef_max / 100.0);
    if (r_min < 1.0) throw ConfigError("pulse: minimum radius below 1 pixel");
    if (2.0 * (c.max_radius + 1.0) > static_cast<double>(std::min(c.height, c.width)))
        throw ConfigError("pulse: disc does not fit in the frame");
}

void split_range(const DatasetConfig& c, const std::string& split, std::size_t& begin,
                 std::size_t& end) {
    if (split == "train") {
        begin = 0;
        end = c.train_count;
    } else if (split == "val") {
        begin = c.train_count;
        end = c.train_count + c.val_count;
    } else if (split == "test") {
        begin = c.train_count + c.val_count;
        end = c.total_count();
    } else {
        throw ConfigError("unknown split '" + split + "'");
    }
}

json config_to_json(const DatasetConfig& c) {
    return json{{"kind", c.kind == DatasetKind::MovingShape ? "moving_shape" : "pulse"},
                {"train_count", c.train_count},
                {"val_count", c.val_count},
                {"test_count", c.test_count},
                {"frames", c.frames},
                {"height", c.height},
                {"width", c.width},
                {"classes", c.classes},
                {"ef_min", c.ef_min},
                {"ef_max", c.ef_max},
                {"shape_size", c.shape_size},
                {"speed", c.speed},
                {"max_radius", c.max_radius},
                {"noise_amp", c.noise_amp},
                {"master_seed", c.seed.master_seed},
                {"stream_label", c.seed.stream_label}};
}

DatasetConfig config_from_json(const json& j) {
    DatasetConfig c;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "moving_shape")
        c.kind = DatasetKind::MovingShape;
    else if (kind == "pulse")
        c.kind = DatasetKind::Pulse;
    else
        throw ConfigError("unknown dataset kind '" + kind + "'");
    c.train_count = j.at("train_count").get<std::size_t>();
    c.val_count = j.at("val_count").get<std::size_t>();
    c.test_count = j.at("test_count").get<std::size_t>();
    c.frames = j.at("frames").get<std::size_t>();
    c.height = j.at("height").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.classes = j.at("classes").get<std::size_t>();
    c.ef_min = j.at("ef_min").get<double>();
    c.ef_max = j.at("ef_max").get<double>();
    c.shape_size = j.at("shape_size").get<double>();
    c.speed = j.at("speed").get<double>();
    c.max_radius = j.at("max_radius").get<double>();
    c.noise_amp = j.at("noise_amp").get<double>();
    c.seed.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.seed.stream_label = j.at("stream_label").get<std::string>();
    return c;
}

} // namespace

MovingShapeSample gen_moving_shape(const DatasetConfig& config, std::size_t index) {
    validate_shape_config(config);
    if (index >= config.total_count())
        throw ConfigError("sample index " + std::to_string(index) + " outside configured range");
    RandomStream stream(config.seed.derived("sample/" + std::to_string(index)));

    const int label = static_cast<int>(stream.next_below(config.classes));
    float color[3];
    for (float& c : color) c = static_cast<float>(stream.next_range(0.55, 0.95));

    // Direction deltas, pixels per frame along (row, col).
    static const double kDir[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    const double dr = kDir[label][0] * config.speed;
    const double dc = kDir[label][1] * config.speed;
    const double s = config.shape_size;
    const double travel = config.speed * static_cast<double>(config.frames - 1);

    double r_lo = dr < 0 ? travel : 0.0;
    double r_hi = static_cast<double>(config.height) - s - (dr > 0 ? travel : 0.0);
    double c_lo = dc < 0 ? travel : 0.0;
    double c_hi = static_cast<double>(config.width) - s - (dc > 0 ? travel : 0.0);
    const double r0 = stream.next_range(r_lo, r_hi);
    const double c0 = stream.next_range(c_lo, c_hi);

    MovingShapeSample sample;
    sample.label = label;
    sample.video = VideoTensor(config.frames, config.height, config.width, 3, kShapeBackground);
    VideoTensor& v = sample.video;
    for (std::size_t f = 0; f < config.frames; ++f) {
        const double rt = r0 + dr * static_cast<double>(f);
        const double ct = c0 + dc * static_cast<double>(f);
        const std::size_t y_begin = static_cast<std::size_t>(std::max(0.0, std::floor(rt)));
        const std::size_t y_end = std::min(config.height, static_cast<std::size_t>(std::ceil(rt + s)));
        const std::size_t x_begin = static_cast<std::size_t>(std::max(0.0, std::floor(ct)));
        const std::size_t x_end = std::min(config.width, static_cast<std::size_t>(std::ceil(ct + s)));
        for (std::size_t y = y_begin; y < y_end; ++y) {
            for (std::size_t x = x_begin; x < x_end; ++x) {
                const double cov = square_coverage(y, x, rt, ct, s);
                if (cov <= 0.0) continue;
                for (std::size_t c = 0; c < 3; ++c) {
                    float& px = v.at(f, y, x, c);
                    px += static_cast<float>(cov) * (color[c] - kShapeBackground);
                }
            }
        }
    }
    add_noise_and_clamp(sample.video, config.noise_amp, stream);
    return sample;
}

PulseSample gen_pulse(const DatasetConfig& config, std::size_t index) {
    validate_pulse_config(config);
    if (index >= config.total_count())
        throw ConfigError("sample index " + std::to_string(index) + " outside configured range");
    RandomStream stream(config.seed.derived("sample/" + std::to_string(index)));

    const float ef = static_cast<float>(stream.next_range(config.ef_min, config.ef_max));
    const float fg = static_cast<float>(stream.next_range(0.60, 0.95));
    const double margin = config.max_radius + 1.0;
    const double cy = stream.next_range(margin, static_cast<double>(config.height) - margin);
    const double cx = stream.next_range(margin, static_cast<double>(config.width) - margin);

    PulseSample sample;
    sample.ef = ef;
    sample.video = VideoTensor(config.frames, config.height, config.width, 1, kPulseBackground);
    VideoTensor& v = sample.video;
    for (std::size_t f = 0; f < config.frames; ++f) {
        const double phase = 1.0 - std::cos(2.0 * kPi * static_cast<double>(f) /
                                            static_cast<double>(config.frames));
        const double r = config.max_radius * std::sqrt(1.0 - (ef / 100.0) * phase / 2.0);
        const std::size_t y_begin = static_cast<std::size_t>(std::max(0.0, std::floor(cy - r - 1)));
        const std::size_t y_end = std::min(config.height, static_cast<std::size_t>(std::ceil(cy + r + 1)));
        const std::size_t x_begin = static_cast<std::size_t>(std::max(0.0, std::floor(cx - r - 1)));
        const std::size_t x_end = std::min(config.width, static_cast<std::size_t>(std::ceil(cx + r + 1)));
        for (std::size_t y = y_begin; y < y_end; ++y) {
            for (std::size_t x = x_begin; x < x_end; ++x) {
                const double cov = disc_coverage(static_cast<double>(y), static_cast<double>(x), cy, cx, r);
                if (cov <= 0.0) continue;
                v.at(f, y, x, 0) += static_cast<float>(cov) * (fg - kPulseBackground);
            }
        }
    }
    add_noise_and_clamp(sample.video, config.noise_amp, stream);
    return sample;
}

LabeledVideo gen_sample(const DatasetConfig& config, std::size_t index) {
    LabeledVideo out;
    if (config.kind == DatasetKind::MovingShape) {
        MovingShapeSample s = gen_moving_shape(config, index);
        out.video = std::move(s.video);
        out.class_id = s.label;
        out.value = static_cast<float>(s.label);
    } else {
        PulseSample s = gen_pulse(config, index);
        out.video = std::move(s.video);
        out.class_id = -1;
        out.value = s.ef;
    }
    return out;
}

std::vector<LabeledVideo> generate_split(const DatasetConfig& config, const std::string& split) {
    std::size_t begin, end;
    split_range(config, split, begin, end);
    std::vector<LabeledVideo> out;
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) out.push_back(gen_sample(config, i));
    return out;
}

void make_splits(const DatasetConfig& config, const std::string& directory) {
    if (config.kind == DatasetKind::MovingShape)
        validate_shape_config(config);
    else
        validate_pulse_config(config);
    if (config.train_count == 0) throw ConfigError("make_splits: empty training split");

    std::filesystem::create_directories(directory);
    const std::filesystem::path dir(directory);
    {
        std::ofstream out(dir / "dataset.json");
        out << config_to_json(config).dump(2) << "\n";
    }
    for (const std::string split : {"train", "val", "test"}) {
        std::size_t begin, end;
        split_range(config, split, begin, end);
        TensorArchive archive;
        json labels = json::object();
        for (std::size_t i = begin; i < end; ++i) {
            LabeledVideo s = gen_sample(config, i);
            char name[32];
            std::snprintf(name, sizeof(name), "sample_%05zu", i);
            archive.put_video(name, s.video);
            if (config.kind == DatasetKind::MovingShape)
                labels[std::to_string(i)] = s.class_id;
            else
                labels[std::to_string(i)] = s.value;
        }
        archive_save(archive, (dir / (split + ".ldvt")).string());
        json sidecar{{"split", split},
                     {"index_begin", begin},
                     {"index_end", end},
                     {"labels", labels},
                     {"config", config_to_json(config)}};
        std::ofstream out(dir / (split + ".json"));
        out << sidecar.dump(2) << "\n";
    }
}

std::vector<LabeledVideo> load_split(const std::string& directory, const std::string& split) {
    if (split != "train" && split != "val" && split != "test")
        throw ConfigError("unknown split '" + split + "'");
    const std::filesystem::path dir(directory);
    const auto sidecar_path = dir / (split + ".json");
    std::ifstream in(sidecar_path);
    if (!in) throw StateError("missing split sidecar '" + sidecar_path.string() + "'");
    json sidecar = json::parse(in);
    TensorArchive archive = archive_load((dir / (split + ".ldvt")).string());
    DatasetConfig config = config_from_json(sidecar.at("config"));

    std::vector<LabeledVideo> out;
    const std::size_t begin = sidecar.at("index_begin").get<std::size_t>();
    const std::size_t end = sidecar.at("index_end").get<std::size_t>();
    for (std::size_t i = begin; i < end; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%05zu", i);
        LabeledVideo s;
        s.video = archive.get_video(name);
        const json& label = sidecar.at("labels").at(std::to_string(i));
        if (config.kind == DatasetKind::MovingShape) {
            s.class_id = label.get<int>();
            s.value = static_cast<float>(s.class_id);
        } else {
            s.class_id = -1;
            s.value = label.get<float>();
        }
        out.push_back(std::move(s));
    }
    return out;
}

DatasetConfig load_dataset_config(const std::string& directory) {
    const auto path = std::filesystem::path(directory) / "dataset.json";
    std::ifstream in(path);
    if (!in) throw StateError("missing dataset config '" + path.string() + "'");
    return config_from_json(json::parse(in));
}

void frame_centroid(const VideoTensor& video, std::size_t frame, double& row, double& col) {
    double total = 0.0, r_acc = 0.0, c_acc = 0.0;
    for (std::size_t y = 0; y < video.height; ++y) {
        for (std::size_t x = 0; x < video.width; ++x) {
            double w = 0.0;
            for (std::size_t c = 0; c < video.channels; ++c) w += video.at(frame, y, x, c);
            total += w;
            r_acc += w * static_cast<double>(y);
            c_acc += w * static_cast<double>(x);
        }
    }
    row = total > 0.0 ? r_acc / total : 0.0;
    col = total > 0.0 ? c_acc / total : 0.0;
}

} // namespace vcx
