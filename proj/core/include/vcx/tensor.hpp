#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vcx/errors.hpp"

namespace vcx {

/// Pixel-space video: row-major (frames, height, width, channels), values in [0,1].
struct VideoTensor {
    std::size_t frames = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<float> values;

    VideoTensor() = default;
    VideoTensor(std::size_t f, std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
        : frames(f), height(h), width(w), channels(c), values(f * h * w * c, fill) {}

    std::size_t size() const { return frames * height * width * channels; }

    std::size_t index(std::size_t f, std::size_t h, std::size_t w, std::size_t c) const {
        return ((f * height + h) * width + w) * channels + c;
    }
    float& at(std::size_t f, std::size_t h, std::size_t w, std::size_t c) {
        return values[index(f, h, w, c)];
    }
    float at(std::size_t f, std::size_t h, std::size_t w, std::size_t c) const {
        return values[index(f, h, w, c)];
    }

    bool same_shape(const VideoTensor& o) const {
        return frames == o.frames && height == o.height && width == o.width && channels == o.channels;
    }
};

/// Latent-space tensor: row-major (frames, h, w, c_lat), unbounded finite values.
struct LatentTensor {
    std::size_t frames = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<float> values;

    LatentTensor() = default;
    LatentTensor(std::size_t f, std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
        : frames(f), height(h), width(w), channels(c), values(f * h * w * c, fill) {}

    std::size_t size() const { return frames * height * width * channels; }

    std::size_t index(std::size_t f, std::size_t h, std::size_t w, std::size_t c) const {
        return ((f * height + h) * width + w) * channels + c;
    }
    float& at(std::size_t f, std::size_t h, std::size_t w, std::size_t c) {
        return values[index(f, h, w, c)];
    }
    float at(std::size_t f, std::size_t h, std::size_t w, std::size_t c) const {
        return values[index(f, h, w, c)];
    }

    bool same_shape(const LatentTensor& o) const {
        return frames == o.frames && height == o.height && width == o.width && channels == o.channels;
    }
};

/// Throws ShapeError on empty dims, RangeError on NaN/Inf or values outside [0,1].
void validate(const VideoTensor& video);

/// Throws ShapeError on empty dims, NumericError on NaN/Inf.
void validate(const LatentTensor& latent);

/// Reinterpret a video as a latent with identical layout (h=H, w=W, c_lat=C).
LatentTensor as_latent(const VideoTensor& video);

/// Reinterpret a latent as a video with identical layout. Values are copied verbatim.
VideoTensor as_video(const LatentTensor& latent);

bool all_finite(const std::vector<float>& values);

std::string shape_string(std::size_t f, std::size_t h, std::size_t w, std::size_t c);

} // namespace vcx
