#include "vcx/tensor.hpp"

#include <cmath>
#include <sstream>

namespace vcx {

bool all_finite(const std::vector<float>& values) {
    for (float v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string shape_string(std::size_t f, std::size_t h, std::size_t w, std::size_t c) {
    std::ostringstream os;
    os << f << "x" << h << "x" << w << "x" << c;
    return os.str();
}

void validate(const VideoTensor& video) {
    if (video.frames == 0 || video.height == 0 || video.width == 0 || video.channels == 0)
        throw ShapeError("video tensor has an empty dimension: " +
                         shape_string(video.frames, video.height, video.width, video.channels));
    if (video.values.size() != video.size())
        throw ShapeError("video element count " + std::to_string(video.values.size()) +
                         " does not match shape " +
                         shape_string(video.frames, video.height, video.width, video.channels));
    for (float v : video.values) {
        if (!std::isfinite(v)) throw RangeError("video contains a non-finite value");
        if (v < 0.0f || v > 1.0f)
            throw RangeError("video value " + std::to_string(v) + " outside [0,1]");
    }
}

void validate(const LatentTensor& latent) {
    if (latent.frames == 0 || latent.height == 0 || latent.width == 0 || latent.channels == 0)
        throw ShapeError("latent tensor has an empty dimension: " +
                         shape_string(latent.frames, latent.height, latent.width, latent.channels));
    if (latent.values.size() != latent.size())
        throw ShapeError("latent element count " + std::to_string(latent.values.size()) +
                         " does not match shape " +
                         shape_string(latent.frames, latent.height, latent.width, latent.channels));
    if (!all_finite(latent.values)) throw NumericError("latent contains a non-finite value");
}

LatentTensor as_latent(const VideoTensor& video) {
    LatentTensor out;
    out.frames = video.frames;
    out.height = video.height;
    out.width = video.width;
    out.channels = video.channels;
    out.values = video.values;
    return out;
}

VideoTensor as_video(const LatentTensor& latent) {
    VideoTensor out;
    out.frames = latent.frames;
    out.height = latent.height;
    out.width = latent.width;
    out.channels = latent.channels;
    out.values = latent.values;
    return out;
}

} // namespace vcx
