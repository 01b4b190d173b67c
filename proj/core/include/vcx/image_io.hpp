#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcx/tensor.hpp"

namespace vcx {

/// Quantize [0,1] to a byte with round-half-up: round(255*v).
std::uint8_t quantize_pixel(float v);

/// Write an 8-bit PNG. channels must be 1 (gray) or 3 (RGB); data is row-major
/// height x width x channels.
void write_png(const std::string& path, std::size_t width, std::size_t height,
               std::size_t channels, const std::vector<std::uint8_t>& data);

/// One lossless PNG per frame, named frame_000.png, frame_001.png, ...
/// Throws RangeError if any value is outside [0,1].
void export_frames(const VideoTensor& video, const std::string& directory);

/// Grid of videos: one row per video, one column per frame, 1px separators.
/// Used by the report command for qualitative panels. All rows must share
/// frame geometry; channel counts of 1 and 3 may be mixed (gray is expanded).
void write_frame_grid(const std::string& path, const std::vector<const VideoTensor*>& rows);

} // namespace vcx
