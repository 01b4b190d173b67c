#include "vcx/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>

namespace vcx {

std::uint8_t quantize_pixel(float v) {
    return static_cast<std::uint8_t>(std::floor(255.0f * v + 0.5f));
}

void write_png(const std::string& path, std::size_t width, std::size_t height,
               std::size_t channels, const std::vector<std::uint8_t>& data) {
    if (channels != 1 && channels != 3)
        throw ShapeError("write_png: channels must be 1 or 3, got " + std::to_string(channels));
    if (data.size() != width * height * channels)
        throw ShapeError("write_png: data size does not match dimensions");

    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw Error("cannot open '" + path + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng error while writing '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> row_ptrs(height);
    for (std::size_t y = 0; y < height; ++y)
        row_ptrs[y] = const_cast<png_bytep>(data.data() + y * width * channels);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void export_frames(const VideoTensor& video, const std::string& directory) {
    validate(video);
    if (video.channels != 1 && video.channels != 3)
        throw ShapeError("export_frames: channel count must be 1 or 3");
    std::filesystem::create_directories(directory);
    const std::size_t frame_px = video.height * video.width * video.channels;
    for (std::size_t f = 0; f < video.frames; ++f) {
        std::vector<std::uint8_t> bytes(frame_px);
        const float* src = video.values.data() + f * frame_px;
        for (std::size_t i = 0; i < frame_px; ++i) bytes[i] = quantize_pixel(src[i]);
        std::ostringstream name;
        name << "frame_" << std::setw(3) << std::setfill('0') << f << ".png";
        write_png((std::filesystem::path(directory) / name.str()).string(), video.width,
                  video.height, video.channels, bytes);
    }
}

void write_frame_grid(const std::string& path, const std::vector<const VideoTensor*>& rows) {
    if (rows.empty()) throw ShapeError("write_frame_grid: no rows");
    const VideoTensor& first = *rows[0];
    for (const VideoTensor* v : rows) {
        if (v->frames != first.frames || v->height != first.height || v->width != first.width)
            throw ShapeError("write_frame_grid: rows disagree on frame geometry");
    }
    const std::size_t sep = 1;
    const std::size_t out_w = first.frames * first.width + (first.frames - 1) * sep;
    const std::size_t out_h = rows.size() * first.height + (rows.size() - 1) * sep;
    std::vector<std::uint8_t> canvas(out_w * out_h * 3, 32);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const VideoTensor& v = *rows[r];
        const std::size_t y0 = r * (first.height + sep);
        for (std::size_t f = 0; f < v.frames; ++f) {
            const std::size_t x0 = f * (first.width + sep);
            for (std::size_t y = 0; y < v.height; ++y) {
                for (std::size_t x = 0; x < v.width; ++x) {
                    std::uint8_t rgb[3];
                    if (v.channels >= 3) {
                        for (int c = 0; c < 3; ++c)
                            rgb[c] = quantize_pixel(v.at(f, y, x, static_cast<std::size_t>(c)));
                    } else {
                        std::uint8_t g = quantize_pixel(v.at(f, y, x, 0));
                        rgb[0] = rgb[1] = rgb[2] = g;
                    }
                    std::uint8_t* dst = canvas.data() + ((y0 + y) * out_w + (x0 + x)) * 3;
                    dst[0] = rgb[0];
                    dst[1] = rgb[1];
                    dst[2] = rgb[2];
                }
            }
        }
    }
    write_png(path, out_w, out_h, 3, canvas);
}

} // namespace vcx
