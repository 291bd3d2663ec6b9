#pragma once

#include <filesystem>
#include <utility>

#include "egoexo/image.hpp"
#include "egoexo/scene_backend.hpp"

namespace egoexo {

// PNG codecs. Output bytes depend only on pixel data (fixed compression
// settings, no timestamps). Readers throw io-error on open/decoding failure
// and parse-error when the stored format differs from the requested one.
void write_png_rgb8(const std::filesystem::path& path, const ImageRgb8& image);
void write_png_gray8(const std::filesystem::path& path, const Mask& image);
void write_png_gray16(const std::filesystem::path& path, const ImageU16& image);
void write_png_rgb16(const std::filesystem::path& path, const ImageU16& image);

ImageRgb8 read_png_rgb8(const std::filesystem::path& path);
Mask read_png_gray8(const std::filesystem::path& path);
ImageU16 read_png_gray16(const std::filesystem::path& path);
ImageU16 read_png_rgb16(const std::filesystem::path& path);

// Reads only the IHDR chunk.
struct PngInfo {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int channels = 0;
};
PngInfo read_png_info(const std::filesystem::path& path);

// Binary little-endian PLY with float32 x, y, z, intensity.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_ply(const std::filesystem::path& path);

// Canonical depth encoding: 16-bit millimeters, 0 = invalid, saturating at
// 65535 (65.535 m).
ImageU16 encode_depth_mm(const ImageF64& depth_m);
ImageF64 decode_depth_mm(const ImageU16& depth_mm);

// Flow encoding: channel value = flow_px * 64 + 32768 for du and dv, third
// channel 1 where valid.
ImageU16 encode_flow(const ImageF64& flow);
ImageF64 decode_flow(const ImageU16& encoded);

}  // namespace egoexo
