#include "egoexo/image_io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "egoexo/error.hpp"

namespace egoexo {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngErrorState {
  char message[256] = {0};
};

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
  if (state) std::snprintf(state->message, sizeof state->message, "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

// Rows are handed over as raw bytes in PNG order (big-endian samples are
// produced by png_set_swap on write).
bool png_write_raw(std::FILE* file, int width, int height, int bit_depth, int color_type,
                   const png_bytep* rows, PngErrorState* state) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, state, png_error_handler, png_warning_handler);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_write_image(png, const_cast<png_bytepp>(rows));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

template <typename T>
void write_png(const std::filesystem::path& path, const Image<T>& image, int bit_depth, int color_type) {
  if (image.empty()) fail(ErrorCode::kInvalidArgument, "cannot write empty image " + path.string());
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  const std::size_t row_elems = static_cast<std::size_t>(image.width()) * image.channels();
  std::vector<png_bytep> rows(image.height());
  auto* base = const_cast<T*>(image.data().data());
  for (int y = 0; y < image.height(); ++y) rows[y] = reinterpret_cast<png_bytep>(base + y * row_elems);
  PngErrorState state;
  if (!png_write_raw(file.get(), image.width(), image.height(), bit_depth, color_type, rows.data(), &state)) {
    fail(ErrorCode::kIo, "png write failed for " + path.string() + ": " + state.message);
  }
  if (std::fflush(file.get()) != 0) fail(ErrorCode::kIo, "png write failed for " + path.string());
}

struct RawPng {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int channels = 0;
  std::vector<unsigned char> bytes;
};

bool png_read_header(std::FILE* file, png_structp png, png_infop info, RawPng& out) {
  png_init_io(png, file);
  png_read_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.channels = png_get_channels(png, info);
  return true;
}

bool png_read_raw(std::FILE* file, RawPng& out, bool header_only, PngErrorState* state) {
  // Declared before setjmp so a longjmp never skips its destructor.
  std::vector<png_bytep> rows;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, state, png_error_handler, png_warning_handler);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_read_header(file, png, info, out);
  if (!header_only) {
    if (out.bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
    png_read_update_info(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    out.bytes.assign(stride * out.height, 0);
    rows.resize(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

RawPng read_raw(const std::filesystem::path& path, bool header_only) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) fail(ErrorCode::kIo, "cannot open " + path.string());
  unsigned char signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    fail(ErrorCode::kParse, path.string() + " is not a PNG file");
  }
  std::rewind(file.get());
  RawPng raw;
  PngErrorState state;
  if (!png_read_raw(file.get(), raw, header_only, &state)) {
    fail(ErrorCode::kIo, "png read failed for " + path.string() + ": " + state.message);
  }
  return raw;
}

template <typename T>
Image<T> read_png_as(const std::filesystem::path& path, int bit_depth, int channels) {
  RawPng raw = read_raw(path, false);
  if (raw.bit_depth != bit_depth || raw.channels != channels) {
    std::ostringstream msg;
    msg << path.string() << ": expected " << channels << " channel(s) at " << bit_depth << " bit, found "
        << raw.channels << " at " << raw.bit_depth;
    fail(ErrorCode::kParse, msg.str());
  }
  Image<T> image(raw.width, raw.height, channels);
  std::memcpy(image.data().data(), raw.bytes.data(), image.data().size_bytes());
  return image;
}

void require_channels(const char* what, int channels, int expected) {
  if (channels != expected) {
    fail(ErrorCode::kInvalidArgument, std::string(what) + " expects " + std::to_string(expected) + " channel(s)");
  }
}

}  // namespace

void write_png_rgb8(const std::filesystem::path& path, const ImageRgb8& image) {
  require_channels("write_png_rgb8", image.channels(), 3);
  write_png(path, image, 8, PNG_COLOR_TYPE_RGB);
}

void write_png_gray8(const std::filesystem::path& path, const Image<std::uint8_t>& image) {
  require_channels("write_png_gray8", image.channels(), 1);
  write_png(path, image, 8, PNG_COLOR_TYPE_GRAY);
}

void write_png_gray16(const std::filesystem::path& path, const ImageU16& image) {
  require_channels("write_png_gray16", image.channels(), 1);
  write_png(path, image, 16, PNG_COLOR_TYPE_GRAY);
}

void write_png_rgb16(const std::filesystem::path& path, const ImageU16& image) {
  require_channels("write_png_rgb16", image.channels(), 3);
  write_png(path, image, 16, PNG_COLOR_TYPE_RGB);
}

ImageRgb8 read_png_rgb8(const std::filesystem::path& path) { return read_png_as<std::uint8_t>(path, 8, 3); }
Mask read_png_gray8(const std::filesystem::path& path) { return read_png_as<std::uint8_t>(path, 8, 1); }
ImageU16 read_png_gray16(const std::filesystem::path& path) { return read_png_as<std::uint16_t>(path, 16, 1); }
ImageU16 read_png_rgb16(const std::filesystem::path& path) { return read_png_as<std::uint16_t>(path, 16, 3); }

PngInfo read_png_info(const std::filesystem::path& path) {
  const RawPng raw = read_raw(path, true);
  return {raw.width, raw.height, raw.bit_depth, raw.channels};
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nproperty float intensity\nend_header\n";
  std::vector<float> buffer;
  buffer.reserve(cloud.size() * 4);
  for (const auto& p : cloud.points) {
    for (int k = 0; k < 4; ++k) buffer.push_back(static_cast<float>(p[k]));
  }
  static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * sizeof(float)));
  if (!out) fail(ErrorCode::kIo, "ply write failed for " + path.string());
}

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t count = 0;
  std::vector<std::string> properties;
  bool binary_le = false;
  std::getline(in, line);
  if (line != "ply") fail(ErrorCode::kParse, path.string() + " is not a PLY file");
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream words(line);
    std::string key;
    words >> key;
    if (key == "format") {
      std::string fmt;
      words >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (key == "element") {
      std::string name;
      words >> name >> count;
    } else if (key == "property") {
      std::string type, name;
      words >> type >> name;
      if (type != "float") fail(ErrorCode::kParse, path.string() + ": unsupported property type " + type);
      properties.push_back(name);
    }
  }
  if (!binary_le || properties != std::vector<std::string>{"x", "y", "z", "intensity"}) {
    fail(ErrorCode::kParse, path.string() + ": expected binary little-endian x, y, z, intensity");
  }
  std::vector<float> buffer(count * 4);
  in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(buffer.size() * sizeof(float))) {
    fail(ErrorCode::kParse, path.string() + ": truncated vertex data");
  }
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    cloud.points.emplace_back(buffer[4 * i], buffer[4 * i + 1], buffer[4 * i + 2], buffer[4 * i + 3]);
  }
  return cloud;
}

ImageU16 encode_depth_mm(const ImageF64& depth_m) {
  ImageU16 out(depth_m.width(), depth_m.height(), 1, 0);
  for (std::size_t i = 0; i < depth_m.data().size(); ++i) {
    const double d = depth_m.data()[i];
    if (!(d > 0.0)) continue;
    const double mm = std::round(d * 1000.0);
    out.data()[i] = static_cast<std::uint16_t>(std::min(mm, 65535.0));
  }
  return out;
}

ImageF64 decode_depth_mm(const ImageU16& depth_mm) {
  ImageF64 out(depth_mm.width(), depth_mm.height(), 1, 0.0);
  for (std::size_t i = 0; i < depth_mm.data().size(); ++i) out.data()[i] = depth_mm.data()[i] / 1000.0;
  return out;
}

ImageU16 encode_flow(const ImageF64& flow) {
  require_channels("encode_flow", flow.channels(), 3);
  ImageU16 out(flow.width(), flow.height(), 3, 0);
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      if (flow.at(x, y, 2) == 0.0) continue;
      for (int c = 0; c < 2; ++c) {
        const double v = std::round(flow.at(x, y, c) * 64.0 + 32768.0);
        out.at(x, y, c) = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0));
      }
      out.at(x, y, 2) = 1;
    }
  }
  return out;
}

ImageF64 decode_flow(const ImageU16& encoded) {
  require_channels("decode_flow", encoded.channels(), 3);
  ImageF64 out(encoded.width(), encoded.height(), 3, 0.0);
  for (int y = 0; y < encoded.height(); ++y) {
    for (int x = 0; x < encoded.width(); ++x) {
      if (encoded.at(x, y, 2) == 0) continue;
      out.at(x, y, 0) = (encoded.at(x, y, 0) - 32768.0) / 64.0;
      out.at(x, y, 1) = (encoded.at(x, y, 1) - 32768.0) / 64.0;
      out.at(x, y, 2) = 1.0;
    }
  }
  return out;
}

}  // namespace egoexo
