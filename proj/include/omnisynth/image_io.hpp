#pragma once

// PNG (libpng simplified API), single-channel float EXR (OpenEXR) and the
// raw float32 fallback container.

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include <OpenEXR/ImfChannelList.h>
#include <OpenEXR/ImfFrameBuffer.h>
#include <OpenEXR/ImfHeader.h>
#include <OpenEXR/ImfInputFile.h>
#include <OpenEXR/ImfOutputFile.h>

#include "omnisynth/image.hpp"

namespace omnisynth {

class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Decoded 8-bit PNG, either grayscale (channels == 1) or color.
struct PngImage {
  int channels = 3;
  ColorImage color;  // always populated; gray is replicated
  MaskImage gray;    // populated when channels == 1
};

namespace detail {

struct PngGuard {
  png_image* image;
  ~PngGuard() { png_image_free(image); }
};

}  // namespace detail

inline void write_png(const std::filesystem::path& path, const ColorImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  static_assert(sizeof(Rgb8) == 3);
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels().data(), 0, nullptr)) {
    throw IoError(path, std::string("PNG write failed: ") + image.message);
  }
}

/// 8-bit grayscale PNG of raw byte values.
inline void write_png_gray(const std::filesystem::path& path, const MaskImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels().data(), 0, nullptr)) {
    throw IoError(path, std::string("PNG write failed: ") + image.message);
  }
}

inline PngImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError(path, std::string("PNG decode failed: ") + image.message);
  }
  detail::PngGuard guard{&image};
  PngImage out;
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  out.channels = color ? 3 : 1;
  const int w = static_cast<int>(image.width), h = static_cast<int>(image.height);
  if (color) {
    image.format = PNG_FORMAT_RGB;
    out.color = ColorImage(w, h);
    if (!png_image_finish_read(&image, nullptr, out.color.pixels().data(), 0, nullptr)) {
      throw IoError(path, std::string("PNG decode failed: ") + image.message);
    }
  } else {
    image.format = PNG_FORMAT_GRAY;
    out.gray = MaskImage(w, h);
    if (!png_image_finish_read(&image, nullptr, out.gray.pixels().data(), 0, nullptr)) {
      throw IoError(path, std::string("PNG decode failed: ") + image.message);
    }
    out.color = ColorImage(w, h);
    for (std::size_t i = 0; i < out.gray.size(); ++i) {
      const auto g = out.gray.pixels()[i];
      out.color.pixels()[i] = {g, g, g};
    }
  }
  return out;
}

inline ColorImage read_png_rgb(const std::filesystem::path& path) { return read_png(path).color; }

inline MaskImage read_png_gray(const std::filesystem::path& path) {
  PngImage p = read_png(path);
  if (p.channels != 1) throw IoError(path, "expected a grayscale PNG");
  return std::move(p.gray);
}

/// Writes a single-channel ("Y") 32-bit float EXR with lossless ZIP
/// compression.
inline void write_exr(const std::filesystem::path& path, const DepthImage& img) {
  try {
    Imf::Header header(img.width(), img.height());
    header.compression() = Imf::ZIP_COMPRESSION;
    header.channels().insert("Y", Imf::Channel(Imf::FLOAT));
    Imf::OutputFile file(path.c_str(), header, 1);
    Imf::FrameBuffer fb;
    fb.insert("Y", Imf::Slice(Imf::FLOAT, reinterpret_cast<char*>(const_cast<float*>(img.pixels().data())),
                              sizeof(float), sizeof(float) * static_cast<std::size_t>(img.width())));
    file.setFrameBuffer(fb);
    file.writePixels(img.height());
  } catch (const std::exception& e) {
    throw IoError(path, std::string("EXR write failed: ") + e.what());
  }
}

inline DepthImage read_exr(const std::filesystem::path& path) {
  try {
    Imf::InputFile file(path.c_str(), 1);
    const auto& header = file.header();
    const Imf::Channel* ch = header.channels().findChannel("Y");
    if (ch == nullptr || ch->type != Imf::FLOAT) throw IoError(path, "EXR lacks a 32-bit float Y channel");
    const auto dw = header.dataWindow();
    const int w = dw.max.x - dw.min.x + 1, h = dw.max.y - dw.min.y + 1;
    DepthImage img(w, h);
    Imf::FrameBuffer fb;
    char* base = reinterpret_cast<char*>(img.pixels().data()) -
                 (static_cast<std::ptrdiff_t>(dw.min.x) + static_cast<std::ptrdiff_t>(dw.min.y) * w) *
                     static_cast<std::ptrdiff_t>(sizeof(float));
    fb.insert("Y", Imf::Slice(Imf::FLOAT, base, sizeof(float), sizeof(float) * static_cast<std::size_t>(w)));
    file.setFrameBuffer(fb);
    file.readPixels(dw.min.y, dw.max.y);
    return img;
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(path, std::string("EXR decode failed: ") + e.what());
  }
}

// Raw float32 container (non-canonical fallback): 16-byte header of an 8-byte
// magic, little-endian u32 width and u32 height, then row-major
// little-endian float32 pixels.

inline constexpr std::array<char, 8> kRawDepthMagic{'O', 'S', 'D', 'E', 'P', 'T', 'H', '1'};

namespace detail {

inline void put_u32le(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

}  // namespace detail

inline void write_raw_depth(const std::filesystem::path& path, const DepthImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path, "cannot open for writing");
  os.write(kRawDepthMagic.data(), kRawDepthMagic.size());
  detail::put_u32le(os, static_cast<std::uint32_t>(img.width()));
  detail::put_u32le(os, static_cast<std::uint32_t>(img.height()));
  for (float f : img.pixels()) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    detail::put_u32le(os, bits);
  }
  if (!os) throw IoError(path, "write failed");
}

inline DepthImage read_raw_depth(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path, "cannot open for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kRawDepthMagic.data(), 8) != 0) {
    throw IoError(path, "not a raw depth file");
  }
  const auto w = detail::get_u32le(bytes.data() + 8), h = detail::get_u32le(bytes.data() + 12);
  if (bytes.size() != 16 + 4ull * w * h) throw IoError(path, "raw depth payload size mismatch");
  DepthImage img(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < img.size(); ++i) {
    const std::uint32_t bits = detail::get_u32le(bytes.data() + 16 + 4 * i);
    std::memcpy(&img.pixels()[i], &bits, 4);
  }
  return img;
}

}  // namespace omnisynth
