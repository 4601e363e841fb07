#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "aerostitch/error.hpp"
#include "aerostitch/image.hpp"
#include "aerostitch/text.hpp"

// 8-bit PGM (binary P5) and PNG (gray or RGB). Samples are scaled to [0,1]
// on load and rounded to nearest on save.
namespace aerostitch {

inline std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline std::vector<std::uint8_t> to_bytes(const ImageBuffer& img) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(img.samples().size());
  for (double v : img.samples()) bytes.push_back(quantize(v));
  return bytes;
}

inline ImageBuffer from_bytes(int width, int height, int channels,
                              const std::uint8_t* data) {
  std::vector<double> samples(static_cast<std::size_t>(width) * height * channels);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = data[i] / 255.0;
  return ImageBuffer(width, height, channels, std::move(samples));
}

inline std::string encode_pgm(const ImageBuffer& img) {
  if (img.channels() != 1) throw Error(ErrorCode::IoError, "PGM output needs a grayscale image");
  std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
                    "\n255\n";
  const auto bytes = to_bytes(img);
  out.append(bytes.begin(), bytes.end());
  return out;
}

inline ImageBuffer decode_pgm(const std::string& data) {
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  if (next_token() != "P5") throw Error(ErrorCode::ParseError, "not a binary PGM (P5)");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "malformed PGM header");
  }
  if (width <= 0 || height <= 0 || maxval != 255) {
    throw Error(ErrorCode::ParseError, "only 8-bit PGM with maxval 255 is supported");
  }
  ++pos;  // single whitespace after maxval
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (data.size() < pos + count) throw Error(ErrorCode::ParseError, "truncated PGM data");
  return from_bytes(width, height, 1, reinterpret_cast<const std::uint8_t*>(data.data() + pos));
}

inline ImageBuffer read_png(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::IoError, "cannot read PNG '" + path + "': " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::IoError, "cannot decode PNG '" + path + "': " + image.message);
  }
  return from_bytes(static_cast<int>(image.width), static_cast<int>(image.height), color ? 3 : 1,
                    buffer.data());
}

inline void write_png(const std::string& path, const ImageBuffer& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const auto bytes = to_bytes(img);
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, "cannot write PNG '" + path + "': " + image.message);
  }
}

inline std::string lower_extension(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

inline ImageBuffer read_image(const std::string& path) {
  const auto ext = lower_extension(path);
  if (ext == ".pgm") return decode_pgm(text::read_file(path));
  if (ext == ".png") return read_png(path);
  throw Error(ErrorCode::IoError, "unsupported image format '" + path + "'");
}

/// Writes by extension. RGB images written as PGM are converted to gray.
inline void write_image(const std::string& path, const ImageBuffer& img) {
  const auto ext = lower_extension(path);
  if (ext == ".pgm") {
    text::write_file(path, encode_pgm(to_gray(img)));
  } else if (ext == ".png") {
    write_png(path, img);
  } else {
    throw Error(ErrorCode::IoError, "unsupported image format '" + path + "'");
  }
}

}  // namespace aerostitch
