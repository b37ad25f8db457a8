#include "ddn/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "ddn/io.hpp"

namespace ddn {

GrayImage::GrayImage(std::size_t w, std::size_t h, std::uint8_t fill)
    : width(w), height(h), pixels(w * h, fill) {
  if (w == 0 || h == 0) throw ConfigError("GrayImage: extents must be positive");
}

GrayImage::GrayImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> px)
    : width(w), height(h), pixels(std::move(px)) {
  if (w == 0 || h == 0) throw ConfigError("GrayImage: extents must be positive");
  if (pixels.size() != w * h)
    throw ConfigError("GrayImage: " + std::to_string(pixels.size()) + " pixels for " +
                      std::to_string(w) + "x" + std::to_string(h));
}

namespace {

using Kind = FormatError::Kind;

class HeaderParser {
public:
  explicit HeaderParser(std::span<const std::uint8_t> in) : in_(in) {}

  void skip_space_and_comments() {
    while (pos_ < in_.size()) {
      if (std::isspace(in_[pos_])) {
        ++pos_;
      } else if (in_[pos_] == '#') {
        while (pos_ < in_.size() && in_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* field) {
    skip_space_and_comments();
    if (pos_ >= in_.size())
      throw FormatError(Kind::truncated, std::string("PGM header ends before ") + field);
    if (!std::isdigit(in_[pos_]))
      throw FormatError(Kind::bad_header, std::string("PGM header: expected ") + field);
    std::size_t value = 0;
    while (pos_ < in_.size() && std::isdigit(in_[pos_])) {
      value = value * 10 + static_cast<std::size_t>(in_[pos_] - '0');
      if (value > 1'000'000'000)
        throw FormatError(Kind::bad_header, std::string("PGM header: ") + field + " too large");
      ++pos_;
    }
    return value;
  }

  /// Exactly one whitespace byte separates maxval from the raster.
  void single_separator() {
    if (pos_ >= in_.size())
      throw FormatError(Kind::truncated, "PGM header ends before the raster");
    if (!std::isspace(in_[pos_]))
      throw FormatError(Kind::bad_header, "PGM header: expected whitespace after maxval");
    ++pos_;
  }

  std::size_t position() const { return pos_; }

private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P')
    throw FormatError(Kind::bad_magic, "not a PGM file (bad magic)");
  if (bytes[1] != '5') {
    if (bytes[1] >= '1' && bytes[1] <= '7')
      throw FormatError(Kind::unsupported_format,
                        std::string("netpbm variant P") + static_cast<char>(bytes[1]) +
                            " is not supported (only binary P5)");
    throw FormatError(Kind::bad_magic, "not a PGM file (bad magic)");
  }
  HeaderParser p(bytes.subspan(2));
  if (bytes.size() > 2 && !std::isspace(bytes[2]) && bytes[2] != '#')
    throw FormatError(Kind::bad_header, "PGM header: expected whitespace after magic");
  const std::size_t width = p.number("width");
  const std::size_t height = p.number("height");
  const std::size_t maxval = p.number("maxval");
  if (width == 0 || height == 0) throw FormatError(Kind::bad_header, "PGM has a zero extent");
  if (maxval != 255)
    throw FormatError(Kind::bad_maxval, "PGM maxval " + std::to_string(maxval) +
                                            " is not supported (only 255)");
  p.single_separator();

  const std::size_t offset = 2 + p.position();
  const std::size_t need = width * height;
  if (bytes.size() - offset < need)
    throw FormatError(Kind::truncated, "PGM raster has " + std::to_string(bytes.size() - offset) +
                                           " bytes, expected " + std::to_string(need));
  return GrayImage(width, height,
                   std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                                             bytes.begin() +
                                                 static_cast<std::ptrdiff_t>(offset + need)));
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  if (image.pixels.size() != image.width * image.height || image.pixels.empty())
    throw ConfigError("encode_pgm: image extents do not match its pixel count");
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  try {
    return decode_pgm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), path.string() + ": " + e.what());
  }
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  write_file_atomic(path, encode_pgm(image));
}

template <typename T>
Tensor<T> to_tensor(const GrayImage& image) {
  Tensor<T> t(Shape{1, 1, image.height, image.width});
  T* dst = t.ptr();
  for (std::size_t i = 0; i < image.pixels.size(); ++i)
    dst[i] = static_cast<T>(image.pixels[i]) / T(255);
  return t;
}

template <typename T>
GrayImage from_tensor(const Tensor<T>& tensor) {
  const Shape& s = tensor.shape();
  const bool plain = s.size() == 2;
  const bool batched = s.size() == 4 && s[0] == 1 && s[1] == 1;
  if (!plain && !batched)
    throw ShapeError("from_tensor: expected [H,W] or [1,1,H,W], got " + to_string(s));
  const std::size_t h = plain ? s[0] : s[2];
  const std::size_t w = plain ? s[1] : s[3];
  GrayImage image(w, h);
  const T* src = tensor.ptr();
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const double v = std::clamp(static_cast<double>(src[i]), 0.0, 1.0);
    image.pixels[i] = static_cast<std::uint8_t>(std::round(v * 255.0));
  }
  return image;
}

template Tensor<float> to_tensor<float>(const GrayImage&);
template Tensor<double> to_tensor<double>(const GrayImage&);
template GrayImage from_tensor(const Tensor<float>&);
template GrayImage from_tensor(const Tensor<double>&);

}  // namespace ddn
