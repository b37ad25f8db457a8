#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ddn/tensor.hpp"

namespace ddn {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(std::size_t width, std::size_t height, std::uint8_t fill = 0);
  GrayImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels);

  std::uint8_t& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
  bool operator==(const GrayImage&) const = default;
};

/// Binary P5 with maxval 255. Comments in the header are skipped.
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);

/// [1,1,H,W] tensor with values pixel / 255.
template <typename T>
Tensor<T> to_tensor(const GrayImage& image);

/// Inverse of to_tensor: clamps to [0,1], scales by 255 and rounds half away
/// from zero. Accepts [H,W] or [1,1,H,W].
template <typename T>
GrayImage from_tensor(const Tensor<T>& tensor);

}  // namespace ddn
