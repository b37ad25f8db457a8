#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ddn/noise.hpp"
#include "ddn/tensor.hpp"

namespace ddn {

enum class Augment { none, dihedral };

Augment parse_augment(std::string_view name);
std::string_view to_string(Augment a);

/// Sliding-window patches of a [1,C,H,W] image in raster order, each
/// [1,C,p,p]. With dihedral augmentation every window is followed by its
/// 7 other rotations/reflections, so the count grows eightfold.
template <typename T>
std::vector<Tensor<T>> extract_patches(const Tensor<T>& image, std::size_t patch_size,
                                       std::size_t stride, Augment augment);

/// The k-th element (0..7) of the dihedral group applied to a square [1,C,p,p] patch:
/// rotation by k%4 quarter turns, preceded by a horizontal flip when k >= 4.
template <typename T>
Tensor<T> dihedral(const Tensor<T>& patch, unsigned k);

struct DatasetOptions {
  std::size_t patch_size = 40;
  std::size_t stride = 10;
  Augment augment = Augment::dihedral;
  std::uint64_t shuffle_seed = 0;
  /// Keep only the first N patches after shuffling (0 keeps all).
  std::size_t max_patches = 0;
};

struct PatchRecord {
  std::string filename;
  /// Position in the unshuffled sequence (sorted files, raster order, augmentation).
  std::size_t patch_index = 0;
  std::uint64_t noise_seed = 0;
};

/// Clean/noisy patch pairs in their shuffled order. Pair i is
/// clean[i] and noisy[i] = add_awgn(clean[i], {sigma, records[i].noise_seed}).
struct PatchSet {
  Tensor<float> clean;  // [P,1,p,p]
  Tensor<float> noisy;  // [P,1,p,p]
  std::vector<PatchRecord> records;
  std::size_t patch_size = 0;
  NoiseSpec noise;

  std::size_t size() const { return records.size(); }
  /// One line per patch: "filename<TAB>patch_index<TAB>seed".
  std::string manifest() const;
  /// FNV-1a of manifest(), as 16 hex digits.
  std::string manifest_hash() const;
};

/// Sorted .pgm files of `dir`; throws IoError if there are none.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

PatchSet make_dataset(const std::filesystem::path& image_dir, const NoiseSpec& noise,
                      const DatasetOptions& options);

/// Rows `indices` of a [P,...] tensor stacked into [indices.size(),...].
Tensor<float> gather_rows(const Tensor<float>& source, std::span<const std::size_t> indices);

}  // namespace ddn
