#include "ddn/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "ddn/io.hpp"
#include "ddn/pgm.hpp"
#include "ddn/rng.hpp"

namespace ddn {

Augment parse_augment(std::string_view name) {
  if (name == "none") return Augment::none;
  if (name == "dihedral" || name == "flips+rot90") return Augment::dihedral;
  throw ConfigError("unknown augmentation '" + std::string(name) + "' (expected none or dihedral)");
}

std::string_view to_string(Augment a) { return a == Augment::none ? "none" : "dihedral"; }

template <typename T>
Tensor<T> dihedral(const Tensor<T>& patch, unsigned k) {
  const Shape& s = patch.shape();
  if (s.size() != 4 || s[0] != 1 || s[2] != s[3])
    throw ShapeError("dihedral: expected a square [1,C,p,p] patch, got " + to_string(s));
  if (k > 7) throw ConfigError("dihedral: element index must be in 0..7");
  const std::size_t C = s[1], p = s[2];
  Tensor<T> out(s);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) {
        std::size_t r = i, q = (k >= 4) ? p - 1 - j : j;
        // Counter-clockwise quarter turns: (r, q) -> (p-1-q, r).
        for (unsigned t = 0; t < k % 4; ++t) {
          const std::size_t nr = p - 1 - q;
          q = r;
          r = nr;
        }
        out.at(0, c, r, q) = patch.at(0, c, i, j);
      }
  return out;
}

template <typename T>
std::vector<Tensor<T>> extract_patches(const Tensor<T>& image, std::size_t patch_size,
                                       std::size_t stride, Augment augment) {
  const Shape& s = image.shape();
  if (s.size() != 4 || s[0] != 1)
    throw ShapeError("extract_patches: expected a [1,C,H,W] image, got " + to_string(s));
  if (patch_size == 0 || stride == 0)
    throw ConfigError("extract_patches: patch size and stride must be positive");
  if (patch_size > s[2] || patch_size > s[3])
    throw ShapeError("extract_patches: patch " + std::to_string(patch_size) +
                     " exceeds image extents " + to_string(s));
  const std::size_t C = s[1], W = s[3];
  std::vector<Tensor<T>> out;
  for (std::size_t y = 0; y + patch_size <= s[2]; y += stride)
    for (std::size_t x = 0; x + patch_size <= W; x += stride) {
      Tensor<T> patch(Shape{1, C, patch_size, patch_size});
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < patch_size; ++i) {
          const T* src = image.ptr() + (c * s[2] + y + i) * W + x;
          std::copy(src, src + patch_size, &patch.at(0, c, i, 0));
        }
      if (augment == Augment::none) {
        out.push_back(std::move(patch));
      } else {
        for (unsigned k = 0; k < 8; ++k) out.push_back(dihedral(patch, k));
      }
    }
  return out;
}

std::string PatchSet::manifest() const {
  std::ostringstream os;
  for (const PatchRecord& r : records)
    os << r.filename << '\t' << r.patch_index << '\t' << r.noise_seed << '\n';
  return os.str();
}

std::string PatchSet::manifest_hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(manifest())));
  return buf;
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files = list_files(dir, ".pgm");
  if (files.empty()) throw IoError(dir.string(), "no .pgm images found");
  return files;
}

PatchSet make_dataset(const std::filesystem::path& image_dir, const NoiseSpec& noise,
                      const DatasetOptions& options) {
  if (options.patch_size == 0 || options.stride == 0)
    throw ConfigError("make_dataset: patch size and stride must be positive");
  if (noise.sigma < 0.0) throw ConfigError("make_dataset: sigma must be non-negative");

  std::vector<Tensor<float>> patches;
  std::vector<PatchRecord> records;
  for (const auto& path : list_images(image_dir)) {
    const GrayImage image = read_pgm(path);
    std::vector<Tensor<float>> ps;
    try {
      ps = extract_patches(to_tensor<float>(image), options.patch_size, options.stride,
                           options.augment);
    } catch (const ShapeError& e) {
      throw ShapeError(path.filename().string() + ": " + e.what());
    }
    for (Tensor<float>& p : ps) {
      const std::size_t index = records.size();
      records.push_back({path.filename().string(), index, derive_seed(noise.seed, index)});
      patches.push_back(std::move(p));
    }
  }

  std::vector<std::size_t> order = permutation(records.size(), options.shuffle_seed);
  if (options.max_patches > 0 && options.max_patches < order.size())
    order.resize(options.max_patches);

  const std::size_t p = options.patch_size, plane = p * p;
  PatchSet set;
  set.patch_size = p;
  set.noise = noise;
  set.clean = Tensor<float>(Shape{order.size(), 1, p, p});
  set.noisy = Tensor<float>(Shape{order.size(), 1, p, p});
  for (std::size_t i = 0; i < order.size(); ++i) {
    const PatchRecord& r = records[order[i]];
    const Tensor<float>& clean = patches[order[i]];
    const Tensor<float> noisy = add_awgn(clean, NoiseSpec{noise.sigma, r.noise_seed});
    std::copy(clean.ptr(), clean.ptr() + plane, set.clean.ptr() + i * plane);
    std::copy(noisy.ptr(), noisy.ptr() + plane, set.noisy.ptr() + i * plane);
    set.records.push_back(r);
  }
  return set;
}

Tensor<float> gather_rows(const Tensor<float>& source, std::span<const std::size_t> indices) {
  if (source.rank() == 0 || indices.empty())
    throw ShapeError("gather_rows: need a batched tensor and at least one index");
  Shape shape = source.shape();
  const std::size_t row = source.numel() / shape[0];
  const std::size_t rows = shape[0];
  shape[0] = indices.size();
  Tensor<float> out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows)
      throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " out of " +
                       std::to_string(rows));
    std::memcpy(out.ptr() + i * row, source.ptr() + indices[i] * row, row * sizeof(float));
  }
  return out;
}

template Tensor<float> dihedral(const Tensor<float>&, unsigned);
template Tensor<double> dihedral(const Tensor<double>&, unsigned);
template std::vector<Tensor<float>> extract_patches(const Tensor<float>&, std::size_t, std::size_t,
                                                    Augment);
template std::vector<Tensor<double>> extract_patches(const Tensor<double>&, std::size_t,
                                                     std::size_t, Augment);

}  // namespace ddn
