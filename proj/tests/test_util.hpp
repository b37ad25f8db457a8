#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "ddn/error.hpp"
#include "ddn/pgm.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ddn_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

/// Returns the FormatError kind thrown by f, or fails the check if none is thrown.
template <typename F>
ddn::FormatError::Kind format_kind(F&& f) {
  try {
    f();
  } catch (const ddn::FormatError& e) {
    return e.kind();
  }
  throw std::logic_error("expected a FormatError");
}

/// Deterministic textured image: gradients plus a checker so SSIM windows see structure.
inline ddn::GrayImage synthetic_image(std::size_t w, std::size_t h, unsigned salt) {
  ddn::GrayImage img(w, h);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const unsigned v = static_cast<unsigned>(r * 3 + c * 5 + salt * 17) % 200 +
                         (((r / 4 + c / 4 + salt) % 2) ? 40u : 0u);
      img.at(r, c) = static_cast<std::uint8_t>(std::min(v, 255u));
    }
  return img;
}

}  // namespace testutil
