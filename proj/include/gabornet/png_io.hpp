#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gabornet {

/// 8-bit interleaved image, 1 (gray) or 3 (RGB) channels.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;
};

/// Decodes any PNG, converting to the requested channel count. Throws
/// std::runtime_error naming the file on failure.
Image8 read_png(const std::filesystem::path& path, int channels);

void write_png(const std::filesystem::path& path, const Image8& image);

}  // namespace gabornet
