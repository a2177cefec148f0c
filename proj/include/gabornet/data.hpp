#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gabornet/random.hpp"
#include "gabornet/tensor.hpp"

namespace gabornet {

/// Per-channel affine normalization statistics.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;

  bool operator==(const NormStats&) const = default;
};

/// Images (N, C, H, W) with integer labels in [0, K) and K class names.
struct LabeledDataset {
  Tensor4 images;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  /// Set once normalize() has been applied.
  std::optional<NormStats> normalization;

  int size() const { return images.shape().n; }
  int num_classes() const { return static_cast<int>(class_names.size()); }
};

/// Raised for unreadable or malformed datasets.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads root/<class>/*.png. Classes and files are taken in lexicographic order;
/// images are bilinearly resized to image_size x image_size and scaled to [0, 1].
LabeledDataset load_image_dir(const std::filesystem::path& root, int image_size, int channels);

/// Writes the dataset as root/<class>/<index>.png (values in [0, 1] quantized to 8 bits).
void write_image_dir(const LabeledDataset& ds, const std::filesystem::path& root);

/// Bilinear resize of one (c, h, w) image with half-pixel centres.
std::vector<double> resize_bilinear(std::span<const double> image, int channels, int h, int w,
                                    int out_h, int out_w);

NormStats fit_normalization(const LabeledDataset& ds);
/// x <- (x - mean_c) / std_c. Stats are fitted on ds unless supplied.
LabeledDataset normalize(LabeledDataset ds, const std::optional<NormStats>& stats_from = {});

/// Per image: horizontal flip with probability flip_prob, then zero-pad by
/// crop_padding and crop a random window of the original size.
Tensor4 augment(const Tensor4& batch, double flip_prob, int crop_padding, Rng& rng);

/// Oriented sinusoidal gratings; class j has wave-vector angle j*pi/classes.
LabeledDataset gen_texture_dataset(int n_per_class, int image_size, int classes,
                                   double noise_std, std::uint64_t seed);

struct SplitSpec {
  double val_fraction = 0.3;
  std::uint64_t shuffle_seed = 0;
};

/// Shuffled partition; floor(N * val_fraction) samples go to validation.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, const SplitSpec& spec);

LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> indices);

/// Per-epoch deterministic shuffle of [0, n) cut into batches; the last batch
/// may be short.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, int batch_size,
                                                    std::uint64_t shuffle_seed, int epoch);

struct Batch {
  Tensor4 images;
  std::vector<int> labels;
};

Batch gather(const LabeledDataset& ds, std::span<const std::size_t> indices);

}  // namespace gabornet
