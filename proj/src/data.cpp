#include "gabornet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "gabornet/png_io.hpp"

namespace gabornet {

namespace fs = std::filesystem;

namespace {

void fisher_yates(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(v[i - 1], v[j]);
  }
}

constexpr std::uint64_t kSplitStream = 0x5350'4c49'54ULL;  // "SPLIT"
constexpr std::uint64_t kBatchStream = 0x4241'5443'48ULL;  // "BATCH"

}  // namespace

std::vector<double> resize_bilinear(std::span<const double> image, int channels, int h, int w,
                                    int out_h, int out_w) {
  std::vector<double> out(static_cast<std::size_t>(channels) * out_h * out_w);
  if (out_h == h && out_w == w) {
    std::copy(image.begin(), image.end(), out.begin());
    return out;
  }
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int c = 0; c < channels; ++c) {
    const double* src = image.data() + static_cast<std::size_t>(c) * h * w;
    double* dst = out.data() + static_cast<std::size_t>(c) * out_h * out_w;
    for (int y = 0; y < out_h; ++y) {
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, h - 1.0);
      const int y0 = static_cast<int>(fy);
      const int y1 = std::min(y0 + 1, h - 1);
      const double ay = fy - y0;
      for (int x = 0; x < out_w; ++x) {
        const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, w - 1.0);
        const int x0 = static_cast<int>(fx);
        const int x1 = std::min(x0 + 1, w - 1);
        const double ax = fx - x0;
        const double top = src[y0 * w + x0] * (1 - ax) + src[y0 * w + x1] * ax;
        const double bottom = src[y1 * w + x0] * (1 - ax) + src[y1 * w + x1] * ax;
        dst[y * out_w + x] = top * (1 - ay) + bottom * ay;
      }
    }
  }
  return out;
}

LabeledDataset load_image_dir(const fs::path& root, int image_size, int channels) {
  if (channels != 1 && channels != 3) throw DataError("channels must be 1 or 3");
  if (image_size < 1) throw DataError("image size must be positive");
  if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw DataError("no class directories under " + root.string());

  LabeledDataset ds;
  std::vector<std::pair<fs::path, int>> files;
  for (std::size_t label = 0; label < class_dirs.size(); ++label) {
    std::vector<fs::path> pngs;
    for (const auto& entry : fs::directory_iterator(class_dirs[label])) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") {
        pngs.push_back(entry.path());
      }
    }
    if (pngs.empty()) throw DataError("class directory has no PNG files: " +
                                      class_dirs[label].string());
    std::sort(pngs.begin(), pngs.end());
    ds.class_names.push_back(class_dirs[label].filename().string());
    for (auto& p : pngs) files.emplace_back(std::move(p), static_cast<int>(label));
  }

  const int n = static_cast<int>(files.size());
  ds.images = Tensor4(Shape4{n, channels, image_size, image_size});
  ds.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    Image8 img;
    try {
      img = read_png(files[i].first, channels);
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
    // interleaved 8-bit -> planar [0, 1]
    std::vector<double> planar(static_cast<std::size_t>(channels) * img.height * img.width);
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    for (std::size_t p = 0; p < plane; ++p) {
      for (int c = 0; c < channels; ++c) {
        planar[c * plane + p] = img.pixels[p * channels + c] / 255.0;
      }
    }
    const auto resized =
        resize_bilinear(planar, channels, img.height, img.width, image_size, image_size);
    std::copy(resized.begin(), resized.end(), ds.images.sample(i).begin());
    ds.labels[i] = files[i].second;
  }
  return ds;
}

void write_image_dir(const LabeledDataset& ds, const fs::path& root) {
  const Shape4& s = ds.images.shape();
  if (s.c != 1 && s.c != 3) throw DataError("only 1- or 3-channel datasets can be written");
  std::vector<int> counters(ds.class_names.size(), 0);
  for (const auto& name : ds.class_names) fs::create_directories(root / name);
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  for (int i = 0; i < s.n; ++i) {
    Image8 img{s.w, s.h, s.c, std::vector<std::uint8_t>(plane * s.c)};
    auto sample = ds.images.sample(i);
    for (std::size_t p = 0; p < plane; ++p) {
      for (int c = 0; c < s.c; ++c) {
        const double v = std::clamp(sample[c * plane + p], 0.0, 1.0);
        img.pixels[p * s.c + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
    const int label = ds.labels[i];
    char name[32];
    std::snprintf(name, sizeof(name), "%05d.png", counters[label]++);
    write_png(root / ds.class_names[label] / name, img);
  }
}

NormStats fit_normalization(const LabeledDataset& ds) {
  const Shape4& s = ds.images.shape();
  NormStats stats{std::vector<double>(s.c, 0.0), std::vector<double>(s.c, 0.0)};
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  const double count = static_cast<double>(plane) * s.n;
  for (int c = 0; c < s.c; ++c) {
    double sum = 0.0;
    for (int n = 0; n < s.n; ++n) {
      auto px = ds.images.sample(n).subspan(c * plane, plane);
      sum = std::accumulate(px.begin(), px.end(), sum);
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (int n = 0; n < s.n; ++n) {
      for (double v : ds.images.sample(n).subspan(c * plane, plane)) sq += (v - mean) * (v - mean);
    }
    stats.mean[c] = mean;
    stats.std[c] = std::sqrt(sq / count);
  }
  return stats;
}

LabeledDataset normalize(LabeledDataset ds, const std::optional<NormStats>& stats_from) {
  const NormStats stats = stats_from ? *stats_from : fit_normalization(ds);
  const Shape4& s = ds.images.shape();
  if (stats.mean.size() != static_cast<std::size_t>(s.c) ||
      stats.std.size() != static_cast<std::size_t>(s.c)) {
    throw std::invalid_argument("normalize: statistics cover " +
                                std::to_string(stats.mean.size()) + " channels, images have " +
                                std::to_string(s.c));
  }
  for (int c = 0; c < s.c; ++c) {
    if (!(stats.std[c] > 0.0)) {
      throw std::invalid_argument("normalize: channel " + std::to_string(c) +
                                  " has zero standard deviation");
    }
  }
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  for (int n = 0; n < s.n; ++n) {
    auto sample = ds.images.sample(n);
    for (int c = 0; c < s.c; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        double& v = sample[c * plane + p];
        v = (v - stats.mean[c]) / stats.std[c];
      }
    }
  }
  ds.normalization = stats;
  return ds;
}

Tensor4 augment(const Tensor4& batch, double flip_prob, int crop_padding, Rng& rng) {
  if (crop_padding < 0) throw std::invalid_argument("augment: crop_padding must be >= 0");
  const Shape4& s = batch.shape();
  Tensor4 out(s);
  for (int n = 0; n < s.n; ++n) {
    const bool flip = rng.uniform() < flip_prob;
    const int oy = crop_padding > 0 ? static_cast<int>(rng.below(2 * crop_padding + 1)) : 0;
    const int ox = crop_padding > 0 ? static_cast<int>(rng.below(2 * crop_padding + 1)) : 0;
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < s.h; ++y) {
        // crop window origin in padded coordinates is (oy, ox)
        const int sy = y + oy - crop_padding;
        for (int x = 0; x < s.w; ++x) {
          const int px = x + ox - crop_padding;
          double v = 0.0;
          if (sy >= 0 && sy < s.h && px >= 0 && px < s.w) {
            v = batch.at(n, c, sy, flip ? s.w - 1 - px : px);
          }
          out.at(n, c, y, x) = v;
        }
      }
    }
  }
  return out;
}

LabeledDataset gen_texture_dataset(int n_per_class, int image_size, int classes,
                                   double noise_std, std::uint64_t seed) {
  if (classes < 2 || classes > 8) {
    throw std::invalid_argument("gen_texture_dataset: classes must lie in [2, 8], got " +
                                std::to_string(classes));
  }
  if (n_per_class < 1 || image_size < 1) {
    throw std::invalid_argument("gen_texture_dataset: counts and size must be positive");
  }
  if (noise_std < 0.0) throw std::invalid_argument("gen_texture_dataset: noise_std must be >= 0");

  LabeledDataset ds;
  const int n = n_per_class * classes;
  ds.images = Tensor4(Shape4{n, 1, image_size, image_size});
  ds.labels.resize(n);
  for (int j = 0; j < classes; ++j) ds.class_names.push_back("orient_" + std::to_string(j));

  Rng rng(seed);
  int i = 0;
  for (int j = 0; j < classes; ++j) {
    const double theta = j * std::numbers::pi / classes;
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (int k = 0; k < n_per_class; ++k, ++i) {
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double omega = rng.uniform(0.3, 1.2);
      auto img = ds.images.sample(i);
      for (int y = 0; y < image_size; ++y) {
        for (int x = 0; x < image_size; ++x) {
          double v = 0.5 + 0.5 * std::cos(omega * (x * ct + y * st) + phase);
          if (noise_std > 0.0) v += noise_std * rng.normal();
          img[static_cast<std::size_t>(y) * image_size + x] = std::clamp(v, 0.0, 1.0);
        }
      }
      ds.labels[i] = j;
    }
  }
  return ds;
}

LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> indices) {
  LabeledDataset out;
  Shape4 s = ds.images.shape();
  s.n = static_cast<int>(indices.size());
  out.images = Tensor4(s);
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= static_cast<std::size_t>(ds.size())) {
      throw std::out_of_range("subset: index out of range");
    }
    auto src = ds.images.sample(static_cast<int>(indices[i]));
    std::copy(src.begin(), src.end(), out.images.sample(static_cast<int>(i)).begin());
    out.labels.push_back(ds.labels[indices[i]]);
  }
  out.class_names = ds.class_names;
  out.normalization = ds.normalization;
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, const SplitSpec& spec) {
  if (!(spec.val_fraction > 0.0 && spec.val_fraction < 1.0)) {
    throw std::invalid_argument("split: val_fraction must lie in (0, 1)");
  }
  const std::size_t n = static_cast<std::size_t>(ds.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(spec.shuffle_seed, kSplitStream));
  fisher_yates(order, rng);
  const auto n_val = static_cast<std::size_t>(std::floor(n * spec.val_fraction));
  std::vector<std::size_t> val(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train(order.begin() + n_val, order.end());
  return {subset(ds, train), subset(ds, val)};
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, int batch_size,
                                                    std::uint64_t shuffle_seed, int epoch) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(shuffle_seed, kBatchStream, static_cast<std::uint64_t>(epoch)));
  fisher_yates(order, rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

Batch gather(const LabeledDataset& ds, std::span<const std::size_t> indices) {
  LabeledDataset sub = subset(ds, indices);
  return Batch{std::move(sub.images), std::move(sub.labels)};
}

}  // namespace gabornet
