#include "gabornet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace gabornet {

namespace {

constexpr std::uint64_t kAugmentStream = 0x4155474d;  // "AUGM"
constexpr int kEvalChunk = 256;

int count_correct(const Tensor4& logits, std::span<const int> labels) {
  int correct = 0;
  for (int i = 0; i < logits.shape().n; ++i) {
    if (argmax_first(logits.sample(i)) == labels[i]) ++correct;
  }
  return correct;
}

}  // namespace

int argmax_first(std::span<const double> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

EvalResult evaluate(Network& net, const LabeledDataset& data) {
  const int n = data.size();
  if (n == 0) return {};
  double loss_sum = 0.0;
  int correct = 0;
  for (int start = 0; start < n; start += kEvalChunk) {
    const int end = std::min(n, start + kEvalChunk);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), static_cast<std::size_t>(start));
    const Batch batch = gather(data, idx);
    const Tensor4 logits = net.forward(batch.images, Mode::kInference);
    loss_sum += net.loss(logits, batch.labels) * (end - start);
    correct += count_correct(logits, batch.labels);
  }
  return {loss_sum / n, static_cast<double>(correct) / n};
}

EpochMetrics train_epoch(Network& net, Optimizer& optimizer, const LabeledDataset& train_data,
                         const TrainOptions& options, int epoch) {
  optimizer.set_learning_rate(scheduled_learning_rate(options.base_lr, options.lr_decay, epoch));
  net.reseed(options.seed, epoch);
  Rng aug_rng(derive_seed(options.seed, kAugmentStream, static_cast<std::uint64_t>(epoch)));
  const bool augmenting = options.flip_prob > 0.0 || options.crop_padding > 0;
  const auto batches =
      batch_indices(static_cast<std::size_t>(train_data.size()), options.batch_size, options.seed,
                    epoch);
  const auto params = net.parameters();

  double loss_sum = 0.0;
  int correct = 0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    Batch batch = gather(train_data, batches[b]);
    if (augmenting) {
      batch.images = augment(batch.images, options.flip_prob, options.crop_padding, aug_rng);
    }
    net.zero_grad();
    const Tensor4 logits = net.forward(batch.images, Mode::kTrain);
    const double loss = net.loss(logits, batch.labels);
    if (!std::isfinite(loss)) {
      std::string first;
      for (std::size_t i = 0; i < std::min<std::size_t>(batches[b].size(), 8); ++i) {
        first += (i ? "," : "") + std::to_string(batches[b][i]);
      }
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(b) + " (sample indices " + first + ", ...)");
    }
    net.backward();
    optimizer.step(params);
    net.project_constraints();
    loss_sum += loss * static_cast<double>(batches[b].size());
    correct += count_correct(logits, batch.labels);
  }
  EpochMetrics m;
  m.epoch = epoch;
  m.train_loss = loss_sum / train_data.size();
  m.train_acc = static_cast<double>(correct) / train_data.size();
  return m;
}

std::vector<double> moving_average(std::span<const double> series, int window) {
  if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = lo; j <= i; ++j) sum += series[j];
    out[i] = sum / static_cast<double>(i - lo + 1);
  }
  return out;
}

std::optional<int> epochs_to_threshold(std::span<const EpochMetrics> history, double threshold) {
  for (const EpochMetrics& m : history) {
    if (m.val_acc_ma5 >= threshold) return m.epoch;
  }
  return std::nullopt;
}

std::string format_metrics_row(const EpochMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g", m.epoch, m.train_loss,
                m.train_acc, m.val_loss, m.val_acc, m.val_acc_ma5, m.wall_seconds);
  return buf;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochMetrics> history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write metrics to " + path.string());
  out << kMetricsHeader << "\n";
  for (const EpochMetrics& m : history) out << format_metrics_row(m) << "\n";
}

void train_epochs(Network& net, Optimizer& optimizer, const LabeledDataset& train_data,
                  const LabeledDataset& val_data, const TrainOptions& options, int first_epoch,
                  int last_epoch, bool record_wall_time, std::vector<EpochMetrics>& history,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  for (int epoch = first_epoch; epoch <= last_epoch; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochMetrics m = train_epoch(net, optimizer, train_data, options, epoch);
    const EvalResult val = evaluate(net, val_data);
    m.val_loss = val.loss;
    m.val_acc = val.accuracy;
    std::vector<double> accs;
    for (const auto& h : history) accs.push_back(h.val_acc);
    accs.push_back(m.val_acc);
    m.val_acc_ma5 = moving_average(accs, 5).back();
    if (record_wall_time) {
      m.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
}

std::pair<int, int> filter_grid_layout(int n) {
  if (n < 1) return {0, 0};
  const int root = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  int rows = 1;
  for (int r = 1; r * r <= n; ++r) {
    if (n % r == 0) rows = r;
  }
  if (2 * rows < root) {
    return {(n + root - 1) / root, root};
  }
  return {rows, n / rows};
}

FilterGrid render_filters(Network& net) {
  const std::size_t index = net.first_parameterized_layer();
  if (index == net.num_layers()) {
    throw std::invalid_argument("export_filters: network has no parameterized layer");
  }
  Layer& layer = net.layer(index);
  Tensor4 kernels;
  if (auto* gabor = dynamic_cast<GaborConvLayer*>(&layer)) {
    kernels = gabor->materialize_kernels();
  } else if (auto* conv = dynamic_cast<ConvLayer*>(&layer)) {
    kernels = conv->kernels();
  } else {
    throw std::invalid_argument("export_filters: first parameterized layer is " + layer.kind() +
                                ", not conv or gabor_conv");
  }

  const Shape4& s = kernels.shape();
  const int k = s.h;
  const int slices = s.n * s.c;
  FilterGrid grid;
  grid.kernel = k;
  std::tie(grid.rows, grid.cols) = filter_grid_layout(slices);
  const std::size_t area = static_cast<std::size_t>(k) * k;
  for (int i = 0; i < slices; ++i) {
    const auto slice = std::span<const double>(kernels.values()).subspan(i * area, area);
    const auto [lo, hi] = std::minmax_element(slice.begin(), slice.end());
    std::vector<std::uint8_t> tile(area, 128);
    if (*hi > *lo) {
      for (std::size_t p = 0; p < area; ++p) {
        tile[p] = static_cast<std::uint8_t>(std::lround((slice[p] - *lo) / (*hi - *lo) * 255.0));
      }
    }
    grid.tiles.push_back(std::move(tile));
  }

  Image8& img = grid.image;
  img.channels = 1;
  img.width = grid.cols * k + (grid.cols - 1);
  img.height = grid.rows * k + (grid.rows - 1);
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0);
  for (int i = 0; i < slices; ++i) {
    const int r0 = (i / grid.cols) * (k + 1);
    const int c0 = (i % grid.cols) * (k + 1);
    for (int y = 0; y < k; ++y) {
      for (int x = 0; x < k; ++x) {
        img.pixels[static_cast<std::size_t>(r0 + y) * img.width + c0 + x] = grid.tiles[i][y * k + x];
      }
    }
  }
  return grid;
}

FilterGrid export_filters(Network& net, const std::filesystem::path& path) {
  FilterGrid grid = render_filters(net);
  write_png(path, grid.image);
  return grid;
}

}  // namespace gabornet
