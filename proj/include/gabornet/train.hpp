#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gabornet/data.hpp"
#include "gabornet/network.hpp"
#include "gabornet/optim.hpp"
#include "gabornet/png_io.hpp"

namespace gabornet {

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double val_acc_ma5 = 0.0;
  double wall_seconds = 0.0;
};

struct TrainOptions {
  int batch_size = 64;
  std::uint64_t seed = 0;  // batch order, augmentation and dropout streams
  double flip_prob = 0.0;
  int crop_padding = 0;
  double base_lr = 1e-3;
  std::vector<std::pair<int, double>> lr_decay;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Inference-mode pass over the whole dataset in fixed-size chunks.
/// Predictions are the first index of the maximum logit.
EvalResult evaluate(Network& net, const LabeledDataset& data);

/// Index of the largest value; the lowest index wins ties.
int argmax_first(std::span<const double> values);

/// One pass over train_data (epoch counts from 1). Per batch: augment, forward,
/// loss, backward, optimizer step, Gabor constraint projection. Fills epoch,
/// train_loss and train_acc. Throws NumericError on a non-finite loss.
EpochMetrics train_epoch(Network& net, Optimizer& optimizer, const LabeledDataset& train_data,
                         const TrainOptions& options, int epoch);

/// Trailing mean: out[i] = mean(series[max(0, i-window+1) ..= i]).
std::vector<double> moving_average(std::span<const double> series, int window = 5);

/// First epoch whose smoothed validation accuracy reaches threshold.
std::optional<int> epochs_to_threshold(std::span<const EpochMetrics> history, double threshold);

inline constexpr const char* kMetricsHeader =
    "epoch,train_loss,train_acc,val_loss,val_acc,val_acc_ma5,wall_seconds";

std::string format_metrics_row(const EpochMetrics& m);
void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochMetrics> history);

/// Trains epochs [first_epoch, last_epoch], appending to history (which also
/// feeds the moving average). on_epoch runs after each epoch.
void train_epochs(Network& net, Optimizer& optimizer, const LabeledDataset& train_data,
                  const LabeledDataset& val_data, const TrainOptions& options, int first_epoch,
                  int last_epoch, bool record_wall_time, std::vector<EpochMetrics>& history,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// First-layer kernels rendered as a grid of per-slice min-max normalized tiles.
struct FilterGrid {
  int rows = 0;
  int cols = 0;
  int kernel = 0;
  /// One k*k 8-bit tile per (out, in) slice, slice order out-major.
  std::vector<std::vector<std::uint8_t>> tiles;
  Image8 image;  // tiles with 1-pixel black separators
};

/// Rows are the largest divisor of n not above sqrt(n), unless that makes the
/// grid too elongated, in which case a ceil(sqrt) layout is used.
std::pair<int, int> filter_grid_layout(int n);

/// Requires the first parameterized layer to be conv or gabor_conv.
FilterGrid render_filters(Network& net);
FilterGrid export_filters(Network& net, const std::filesystem::path& path);

}  // namespace gabornet
