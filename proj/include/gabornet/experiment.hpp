#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gabornet/config.hpp"
#include "gabornet/data.hpp"
#include "gabornet/network.hpp"
#include "gabornet/train.hpp"

namespace gabornet {

/// Loads data.train (and data.val, or a seeded split of data.train) and
/// normalizes both with statistics fitted on the training part.
std::pair<LabeledDataset, LabeledDataset> prepare_data(const ExperimentConfig& config);

TrainOptions train_options(const ExperimentConfig& config);
std::unique_ptr<Optimizer> make_optimizer(const ExperimentConfig& config);

struct RunResult {
  std::string tag;
  std::vector<EpochMetrics> history;
  FirstLayerCount first_layer;
  std::size_t total_parameters = 0;
  std::optional<int> epochs_to_threshold;
  std::filesystem::path metrics_csv;
  std::filesystem::path checkpoint;
};

/// Trains `spec` for config.epochs, writing <tag>_metrics.csv and <tag>.ckpt
/// into config.output_dir.
RunResult run_training(const ExperimentConfig& config, const NetworkSpec& spec,
                       const LabeledDataset& train, const LabeledDataset& val,
                       const std::string& tag);

struct PairedResult {
  RunResult gcnn;
  RunResult cnn;
  std::string summary;
};

/// Trains the configured GCNN and its CNN twin on identical data, batch order
/// and augmentation draws, then writes summary.txt.
PairedResult run_paired_experiment(const ExperimentConfig& config, const LabeledDataset& train,
                                   const LabeledDataset& val);

std::string paired_summary(const ExperimentConfig& config, const RunResult& gcnn,
                           const RunResult& cnn);

}  // namespace gabornet
