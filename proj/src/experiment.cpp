#include "gabornet/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gabornet/checkpoint.hpp"

namespace gabornet {

namespace fs = std::filesystem;

std::pair<LabeledDataset, LabeledDataset> prepare_data(const ExperimentConfig& config) {
  if (config.train_dir.empty()) throw ConfigError("data.train", "not set");
  LabeledDataset train = load_image_dir(config.train_dir, config.image_size, config.channels);
  LabeledDataset val;
  if (config.val_dir.empty()) {
    std::tie(train, val) = split(train, SplitSpec{config.val_fraction, config.seed});
  } else {
    val = load_image_dir(config.val_dir, config.image_size, config.channels);
    if (val.class_names != train.class_names) {
      throw DataError("validation classes differ from training classes");
    }
  }
  if (config.normalize) {
    train = normalize(std::move(train));
    val = normalize(std::move(val), train.normalization);
  }
  return {std::move(train), std::move(val)};
}

TrainOptions train_options(const ExperimentConfig& config) {
  TrainOptions o;
  o.batch_size = config.batch_size;
  o.seed = config.seed;
  o.flip_prob = config.flip_prob;
  o.crop_padding = config.crop_padding;
  o.base_lr = config.adam.lr;
  o.lr_decay = config.lr_decay;
  return o;
}

std::unique_ptr<Optimizer> make_optimizer(const ExperimentConfig& config) {
  if (config.optimizer == "sgd") return std::make_unique<Sgd>(config.adam.lr);
  return std::make_unique<Adam>(config.adam);
}

RunResult run_training(const ExperimentConfig& config, const NetworkSpec& spec,
                       const LabeledDataset& train, const LabeledDataset& val,
                       const std::string& tag) {
  fs::create_directories(config.output_dir);
  Network net(spec);
  auto optimizer = make_optimizer(config);
  RunResult r;
  r.tag = tag;
  r.first_layer = first_layer_parameter_count(net);
  r.total_parameters = net.parameter_count();
  train_epochs(net, *optimizer, train, val, train_options(config), 1, config.epochs,
               config.record_wall_time, r.history);
  r.epochs_to_threshold = epochs_to_threshold(r.history, config.threshold);
  r.metrics_csv = config.output_dir / (tag + "_metrics.csv");
  write_metrics_csv(r.metrics_csv, r.history);

  ExperimentConfig resolved = config;
  resolved.layers = format_layers(spec.layers);
  TrainingState state;
  state.epoch = config.epochs;
  state.normalization = train.normalization;
  state.config_text = format_config(resolved);
  state.class_names = train.class_names;
  r.checkpoint = config.output_dir / (tag + ".ckpt");
  save_checkpoint(r.checkpoint, net, optimizer.get(), state);
  return r;
}

std::string paired_summary(const ExperimentConfig& config, const RunResult& gcnn,
                           const RunResult& cnn) {
  auto epochs = [](const RunResult& r) {
    return r.epochs_to_threshold ? std::to_string(*r.epochs_to_threshold) : std::string("never");
  };
  auto last_acc = [](const RunResult& r) {
    return r.history.empty() ? 0.0 : r.history.back().val_acc;
  };
  auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  char buf[128];
  std::ostringstream os;
  os << "threshold (val_acc_ma5) = " << config.threshold << "\n";
  os << "gcnn.first_layer = " << gcnn.first_layer.kind << "\n";
  os << "gcnn.first_layer_params = " << gcnn.first_layer.with_bias << "\n";
  os << "gcnn.first_layer_weights = " << gcnn.first_layer.weights_only << "\n";
  os << "cnn.first_layer = " << cnn.first_layer.kind << "\n";
  os << "cnn.first_layer_params = " << cnn.first_layer.with_bias << "\n";
  os << "cnn.first_layer_weights = " << cnn.first_layer.weights_only << "\n";
  std::snprintf(buf, sizeof(buf), "%.6g", ratio(cnn.first_layer.weights_only, gcnn.first_layer.weights_only));
  os << "first_layer_reduction_weights = " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.6g", ratio(cnn.first_layer.with_bias, gcnn.first_layer.with_bias));
  os << "first_layer_reduction_with_bias = " << buf << "\n";
  os << "gcnn.total_params = " << gcnn.total_parameters << "\n";
  os << "cnn.total_params = " << cnn.total_parameters << "\n";
  os << "gcnn.epochs_to_threshold = " << epochs(gcnn) << "\n";
  os << "cnn.epochs_to_threshold = " << epochs(cnn) << "\n";
  std::snprintf(buf, sizeof(buf), "%.6g", last_acc(gcnn));
  os << "gcnn.final_val_acc = " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.6g", last_acc(cnn));
  os << "cnn.final_val_acc = " << buf << "\n";
  return os.str();
}

PairedResult run_paired_experiment(const ExperimentConfig& config, const LabeledDataset& train,
                                   const LabeledDataset& val) {
  const NetworkSpec spec = network_spec(config, train.num_classes());
  PairedResult r;
  r.gcnn = run_training(config, spec, train, val, "gcnn");
  r.cnn = run_training(config, cnn_twin(spec), train, val, "cnn");
  r.summary = paired_summary(config, r.gcnn, r.cnn);
  std::ofstream(config.output_dir / "summary.txt", std::ios::trunc) << r.summary;
  return r;
}

}  // namespace gabornet
