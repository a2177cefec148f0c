// gabornet command-line tool: synthetic data generation, (paired) training,
// evaluation, first-layer filter export and the gradient-check suite.
//
// Exit codes: 0 success, 1 gradient check failed, 2 config/usage error,
// 3 data or checkpoint error, 4 numeric abort (non-finite loss or gradient).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "gabornet/checkpoint.hpp"
#include "gabornet/config.hpp"
#include "gabornet/data.hpp"
#include "gabornet/experiment.hpp"
#include "gabornet/gradcheck.hpp"
#include "gabornet/train.hpp"

namespace fs = std::filesystem;
using namespace gabornet;

namespace {

enum ExitCode { kOk = 0, kCheckFailed = 1, kConfigError = 2, kDataError = 3, kNumericAbort = 4 };

constexpr const char* kExitCodes =
    "Exit codes: 0 success, 1 gradient check failed, 2 config error, 3 data error, "
    "4 numeric abort";

struct GenDataArgs {
  fs::path out;
  int classes = 4;
  int per_class = 600;
  int size = 32;
  double noise = 0.05;
  std::uint64_t seed = 7;
  bool force = false;
};

struct TrainArgs {
  fs::path config;
  bool paired = false;
};

struct EvalArgs {
  fs::path checkpoint;
  fs::path data;
};

struct ExportArgs {
  fs::path checkpoint;
  fs::path config;
  fs::path out;
  int classes = 4;
};

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::string layer;
  bool inject_fault = false;
};

int run_gen_data(const GenDataArgs& a) {
  std::cout << "gen-data: out=" << a.out.string() << " classes=" << a.classes
            << " per_class=" << a.per_class << " size=" << a.size << " noise=" << a.noise
            << " seed=" << a.seed << " force=" << (a.force ? "true" : "false") << "\n";
  if (a.classes < 2 || a.classes > 8) {
    std::cerr << "error: --classes must lie in [2, 8]\n";
    return kConfigError;
  }
  if (fs::exists(a.out) && !fs::is_empty(a.out)) {
    if (!a.force) {
      std::cerr << "error: " << a.out.string() << " exists and is not empty (use --force)\n";
      return kDataError;
    }
    fs::remove_all(a.out);
  }
  const LabeledDataset ds = gen_texture_dataset(a.per_class, a.size, a.classes, a.noise, a.seed);
  write_image_dir(ds, a.out);
  std::cout << "wrote " << ds.size() << " images in " << ds.num_classes() << " classes\n";
  return kOk;
}

int run_train(const TrainArgs& a) {
  const ExperimentConfig config = load_config(a.config);
  std::cout << "# resolved config\n" << format_config(config) << std::flush;
  const auto [train, val] = prepare_data(config);
  std::cout << "train samples: " << train.size() << ", validation samples: " << val.size()
            << ", classes: " << train.num_classes() << "\n";
  if (a.paired) {
    const PairedResult r = run_paired_experiment(config, train, val);
    std::cout << r.summary;
    std::cout << "metrics: " << r.gcnn.metrics_csv.string() << ", " << r.cnn.metrics_csv.string()
              << "\n";
  } else {
    const RunResult r = run_training(config, network_spec(config, train.num_classes()), train, val,
                                     "model");
    std::cout << kMetricsHeader << "\n";
    for (const auto& m : r.history) std::cout << format_metrics_row(m) << "\n";
    std::cout << "metrics: " << r.metrics_csv.string() << "\ncheckpoint: " << r.checkpoint.string()
              << "\n";
  }
  return kOk;
}

int run_eval(const EvalArgs& a) {
  std::cout << "eval: checkpoint=" << a.checkpoint.string() << " data=" << a.data.string() << "\n";
  const TrainingState state = read_checkpoint_state(a.checkpoint);
  if (state.config_text.empty()) {
    throw CheckpointError(CheckpointErrorCode::kMissingTensor,
                          "checkpoint carries no meta.config record");
  }
  const ExperimentConfig config = parse_config(state.config_text);
  Network net(network_spec(config, static_cast<int>(state.class_names.size())));
  load_checkpoint(a.checkpoint, net, nullptr);
  LabeledDataset data = load_image_dir(a.data, config.image_size, config.channels);
  if (data.class_names != state.class_names) {
    throw DataError("data classes differ from the classes the checkpoint was trained on");
  }
  if (state.normalization) data = normalize(std::move(data), state.normalization);
  const EvalResult r = evaluate(net, data);
  std::printf("samples=%d loss=%.6g accuracy=%.6g\n", data.size(), r.loss, r.accuracy);
  return kOk;
}

int run_export(const ExportArgs& a) {
  std::cout << "export-filters: out=" << a.out.string();
  std::unique_ptr<Network> net;
  if (!a.checkpoint.empty()) {
    std::cout << " checkpoint=" << a.checkpoint.string() << "\n";
    const TrainingState state = read_checkpoint_state(a.checkpoint);
    const ExperimentConfig config = parse_config(state.config_text);
    net = std::make_unique<Network>(
        network_spec(config, static_cast<int>(state.class_names.size())));
    load_checkpoint(a.checkpoint, *net, nullptr);
  } else {
    ExperimentConfig config;
    if (!a.config.empty()) config = load_config(a.config);
    std::cout << " config=" << (a.config.empty() ? "<defaults>" : a.config.string())
              << " classes=" << a.classes << " (fresh initialization)\n";
    net = std::make_unique<Network>(network_spec(config, a.classes));
  }
  const FilterGrid grid = export_filters(*net, a.out);
  std::cout << "wrote " << grid.tiles.size() << " filters as a " << grid.rows << "x" << grid.cols
            << " grid (" << grid.image.width << "x" << grid.image.height << " px)\n";
  return kOk;
}

int run_gradcheck_cmd(const GradcheckArgs& a) {
  std::cout << "gradcheck: seed=" << a.seed << " layer=" << (a.layer.empty() ? "all" : a.layer)
            << " step=" << kGradcheckStep << " tolerance=" << kGradcheckTolerance
            << (a.inject_fault ? " inject-fault" : "") << "\n";
  GradcheckOptions o;
  o.seed = a.seed;
  o.group = a.layer;
  o.inject_fault = a.inject_fault;
  bool ok = true;
  for (const CheckResult& r : run_gradcheck(o)) {
    std::printf("%-4s %-10s %-24s configs=%-3d max_rel_err=%.3e\n", r.passed ? "PASS" : "FAIL",
                r.group.c_str(), r.name.c_str(), r.configurations, r.max_error);
    ok = ok && r.passed;
  }
  return ok ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GaborNet: convolutional networks with a learnable Gabor first layer"};
  app.footer(kExitCodes);
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write the synthetic oriented-grating dataset");
  gen_cmd->footer(kExitCodes);
  gen_cmd->add_option("--out", gen.out, "Output directory (root/<class>/*.png)")->required();
  gen_cmd->add_option("--classes", gen.classes, "Number of orientation classes, 2..8")
      ->capture_default_str();
  gen_cmd->add_option("--per-class", gen.per_class, "Images per class")->capture_default_str();
  gen_cmd->add_option("--size", gen.size, "Image side in pixels")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Gaussian pixel noise std")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_flag("--force", gen.force, "Replace a non-empty output directory");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train from a config file");
  train_cmd->footer(kExitCodes);
  train_cmd->add_option("--config", train.config, "Experiment config file")->required();
  train_cmd->add_flag("--paired", train.paired,
                      "Train the GCNN and its CNN twin and write a comparison summary");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on an image directory");
  eval_cmd->footer(kExitCodes);
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "GNET1 checkpoint")->required();
  eval_cmd->add_option("--data", eval.data, "Dataset root (root/<class>/*.png)")->required();

  ExportArgs exp;
  auto* exp_cmd = app.add_subcommand("export-filters", "Render first-layer kernels as a PNG grid");
  exp_cmd->footer(kExitCodes);
  exp_cmd->add_option("--out", exp.out, "Output PNG")->required();
  auto* ckpt_opt = exp_cmd->add_option("--checkpoint", exp.checkpoint, "Trained checkpoint");
  exp_cmd->add_option("--config", exp.config, "Config for a freshly initialized network")
      ->excludes(ckpt_opt);
  exp_cmd->add_option("--classes", exp.classes, "Class count for a fresh network")
      ->capture_default_str();

  GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  grad_cmd->footer(kExitCodes);
  grad_cmd->add_option("--seed", grad.seed, "Seed for random configurations")->capture_default_str();
  grad_cmd->add_option("--layer", grad.layer, "Restrict to one group")
      ->check(CLI::IsMember(gradcheck_groups()));
  grad_cmd->add_flag("--inject-fault", grad.inject_fault,
                     "Perturb analytic gradients by 1% (negative control; must fail)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(eval);
    if (*exp_cmd) return run_export(exp);
    if (*grad_cmd) return run_gradcheck_cmd(grad);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kNumericAbort;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}
