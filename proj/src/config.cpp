#include "gabornet/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace gabornet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T v{};
  is >> v;
  if (is.fail() || !is.eof()) throw ConfigError(key, "cannot parse '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key, "expected true/false, got '" + value + "'");
}

std::vector<std::pair<int, double>> parse_decay(const std::string& key, const std::string& value) {
  std::vector<std::pair<int, double>> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError(key, "expected epoch:factor, got '" + item + "'");
    out.emplace_back(parse_number<int>(key, trim(item.substr(0, colon))),
                     parse_number<double>(key, trim(item.substr(colon + 1))));
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"config_version", [&](auto& k, auto& v) { c.config_version = parse_number<int>(k, v); }},
      {"seed", [&](auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); }},
      {"epochs", [&](auto& k, auto& v) { c.epochs = parse_number<int>(k, v); }},
      {"batch_size", [&](auto& k, auto& v) { c.batch_size = parse_number<int>(k, v); }},
      {"optimizer", [&](auto&, auto& v) { c.optimizer = v; }},
      {"lr", [&](auto& k, auto& v) { c.adam.lr = parse_number<double>(k, v); }},
      {"beta1", [&](auto& k, auto& v) { c.adam.beta1 = parse_number<double>(k, v); }},
      {"beta2", [&](auto& k, auto& v) { c.adam.beta2 = parse_number<double>(k, v); }},
      {"eps", [&](auto& k, auto& v) { c.adam.eps = parse_number<double>(k, v); }},
      {"lr_decay", [&](auto& k, auto& v) { c.lr_decay = parse_decay(k, v); }},
      {"data.train", [&](auto&, auto& v) { c.train_dir = v; }},
      {"data.val", [&](auto&, auto& v) { c.val_dir = v; }},
      {"data.val_fraction", [&](auto& k, auto& v) { c.val_fraction = parse_number<double>(k, v); }},
      {"data.image_size", [&](auto& k, auto& v) { c.image_size = parse_number<int>(k, v); }},
      {"data.channels", [&](auto& k, auto& v) { c.channels = parse_number<int>(k, v); }},
      {"data.normalize", [&](auto& k, auto& v) { c.normalize = parse_bool(k, v); }},
      {"augment.flip_prob", [&](auto& k, auto& v) { c.flip_prob = parse_number<double>(k, v); }},
      {"augment.crop_padding", [&](auto& k, auto& v) { c.crop_padding = parse_number<int>(k, v); }},
      {"network.layers", [&](auto&, auto& v) { c.layers = v; }},
      {"output_dir", [&](auto&, auto& v) { c.output_dir = v; }},
      {"threshold", [&](auto& k, auto& v) { c.threshold = parse_number<double>(k, v); }},
      {"record_wall_time", [&](auto& k, auto& v) { c.record_wall_time = parse_bool(k, v); }},
  };

  bool saw_version = false;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + " is not 'key = value': " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown key");
    it->second(key, value);
    saw_version = saw_version || key == "config_version";
  }

  if (!saw_version) throw ConfigError("config_version", "missing");
  if (c.config_version != kConfigVersion) {
    throw ConfigError("config_version", "unsupported version " + std::to_string(c.config_version));
  }
  if (c.epochs < 1) throw ConfigError("epochs", "must be >= 1");
  if (c.batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (c.optimizer != "adam" && c.optimizer != "sgd") {
    throw ConfigError("optimizer", "expected adam or sgd, got '" + c.optimizer + "'");
  }
  if (!(c.adam.lr > 0.0)) throw ConfigError("lr", "must be positive");
  if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0)) {
    throw ConfigError("data.val_fraction", "must lie in (0, 1)");
  }
  if (c.channels != 1 && c.channels != 3) throw ConfigError("data.channels", "must be 1 or 3");
  if (c.image_size < 1) throw ConfigError("data.image_size", "must be positive");
  if (c.crop_padding < 0) throw ConfigError("augment.crop_padding", "must be >= 0");
  if (!c.layers.empty()) {
    try {
      parse_layers(c.layers);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("network.layers", e.what());
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "config_version = " << c.config_version << "\n"
     << "seed = " << c.seed << "\n"
     << "epochs = " << c.epochs << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "optimizer = " << c.optimizer << "\n"
     << "lr = " << fmt_double(c.adam.lr) << "\n"
     << "beta1 = " << fmt_double(c.adam.beta1) << "\n"
     << "beta2 = " << fmt_double(c.adam.beta2) << "\n"
     << "eps = " << fmt_double(c.adam.eps) << "\n"
     << "lr_decay = ";
  for (std::size_t i = 0; i < c.lr_decay.size(); ++i) {
    os << (i ? "," : "") << c.lr_decay[i].first << ":" << fmt_double(c.lr_decay[i].second);
  }
  os << "\n"
     << "data.train = " << c.train_dir.string() << "\n"
     << "data.val = " << c.val_dir.string() << "\n"
     << "data.val_fraction = " << fmt_double(c.val_fraction) << "\n"
     << "data.image_size = " << c.image_size << "\n"
     << "data.channels = " << c.channels << "\n"
     << "data.normalize = " << (c.normalize ? "true" : "false") << "\n"
     << "augment.flip_prob = " << fmt_double(c.flip_prob) << "\n"
     << "augment.crop_padding = " << c.crop_padding << "\n"
     << "network.layers = "
     << (c.layers.empty() ? format_layers(default_gcnn_spec(2).layers) : c.layers) << "\n"
     << "output_dir = " << c.output_dir.string() << "\n"
     << "threshold = " << fmt_double(c.threshold) << "\n"
     << "record_wall_time = " << (c.record_wall_time ? "true" : "false") << "\n";
  return os.str();
}

NetworkSpec network_spec(const ExperimentConfig& config, int classes) {
  NetworkSpec spec = default_gcnn_spec(classes, config.channels, config.image_size, config.seed);
  if (!config.layers.empty()) spec.layers = parse_layers(config.layers);
  return spec;
}

}  // namespace gabornet
