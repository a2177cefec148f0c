#include <gtest/gtest.h>

#include "gabornet/config.hpp"

using namespace gabornet;

TEST(Config, MinimalUsesDefaults) {
  const ExperimentConfig c = parse_config("config_version = 1\n");
  EXPECT_EQ(c.epochs, 100);
  EXPECT_EQ(c.batch_size, 64);
  EXPECT_EQ(c.optimizer, "adam");
  EXPECT_DOUBLE_EQ(c.adam.lr, 1e-3);
  EXPECT_DOUBLE_EQ(c.adam.beta1, 0.9);
  EXPECT_DOUBLE_EQ(c.adam.beta2, 0.999);
  EXPECT_DOUBLE_EQ(c.val_fraction, 0.3);
  EXPECT_TRUE(c.normalize);
  EXPECT_EQ(c.flip_prob, 0.0);
  EXPECT_EQ(c.crop_padding, 0);
}

TEST(Config, ParsesEveryKey) {
  const ExperimentConfig c = parse_config(R"(# experiment
config_version = 1
seed = 12
epochs = 3
batch_size = 16
optimizer = sgd
lr = 0.05
lr_decay = 30:0.1, 50:0.1
data.train = /tmp/train   # trailing comment
data.val_fraction = 0.25
data.image_size = 24
data.channels = 3
data.normalize = false
augment.flip_prob = 0.5
augment.crop_padding = 4
network.layers = conv(out=4,k=3,pad=1); relu; dense(out=classes); softmax_ce
output_dir = out
threshold = 0.8
record_wall_time = false
)");
  EXPECT_EQ(c.seed, 12u);
  EXPECT_EQ(c.epochs, 3);
  EXPECT_EQ(c.optimizer, "sgd");
  EXPECT_EQ(c.lr_decay, (std::vector<std::pair<int, double>>{{30, 0.1}, {50, 0.1}}));
  EXPECT_EQ(c.train_dir, "/tmp/train");
  EXPECT_EQ(c.channels, 3);
  EXPECT_FALSE(c.normalize);
  EXPECT_EQ(c.crop_padding, 4);
  EXPECT_FALSE(c.record_wall_time);
  const NetworkSpec spec = network_spec(c, 5);
  EXPECT_EQ(spec.in_channels, 3);
  EXPECT_EQ(spec.in_height, 24);
  EXPECT_EQ(spec.classes, 5);
  EXPECT_EQ(spec.layers.size(), 4u);
}

TEST(Config, FormatRoundTrips) {
  ExperimentConfig c = parse_config("config_version = 1\nseed = 5\nlr = 0.0003\nlr_decay = 2:0.5\n");
  const ExperimentConfig back = parse_config(format_config(c));
  EXPECT_EQ(format_config(back), format_config(c));
  EXPECT_EQ(back.adam.lr, c.adam.lr);
  EXPECT_EQ(back.lr_decay, c.lr_decay);
}

TEST(Config, DefaultNetworkIsGcnn) {
  const NetworkSpec spec = network_spec(parse_config("config_version = 1\n"), 4);
  EXPECT_EQ(spec, default_gcnn_spec(4, 1, 32, 0));
}

TEST(Config, ErrorsNameTheKey) {
  auto key_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(key_of("config_version = 1\nlearning_rate = 0.1\n"), "learning_rate");
  EXPECT_EQ(key_of("seed = 1\n"), "config_version");
  EXPECT_EQ(key_of("config_version = 2\n"), "config_version");
  EXPECT_EQ(key_of("config_version = 1\nepochs = many\n"), "epochs");
  EXPECT_EQ(key_of("config_version = 1\noptimizer = rmsprop\n"), "optimizer");
  EXPECT_EQ(key_of("config_version = 1\ndata.val_fraction = 1.5\n"), "data.val_fraction");
  EXPECT_EQ(key_of("config_version = 1\nnetwork.layers = bogus\n"), "network.layers");
  EXPECT_EQ(key_of("config_version = 1\ndata.normalize = maybe\n"), "data.normalize");
  EXPECT_THROW(parse_config("config_version = 1\njust text\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.txt"), ConfigError);
}
