#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "gabornet/checkpoint.hpp"
#include "gabornet/data.hpp"
#include "gabornet/train.hpp"

using namespace gabornet;
namespace fs = std::filesystem;

namespace {

NetworkSpec small_spec(int classes, std::uint64_t seed) {
  NetworkSpec spec;
  spec.in_height = spec.in_width = 12;
  spec.classes = classes;
  spec.seed = seed;
  spec.layers = parse_layers(
      "gabor_conv(out=4,k=5,stride=1,pad=2); relu; maxpool(window=2,stride=2); dropout(p=0.5); "
      "dense(out=classes); softmax_ce");
  return spec;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gabornet_ckpt_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

std::vector<double> flat_parameters(Network& net) {
  std::vector<double> out;
  for (const Parameter& p : net.parameters()) out.insert(out.end(), p.value->values().begin(), p.value->values().end());
  return out;
}

}  // namespace

TEST_F(CheckpointTest, RecordsRoundTrip) {
  const std::vector<NamedTensor> records{{"scalar", {}, {3.5}}, {"t", {2, 3}, {1, 2, 3, 4, 5, 6}}};
  write_records(dir_ / "r.bin", records);
  const auto back = read_records(dir_ / "r.bin");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].name, "scalar");
  EXPECT_TRUE(back[0].dims.empty());
  EXPECT_EQ(back[1].dims, (std::vector<std::uint32_t>{2, 3}));
  EXPECT_EQ(back[1].values, records[1].values);
  EXPECT_EQ(slurp(dir_ / "r.bin").substr(0, 5), "GNET1");
}

TEST_F(CheckpointTest, SaveLoadSaveIsByteIdentical) {
  const LabeledDataset data = normalize(gen_texture_dataset(6, 12, 2, 0.05, 1));
  Network net(small_spec(2, 1));
  Adam adam;
  TrainOptions opts;
  opts.batch_size = 4;
  train_epoch(net, adam, data, opts, 1);
  TrainingState state{1, data.normalization, "config_version = 1\n", data.class_names};
  save_checkpoint(dir_ / "a.ckpt", net, &adam, state);

  Network other(small_spec(2, 99));
  Adam other_adam;
  const TrainingState loaded = load_checkpoint(dir_ / "a.ckpt", other, &other_adam);
  EXPECT_EQ(loaded.epoch, 1);
  EXPECT_EQ(loaded.config_text, state.config_text);
  EXPECT_EQ(loaded.class_names, state.class_names);
  EXPECT_EQ(loaded.normalization, state.normalization);
  EXPECT_EQ(flat_parameters(other), flat_parameters(net));
  EXPECT_EQ(other_adam.states(), adam.states());
  save_checkpoint(dir_ / "b.ckpt", other, &other_adam, loaded);
  EXPECT_EQ(slurp(dir_ / "a.ckpt"), slurp(dir_ / "b.ckpt"));

  const TrainingState meta = read_checkpoint_state(dir_ / "a.ckpt");
  EXPECT_EQ(meta.class_names, state.class_names);
}

TEST_F(CheckpointTest, ResumeMatchesUninterruptedTraining) {
  const LabeledDataset data = normalize(gen_texture_dataset(10, 12, 2, 0.05, 2));
  TrainOptions opts;
  opts.batch_size = 8;
  opts.seed = 3;
  opts.flip_prob = 0.5;

  Network straight(small_spec(2, 4));
  Adam adam_straight;
  train_epoch(straight, adam_straight, data, opts, 1);
  save_checkpoint(dir_ / "e1.ckpt", straight, &adam_straight, {1, {}, "", data.class_names});
  const EpochMetrics m2 = train_epoch(straight, adam_straight, data, opts, 2);

  Network resumed(small_spec(2, 4));
  Adam adam_resumed;
  const TrainingState st = load_checkpoint(dir_ / "e1.ckpt", resumed, &adam_resumed);
  const EpochMetrics r2 = train_epoch(resumed, adam_resumed, data, opts, st.epoch + 1);

  EXPECT_EQ(r2.train_loss, m2.train_loss);
  EXPECT_EQ(r2.train_acc, m2.train_acc);
  EXPECT_EQ(flat_parameters(resumed), flat_parameters(straight));
  EXPECT_EQ(adam_resumed.states(), adam_straight.states());
}

TEST_F(CheckpointTest, ShapeMismatchNamesTensor) {
  Network net(small_spec(2, 1));
  save_checkpoint(dir_ / "two.ckpt", net, nullptr, {});
  Network three(small_spec(3, 1));
  try {
    load_checkpoint(dir_ / "two.ckpt", three, nullptr);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.code(), CheckpointErrorCode::kShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("layer4.dense.weight"), std::string::npos) << e.what();
  }
}

TEST_F(CheckpointTest, DistinctErrorCodes) {
  Network net(small_spec(2, 1));
  auto code_of = [&](const fs::path& p) {
    try {
      load_checkpoint(p, net, nullptr);
    } catch (const CheckpointError& e) {
      return static_cast<int>(e.code());
    }
    return 0;
  };
  EXPECT_EQ(code_of(dir_ / "missing.ckpt"), static_cast<int>(CheckpointErrorCode::kIo));

  { std::ofstream(dir_ / "magic.ckpt", std::ios::binary) << "NOTIT0000"; }
  EXPECT_EQ(code_of(dir_ / "magic.ckpt"), static_cast<int>(CheckpointErrorCode::kBadMagic));

  save_checkpoint(dir_ / "full.ckpt", net, nullptr, {});
  const std::string bytes = slurp(dir_ / "full.ckpt");
  { std::ofstream(dir_ / "cut.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 13); }
  EXPECT_EQ(code_of(dir_ / "cut.ckpt"), static_cast<int>(CheckpointErrorCode::kTruncated));

  write_records(dir_ / "sparse.ckpt", {{"meta.epoch", {}, {1}}});
  EXPECT_EQ(code_of(dir_ / "sparse.ckpt"), static_cast<int>(CheckpointErrorCode::kMissingTensor));
}
