#include <gtest/gtest.h>

#include <memory>

#include "harood/checkpoint.hpp"
#include "harood/trainer.hpp"
#include "test_support.hpp"

using namespace harood;

namespace {

NetworkConfig light_network() {
  NetworkConfig c;
  c.autoencoder.channels = {4, 8};
  c.head.channels = {8};
  c.head.embedding_dim = 16;
  c.classifier.hidden = 16;
  return c;
}

Stage1Schedule short_stage1(std::uint64_t seed) {
  Stage1Schedule s;
  s.batch_size = 8;
  s.batches_per_epoch = 4;
  s.optimizer.learning_rate = 2e-3;
  s.seed = seed;
  return s;
}

Stage2Schedule short_stage2(std::uint64_t seed) {
  Stage2Schedule s;
  s.epochs = 30;
  s.batch_size = 8;
  s.optimizer.learning_rate = 1e-2;
  s.seed = seed;
  return s;
}

struct Trained {
  HaroodNetwork<float> network{light_network()};
  TrainingLog log;
  std::uint64_t stage1_checksum = 0;
};

class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<test::TempDir>("trainer");
    const auto manifest =
        build_dataset(test::tiny_recipe(), RadarConfig{}, PreprocessConfig{}, dir_->path(), 2024, 1);
    data_ = std::make_unique<TrainingData>(load_training_data(manifest));
  }
  static void TearDownTestSuite() {
    data_.reset();
    dir_.reset();
  }

  static Trained train(std::uint64_t seed, int workers) {
    Trained t;
    t.network.initialize(mix_seed(seed, 2));
    train_stage1(t.network, *data_, short_stage1(seed), t.log, workers);
    t.stage1_checksum = parameter_checksum(t.network.parameters(), t.network.stage1_range());
    train_stage2(t.network, *data_, short_stage2(seed), t.log, workers);
    return t;
  }

  static const Trained& reference() {
    static const Trained t = train(5, 1);
    return t;
  }

  static std::unique_ptr<test::TempDir> dir_;
  static std::unique_ptr<TrainingData> data_;
};

std::unique_ptr<test::TempDir> TrainerTest::dir_;
std::unique_ptr<TrainingData> TrainerTest::data_;

}  // namespace

TEST_F(TrainerTest, ScheduleHasSixEpochsWithContrastiveFirstThree) {
  const auto& log = reference().log;
  ASSERT_EQ(log.stage1.size(), 6u);
  EXPECT_EQ(log.contrastive_flags(), (std::vector<int>{1, 1, 1, 0, 0, 0}));
  for (std::size_t e = 0; e < 6; ++e) {
    EXPECT_EQ(log.stage1[e].epoch, int(e) + 1);
    EXPECT_EQ(log.stage1[e].batches, 4);
    EXPECT_TRUE(log.stage1[e].reconstruction_active);
    EXPECT_TRUE(log.stage1[e].triplet_active);
    if (e >= 3) {
      EXPECT_EQ(log.stage1[e].losses.l_con, 0.0);
    }
  }
  EXPECT_GT(log.stage1[0].losses.l_con, 0.0);
  EXPECT_EQ(log.stage2.size(), 30u);
}

TEST_F(TrainerTest, SameSeedGivesBitIdenticalWeights) {
  const Trained again = train(5, 1);
  EXPECT_EQ(again.network.parameters(), reference().network.parameters());
  const Trained other = train(6, 1);
  EXPECT_NE(other.network.parameters(), reference().network.parameters());
}

TEST_F(TrainerTest, WorkerCountDoesNotChangeTheResult) {
  const Trained threaded = train(5, 3);
  EXPECT_EQ(threaded.network.parameters(), reference().network.parameters());
}

TEST_F(TrainerTest, StageTwoLeavesStageOneWeightsUntouched) {
  const auto& t = reference();
  EXPECT_EQ(parameter_checksum(t.network.parameters(), t.network.stage1_range()), t.stage1_checksum);
}

TEST_F(TrainerTest, StageOneLossImproves) {
  const auto& s1 = reference().log.stage1;
  const double first = s1.front().losses.l_rec + s1.front().losses.l_tri;
  const double last = s1.back().losses.l_rec + s1.back().losses.l_tri;
  EXPECT_LT(last, first);
}

TEST_F(TrainerTest, StageTwoBeatsChance) {
  const auto& s2 = reference().log.stage2;
  EXPECT_GT(s2.back().train_accuracy, 1.0 / 3.0);
  EXPECT_LT(s2.back().cross_entropy, s2.front().cross_entropy);
}

TEST_F(TrainerTest, IsolatedContrastiveStepOnlyMovesEncoders) {
  HaroodNetwork<float> net(light_network());
  net.initialize(77);
  const auto pairs = sample_contrastive_pairs(data_->manifest, 6, 3);
  std::vector<PairItem<float>> items;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& a = data_->at(pairs.first[i]);
    const auto& b = data_->at(pairs.second[i]);
    items.push_back({{&a.macro.values, &a.micro.values}, {&b.macro.values, &b.micro.values}, pairs.y[i]});
  }
  Vector<float> g = net.zero_gradient();
  ASSERT_GT(contrastive_objective<float>(net, items, 2.0f, &g), 0.0f);

  auto checksum = [&](ParameterGroup group) { return parameter_checksum(net.parameters(), net.range(group)); };
  std::array<std::uint64_t, kNumParameterGroups> before{};
  for (int k = 0; k < kNumParameterGroups; ++k) before[k] = checksum(static_cast<ParameterGroup>(k));
  Adamax<float> opt(net.stage1_range());
  opt.step(net.parameters(), g);
  for (auto group : {ParameterGroup::decoder_macro, ParameterGroup::decoder_micro, ParameterGroup::head,
                     ParameterGroup::classifier})
    EXPECT_EQ(checksum(group), before[static_cast<int>(group)]) << to_string(group);
  EXPECT_NE(checksum(ParameterGroup::encoder_macro), before[0]);
  EXPECT_NE(checksum(ParameterGroup::encoder_micro), before[2]);
}

TEST_F(TrainerTest, EmbeddingsHaveOneColumnPerRecord) {
  const auto& net = reference().network;
  const Matrix<float> e = compute_embeddings<float>(net, data_->train, 2);
  EXPECT_EQ(e.rows(), net.embedding_dim());
  EXPECT_EQ(e.cols(), Index(data_->train.size()));
  EXPECT_EQ(e.col(3), net.embed(data_->train[3].macro.values, data_->train[3].micro.values));
}

TEST_F(TrainerTest, LogJsonRoundTrip) {
  const auto& log = reference().log;
  const TrainingLog back = TrainingLog::from_json(log.to_json());
  EXPECT_EQ(back.to_json(), log.to_json());
  EXPECT_EQ(back.contrastive_flags(), log.contrastive_flags());
  EXPECT_THROW(TrainingLog::from_json(nlohmann::json::object()), FormatError);
}

TEST(TrainerErrors, MissingOodOutlierExposureIsRejected) {
  test::TempDir dir("trainer_no_oe");
  DatasetRecipe r = test::tiny_recipe(6);
  r.counts[Split::oe].clear();
  const auto manifest = build_dataset(r, RadarConfig{}, PreprocessConfig{}, dir.path(), 1, 1);
  const TrainingData data = load_training_data(manifest);
  HaroodNetwork<float> net(light_network());
  net.initialize(1);
  TrainingLog log;
  EXPECT_THROW(train_stage1(net, data, short_stage1(1), log), Error);
}
