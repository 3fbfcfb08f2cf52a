#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pscv/error.hpp"
#include "pscv/experiment.hpp"

namespace pscv {
namespace {

const std::filesystem::path kFixtures = PSCV_FIXTURES;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pscv_experiment_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

ExperimentConfig small_config(const std::string& name) {
  auto c = parse_experiment_config(R"({
    "seed": 5,
    "dataset": {"generate": {"num_classes": 9, "instances": 1500, "scene_size": [20, 60], "feature_dim": 6}},
    "train": {"epochs": 4}
  })");
  c.output_dir = scratch_dir(name);
  return c;
}

TEST(Config, DefaultsWhenEmpty) {
  const auto c = parse_experiment_config("{}");
  EXPECT_EQ(c.peers, "HBT_B_T");
  EXPECT_EQ(c.ks, (std::vector<int>{20, 50, 100}));
  EXPECT_FALSE(c.generate.has_value() && c.dataset_path.has_value());
  EXPECT_EQ(c.peer_config().peers.size(), 3u);
}

TEST(Config, ParsesEverySection) {
  const auto c = parse_experiment_config(R"({
    "seed": 9, "output_dir": "out", "allow_uncovered_classes": true,
    "dataset": {"generate": {"num_classes": 12, "zipf_exponent": 1.5, "instances": 900,
                             "scene_size": [4, 9], "feature_dim": 3, "class_separation": 2.5,
                             "noise_scale": 0.5}},
    "partition": {"t_head": 40, "t_body": 10},
    "peers": {"spec": "HBT_HT_BT", "loss": {"kind": "focal", "gamma": 1.0},
              "per_peer": [{}, {"loss": {"kind": "ldam", "s": 10, "C": 0.25}, "alpha": 2}, {"loss": {"kind": "cb", "beta": 0.99}}]},
    "train": {"epochs": 3, "batch_size": 16, "learning_rate": 0.05, "weight_decay": 1e-4,
              "momentum": 0.9, "hidden_units": 8, "parallel": true},
    "eval": {"ks": [5, 10], "test_fraction": 0.3},
    "voting": {"minority_penalty": 0.8}
  })");
  EXPECT_EQ(c.seed, 9u);
  ASSERT_TRUE(c.generate.has_value());
  EXPECT_EQ(c.generate->seed, 9u);
  EXPECT_EQ(c.generate->scene_size_max, 9);
  EXPECT_EQ(c.t_head, 40);
  EXPECT_EQ(c.train.hidden_units, 8);
  EXPECT_EQ(c.voting.minority_penalty, 0.8);
  const auto peers = c.peer_config();
  ASSERT_EQ(peers.peers.size(), 3u);
  EXPECT_EQ(peers.peers[0].loss, LossSpec{FocalSpec{1.0}});
  LdamSpec ldam;
  ldam.margin_scale = 0.25;
  ldam.logit_scale = 10.0;
  EXPECT_EQ(peers.peers[1].loss, LossSpec{ldam});
  EXPECT_EQ(peers.peers[1].alpha, 2.0);
  EXPECT_EQ(peers.peers[2].loss, LossSpec{ClassBalancedSpec{0.99}});
}

TEST(Config, RejectsBadDocuments) {
  EXPECT_THROW(parse_experiment_config("{"), ConfigError);
  EXPECT_THROW(parse_experiment_config(R"({"sede": 1})"), ConfigError);
  EXPECT_THROW(parse_experiment_config(R"({"train": {"epochs": "many"}})"), ConfigError);
  EXPECT_THROW(parse_experiment_config(R"({"peers": {"loss": {"kind": "hinge"}}})"), ConfigError);
  EXPECT_THROW(parse_experiment_config(R"({"eval": {"test_fraction": 1.0}})"), ConfigError);
  EXPECT_THROW(parse_experiment_config(R"({"voting": {"minority_penalty": 0}})"), ConfigError);
  EXPECT_THROW(parse_experiment_config(R"({"partition": {"t_head": 5, "t_body": 5}})"), ConfigError);
  EXPECT_THROW(parse_experiment_config(R"({"peers": {"spec": "HBX_B"}})"), Error);
}

TEST(Experiment, SummaryHasBaselinePeersAndEnsemble) {
  const auto c = small_config("summary");
  const auto result = cmd_experiment(c);
  const auto rows = result.rows();
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].model, "baseline");
  EXPECT_EQ(rows[1].model, "peer0");
  EXPECT_EQ(rows[2].config, "B");
  EXPECT_EQ(rows[3].config, "T");
  EXPECT_EQ(rows[4].model, "PSCV");

  const std::string csv = slurp(c.output_dir / "summary.csv");
  EXPECT_EQ(csv.rfind("model,config,mR@20,mR@50,mR@100,R@20,R@50,R@100,mean,head,body,tail\n", 0), 0u) << csv;
  for (const char* prefix : {"\nbaseline,HBT,", "\npeer0,HBT,", "\npeer1,B,", "\npeer2,T,", "\nPSCV,HBT_B_T,"}) {
    EXPECT_NE(csv.find(prefix), std::string::npos) << prefix;
  }
  for (const char* file : {"model.txt", "partition.txt", "training_log.csv", "predictions.jsonl", "voted.jsonl",
                           "report_baseline.csv", "report_peer2.txt", "report_pscv.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(c.output_dir / file)) << file;
  }
}

TEST(Experiment, RepeatedRunsWriteIdenticalReports) {
  auto a = small_config("det_a");
  auto b = small_config("det_b");
  cmd_experiment(a);
  cmd_experiment(b);
  for (const char* file : {"summary.csv", "report_pscv.csv", "report_baseline.csv", "training_log.csv"}) {
    EXPECT_EQ(slurp(a.output_dir / file), slurp(b.output_dir / file)) << file;
  }
}

TEST(Experiment, StepwiseCommandsReproduceTheExperiment) {
  auto c = small_config("steps");
  const auto full = cmd_experiment(c);
  const auto trained = cmd_train(c);
  const auto records = cmd_predict(c, c.output_dir / "model.txt");
  VoteRequest vote;
  vote.predictions = c.output_dir / "predictions.jsonl";
  vote.partition = c.output_dir / "partition.txt";
  vote.output_dir = c.output_dir / "vote";
  const auto report = cmd_vote(vote);
  EXPECT_EQ(report.mean_recall_at, full.ensemble.metrics.mean_recall_at);
  EXPECT_EQ(report.recall_at, full.ensemble.metrics.recall_at);
  EXPECT_EQ(trained.ensemble.partition, full.partition);
  EXPECT_FALSE(records.empty());
}

TEST(Experiment, BadPeerSpecFailsInConfigStage) {
  auto c = small_config("bad");
  c.peers = "HBX_B";
  try {
    cmd_experiment(c);
    FAIL() << "no error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
}

TEST(Experiment, UncoveredClassesFailInTrainStage) {
  auto c = small_config("uncovered");
  c.peers = "H_B";
  try {
    cmd_experiment(c);
    FAIL() << "no error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "train");
  }
  c.allow_uncovered_classes = true;
  EXPECT_NO_THROW(cmd_experiment(c));
}

TEST(Vote, HandTraceFixture) {
  VoteRequest request;
  request.predictions = kFixtures / "hand_trace_predictions.jsonl";
  request.output_dir = scratch_dir("vote_fixture");
  const auto report = cmd_vote(request);
  EXPECT_EQ(report.recall_at.at(20), 50.0);
  const auto voted = load_scored(request.output_dir / "voted.jsonl");
  ASSERT_EQ(voted.size(), 4u);
  EXPECT_EQ(voted[0].predicted, 3);
  EXPECT_EQ(voted[0].score, 0.5);
  EXPECT_EQ(voted[1].predicted, 2);
  EXPECT_EQ(voted[1].score, 0.8);
  EXPECT_EQ(voted[2].predicted, 5);
  EXPECT_EQ(voted[2].score, 0.9);
  EXPECT_EQ(voted[3].predicted, 1);
  EXPECT_EQ(voted[3].score, 0.6);
}

TEST(Vote, UnanimousPeersMatchASinglePeer) {
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 30; ++i) {
    const int label = i % 4;
    const double conf = 0.3 + 0.02 * i;
    records.push_back({i, i / 10, i % 3, {{label, conf}, {label, conf}, {label, conf}}});
  }
  const auto voted = voted_results(records, {});
  EXPECT_EQ(voted, peer_results(records, 0));
}

TEST(Vote, PeerSubsetAndErrors) {
  const std::vector<PredictionRecord> records = {{0, 0, 2, {{2, 0.3}, {2, 0.4}, {5, 0.9}}}};
  const std::vector<std::size_t> first_two = {0, 1};
  EXPECT_EQ(voted_results(records, {}, first_two)[0].predicted, 2);
  const std::vector<std::size_t> out_of_range = {3};
  EXPECT_THROW(voted_results(records, {}, out_of_range), Error);

  VoteRequest empty;
  empty.predictions = kFixtures / "empty.jsonl";
  empty.output_dir = scratch_dir("vote_empty");
  try {
    cmd_vote(empty);
    FAIL() << "no error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "vote");
  }
}

}  // namespace
}  // namespace pscv
