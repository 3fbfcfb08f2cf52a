#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pscv/data.hpp"
#include "pscv/metrics.hpp"
#include "pscv/peers.hpp"
#include "pscv/voting.hpp"

namespace pscv {

/// Every knob of a run. Loaded from a JSON document; see README for the schema.
struct ExperimentConfig {
  /// Exactly one of the two is set.
  std::optional<ZipfSpec> generate;
  std::optional<std::filesystem::path> dataset_path;

  /// Tertile thresholds unless both counts are given.
  std::optional<std::int64_t> t_head;
  std::optional<std::int64_t> t_body;

  std::string peers = "HBT_B_T";
  LossSpec default_loss = CrossEntropySpec{};
  /// Optional per-peer overrides, indexed like the peer tokens.
  std::vector<std::optional<LossSpec>> peer_losses;
  std::vector<double> alphas;

  TrainParams train;
  std::vector<int> ks = {20, 50, 100};
  double test_fraction = 0.2;
  VoteOptions voting;
  bool allow_uncovered_classes = false;

  std::filesystem::path output_dir = "pscv_out";
  std::uint64_t seed = 0;

  /// Peer list after applying overrides. Throws ParseError/ConfigError.
  PeerConfig peer_config() const;
  void validate() const;
};

ExperimentConfig parse_experiment_config(std::string_view json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Error raised by a pipeline stage, tagged with the stage name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& cause)
      : std::runtime_error(stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Dataset named by the config: generated (seed defaults to the master seed
/// when the generator section gives none) or loaded.
LabeledDataset resolve_dataset(const ExperimentConfig& config);

/// Seeded 80/20-style split and the partition computed on its training side.
struct PreparedData {
  LabeledDataset train;
  LabeledDataset test;
  FrequencyTable train_freq;
  GroupPartition partition;
};
PreparedData prepare_data(const ExperimentConfig& config);

/// One row of the summary table.
struct SummaryRow {
  std::string model;
  std::string config;
  MetricsReport metrics;
};

struct ExperimentResult {
  GroupPartition partition;
  FrequencyTable train_freq;
  SummaryRow baseline;
  std::vector<SummaryRow> peers;
  SummaryRow ensemble;
  /// Baseline, peers, ensemble in that order.
  std::vector<SummaryRow> rows() const;
};

/// Summary CSV: `model,config,mR@K...,R@K...,mean,head,body,tail` where the
/// last three are mean per-class recall of each group (empty when absent).
std::string format_summary_csv(const std::vector<SummaryRow>& rows, std::span<const int> ks);

/// The final prediction of each peer, as scored results.
std::vector<ScoredPrediction> peer_results(std::span<const PredictionRecord> records, std::size_t peer);

/// Consensus vote of each record (optionally over a subset of peer indices).
std::vector<ScoredPrediction> voted_results(std::span<const PredictionRecord> records, const VoteOptions& options,
                                            std::span<const std::size_t> peer_subset = {});

// Subcommands. Each writes into config.output_dir (created if missing) and
// throws StageError on failure.

/// dataset.txt and frequencies.txt.
std::filesystem::path cmd_generate(const ExperimentConfig& config);

/// partition.txt for the training split.
GroupPartition cmd_partition(const ExperimentConfig& config);

/// model.txt, partition.txt and training_log.csv.
TrainResult cmd_train(const ExperimentConfig& config);

/// predictions.jsonl for the test split.
std::vector<PredictionRecord> cmd_predict(const ExperimentConfig& config, const std::filesystem::path& model_path);

struct VoteRequest {
  std::filesystem::path predictions;
  std::vector<std::size_t> peer_subset;
  std::vector<int> ks = {20, 50, 100};
  std::optional<std::filesystem::path> partition;
  VoteOptions options;
  std::filesystem::path output_dir = "pscv_out";
};

/// voted.jsonl, report_vote.txt and report_vote.csv.
MetricsReport cmd_vote(const VoteRequest& request);

struct EvaluateRequest {
  std::filesystem::path results;
  std::vector<int> ks = {20, 50, 100};
  std::optional<std::filesystem::path> partition;
  std::filesystem::path output_dir = "pscv_out";
};

/// report_eval.txt and report_eval.csv for a scored-results file.
MetricsReport cmd_evaluate(const EvaluateRequest& request);

/// Full pipeline: split, partition, train peers and a single all-class
/// cross-entropy baseline with the same budget, predict the test split, vote
/// and evaluate. Writes model.txt, partition.txt, predictions.jsonl,
/// voted.jsonl, report_{baseline,peer<i>,pscv}.{txt,csv} and summary.csv.
ExperimentResult cmd_experiment(const ExperimentConfig& config);

}  // namespace pscv
