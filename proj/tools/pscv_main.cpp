// pscv: predicate sampling + consensus voting pipeline on precomputed features.
//
//   pscv generate   --config exp.json --out dir
//   pscv partition  --config exp.json --out dir
//   pscv train      --config exp.json --out dir [--peers HBT_B_T]
//   pscv predict    --config exp.json --out dir --model dir/model.txt
//   pscv vote       --predictions p.jsonl --out dir [--peers-subset 0,2]
//   pscv evaluate   --results voted.jsonl --out dir [--partition partition.txt]
//   pscv experiment --config exp.json --out dir
//
// Exit status is 0 on success, 2 when a stage fails (message on stderr is
// prefixed with the stage name) and 1 on bad command-line usage.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pscv/error.hpp"
#include "pscv/experiment.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string peers;
};

pscv::ExperimentConfig load_config(const GlobalOptions& g) {
  pscv::ExperimentConfig config;
  try {
    if (!g.config_path.empty()) {
      config = pscv::load_experiment_config(g.config_path);
    } else {
      config.generate = pscv::ZipfSpec{};
    }
    if (g.seed) {
      config.seed = *g.seed;
      if (config.generate) config.generate->seed = *g.seed;
    }
    if (!g.out.empty()) config.output_dir = g.out;
    if (!g.peers.empty()) {
      config.peers = g.peers;
      if (config.peer_losses.size() > pscv::parse_peer_config(g.peers).size()) config.peer_losses.clear();
      if (config.alphas.size() > pscv::parse_peer_config(g.peers).size()) config.alphas.clear();
    }
    config.validate();
  } catch (const std::exception& e) {
    throw pscv::StageError("config", e.what());
  }
  return config;
}

void print_report(const pscv::MetricsReport& report) {
  std::cout << pscv::format_report_text(report, "metrics");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Peer learning with predicate sampling and consensus voting"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed; also reseeds the dataset generator");
  app.add_option("--out", g.out, "Output directory (created if missing)");
  app.add_option("--peers", g.peers, "Peer spec, e.g. HBT_B_T");

  auto* generate = app.add_subcommand("generate", "Write a synthetic long-tailed dataset");
  auto* partition = app.add_subcommand("partition", "Partition classes of the training split into head/body/tail");
  auto* train = app.add_subcommand("train", "Train the peers and save the model");

  auto* predict = app.add_subcommand("predict", "Write per-peer predictions for the test split");
  std::string model_path;
  predict->add_option("--model", model_path, "Model file written by train")->required()->check(CLI::ExistingFile);

  auto* vote = app.add_subcommand("vote", "Replay a prediction file through consensus voting");
  std::string predictions_path;
  std::vector<std::size_t> peer_subset;
  std::vector<int> vote_ks = {20, 50, 100};
  std::string vote_partition;
  double minority_penalty = 1.0;
  vote->add_option("--predictions", predictions_path, "Prediction file (JSON Lines)")
      ->required()
      ->check(CLI::ExistingFile);
  vote->add_option("--peers-subset", peer_subset, "Peer indices that take part in the vote")->delimiter(',');
  vote->add_option("--ks", vote_ks, "Recall cutoffs")->delimiter(',');
  vote->add_option("--partition", vote_partition, "Partition file for group statistics")->check(CLI::ExistingFile);
  vote->add_option("--minority-penalty", minority_penalty, "Score multiplier for single-voter labels")
      ->check(CLI::Range(0.0, 1.0));

  auto* evaluate = app.add_subcommand("evaluate", "Compute recall metrics for a scored-results file");
  std::string results_path;
  std::vector<int> eval_ks = {20, 50, 100};
  std::string eval_partition;
  evaluate->add_option("--results", results_path, "Scored results (JSON Lines)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--ks", eval_ks, "Recall cutoffs")->delimiter(',');
  evaluate->add_option("--partition", eval_partition, "Partition file for group statistics")
      ->check(CLI::ExistingFile);

  auto* experiment = app.add_subcommand("experiment", "Run the full pipeline and write reports");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      const auto path = pscv::cmd_generate(load_config(g));
      std::cout << "wrote " << path.string() << '\n';
    } else if (partition->parsed()) {
      const auto config = load_config(g);
      const auto p = pscv::cmd_partition(config);
      for (pscv::Group group : pscv::kAllGroups) {
        std::cout << pscv::group_name(group) << ':';
        for (int c : p.members(group)) std::cout << ' ' << c;
        std::cout << '\n';
      }
      std::cout << "thresholds: t_head=" << p.t_head << " t_body=" << p.t_body << '\n';
    } else if (train->parsed()) {
      const auto config = load_config(g);
      const auto result = pscv::cmd_train(config);
      std::cout << "trained " << result.ensemble.peers.size() << " peers; final total loss "
                << result.total_history.back() << "\nwrote " << (config.output_dir / "model.txt").string() << '\n';
    } else if (predict->parsed()) {
      const auto config = load_config(g);
      const auto records = pscv::cmd_predict(config, model_path);
      std::cout << "wrote " << records.size() << " records to "
                << (config.output_dir / "predictions.jsonl").string() << '\n';
    } else if (vote->parsed()) {
      pscv::VoteRequest request;
      request.predictions = predictions_path;
      request.peer_subset = peer_subset;
      request.ks = vote_ks;
      if (!vote_partition.empty()) request.partition = vote_partition;
      request.options.minority_penalty = minority_penalty;
      request.output_dir = g.out.empty() ? "pscv_out" : g.out;
      print_report(pscv::cmd_vote(request));
    } else if (evaluate->parsed()) {
      pscv::EvaluateRequest request;
      request.results = results_path;
      request.ks = eval_ks;
      if (!eval_partition.empty()) request.partition = eval_partition;
      request.output_dir = g.out.empty() ? "pscv_out" : g.out;
      print_report(pscv::cmd_evaluate(request));
    } else if (experiment->parsed()) {
      const auto config = load_config(g);
      const auto result = pscv::cmd_experiment(config);
      std::cout << pscv::format_summary_csv(result.rows(), config.ks);
    }
  } catch (const pscv::StageError& e) {
    std::cerr << "pscv: stage " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pscv: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
