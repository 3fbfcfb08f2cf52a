#include "pscv/experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pscv/error.hpp"
#include "pscv/model_io.hpp"
#include "pscv/predictions.hpp"
#include "text.hpp"

namespace pscv {

namespace {

using json = nlohmann::json;

void reject_unknown_keys(const json& object, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!object.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : object.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("config: unknown key '" + key + "' in '" + where + "'");
  }
}

LossSpec parse_loss(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"kind", "gamma", "s", "C", "beta"}, where);
  const LossKind kind = parse_loss_kind(j.at("kind").get<std::string>());
  LossSpec spec;
  switch (kind) {
    case LossKind::CrossEntropy: spec = CrossEntropySpec{}; break;
    case LossKind::Focal: spec = FocalSpec{j.value("gamma", FocalSpec{}.gamma)}; break;
    case LossKind::LDAM: {
      LdamSpec l;
      l.logit_scale = j.value("s", l.logit_scale);
      if (j.contains("C")) l.margin_scale = j.at("C").get<double>();
      spec = l;
      break;
    }
    case LossKind::ClassBalanced: spec = ClassBalancedSpec{j.value("beta", ClassBalancedSpec{}.beta)}; break;
  }
  validate(spec);
  return spec;
}

ZipfSpec parse_zipf(const json& j) {
  reject_unknown_keys(j,
                      {"num_classes", "zipf_exponent", "instances", "scene_size", "feature_dim", "class_separation",
                       "noise_scale", "seed"},
                      "dataset.generate");
  ZipfSpec z;
  z.num_classes = j.value("num_classes", z.num_classes);
  z.zipf_exponent = j.value("zipf_exponent", z.zipf_exponent);
  z.instances_total = j.value("instances", z.instances_total);
  if (j.contains("scene_size")) {
    const auto& range = j.at("scene_size");
    if (!range.is_array() || range.size() != 2) throw ConfigError("config: scene_size must be [min, max]");
    z.scene_size_min = range[0].get<std::int64_t>();
    z.scene_size_max = range[1].get<std::int64_t>();
  }
  z.feature_dim = j.value("feature_dim", z.feature_dim);
  z.class_separation = j.value("class_separation", z.class_separation);
  z.noise_scale = j.value("noise_scale", z.noise_scale);
  return z;
}

template <class F>
auto in_stage(const char* stage, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  out << contents;
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

void ensure_dir(const std::filesystem::path& dir) {
  in_stage("output", [&] {
    std::filesystem::create_directories(dir);
    return 0;
  });
}

std::string training_log_csv(const TrainResult& result) {
  std::ostringstream os;
  os << "epoch";
  for (std::size_t i = 0; i < result.loss_history.size(); ++i) os << ",peer" << i;
  os << ",total\n";
  for (std::size_t e = 0; e < result.total_history.size(); ++e) {
    os << e;
    for (const auto& h : result.loss_history) os << ',' << text::format_double(h[e]);
    os << ',' << text::format_double(result.total_history[e]) << '\n';
  }
  return os.str();
}

int infer_num_classes(std::span<const ScoredPrediction> results) {
  int n = 0;
  for (const auto& r : results) n = std::max({n, r.truth + 1, r.predicted + 1});
  return n;
}

}  // namespace

PeerConfig ExperimentConfig::peer_config() const {
  PeerConfig config = PeerConfig::from_string(peers, default_loss, 1.0);
  if (peer_losses.size() > config.peers.size() || alphas.size() > config.peers.size()) {
    throw ConfigError("config: per-peer settings list more peers than '" + peers + "' defines");
  }
  for (std::size_t i = 0; i < peer_losses.size(); ++i) {
    if (peer_losses[i]) config.peers[i].loss = *peer_losses[i];
  }
  for (std::size_t i = 0; i < alphas.size(); ++i) config.peers[i].alpha = alphas[i];
  config.validate();
  return config;
}

void ExperimentConfig::validate() const {
  if (generate.has_value() == dataset_path.has_value()) {
    throw ConfigError("config: give exactly one of dataset.generate or dataset.path");
  }
  if (generate) generate->validate();
  if (t_head.has_value() != t_body.has_value()) throw ConfigError("config: give both t_head and t_body, or neither");
  if (t_head && !(*t_head > *t_body && *t_body >= 0)) throw ConfigError("config: need t_head > t_body >= 0");
  peer_config();
  train.validate();
  if (ks.empty()) throw ConfigError("config: eval.ks is empty");
  for (int k : ks) {
    if (k < 1) throw ConfigError("config: every K must be >= 1");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("config: test_fraction must lie in (0, 1)");
  if (!(voting.minority_penalty > 0.0 && voting.minority_penalty <= 1.0)) {
    throw ConfigError("config: minority_penalty must lie in (0, 1]");
  }
}

ExperimentConfig parse_experiment_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    reject_unknown_keys(root,
                        {"seed", "output_dir", "dataset", "partition", "peers", "train", "eval", "voting",
                         "allow_uncovered_classes"},
                        "<root>");
    c.seed = root.value("seed", c.seed);
    if (root.contains("output_dir")) c.output_dir = root.at("output_dir").get<std::string>();
    c.allow_uncovered_classes = root.value("allow_uncovered_classes", false);

    if (root.contains("dataset")) {
      const auto& d = root.at("dataset");
      reject_unknown_keys(d, {"generate", "path"}, "dataset");
      if (d.contains("generate")) {
        c.generate = parse_zipf(d.at("generate"));
        c.generate->seed = d.at("generate").value("seed", c.seed);
      }
      if (d.contains("path")) c.dataset_path = d.at("path").get<std::string>();
    } else {
      c.generate = ZipfSpec{};
      c.generate->seed = c.seed;
    }

    if (root.contains("partition")) {
      const auto& p = root.at("partition");
      reject_unknown_keys(p, {"t_head", "t_body"}, "partition");
      if (p.contains("t_head")) c.t_head = p.at("t_head").get<std::int64_t>();
      if (p.contains("t_body")) c.t_body = p.at("t_body").get<std::int64_t>();
    }

    if (root.contains("peers")) {
      const auto& p = root.at("peers");
      reject_unknown_keys(p, {"spec", "loss", "per_peer"}, "peers");
      c.peers = p.value("spec", c.peers);
      if (p.contains("loss")) c.default_loss = parse_loss(p.at("loss"), "peers.loss");
      if (p.contains("per_peer")) {
        std::size_t i = 0;
        for (const auto& entry : p.at("per_peer")) {
          const std::string where = "peers.per_peer[" + std::to_string(i++) + "]";
          reject_unknown_keys(entry, {"loss", "alpha"}, where);
          c.peer_losses.push_back(entry.contains("loss") ? std::optional(parse_loss(entry.at("loss"), where))
                                                         : std::nullopt);
          c.alphas.push_back(entry.value("alpha", 1.0));
        }
      }
    }

    if (root.contains("train")) {
      const auto& t = root.at("train");
      reject_unknown_keys(t,
                          {"epochs", "batch_size", "learning_rate", "weight_decay", "momentum", "hidden_units",
                           "parallel"},
                          "train");
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
      c.train.momentum = t.value("momentum", c.train.momentum);
      c.train.hidden_units = t.value("hidden_units", c.train.hidden_units);
      c.train.parallel = t.value("parallel", c.train.parallel);
    }

    if (root.contains("eval")) {
      const auto& e = root.at("eval");
      reject_unknown_keys(e, {"ks", "test_fraction"}, "eval");
      if (e.contains("ks")) c.ks = e.at("ks").get<std::vector<int>>();
      c.test_fraction = e.value("test_fraction", c.test_fraction);
    }

    if (root.contains("voting")) {
      const auto& v = root.at("voting");
      reject_unknown_keys(v, {"minority_penalty"}, "voting");
      c.voting.minority_penalty = v.value("minority_penalty", 1.0);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str());
}

LabeledDataset resolve_dataset(const ExperimentConfig& config) {
  if (config.generate) return generate_dataset(*config.generate);
  if (!config.dataset_path) throw ConfigError("config: no dataset source");
  return load_dataset(*config.dataset_path);
}

PreparedData prepare_data(const ExperimentConfig& config) {
  PreparedData out;
  LabeledDataset all = in_stage("data", [&] { return resolve_dataset(config); });
  in_stage("data", [&] {
    auto [train, test] = split_dataset(all, config.test_fraction, config.seed);
    if (train.empty() || test.empty()) throw InputError("train/test split left one side empty");
    out.train = std::move(train);
    out.test = std::move(test);
    return 0;
  });
  in_stage("partition", [&] {
    out.train_freq = compute_frequencies(out.train);
    out.partition = config.t_head ? partition_classes(out.train_freq, *config.t_head, *config.t_body)
                                  : partition_by_tertiles(out.train_freq);
    return 0;
  });
  return out;
}

std::vector<SummaryRow> ExperimentResult::rows() const {
  std::vector<SummaryRow> out;
  out.push_back(baseline);
  out.insert(out.end(), peers.begin(), peers.end());
  out.push_back(ensemble);
  return out;
}

std::string format_summary_csv(const std::vector<SummaryRow>& rows, std::span<const int> ks) {
  std::ostringstream os;
  os << "model,config";
  for (int k : ks) os << ",mR@" << k;
  for (int k : ks) os << ",R@" << k;
  os << ",mean,head,body,tail\n";
  for (const auto& row : rows) {
    const auto& m = row.metrics;
    os << row.model << ',' << row.config;
    for (int k : ks) os << ',' << text::format_fixed(m.mean_recall_at.at(k), 4);
    for (int k : ks) os << ',' << text::format_fixed(m.recall_at.at(k), 4);
    os << ',' << text::format_fixed(m.mean, 4);
    for (Group g : kAllGroups) {
      os << ',';
      if (m.group_stats && (*m.group_stats)[g]) os << text::format_fixed((*m.group_stats)[g]->mean, 4);
    }
    os << '\n';
  }
  return os.str();
}

std::vector<ScoredPrediction> peer_results(std::span<const PredictionRecord> records, std::size_t peer) {
  std::vector<ScoredPrediction> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const auto& v = r.votes.at(peer);
    out.push_back(ScoredPrediction{r.instance_id, r.scene_id, r.truth, v.label, v.confidence});
  }
  return out;
}

std::vector<ScoredPrediction> voted_results(std::span<const PredictionRecord> records, const VoteOptions& options,
                                            std::span<const std::size_t> peer_subset) {
  std::vector<ScoredPrediction> out;
  out.reserve(records.size());
  std::vector<PeerPrediction> votes;
  for (const auto& r : records) {
    votes.clear();
    if (peer_subset.empty()) {
      votes = r.votes;
    } else {
      for (std::size_t i : peer_subset) {
        if (i >= r.votes.size()) {
          throw InputError("peer index " + std::to_string(i) + " out of range for instance " +
                           std::to_string(r.instance_id) + " with " + std::to_string(r.votes.size()) + " votes");
        }
        votes.push_back(r.votes[i]);
      }
    }
    const VoteResult vr = consensus_vote(VoteInput::from_predictions(votes), options);
    out.push_back(ScoredPrediction{r.instance_id, r.scene_id, r.truth, vr.label, vr.score});
  }
  return out;
}

std::filesystem::path cmd_generate(const ExperimentConfig& config) {
  const LabeledDataset ds = in_stage("generate", [&] {
    if (!config.generate) throw ConfigError("generate needs a dataset.generate section");
    return generate_dataset(*config.generate);
  });
  ensure_dir(config.output_dir);
  const auto path = config.output_dir / "dataset.txt";
  in_stage("write", [&] {
    save_dataset(ds, path);
    const FrequencyTable freq = compute_frequencies(ds);
    std::ostringstream os;
    os << "class count\n";
    for (int c = 0; c < freq.num_classes(); ++c) os << c << ' ' << freq.counts[static_cast<std::size_t>(c)] << '\n';
    write_file(config.output_dir / "frequencies.txt", os.str());
    return 0;
  });
  return path;
}

GroupPartition cmd_partition(const ExperimentConfig& config) {
  const PreparedData data = prepare_data(config);
  ensure_dir(config.output_dir);
  in_stage("write", [&] {
    save_partition(data.partition, data.train_freq, config.output_dir / "partition.txt");
    return 0;
  });
  return data.partition;
}

TrainResult cmd_train(const ExperimentConfig& config) {
  const PeerConfig peers = in_stage("config", [&] { return config.peer_config(); });
  const PreparedData data = prepare_data(config);
  TrainResult result = in_stage("train", [&] {
    return train_ensemble(data.train, peers, data.partition, config.train, config.seed,
                          TrainOptions{config.allow_uncovered_classes});
  });
  ensure_dir(config.output_dir);
  in_stage("write", [&] {
    save_ensemble(result.ensemble, config.output_dir / "model.txt");
    save_partition(data.partition, data.train_freq, config.output_dir / "partition.txt");
    write_file(config.output_dir / "training_log.csv", training_log_csv(result));
    return 0;
  });
  return result;
}

std::vector<PredictionRecord> cmd_predict(const ExperimentConfig& config, const std::filesystem::path& model_path) {
  const Ensemble ensemble = in_stage("load", [&] { return load_ensemble(model_path); });
  const PreparedData data = prepare_data(config);
  auto records = in_stage("predict", [&] {
    if (ensemble.feature_dim != data.test.feature_dim || ensemble.num_classes != data.test.num_classes) {
      throw InputError("model shape does not match the dataset");
    }
    return predict_dataset(ensemble, data.test);
  });
  ensure_dir(config.output_dir);
  in_stage("write", [&] {
    save_predictions(records, config.output_dir / "predictions.jsonl");
    return 0;
  });
  return records;
}

MetricsReport cmd_vote(const VoteRequest& request) {
  const auto records = in_stage("load", [&] { return load_predictions(request.predictions); });
  const auto partition = in_stage("load", [&] {
    return request.partition ? std::optional(load_partition(*request.partition)) : std::nullopt;
  });
  const auto voted = in_stage("vote", [&] {
    if (records.empty()) throw InputError("prediction file '" + request.predictions.string() + "' has no records");
    return voted_results(records, request.options, request.peer_subset);
  });
  const MetricsReport report = in_stage("evaluate", [&] {
    int num_classes = infer_num_classes(voted);
    for (const auto& r : records) {
      for (const auto& v : r.votes) num_classes = std::max(num_classes, v.label + 1);
    }
    if (partition) {
      if (partition->num_classes() < num_classes) throw InputError("partition covers fewer classes than the predictions");
      num_classes = partition->num_classes();
    }
    return evaluate(SceneResults(voted), num_classes, request.ks, partition ? &*partition : nullptr);
  });
  ensure_dir(request.output_dir);
  in_stage("write", [&] {
    save_scored(voted, request.output_dir / "voted.jsonl");
    write_file(request.output_dir / "report_vote.txt", format_report_text(report, "consensus vote"));
    write_file(request.output_dir / "report_vote.csv", format_report_csv(report));
    return 0;
  });
  return report;
}

MetricsReport cmd_evaluate(const EvaluateRequest& request) {
  const auto results = in_stage("load", [&] { return load_scored(request.results); });
  const auto partition = in_stage("load", [&] {
    return request.partition ? std::optional(load_partition(*request.partition)) : std::nullopt;
  });
  const MetricsReport report = in_stage("evaluate", [&] {
    if (results.empty()) throw InputError("results file '" + request.results.string() + "' has no records");
    int num_classes = infer_num_classes(results);
    if (partition) {
      if (partition->num_classes() < num_classes) throw InputError("partition covers fewer classes than the results");
      num_classes = partition->num_classes();
    }
    return evaluate(SceneResults(results), num_classes, request.ks, partition ? &*partition : nullptr);
  });
  ensure_dir(request.output_dir);
  in_stage("write", [&] {
    write_file(request.output_dir / "report_eval.txt", format_report_text(report, request.results.filename().string()));
    write_file(request.output_dir / "report_eval.csv", format_report_csv(report));
    return 0;
  });
  return report;
}

ExperimentResult cmd_experiment(const ExperimentConfig& config) {
  in_stage("config", [&] {
    config.validate();
    return 0;
  });
  const PeerConfig peers = in_stage("config", [&] { return config.peer_config(); });
  const PreparedData data = prepare_data(config);
  const TrainOptions options{config.allow_uncovered_classes};

  const TrainResult trained = in_stage("train", [&] {
    return train_ensemble(data.train, peers, data.partition, config.train, config.seed, options);
  });
  const TrainResult baseline = in_stage("train", [&] {
    PeerConfig single;
    single.peers.push_back(PeerSpec{GroupSet::all(), CrossEntropySpec{}, 1.0});
    return train_ensemble(data.train, single, data.partition, config.train, config.seed);
  });

  const auto records = in_stage("predict", [&] { return predict_dataset(trained.ensemble, data.test); });
  const auto baseline_records = in_stage("predict", [&] { return predict_dataset(baseline.ensemble, data.test); });
  const auto voted = in_stage("vote", [&] { return voted_results(records, config.voting); });

  ExperimentResult result;
  result.partition = data.partition;
  result.train_freq = data.train_freq;
  const int num_classes = data.test.num_classes;
  in_stage("evaluate", [&] {
    const auto eval = [&](std::span<const ScoredPrediction> r) {
      return evaluate(SceneResults(r), num_classes, config.ks, &data.partition);
    };
    result.baseline = SummaryRow{"baseline", "HBT", eval(peer_results(baseline_records, 0))};
    for (std::size_t i = 0; i < peers.peers.size(); ++i) {
      result.peers.push_back(
          SummaryRow{"peer" + std::to_string(i), peers.peers[i].groups.to_string(), eval(peer_results(records, i))});
    }
    result.ensemble = SummaryRow{"PSCV", format_peer_config(parse_peer_config(config.peers)), eval(voted)};
    return 0;
  });

  ensure_dir(config.output_dir);
  in_stage("write", [&] {
    const auto& dir = config.output_dir;
    save_ensemble(trained.ensemble, dir / "model.txt");
    save_partition(data.partition, data.train_freq, dir / "partition.txt");
    write_file(dir / "training_log.csv", training_log_csv(trained));
    save_predictions(records, dir / "predictions.jsonl");
    save_scored(voted, dir / "voted.jsonl");
    for (const auto& row : result.rows()) {
      const std::string stem = row.model == "PSCV" ? "report_pscv" : "report_" + row.model;
      write_file(dir / (stem + ".txt"), format_report_text(row.metrics, row.model + " [" + row.config + "]"));
      write_file(dir / (stem + ".csv"), format_report_csv(row.metrics));
    }
    write_file(dir / "summary.csv", format_summary_csv(result.rows(), config.ks));
    return 0;
  });
  return result;
}

}  // namespace pscv
