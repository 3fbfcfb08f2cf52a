#include "pscv/peers.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <string>

#include "pscv/error.hpp"
#include "pscv/random.hpp"

namespace pscv {

PeerConfig PeerConfig::from_string(std::string_view spec, const LossSpec& loss, double alpha) {
  PeerConfig config;
  for (GroupSet groups : parse_peer_config(spec)) config.peers.push_back(PeerSpec{groups, loss, alpha});
  return config;
}

void PeerConfig::validate() const {
  if (peers.empty() || peers.size() > kMaxPeers) {
    throw ConfigError("peer config: expected 1 to " + std::to_string(kMaxPeers) + " peers, got " +
                      std::to_string(peers.size()));
  }
  for (std::size_t i = 0; i < peers.size(); ++i) {
    if (peers[i].groups.empty()) throw ConfigError("peer " + std::to_string(i) + ": empty group set");
    if (!(peers[i].alpha > 0.0) || !std::isfinite(peers[i].alpha)) {
      throw ConfigError("peer " + std::to_string(i) + ": alpha must be > 0");
    }
    pscv::validate(peers[i].loss);
  }
}

void TrainParams::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train: learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
  if (hidden_units < 0) throw ConfigError("train: hidden_units must be >= 0");
}

int PeerModel::feature_dim() const noexcept {
  return static_cast<int>(hidden ? hidden->weights.cols() : output.weights.cols());
}

void PeerModel::validate() const {
  const auto k = static_cast<Eigen::Index>(class_subset.size());
  if (k == 0) throw InputError("peer model: empty class subset");
  if (!std::is_sorted(class_subset.begin(), class_subset.end()) ||
      std::adjacent_find(class_subset.begin(), class_subset.end()) != class_subset.end()) {
    throw InputError("peer model: class subset must be strictly ascending");
  }
  if (subset_counts.size() != class_subset.size()) throw InputError("peer model: one count per subset class expected");
  if (output.weights.rows() != k || output.bias.size() != k) {
    throw InputError("peer model: output layer rows differ from the class subset size");
  }
  if (hidden) {
    if (hidden->bias.size() != hidden->weights.rows()) throw InputError("peer model: hidden bias size mismatch");
    if (output.weights.cols() != hidden->weights.rows()) {
      throw InputError("peer model: output layer width differs from hidden layer size");
    }
  }
  if (!(alpha > 0.0)) throw InputError("peer model: alpha must be > 0");
}

Eigen::VectorXd PeerModel::logits(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != feature_dim()) {
    throw InputError("peer: feature vector has " + std::to_string(x.size()) + " entries, expected " +
                     std::to_string(feature_dim()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("peer: non-finite feature value");
  }
  const Eigen::Map<const Eigen::VectorXd> input(x.data(), static_cast<Eigen::Index>(x.size()));
  if (!hidden) return output.weights * input + output.bias;
  const Eigen::VectorXd h = (hidden->weights * input + hidden->bias).cwiseMax(0.0);
  return output.weights * h + output.bias;
}

PeerView peer_targets(const LabeledDataset& dataset, const GroupPartition& partition, GroupSet groups) {
  if (partition.num_classes() != dataset.num_classes) {
    throw InputError("peer_targets: partition covers " + std::to_string(partition.num_classes()) +
                     " classes, dataset has " + std::to_string(dataset.num_classes));
  }
  PeerView view;
  view.class_subset = peer_class_subset(partition, groups);
  std::vector<int> local_of(static_cast<std::size_t>(dataset.num_classes), -1);
  for (std::size_t j = 0; j < view.class_subset.size(); ++j) {
    local_of[static_cast<std::size_t>(view.class_subset[j])] = static_cast<int>(j);
  }
  view.subset_counts.assign(view.class_subset.size(), 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int local = local_of.at(static_cast<std::size_t>(dataset.labels[i]));
    if (local < 0) continue;
    view.rows.push_back(i);
    view.local_labels.push_back(local);
    ++view.subset_counts[static_cast<std::size_t>(local)];
  }
  if (view.rows.empty()) {
    throw ConfigError("peer_targets: no training instance belongs to groups '" + groups.to_string() + "'");
  }
  return view;
}

double peer_objective(const PeerModel& model, const BoundLoss& loss, const LabeledDataset& dataset,
                      const PeerView& view, std::span<const std::size_t> positions, PeerGradient* gradient) {
  const auto k = static_cast<Eigen::Index>(model.class_subset.size());
  const auto b = static_cast<Eigen::Index>(positions.size());
  if (b == 0) throw InputError("peer_objective: empty batch");

  FeatureMatrix x(b, dataset.feature_dim);
  for (Eigen::Index r = 0; r < b; ++r) x.row(r) = dataset.features.row(static_cast<Eigen::Index>(view.rows[positions[r]]));

  Eigen::MatrixXd pre_hidden;
  Eigen::MatrixXd head_in;
  if (model.hidden) {
    pre_hidden = (x * model.hidden->weights.transpose()).rowwise() + model.hidden->bias.transpose();
    head_in = pre_hidden.cwiseMax(0.0);
  } else {
    head_in = x;
  }
  Eigen::MatrixXd logits = (head_in * model.output.weights.transpose()).rowwise() + model.output.bias.transpose();

  const double scale = model.alpha / static_cast<double>(b);
  Eigen::MatrixXd dlogits(b, k);
  double sum = 0.0;
  std::vector<double> row(static_cast<std::size_t>(k));
  for (Eigen::Index r = 0; r < b; ++r) {
    for (Eigen::Index j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = logits(r, j);
    const LossValue lv = loss(row, view.local_labels[positions[r]]);
    sum += lv.loss;
    for (Eigen::Index j = 0; j < k; ++j) dlogits(r, j) = scale * lv.grad[static_cast<std::size_t>(j)];
  }

  if (gradient != nullptr) {
    gradient->output.weights = dlogits.transpose() * head_in;
    gradient->output.bias = dlogits.colwise().sum().transpose();
    if (model.hidden) {
      Eigen::MatrixXd dhidden = dlogits * model.output.weights;
      dhidden = dhidden.cwiseProduct((pre_hidden.array() > 0.0).cast<double>().matrix());
      gradient->hidden = DenseLayer{dhidden.transpose() * x, dhidden.colwise().sum().transpose()};
    } else {
      gradient->hidden.reset();
    }
  }
  return scale * sum;
}

double peer_objective(const PeerModel& model, const BoundLoss& loss, const LabeledDataset& dataset,
                      const PeerView& view) {
  std::vector<std::size_t> all(view.rows.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return peer_objective(model, loss, dataset, view, all);
}

TotalLoss total_loss(const Ensemble& ensemble, const LabeledDataset& batch) {
  TotalLoss out;
  for (const auto& peer : ensemble.peers) {
    PeerView view;
    view.class_subset = peer.class_subset;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto it = std::lower_bound(peer.class_subset.begin(), peer.class_subset.end(), batch.labels[i]);
      if (it == peer.class_subset.end() || *it != batch.labels[i]) continue;
      view.rows.push_back(i);
      view.local_labels.push_back(static_cast<int>(it - peer.class_subset.begin()));
    }
    const double value = view.rows.empty() ? 0.0 : peer_objective(peer, peer.bound_loss(), batch, view);
    out.per_peer.push_back(value);
    out.total += value;
  }
  return out;
}

namespace {

DenseLayer random_layer(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  DenseLayer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd::Zero(rows)};
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = stddev * rng.normal();
  }
  return layer;
}

void sgd_step(DenseLayer& param, DenseLayer& velocity, const DenseLayer& grad, const TrainParams& p) {
  velocity.weights = p.momentum * velocity.weights + grad.weights + p.weight_decay * param.weights;
  velocity.bias = p.momentum * velocity.bias + grad.bias;
  param.weights -= p.learning_rate * velocity.weights;
  param.bias -= p.learning_rate * velocity.bias;
}

DenseLayer zeros_like(const DenseLayer& layer) {
  return DenseLayer{Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                    Eigen::VectorXd::Zero(layer.bias.size())};
}

struct PeerRun {
  PeerModel model;
  std::vector<double> history;
};

PeerRun train_peer(const LabeledDataset& dataset, const PeerSpec& spec, const GroupPartition& partition,
                   const TrainParams& params, std::uint64_t seed, int peer_index) {
  const PeerView view = peer_targets(dataset, partition, spec.groups);
  Rng rng(seed + static_cast<std::uint64_t>(peer_index));

  PeerModel model;
  model.class_subset = view.class_subset;
  model.subset_counts = view.subset_counts;
  model.loss = spec.loss;
  model.alpha = spec.alpha;
  const auto k = static_cast<Eigen::Index>(view.class_subset.size());
  const auto d = static_cast<Eigen::Index>(dataset.feature_dim);
  if (params.hidden_units > 0) {
    const auto h = static_cast<Eigen::Index>(params.hidden_units);
    model.hidden = random_layer(rng, h, d, std::sqrt(2.0 / static_cast<double>(d)));
    model.output = random_layer(rng, k, h, 0.01);
  } else {
    model.output = random_layer(rng, k, d, 0.01);
  }
  const BoundLoss loss = model.bound_loss();

  PeerRun run;
  const auto diverged = [&](int epoch) {
    return TrainingError("training diverged: peer " + std::to_string(peer_index) + " reached a non-finite loss in epoch " +
                             std::to_string(epoch),
                         epoch, peer_index);
  };
  // Overflowing parameters surface either as a non-finite value or as a
  // NumericError from the loss on non-finite logits.
  const auto objective = [&](std::span<const std::size_t> positions, PeerGradient* g, int epoch) {
    double value = 0.0;
    try {
      value = positions.empty() ? peer_objective(model, loss, dataset, view)
                                : peer_objective(model, loss, dataset, view, positions, g);
    } catch (const NumericError&) {
      throw diverged(epoch);
    }
    if (!std::isfinite(value)) throw diverged(epoch);
    return value;
  };
  run.history.push_back(objective({}, nullptr, 0));

  DenseLayer out_velocity = zeros_like(model.output);
  std::optional<DenseLayer> hidden_velocity;
  if (model.hidden) hidden_velocity = zeros_like(*model.hidden);

  std::vector<std::size_t> order(view.rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(params.batch_size);
  PeerGradient grad;
  for (int epoch = 1; epoch <= params.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      objective(std::span<const std::size_t>(order).subspan(start, len), &grad, epoch);
      sgd_step(model.output, out_velocity, grad.output, params);
      if (model.hidden) sgd_step(*model.hidden, *hidden_velocity, *grad.hidden, params);
    }
    run.history.push_back(objective({}, nullptr, epoch));
  }
  run.model = std::move(model);
  return run;
}

}  // namespace

TrainResult train_ensemble(const LabeledDataset& dataset, const PeerConfig& config, const GroupPartition& partition,
                           const TrainParams& params, std::uint64_t seed, const TrainOptions& options) {
  config.validate();
  params.validate();
  dataset.validate();
  if (partition.num_classes() != dataset.num_classes) {
    throw ConfigError("train: partition covers " + std::to_string(partition.num_classes()) +
                      " classes, dataset has " + std::to_string(dataset.num_classes));
  }
  if (!options.allow_uncovered_classes) {
    GroupSet covered;
    for (const auto& p : config.peers) covered = covered | p.groups;
    for (int c = 0; c < partition.num_classes(); ++c) {
      const Group g = partition.group_of[static_cast<std::size_t>(c)];
      if (!covered.contains(g)) {
        throw ConfigError("train: class " + std::to_string(c) + " (" + std::string(group_name(g)) +
                          ") is not covered by any peer");
      }
    }
  }

  const auto n = config.peers.size();
  std::vector<PeerRun> runs(n);
  if (params.parallel && n > 1) {
    std::vector<std::future<PeerRun>> jobs;
    for (std::size_t i = 0; i < n; ++i) {
      jobs.push_back(std::async(std::launch::async, [&, i] {
        return train_peer(dataset, config.peers[i], partition, params, seed, static_cast<int>(i));
      }));
    }
    for (std::size_t i = 0; i < n; ++i) runs[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      runs[i] = train_peer(dataset, config.peers[i], partition, params, seed, static_cast<int>(i));
    }
  }

  TrainResult result;
  result.ensemble.partition = partition;
  result.ensemble.num_classes = dataset.num_classes;
  result.ensemble.feature_dim = dataset.feature_dim;
  result.total_history.assign(static_cast<std::size_t>(params.epochs) + 1, 0.0);
  for (auto& run : runs) {
    for (std::size_t e = 0; e < run.history.size(); ++e) result.total_history[e] += run.history[e];
    result.loss_history.push_back(std::move(run.history));
    result.ensemble.peers.push_back(std::move(run.model));
  }
  return result;
}

PeerPrediction peer_predict(const PeerModel& peer, std::span<const double> x) {
  const Eigen::VectorXd z = peer.logits(x);
  const std::vector<double> p = softmax(std::span<const double>(z.data(), static_cast<std::size_t>(z.size())));
  std::size_t best = 0;
  for (std::size_t j = 1; j < p.size(); ++j) {
    if (p[j] > p[best]) best = j;
  }
  return PeerPrediction{peer.class_subset[best], p[best]};
}

std::vector<PeerPrediction> ensemble_predict(const Ensemble& ensemble, std::span<const double> x) {
  std::vector<PeerPrediction> out;
  out.reserve(ensemble.peers.size());
  for (const auto& peer : ensemble.peers) out.push_back(peer_predict(peer, x));
  return out;
}

std::vector<PredictionRecord> predict_dataset(const Ensemble& ensemble, const LabeledDataset& dataset) {
  std::vector<PredictionRecord> out;
  out.reserve(dataset.size());
  std::vector<double> x(static_cast<std::size_t>(dataset.feature_dim));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto row = dataset.features.row(static_cast<Eigen::Index>(i));
    for (std::size_t d = 0; d < x.size(); ++d) x[d] = row(static_cast<Eigen::Index>(d));
    out.push_back(PredictionRecord{dataset.instance_ids[i], dataset.scene_ids[i], dataset.labels[i],
                                   ensemble_predict(ensemble, x)});
  }
  return out;
}

}  // namespace pscv
