#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "pscv/dataset.hpp"
#include "pscv/losses.hpp"
#include "pscv/predictions.hpp"
#include "pscv/taxonomy.hpp"
#include "pscv/voting.hpp"

namespace pscv {

/// Group assignment, loss and objective weight of one peer.
struct PeerSpec {
  GroupSet groups;
  LossSpec loss = CrossEntropySpec{};
  double alpha = 1.0;
};

struct PeerConfig {
  std::vector<PeerSpec> peers;

  /// One peer per token of `spec`, all sharing `loss` and `alpha`.
  static PeerConfig from_string(std::string_view spec, const LossSpec& loss = CrossEntropySpec{},
                                double alpha = 1.0);

  /// 1..4 peers, nonempty group sets, alpha > 0, valid loss parameters.
  void validate() const;
};

struct TrainParams {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 0.1;
  double weight_decay = 0.0;
  double momentum = 0.0;
  /// 0 for a linear head, otherwise width of one ReLU hidden layer.
  int hidden_units = 0;
  /// Train peers on separate threads. Results do not depend on this.
  bool parallel = false;

  void validate() const;
};

/// Affine map, one row of `weights` per output.
struct DenseLayer {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weights.rows() == b.weights.rows() && a.weights.cols() == b.weights.cols() &&
           a.weights == b.weights && a.bias.size() == b.bias.size() && a.bias == b.bias;
  }
};

/// Classification head over one subset of classes.
struct PeerModel {
  /// Ascending global class ids; logit j belongs to class_subset[j].
  std::vector<int> class_subset;
  /// Training instance count per subset class, used to bind LDAM margins
  /// and class-balanced weights.
  std::vector<std::int64_t> subset_counts;
  std::optional<DenseLayer> hidden;
  DenseLayer output;
  LossSpec loss = CrossEntropySpec{};
  double alpha = 1.0;

  int feature_dim() const noexcept;
  /// Throws InputError on inconsistent shapes.
  void validate() const;
  /// Logits over class_subset.
  Eigen::VectorXd logits(std::span<const double> x) const;
  BoundLoss bound_loss() const { return BoundLoss(loss, subset_counts); }

  friend bool operator==(const PeerModel&, const PeerModel&) = default;
};

struct Ensemble {
  std::vector<PeerModel> peers;
  GroupPartition partition;
  int num_classes = 0;
  int feature_dim = 0;

  friend bool operator==(const Ensemble&, const Ensemble&) = default;
};

/// Rows of a dataset that one peer trains on, with labels re-indexed into
/// the peer's class subset.
struct PeerView {
  std::vector<int> class_subset;
  std::vector<std::size_t> rows;
  std::vector<int> local_labels;
  /// Instances per subset class within the view.
  std::vector<std::int64_t> subset_counts;
};

/// Throws ConfigError when no instance falls in `groups`.
PeerView peer_targets(const LabeledDataset& dataset, const GroupPartition& partition, GroupSet groups);

/// Gradient of a peer's objective with the same shapes as its parameters.
struct PeerGradient {
  std::optional<DenseLayer> hidden;
  DenseLayer output;
};

/// alpha * mean loss over `positions` (indices into view.rows). Writes the
/// gradient of that quantity when `gradient` is non-null.
double peer_objective(const PeerModel& model, const BoundLoss& loss, const LabeledDataset& dataset,
                      const PeerView& view, std::span<const std::size_t> positions,
                      PeerGradient* gradient = nullptr);

/// Objective over the whole view.
double peer_objective(const PeerModel& model, const BoundLoss& loss, const LabeledDataset& dataset,
                      const PeerView& view);

struct TotalLoss {
  /// alpha_i * mean loss of peer i over the rows that fall in its view
  /// (0 when none do).
  std::vector<double> per_peer;
  double total = 0.0;
};

/// Sum over peers of the alpha-weighted loss on a batch of labeled rows.
TotalLoss total_loss(const Ensemble& ensemble, const LabeledDataset& batch);

struct TrainOptions {
  /// Accept peer configs that leave some class without any peer.
  bool allow_uncovered_classes = false;
};

struct TrainResult {
  Ensemble ensemble;
  /// loss_history[i][e]: alpha-weighted full-view loss of peer i after e
  /// epochs (e = 0 is the initialization).
  std::vector<std::vector<double>> loss_history;
  /// Per epoch, the sum over peers.
  std::vector<double> total_history;
};

/// Mini-batch gradient descent (optional momentum and L2 weight decay) for
/// every peer on its own view. Peer i draws its initialization and batch
/// order from a generator seeded `seed + i`. Throws TrainingError on a
/// non-finite loss.
TrainResult train_ensemble(const LabeledDataset& dataset, const PeerConfig& config, const GroupPartition& partition,
                           const TrainParams& params, std::uint64_t seed, const TrainOptions& options = {});

/// Softmax argmax over the peer's subset; ties go to the lowest class id.
PeerPrediction peer_predict(const PeerModel& peer, std::span<const double> x);

/// One prediction per peer, in peer order.
std::vector<PeerPrediction> ensemble_predict(const Ensemble& ensemble, std::span<const double> x);

/// ensemble_predict for every row, packaged with ground truth.
std::vector<PredictionRecord> predict_dataset(const Ensemble& ensemble, const LabeledDataset& dataset);

}  // namespace pscv
