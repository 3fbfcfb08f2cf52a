#pragma once

#include <span>
#include <utility>
#include <vector>

namespace pscv {

/// One peer's vote: a class id and the peer's softmax confidence in it.
struct PeerPrediction {
  int label = 0;
  double confidence = 0.0;

  friend bool operator==(const PeerPrediction&, const PeerPrediction&) = default;
};

/// Labels and scores of the n peers, in peer order.
struct VoteInput {
  std::vector<int> labels;
  std::vector<double> scores;

  static VoteInput from_predictions(std::span<const PeerPrediction> predictions);

  /// Throws InputError unless both lists have the same length n >= 1 and
  /// every score is finite and in (0, 1].
  void validate() const;
};

struct VoteResult {
  int label = 0;
  double score = 0.0;

  friend bool operator==(const VoteResult&, const VoteResult&) = default;
};

/// (label, vote count) in order of each label's first appearance.
using VoteTally = std::vector<std::pair<int, int>>;

VoteTally tally(const VoteInput& input);

struct VoteOptions {
  /// Multiplier on the score of a label backed by a single peer. 1 leaves
  /// the algorithm unchanged; values in (0, 1) penalize minority opinions.
  double minority_penalty = 1.0;
};

/// Consensus voting over the peers' (label, confidence) pairs.
///
/// Walks the tally in first-occurrence order keeping a running best
/// (score, label), initially (0.0, 0):
///   - a label voted by every peer returns immediately with max(scores);
///   - a label with several voters offers each voter's score in peer order;
///   - a label with one voter offers that voter's score.
/// A candidate replaces the best only if strictly greater, so on equal
/// scores the label processed first is kept.
///
/// A confident singleton can therefore beat the best voter of a majority
/// label; the counts only decide the unanimous shortcut.
VoteResult consensus_vote(const VoteInput& input, const VoteOptions& options = {});

/// consensus_vote applied to each instance, order preserved.
std::vector<VoteResult> batch_vote(std::span<const std::vector<PeerPrediction>> predictions,
                                   const VoteOptions& options = {});

}  // namespace pscv
