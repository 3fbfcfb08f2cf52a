#include "pscv/voting.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pscv/error.hpp"

namespace pscv {

VoteInput VoteInput::from_predictions(std::span<const PeerPrediction> predictions) {
  VoteInput in;
  in.labels.reserve(predictions.size());
  in.scores.reserve(predictions.size());
  for (const auto& p : predictions) {
    in.labels.push_back(p.label);
    in.scores.push_back(p.confidence);
  }
  return in;
}

void VoteInput::validate() const {
  if (labels.empty()) throw InputError("vote: no peer predictions");
  if (labels.size() != scores.size()) throw InputError("vote: label and score lists differ in length");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i]) || !(scores[i] > 0.0) || scores[i] > 1.0) {
      throw InputError("vote: score of peer " + std::to_string(i) + " is outside (0, 1]");
    }
  }
}

VoteTally tally(const VoteInput& input) {
  if (input.labels.empty()) throw InputError("tally: no peer predictions");
  VoteTally counts;
  for (int label : input.labels) {
    auto it = std::find_if(counts.begin(), counts.end(), [label](const auto& kv) { return kv.first == label; });
    if (it == counts.end()) {
      counts.emplace_back(label, 1);
    } else {
      ++it->second;
    }
  }
  return counts;
}

VoteResult consensus_vote(const VoteInput& input, const VoteOptions& options) {
  input.validate();
  if (!(options.minority_penalty > 0.0 && options.minority_penalty <= 1.0)) {
    throw ConfigError("vote: minority_penalty must lie in (0, 1]");
  }
  const auto& labels = input.labels;
  const auto& scores = input.scores;
  const auto n = static_cast<int>(labels.size());

  double max_score = 0.0;
  int max_label = 0;
  for (const auto& [label, votes] : tally(input)) {
    if (votes == n) {
      return {label, *std::max_element(scores.begin(), scores.end())};
    }
    if (votes > 1) {
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != label) continue;
        const double vote_score = scores[i];
        if (vote_score > max_score) {
          max_score = vote_score;
          max_label = labels[i];
        }
      }
    } else {
      const auto first = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), label) - labels.begin());
      const double vote_score = scores[first] * options.minority_penalty;
      if (vote_score > max_score) {
        max_score = vote_score;
        max_label = label;
      }
    }
  }
  return {max_label, max_score};
}

std::vector<VoteResult> batch_vote(std::span<const std::vector<PeerPrediction>> predictions,
                                   const VoteOptions& options) {
  std::vector<VoteResult> out;
  out.reserve(predictions.size());
  for (const auto& peers : predictions) out.push_back(consensus_vote(VoteInput::from_predictions(peers), options));
  return out;
}

}  // namespace pscv
