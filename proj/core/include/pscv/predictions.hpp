#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "pscv/metrics.hpp"
#include "pscv/voting.hpp"

namespace pscv {

/// One instance's ground truth and the votes of n peers.
struct PredictionRecord {
  std::int64_t instance_id = 0;
  std::int64_t scene_id = 0;
  int truth = 0;
  std::vector<PeerPrediction> votes;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

// Peer prediction files are JSON Lines. An optional first line
//   {"format":"pscv-predictions","version":1}
// is followed by one record per line:
//   {"instance_id":12,"scene_id":3,"truth":4,
//    "votes":[{"label":4,"confidence":0.83},{"label":9,"confidence":0.61}]}
// `scene_id` defaults to 0. Blank lines are skipped. An empty file is an
// empty list.

std::vector<PredictionRecord> read_predictions(std::istream& in);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);
void write_predictions(std::span<const PredictionRecord> records, std::ostream& out);
void save_predictions(std::span<const PredictionRecord> records, const std::filesystem::path& path);

// Scored result files (one final prediction per instance) follow the same
// layout with header format "pscv-scored" and records
//   {"instance_id":12,"scene_id":3,"truth":4,"label":4,"score":0.83}

std::vector<ScoredPrediction> read_scored(std::istream& in);
std::vector<ScoredPrediction> load_scored(const std::filesystem::path& path);
void write_scored(std::span<const ScoredPrediction> results, std::ostream& out);
void save_scored(std::span<const ScoredPrediction> results, const std::filesystem::path& path);

}  // namespace pscv
