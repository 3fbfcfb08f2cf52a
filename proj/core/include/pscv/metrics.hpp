#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pscv/taxonomy.hpp"

namespace pscv {

/// One ground-truth relation and the prediction made for it.
struct ScoredPrediction {
  std::int64_t instance_id = 0;
  std::int64_t scene_id = 0;
  int truth = 0;
  int predicted = 0;
  double score = 0.0;

  friend bool operator==(const ScoredPrediction&, const ScoredPrediction&) = default;
};

/// Predictions grouped by scene. Within a scene entries keep insertion order,
/// which breaks score ties when ranking.
class SceneResults {
 public:
  SceneResults() = default;
  explicit SceneResults(std::span<const ScoredPrediction> entries);

  void add(const ScoredPrediction& entry);

  bool empty() const noexcept { return scenes_.empty(); }
  std::size_t size() const noexcept { return count_; }
  const std::map<std::int64_t, std::vector<ScoredPrediction>>& scenes() const noexcept { return scenes_; }

  /// Every entry flagged with whether it ranks within the top K of its scene
  /// (score descending, stable).
  std::vector<std::pair<ScoredPrediction, bool>> ranked(int k) const;

 private:
  std::map<std::int64_t, std::vector<ScoredPrediction>> scenes_;
  std::size_t count_ = 0;
};

/// 100 * (top-K correct entries) / (all entries). Throws InputError when
/// `results` is empty or K < 1.
double recall_at_k(const SceneResults& results, int k);

/// Per-class recall at K; nullopt for classes absent from the ground truth.
std::vector<std::optional<double>> per_class_recall_at_k(const SceneResults& results, int k, int num_classes);

/// Unweighted average of per_class_recall_at_k over present classes.
double mean_recall_at_k(const SceneResults& results, int k, int num_classes);

/// Average of mR@50, mR@100, R@50 and R@100. Throws InputError when an
/// input lies outside [0, 100].
double mean_metric(double mr50, double mr100, double r50, double r100);

struct GroupStat {
  double mean = 0.0;
  /// Population variance of the member-class recalls.
  double variance = 0.0;
  int evaluated_classes = 0;
};

struct GroupReport {
  /// Indexed by Group; nullopt when the group has no evaluable class.
  std::array<std::optional<GroupStat>, 3> groups;
  /// Classes without ground-truth entries, excluded from every group.
  std::vector<int> excluded;

  const std::optional<GroupStat>& operator[](Group g) const { return groups[static_cast<std::size_t>(g)]; }
};

GroupReport group_report(std::span<const std::optional<double>> per_class_recall, const GroupPartition& partition);

inline constexpr std::array<int, 3> kDefaultKs = {20, 50, 100};

struct MetricsReport {
  std::map<int, double> recall_at;
  std::map<int, double> mean_recall_at;
  double mean = 0.0;
  int group_k = 100;
  std::vector<std::optional<double>> per_class_recall;
  std::optional<GroupReport> group_stats;
};

/// R@K and mR@K for every K in `ks`, the four-number mean (which always
/// uses K = 50 and 100) and per-class recall at `group_k`. Group statistics
/// are filled in when a partition is given.
MetricsReport evaluate(const SceneResults& results, int num_classes, std::span<const int> ks = kDefaultKs,
                       const GroupPartition* partition = nullptr, int group_k = 100);

/// Human-readable multi-line report.
std::string format_report_text(const MetricsReport& report, const std::string& title);

/// Flat CSV with columns `row,key,recall,mean_recall,value,variance,classes`.
/// Rows: `recall,<K>` per K; `mean,`; `group,<head|body|tail>` per evaluable
/// group; `excluded,<class>` per class without ground truth.
std::string format_report_csv(const MetricsReport& report);

}  // namespace pscv
