#include "pscv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pscv/error.hpp"
#include "text.hpp"

namespace pscv {

SceneResults::SceneResults(std::span<const ScoredPrediction> entries) {
  for (const auto& e : entries) add(e);
}

void SceneResults::add(const ScoredPrediction& entry) {
  scenes_[entry.scene_id].push_back(entry);
  ++count_;
}

std::vector<std::pair<ScoredPrediction, bool>> SceneResults::ranked(int k) const {
  if (k < 1) throw InputError("recall: K must be >= 1");
  std::vector<std::pair<ScoredPrediction, bool>> out;
  out.reserve(count_);
  std::vector<std::size_t> order;
  for (const auto& [scene, entries] : scenes_) {
    order.resize(entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return entries[a].score > entries[b].score; });
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      out.emplace_back(entries[order[rank]], rank < static_cast<std::size_t>(k));
    }
  }
  return out;
}

namespace {

bool is_hit(const std::pair<ScoredPrediction, bool>& entry) {
  return entry.second && entry.first.predicted == entry.first.truth;
}

}  // namespace

double recall_at_k(const SceneResults& results, int k) {
  if (results.empty()) throw InputError("recall: no results to evaluate");
  const auto ranked = results.ranked(k);
  const auto hits = std::count_if(ranked.begin(), ranked.end(), is_hit);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranked.size());
}

std::vector<std::optional<double>> per_class_recall_at_k(const SceneResults& results, int k, int num_classes) {
  if (results.empty()) throw InputError("recall: no results to evaluate");
  if (num_classes < 1) throw InputError("recall: num_classes must be positive");
  std::vector<std::int64_t> hits(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::int64_t> totals(static_cast<std::size_t>(num_classes), 0);
  for (const auto& entry : results.ranked(k)) {
    const int truth = entry.first.truth;
    if (truth < 0 || truth >= num_classes) {
      throw InputError("recall: ground-truth label " + std::to_string(truth) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
    ++totals[static_cast<std::size_t>(truth)];
    if (is_hit(entry)) ++hits[static_cast<std::size_t>(truth)];
  }
  std::vector<std::optional<double>> out(static_cast<std::size_t>(num_classes));
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (totals[c] > 0) out[c] = 100.0 * static_cast<double>(hits[c]) / static_cast<double>(totals[c]);
  }
  return out;
}

double mean_recall_at_k(const SceneResults& results, int k, int num_classes) {
  const auto per_class = per_class_recall_at_k(results, k, num_classes);
  double sum = 0.0;
  int present = 0;
  for (const auto& r : per_class) {
    if (r) {
      sum += *r;
      ++present;
    }
  }
  return sum / present;
}

double mean_metric(double mr50, double mr100, double r50, double r100) {
  for (double v : {mr50, mr100, r50, r100}) {
    if (!(v >= 0.0 && v <= 100.0)) throw InputError("mean_metric: inputs must lie in [0, 100]");
  }
  return (mr50 + mr100 + r50 + r100) / 4.0;
}

GroupReport group_report(std::span<const std::optional<double>> per_class_recall, const GroupPartition& partition) {
  if (static_cast<int>(per_class_recall.size()) != partition.num_classes()) {
    throw InputError("group_report: partition and recall vector cover different class counts");
  }
  GroupReport report;
  std::array<std::vector<double>, 3> members;
  for (std::size_t c = 0; c < per_class_recall.size(); ++c) {
    if (!per_class_recall[c]) {
      report.excluded.push_back(static_cast<int>(c));
      continue;
    }
    members[static_cast<std::size_t>(partition.group_of[c])].push_back(*per_class_recall[c]);
  }
  for (std::size_t g = 0; g < 3; ++g) {
    const auto& values = members[g];
    if (values.empty()) continue;
    const auto n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= n;
    report.groups[g] = GroupStat{mean, var, static_cast<int>(values.size())};
  }
  return report;
}

MetricsReport evaluate(const SceneResults& results, int num_classes, std::span<const int> ks,
                       const GroupPartition* partition, int group_k) {
  MetricsReport report;
  for (int k : ks) {
    report.recall_at[k] = recall_at_k(results, k);
    report.mean_recall_at[k] = mean_recall_at_k(results, k, num_classes);
  }
  const auto recall = [&](int k) {
    auto it = report.recall_at.find(k);
    return it != report.recall_at.end() ? it->second : recall_at_k(results, k);
  };
  const auto mean_recall = [&](int k) {
    auto it = report.mean_recall_at.find(k);
    return it != report.mean_recall_at.end() ? it->second : mean_recall_at_k(results, k, num_classes);
  };
  report.mean = mean_metric(mean_recall(50), mean_recall(100), recall(50), recall(100));
  report.group_k = group_k;
  report.per_class_recall = per_class_recall_at_k(results, group_k, num_classes);
  if (partition != nullptr) report.group_stats = group_report(report.per_class_recall, *partition);
  return report;
}

std::string format_report_text(const MetricsReport& report, const std::string& title) {
  std::ostringstream os;
  os << "== " << title << " ==\n";
  for (const auto& [k, r] : report.recall_at) {
    os << "R@" << k << "  " << text::format_fixed(r, 2) << "   mR@" << k << "  "
       << text::format_fixed(report.mean_recall_at.at(k), 2) << '\n';
  }
  os << "mean  " << text::format_fixed(report.mean, 2) << '\n';
  if (report.group_stats) {
    os << "groups (per-class recall @" << report.group_k << ")\n";
    for (Group g : kAllGroups) {
      const auto& stat = (*report.group_stats)[g];
      os << "  " << group_name(g) << ": ";
      if (stat) {
        os << "mean " << text::format_fixed(stat->mean, 2) << "  var " << text::format_fixed(stat->variance, 2)
           << "  classes " << stat->evaluated_classes << '\n';
      } else {
        os << "absent\n";
      }
    }
    if (!report.group_stats->excluded.empty()) {
      os << "  excluded (no ground truth):";
      for (int c : report.group_stats->excluded) os << ' ' << c;
      os << '\n';
    }
  }
  return os.str();
}

std::string format_report_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "row,key,recall,mean_recall,value,variance,classes\n";
  for (const auto& [k, r] : report.recall_at) {
    os << "recall," << k << ',' << text::format_fixed(r, 4) << ','
       << text::format_fixed(report.mean_recall_at.at(k), 4) << ",,,\n";
  }
  os << "mean,,,," << text::format_fixed(report.mean, 4) << ",,\n";
  if (report.group_stats) {
    for (Group g : kAllGroups) {
      const auto& stat = (*report.group_stats)[g];
      if (!stat) continue;
      os << "group," << group_name(g) << ",,," << text::format_fixed(stat->mean, 4) << ','
         << text::format_fixed(stat->variance, 4) << ',' << stat->evaluated_classes << '\n';
    }
    for (int c : report.group_stats->excluded) os << "excluded," << c << ",,,,,\n";
  }
  return os.str();
}

}  // namespace pscv
