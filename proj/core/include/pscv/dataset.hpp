#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace pscv {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Relation instances with precomputed feature vectors, one row per instance.
/// Columns of the parallel arrays line up with rows of `features`.
struct LabeledDataset {
  int num_classes = 0;
  int feature_dim = 0;
  std::vector<std::int64_t> instance_ids;
  std::vector<std::int64_t> scene_ids;
  std::vector<int> labels;
  FeatureMatrix features;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }

  /// Throws InputError when array lengths disagree, a label is out of range
  /// or a feature is non-finite.
  void validate() const;

  /// Rows `rows` in the given order.
  LabeledDataset select(std::span<const std::size_t> rows) const;

  friend bool operator==(const LabeledDataset& a, const LabeledDataset& b);
};

}  // namespace pscv
