#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>

#include "pscv/dataset.hpp"
#include "pscv/taxonomy.hpp"

namespace pscv {

/// Parameters of the synthetic long-tailed generator.
struct ZipfSpec {
  int num_classes = 20;
  double zipf_exponent = 2.0;
  std::int64_t instances_total = 10000;
  std::int64_t scene_size_min = 8;
  std::int64_t scene_size_max = 32;
  int feature_dim = 16;
  /// Distance of each class mean from the origin.
  double class_separation = 3.0;
  double noise_scale = 1.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError for degenerate or infeasible settings.
  void validate() const;
};

/// Zipf class probabilities p_c proportional to 1 / (c + 1)^s.
std::vector<double> zipf_probabilities(int num_classes, double exponent);

/// Draw order, fixed so a seed pins the output exactly:
///   1. class means: per class, feature_dim normals, normalized and scaled;
///   2. per instance: one uniform for the label, then feature_dim normals;
///   3. scene sizes, uniform in [scene_size_min, scene_size_max], assigned
///      to consecutive instances. The last scene holds the remainder and may
///      be smaller than scene_size_min.
/// Instance ids are 0..N-1.
LabeledDataset generate_dataset(const ZipfSpec& spec);

/// Dataset text format, version 1:
///   pscv-dataset 1 <num_classes> <feature_dim> <num_instances>
///   <instance_id> <scene_id> <label> <f_1> ... <f_D>      (one line per instance)
/// Values are whitespace separated; doubles use shortest round-trip form.
void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path);
void write_dataset(const LabeledDataset& dataset, std::ostream& out);

/// Throws ParseError (position = 1-based line) on malformed or truncated
/// input and InputError when a record disagrees with the header schema.
LabeledDataset load_dataset(const std::filesystem::path& path);
LabeledDataset read_dataset(std::istream& in);

/// Stratified split. Within each class the rows are shuffled and
/// round(test_fraction * n_c) go to the test side, keeping at least one
/// row on each side when n_c >= 2; singleton classes stay in training.
/// Both outputs keep the original row order. Classes are visited in id
/// order, each consuming its own shuffle from one generator seeded `seed`.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& dataset, double test_fraction,
                                                        std::uint64_t seed);

/// Partition text format, version 1:
///   pscv-partition 1 <num_classes> <t_head> <t_body>
///   <class id> <count> <head|body|tail>           (one line per class, ascending)
void save_partition(const GroupPartition& partition, const FrequencyTable& freq, const std::filesystem::path& path);
void write_partition(const GroupPartition& partition, const FrequencyTable& freq, std::ostream& out);
GroupPartition load_partition(const std::filesystem::path& path);
GroupPartition read_partition(std::istream& in);

}  // namespace pscv
