#include "pscv/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "pscv/error.hpp"
#include "pscv/random.hpp"
#include "text.hpp"

namespace pscv {

void LabeledDataset::validate() const {
  if (num_classes <= 0) throw InputError("dataset: num_classes must be positive");
  if (feature_dim <= 0) throw InputError("dataset: feature_dim must be positive");
  const std::size_t n = labels.size();
  if (instance_ids.size() != n || scene_ids.size() != n || static_cast<std::size_t>(features.rows()) != n) {
    throw InputError("dataset: instance arrays have mismatched lengths");
  }
  if (features.cols() != feature_dim) throw InputError("dataset: feature matrix width differs from feature_dim");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw InputError("dataset: instance " + std::to_string(instance_ids[i]) + " has label " +
                       std::to_string(labels[i]) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  if (!features.allFinite()) throw InputError("dataset: non-finite feature value");
}

LabeledDataset LabeledDataset::select(std::span<const std::size_t> rows) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.feature_dim = feature_dim;
  out.instance_ids.reserve(rows.size());
  out.scene_ids.reserve(rows.size());
  out.labels.reserve(rows.size());
  out.features.resize(static_cast<Eigen::Index>(rows.size()), feature_dim);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t r = rows[k];
    out.instance_ids.push_back(instance_ids.at(r));
    out.scene_ids.push_back(scene_ids.at(r));
    out.labels.push_back(labels.at(r));
    out.features.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(r));
  }
  return out;
}

bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
  return a.num_classes == b.num_classes && a.feature_dim == b.feature_dim && a.instance_ids == b.instance_ids &&
         a.scene_ids == b.scene_ids && a.labels == b.labels && a.features.rows() == b.features.rows() &&
         a.features.cols() == b.features.cols() && a.features == b.features;
}

void ZipfSpec::validate() const {
  if (num_classes < 3) throw ConfigError("zipf spec: num_classes must be >= 3");
  if (!(zipf_exponent > 0.0) || !std::isfinite(zipf_exponent)) throw ConfigError("zipf spec: exponent must be > 0");
  if (instances_total < num_classes) throw ConfigError("zipf spec: instances_total must be >= num_classes");
  if (feature_dim < 1) throw ConfigError("zipf spec: feature_dim must be >= 1");
  if (!(class_separation > 0.0)) throw ConfigError("zipf spec: class_separation must be > 0");
  if (!(noise_scale > 0.0)) throw ConfigError("zipf spec: noise_scale must be > 0");
  if (scene_size_min < 1 || scene_size_max < scene_size_min) {
    throw ConfigError("zipf spec: scene sizes need 1 <= min <= max (got " + std::to_string(scene_size_min) + ", " +
                      std::to_string(scene_size_max) + ")");
  }
  if (scene_size_min > instances_total) {
    throw ConfigError("zipf spec: minimum scene size exceeds the number of instances");
  }
}

std::vector<double> zipf_probabilities(int num_classes, double exponent) {
  std::vector<double> p(static_cast<std::size_t>(num_classes));
  double total = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    p[static_cast<std::size_t>(c)] = std::pow(static_cast<double>(c + 1), -exponent);
    total += p[static_cast<std::size_t>(c)];
  }
  for (double& v : p) v /= total;
  return p;
}

LabeledDataset generate_dataset(const ZipfSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto dim = static_cast<Eigen::Index>(spec.feature_dim);

  FeatureMatrix means(spec.num_classes, dim);
  for (int c = 0; c < spec.num_classes; ++c) {
    for (Eigen::Index d = 0; d < dim; ++d) means(c, d) = rng.normal();
    const double norm = means.row(c).norm();
    means.row(c) *= spec.class_separation / norm;
  }

  const std::vector<double> probs = zipf_probabilities(spec.num_classes, spec.zipf_exponent);
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    acc += probs[c];
    cdf[c] = acc;
  }
  cdf.back() = 1.0;

  LabeledDataset ds;
  ds.num_classes = spec.num_classes;
  ds.feature_dim = spec.feature_dim;
  const auto n = static_cast<std::size_t>(spec.instances_total);
  ds.instance_ids.resize(n);
  ds.labels.resize(n);
  ds.scene_ids.resize(n);
  ds.features.resize(static_cast<Eigen::Index>(n), dim);

  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const int label = static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), spec.num_classes - 1));
    ds.instance_ids[i] = static_cast<std::int64_t>(i);
    ds.labels[i] = label;
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index d = 0; d < dim; ++d) {
      ds.features(row, d) = means(label, d) + spec.noise_scale * rng.normal();
    }
  }

  std::size_t next = 0;
  std::int64_t scene = 0;
  while (next < n) {
    const auto size = static_cast<std::size_t>(rng.uniform_int(spec.scene_size_min, spec.scene_size_max));
    const std::size_t end = std::min(n, next + size);
    for (; next < end; ++next) ds.scene_ids[next] = scene;
    ++scene;
  }
  return ds;
}

void write_dataset(const LabeledDataset& dataset, std::ostream& out) {
  dataset.validate();
  out << "pscv-dataset 1 " << dataset.num_classes << ' ' << dataset.feature_dim << ' ' << dataset.size() << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out << dataset.instance_ids[i] << ' ' << dataset.scene_ids[i] << ' ' << dataset.labels[i];
    for (Eigen::Index d = 0; d < dataset.features.cols(); ++d) {
      out << ' ' << text::format_double(dataset.features(static_cast<Eigen::Index>(i), d));
    }
    out << '\n';
  }
}

void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  write_dataset(dataset, out);
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

LabeledDataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("dataset: missing header line", 1);
  const auto header = text::split_ws(line);
  std::int64_t version = 0;
  std::int64_t num_instances = 0;
  LabeledDataset ds;
  if (header.size() != 5 || header[0] != "pscv-dataset" || !text::parse_int64(header[1], version) ||
      !text::parse_int(header[2], ds.num_classes) || !text::parse_int(header[3], ds.feature_dim) ||
      !text::parse_int64(header[4], num_instances)) {
    throw ParseError("dataset: malformed header at line 1", 1);
  }
  if (version != 1) throw ParseError("dataset: unsupported version " + std::to_string(version), 1);
  if (ds.num_classes <= 0 || ds.feature_dim <= 0 || num_instances < 0) {
    throw InputError("dataset: header declares a non-positive shape");
  }

  const auto n = static_cast<std::size_t>(num_instances);
  const auto dim = static_cast<std::size_t>(ds.feature_dim);
  ds.instance_ids.resize(n);
  ds.scene_ids.resize(n);
  ds.labels.resize(n);
  ds.features.resize(static_cast<Eigen::Index>(n), ds.feature_dim);

  for (std::size_t i = 0; i < n; ++i) {
    ++line_no;
    if (!std::getline(in, line)) {
      throw ParseError("dataset: file ends at line " + std::to_string(line_no) + ", expected " +
                           std::to_string(n) + " records",
                       line_no);
    }
    const auto fields = text::split_ws(line);
    if (fields.size() != 3 + dim) {
      throw ParseError("dataset: line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                           " fields, expected " + std::to_string(3 + dim),
                       line_no);
    }
    if (!text::parse_int64(fields[0], ds.instance_ids[i]) || !text::parse_int64(fields[1], ds.scene_ids[i]) ||
        !text::parse_int(fields[2], ds.labels[i])) {
      throw ParseError("dataset: bad id or label at line " + std::to_string(line_no), line_no);
    }
    if (ds.labels[i] < 0 || ds.labels[i] >= ds.num_classes) {
      throw InputError("dataset: line " + std::to_string(line_no) + " has label " + std::to_string(ds.labels[i]) +
                       " outside the declared " + std::to_string(ds.num_classes) + " classes");
    }
    for (std::size_t d = 0; d < dim; ++d) {
      double v = 0.0;
      if (!text::parse_double(fields[3 + d], v) || !std::isfinite(v)) {
        throw ParseError("dataset: bad feature value at line " + std::to_string(line_no), line_no);
      }
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = v;
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!text::trim(line).empty()) {
      throw ParseError("dataset: unexpected extra record at line " + std::to_string(line_no), line_no);
    }
  }
  return ds;
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset '" + path.string() + "'");
  return read_dataset(in);
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& dataset, double test_fraction,
                                                        std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("split: test_fraction must lie in [0, 1)");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.num_classes));
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class.at(static_cast<std::size_t>(dataset.labels[i])).push_back(i);

  Rng rng(seed);
  std::vector<bool> is_test(dataset.size(), false);
  for (auto& rows : by_class) {
    rng.shuffle(std::span<std::size_t>(rows));
    const std::size_t n = rows.size();
    if (n < 2) continue;
    auto take = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    if (test_fraction > 0.0) take = std::clamp<std::size_t>(take, 1, n - 1);
    for (std::size_t k = 0; k < take; ++k) is_test[rows[k]] = true;
  }

  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (std::size_t i = 0; i < dataset.size(); ++i) (is_test[i] ? test_rows : train_rows).push_back(i);
  return {dataset.select(train_rows), dataset.select(test_rows)};
}

void write_partition(const GroupPartition& partition, const FrequencyTable& freq, std::ostream& out) {
  if (freq.num_classes() != partition.num_classes()) {
    throw InputError("partition file: frequency table and partition cover different class counts");
  }
  out << "pscv-partition 1 " << partition.num_classes() << ' ' << partition.t_head << ' ' << partition.t_body << '\n';
  for (int c = 0; c < partition.num_classes(); ++c) {
    const auto i = static_cast<std::size_t>(c);
    out << c << ' ' << freq.counts[i] << ' ' << group_name(partition.group_of[i]) << '\n';
  }
}

void save_partition(const GroupPartition& partition, const FrequencyTable& freq, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  write_partition(partition, freq, out);
}

GroupPartition read_partition(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("partition: missing header line", 1);
  const auto header = text::split_ws(line);
  std::int64_t version = 0;
  int num_classes = 0;
  GroupPartition p;
  if (header.size() != 5 || header[0] != "pscv-partition" || !text::parse_int64(header[1], version) || version != 1 ||
      !text::parse_int(header[2], num_classes) || !text::parse_int64(header[3], p.t_head) ||
      !text::parse_int64(header[4], p.t_body) || num_classes < 1) {
    throw ParseError("partition: malformed header at line 1", 1);
  }
  for (int c = 0; c < num_classes; ++c) {
    const auto line_no = static_cast<std::size_t>(c) + 2;
    if (!std::getline(in, line)) throw ParseError("partition: file ends at line " + std::to_string(line_no), line_no);
    const auto f = text::split_ws(line);
    int id = -1;
    std::int64_t count = 0;
    if (f.size() != 3 || !text::parse_int(f[0], id) || id != c || !text::parse_int64(f[1], count)) {
      throw ParseError("partition: malformed record at line " + std::to_string(line_no), line_no);
    }
    if (f[2] == "head") {
      p.group_of.push_back(Group::Head);
    } else if (f[2] == "body") {
      p.group_of.push_back(Group::Body);
    } else if (f[2] == "tail") {
      p.group_of.push_back(Group::Tail);
    } else {
      throw ParseError("partition: unknown group at line " + std::to_string(line_no), line_no);
    }
  }
  return p;
}

GroupPartition load_partition(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open partition '" + path.string() + "'");
  return read_partition(in);
}

}  // namespace pscv
