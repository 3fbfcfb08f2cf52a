#include "pscv/model_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "pscv/error.hpp"
#include "text.hpp"

namespace pscv {

namespace {

void write_row(std::ostream& out, const auto& values) {
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    if (j > 0) out << ' ';
    out << text::format_double(values(j));
  }
  out << '\n';
}

void write_loss(std::ostream& out, const LossSpec& spec) {
  out << "loss ";
  if (std::holds_alternative<CrossEntropySpec>(spec)) {
    out << "ce";
  } else if (const auto* f = std::get_if<FocalSpec>(&spec)) {
    out << "focal " << text::format_double(f->gamma);
  } else if (const auto* l = std::get_if<LdamSpec>(&spec)) {
    out << "ldam " << text::format_double(l->logit_scale);
    if (l->margin_scale) out << ' ' << text::format_double(*l->margin_scale);
  } else if (const auto* c = std::get_if<ClassBalancedSpec>(&spec)) {
    out << "cb " << text::format_double(c->beta);
  }
  out << '\n';
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  /// Next non-blank line split into fields; `expected_key` must be its first field.
  std::vector<std::string_view> next(std::string_view expected_key) {
    next_raw();
    if (fields_.empty() || (!expected_key.empty() && fields_[0] != expected_key)) {
      fail("expected '" + std::string(expected_key) + "'");
    }
    return fields_;
  }

  std::vector<std::string_view> next_raw() {
    while (std::getline(in_, line_)) {
      ++line_no_;
      fields_ = text::split_ws(line_);
      if (!fields_.empty()) return fields_;
    }
    ++line_no_;
    fail("unexpected end of file");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("model: " + what + " at line " + std::to_string(line_no_), line_no_);
  }

  std::int64_t int_at(const std::vector<std::string_view>& f, std::size_t i) const {
    std::int64_t v = 0;
    if (i >= f.size() || !text::parse_int64(f[i], v)) fail("expected an integer");
    return v;
  }

  double double_at(const std::vector<std::string_view>& f, std::size_t i) const {
    double v = 0.0;
    if (i >= f.size() || !text::parse_double(f[i], v)) fail("expected a number");
    return v;
  }

  Eigen::VectorXd vector_from(const std::vector<std::string_view>& f, std::size_t first, Eigen::Index n) const {
    if (f.size() != first + static_cast<std::size_t>(n)) fail("expected " + std::to_string(n) + " values");
    Eigen::VectorXd v(n);
    for (Eigen::Index j = 0; j < n; ++j) v(j) = double_at(f, first + static_cast<std::size_t>(j));
    return v;
  }

  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) m.row(r) = vector_from(next_raw(), 0, cols).transpose();
    return m;
  }

 private:
  std::istream& in_;
  std::string line_;
  std::vector<std::string_view> fields_;
  std::size_t line_no_ = 0;
};

LossSpec read_loss(LineReader& reader) {
  const auto f = reader.next("loss");
  if (f.size() < 2) reader.fail("missing loss kind");
  LossSpec spec;
  if (f[1] == "ce" && f.size() == 2) {
    spec = CrossEntropySpec{};
  } else if (f[1] == "focal" && f.size() == 3) {
    spec = FocalSpec{reader.double_at(f, 2)};
  } else if (f[1] == "ldam" && (f.size() == 3 || f.size() == 4)) {
    LdamSpec l;
    l.logit_scale = reader.double_at(f, 2);
    if (f.size() == 4) l.margin_scale = reader.double_at(f, 3);
    spec = l;
  } else if (f[1] == "cb" && f.size() == 3) {
    spec = ClassBalancedSpec{reader.double_at(f, 2)};
  } else {
    reader.fail("unknown loss line");
  }
  try {
    validate(spec);
  } catch (const ConfigError& e) {
    reader.fail(e.what());
  }
  return spec;
}

}  // namespace

void write_ensemble(const Ensemble& ensemble, std::ostream& out) {
  out << "pscv-model 1\n";
  out << "classes " << ensemble.num_classes << " features " << ensemble.feature_dim << " peers "
      << ensemble.peers.size() << '\n';
  out << "partition " << ensemble.partition.t_head << ' ' << ensemble.partition.t_body << ' ';
  for (Group g : ensemble.partition.group_of) out << group_letter(g);
  out << '\n';
  for (std::size_t i = 0; i < ensemble.peers.size(); ++i) {
    const PeerModel& p = ensemble.peers[i];
    p.validate();
    out << "peer " << i << '\n';
    out << "subset " << p.class_subset.size();
    for (int c : p.class_subset) out << ' ' << c;
    out << "\ncounts";
    for (auto n : p.subset_counts) out << ' ' << n;
    out << '\n';
    write_loss(out, p.loss);
    out << "alpha " << text::format_double(p.alpha) << '\n';
    out << "hidden " << (p.hidden ? p.hidden->weights.rows() : 0) << '\n';
    if (p.hidden) {
      for (Eigen::Index r = 0; r < p.hidden->weights.rows(); ++r) write_row(out, p.hidden->weights.row(r));
      out << "hidden_bias ";
      write_row(out, p.hidden->bias);
    }
    out << "weights " << p.output.weights.rows() << ' ' << p.output.weights.cols() << '\n';
    for (Eigen::Index r = 0; r < p.output.weights.rows(); ++r) write_row(out, p.output.weights.row(r));
    out << "bias ";
    write_row(out, p.output.bias);
    out << "end\n";
  }
}

void save_ensemble(const Ensemble& ensemble, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  write_ensemble(ensemble, out);
}

Ensemble read_ensemble(std::istream& in) {
  LineReader reader(in);
  auto f = reader.next("pscv-model");
  if (f.size() != 2 || reader.int_at(f, 1) != 1) reader.fail("unsupported model version");

  Ensemble e;
  f = reader.next("classes");
  if (f.size() != 6 || f[2] != "features" || f[4] != "peers") reader.fail("malformed shape line");
  e.num_classes = static_cast<int>(reader.int_at(f, 1));
  e.feature_dim = static_cast<int>(reader.int_at(f, 3));
  const auto n_peers = reader.int_at(f, 5);
  if (e.num_classes < 1 || e.feature_dim < 1 || n_peers < 1 || n_peers > static_cast<std::int64_t>(kMaxPeers)) {
    reader.fail("shape out of range");
  }

  f = reader.next("partition");
  if (f.size() != 4 || static_cast<int>(f[3].size()) != e.num_classes) reader.fail("malformed partition line");
  e.partition.t_head = reader.int_at(f, 1);
  e.partition.t_body = reader.int_at(f, 2);
  for (char ch : f[3]) {
    switch (ch) {
      case 'H': e.partition.group_of.push_back(Group::Head); break;
      case 'B': e.partition.group_of.push_back(Group::Body); break;
      case 'T': e.partition.group_of.push_back(Group::Tail); break;
      default: reader.fail("unknown group letter");
    }
  }

  for (std::int64_t i = 0; i < n_peers; ++i) {
    f = reader.next("peer");
    if (f.size() != 2 || reader.int_at(f, 1) != i) reader.fail("peer blocks out of order");
    PeerModel p;

    f = reader.next("subset");
    const auto k = reader.int_at(f, 1);
    if (k < 1 || f.size() != static_cast<std::size_t>(k) + 2) reader.fail("malformed subset line");
    for (std::int64_t j = 0; j < k; ++j) {
      const auto c = reader.int_at(f, static_cast<std::size_t>(j) + 2);
      if (c < 0 || c >= e.num_classes) reader.fail("class id out of range");
      p.class_subset.push_back(static_cast<int>(c));
    }

    f = reader.next("counts");
    if (f.size() != static_cast<std::size_t>(k) + 1) reader.fail("expected one count per subset class");
    for (std::int64_t j = 0; j < k; ++j) p.subset_counts.push_back(reader.int_at(f, static_cast<std::size_t>(j) + 1));

    p.loss = read_loss(reader);
    f = reader.next("alpha");
    p.alpha = reader.double_at(f, 1);

    f = reader.next("hidden");
    const auto h = reader.int_at(f, 1);
    if (h < 0) reader.fail("negative hidden width");
    if (h > 0) {
      DenseLayer layer;
      layer.weights = reader.matrix(h, e.feature_dim);
      f = reader.next("hidden_bias");
      layer.bias = reader.vector_from(f, 1, h);
      p.hidden = std::move(layer);
    }

    f = reader.next("weights");
    const auto rows = reader.int_at(f, 1);
    const auto cols = reader.int_at(f, 2);
    if (rows != k || cols != (h > 0 ? h : e.feature_dim)) reader.fail("output weight shape mismatch");
    p.output.weights = reader.matrix(rows, cols);
    f = reader.next("bias");
    p.output.bias = reader.vector_from(f, 1, k);
    reader.next("end");

    try {
      p.validate();
    } catch (const InputError& err) {
      reader.fail(err.what());
    }
    e.peers.push_back(std::move(p));
  }
  return e;
}

Ensemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model '" + path.string() + "'");
  return read_ensemble(in);
}

}  // namespace pscv
