#include "pscv/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pscv/error.hpp"
#include "text.hpp"

namespace pscv {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_logits(std::span<const double> logits) {
  if (logits.empty()) throw NumericError("loss: logits are empty");
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericError("loss: non-finite logit");
  }
}

void check_label(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw InputError("loss: label " + std::to_string(label) + " outside [0, " +
                     std::to_string(logits.size()) + ")");
  }
}

// Softmax probabilities together with ln p_label, both from one max shift.
struct LogSoftmax {
  std::vector<double> p;
  double log_p_label;
  double one_minus_p_label;  // sum of the other probabilities, accurate near p = 1
};

LogSoftmax log_softmax_at(std::span<const double> z, int label) {
  const double m = *std::max_element(z.begin(), z.end());
  LogSoftmax out;
  out.p.resize(z.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    out.p[j] = std::exp(z[j] - m);
    sum += out.p[j];
  }
  double rest = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    out.p[j] /= sum;
    if (static_cast<int>(j) != label) rest += out.p[j];
  }
  out.log_p_label = (z[static_cast<std::size_t>(label)] - m) - std::log(sum);
  out.one_minus_p_label = rest;
  return out;
}

}  // namespace

std::string_view loss_kind_name(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::CrossEntropy: return "ce";
    case LossKind::Focal: return "focal";
    case LossKind::LDAM: return "ldam";
    case LossKind::ClassBalanced: return "cb";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "ce" || name == "cross_entropy") return LossKind::CrossEntropy;
  if (name == "focal") return LossKind::Focal;
  if (name == "ldam") return LossKind::LDAM;
  if (name == "cb" || name == "class_balanced") return LossKind::ClassBalanced;
  throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

LossKind loss_kind(const LossSpec& spec) noexcept {
  return std::visit(Overloaded{
                        [](const CrossEntropySpec&) { return LossKind::CrossEntropy; },
                        [](const FocalSpec&) { return LossKind::Focal; },
                        [](const LdamSpec&) { return LossKind::LDAM; },
                        [](const ClassBalancedSpec&) { return LossKind::ClassBalanced; },
                    },
                    spec);
}

void validate(const LossSpec& spec) {
  std::visit(Overloaded{
                 [](const CrossEntropySpec&) {},
                 [](const FocalSpec& f) {
                   if (!(f.gamma >= 0.0) || !std::isfinite(f.gamma)) {
                     throw ConfigError("focal loss: gamma must be finite and >= 0");
                   }
                 },
                 [](const LdamSpec& l) {
                   if (l.margin_scale && !(*l.margin_scale > 0.0 && std::isfinite(*l.margin_scale))) {
                     throw ConfigError("ldam loss: margin scale C must be > 0");
                   }
                   if (!(l.logit_scale > 0.0) || !std::isfinite(l.logit_scale)) {
                     throw ConfigError("ldam loss: logit scale s must be > 0");
                   }
                 },
                 [](const ClassBalancedSpec& c) {
                   if (!(c.beta >= 0.0 && c.beta < 1.0)) {
                     throw ConfigError("class-balanced loss: beta must lie in [0, 1)");
                   }
                 },
             },
             spec);
}

std::string describe(const LossSpec& spec) {
  using text::format_double;
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const CrossEntropySpec&) { os << "ce"; },
                 [&](const FocalSpec& f) { os << "focal(gamma=" << format_double(f.gamma) << ")"; },
                 [&](const LdamSpec& l) {
                   os << "ldam(";
                   if (l.margin_scale) {
                     os << "C=" << format_double(*l.margin_scale);
                   } else {
                     os << "max_margin=" << format_double(kDefaultLdamMaxMargin);
                   }
                   os << ", s=" << format_double(l.logit_scale) << ")";
                 },
                 [&](const ClassBalancedSpec& c) { os << "cb(beta=" << format_double(c.beta) << ")"; },
             },
             spec);
  return os.str();
}

std::vector<double> softmax(std::span<const double> logits) {
  check_logits(logits);
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    p[j] = std::exp(logits[j] - m);
    sum += p[j];
  }
  for (double& v : p) v /= sum;
  return p;
}

LossValue cross_entropy(std::span<const double> logits, int label, std::span<const double> class_weights) {
  check_logits(logits);
  check_label(logits, label);
  double w = 1.0;
  if (!class_weights.empty()) {
    if (class_weights.size() != logits.size()) {
      throw InputError("cross_entropy: expected one weight per class");
    }
    for (double v : class_weights) {
      if (!(v > 0.0) || !std::isfinite(v)) throw InputError("cross_entropy: class weights must be positive");
    }
    w = class_weights[static_cast<std::size_t>(label)];
  }

  const LogSoftmax ls = log_softmax_at(logits, label);
  LossValue out;
  out.loss = class_weights.empty() ? -ls.log_p_label : -w * ls.log_p_label;
  out.grad = ls.p;
  out.grad[static_cast<std::size_t>(label)] -= 1.0;
  if (!class_weights.empty()) {
    for (double& g : out.grad) g *= w;
  }
  return out;
}

LossValue focal_loss(std::span<const double> logits, int label, double gamma) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("focal loss: gamma must be finite and >= 0");
  check_logits(logits);
  check_label(logits, label);

  const LogSoftmax ls = log_softmax_at(logits, label);
  const double p = ls.p[static_cast<std::size_t>(label)];
  const double q = ls.one_minus_p_label;
  const double modulator = std::pow(q, gamma);

  LossValue out;
  out.loss = -modulator * ls.log_p_label;

  // dL/dz_k = [gamma q^(gamma-1) p ln p - q^gamma] * (delta_yk - p_k)
  double extra = 0.0;
  if (gamma != 0.0 && q > 0.0) extra = gamma * std::pow(q, gamma - 1.0) * p * ls.log_p_label;
  const double coeff = extra - modulator;
  out.grad.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double delta = static_cast<int>(k) == label ? 1.0 : 0.0;
    out.grad[k] = coeff * (delta - ls.p[k]);
  }
  return out;
}

std::vector<double> ldam_margins(std::span<const std::int64_t> counts, double margin_scale) {
  if (!(margin_scale > 0.0) || !std::isfinite(margin_scale)) {
    throw ConfigError("ldam margins: C must be > 0");
  }
  std::vector<double> margins;
  margins.reserve(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] <= 0) {
      throw ConfigError("ldam margins: class at position " + std::to_string(j) +
                        " has zero instances; exclude it from the peer or smooth its count");
    }
    margins.push_back(margin_scale / std::sqrt(std::sqrt(static_cast<double>(counts[j]))));
  }
  return margins;
}

std::vector<double> ldam_margins(const FrequencyTable& freq, double margin_scale) {
  return ldam_margins(freq.counts, margin_scale);
}

LossValue ldam_loss(std::span<const double> logits, int label, std::span<const double> margins,
                    double logit_scale) {
  check_logits(logits);
  check_label(logits, label);
  if (margins.size() != logits.size()) throw InputError("ldam_loss: expected one margin per logit");
  if (!(logit_scale > 0.0) || !std::isfinite(logit_scale)) throw ConfigError("ldam_loss: s must be > 0");

  std::vector<double> adjusted(logits.begin(), logits.end());
  adjusted[static_cast<std::size_t>(label)] -= margins[static_cast<std::size_t>(label)];
  for (double& a : adjusted) a *= logit_scale;

  LossValue out = cross_entropy(adjusted, label);
  for (double& g : out.grad) g *= logit_scale;
  return out;
}

std::vector<double> class_balanced_weights(std::span<const std::int64_t> counts, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("class-balanced weights: beta must lie in [0, 1)");
  if (counts.empty()) throw ConfigError("class-balanced weights: no classes");
  std::vector<double> w;
  w.reserve(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] < 1) {
      throw ConfigError("class-balanced weights: class at position " + std::to_string(j) +
                        " has zero instances");
    }
    if (beta == 0.0) {
      w.push_back(1.0);
      continue;
    }
    // 1 - beta^n computed as -expm1(n ln beta) to keep precision for beta near 1.
    const double effective = -std::expm1(static_cast<double>(counts[j]) * std::log(beta));
    w.push_back((1.0 - beta) / effective);
  }
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  for (double& v : w) v /= mean;
  return w;
}

std::vector<double> class_balanced_weights(const FrequencyTable& freq, double beta) {
  return class_balanced_weights(freq.counts, beta);
}

BoundLoss::BoundLoss(LossSpec spec, std::span<const std::int64_t> subset_counts) : spec_(std::move(spec)) {
  validate(spec_);
  if (auto* l = std::get_if<LdamSpec>(&spec_)) {
    double c = 0.0;
    if (l->margin_scale) {
      c = *l->margin_scale;
    } else {
      if (subset_counts.empty()) throw ConfigError("ldam loss: peer has no classes");
      const std::int64_t rarest = *std::min_element(subset_counts.begin(), subset_counts.end());
      if (rarest <= 0) {
        throw ConfigError("ldam loss: a class in the peer's subset has zero training instances");
      }
      c = kDefaultLdamMaxMargin * std::sqrt(std::sqrt(static_cast<double>(rarest)));
    }
    per_class_ = ldam_margins(subset_counts, c);
  } else if (auto* cb = std::get_if<ClassBalancedSpec>(&spec_)) {
    per_class_ = class_balanced_weights(subset_counts, cb->beta);
  }
}

LossValue BoundLoss::operator()(std::span<const double> logits, int label) const {
  return std::visit(Overloaded{
                        [&](const CrossEntropySpec&) { return cross_entropy(logits, label); },
                        [&](const FocalSpec& f) { return focal_loss(logits, label, f.gamma); },
                        [&](const LdamSpec& l) { return ldam_loss(logits, label, per_class_, l.logit_scale); },
                        [&](const ClassBalancedSpec&) { return cross_entropy(logits, label, per_class_); },
                    },
                    spec_);
}

}  // namespace pscv
