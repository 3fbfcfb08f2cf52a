#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pscv/taxonomy.hpp"

namespace pscv {

enum class LossKind { CrossEntropy, Focal, LDAM, ClassBalanced };

std::string_view loss_kind_name(LossKind kind) noexcept;
/// Accepts "ce", "cross_entropy", "focal", "ldam", "cb", "class_balanced".
LossKind parse_loss_kind(std::string_view name);

struct CrossEntropySpec {
  friend bool operator==(const CrossEntropySpec&, const CrossEntropySpec&) = default;
};

struct FocalSpec {
  double gamma = 2.0;
  friend bool operator==(const FocalSpec&, const FocalSpec&) = default;
};

struct LdamSpec {
  /// Margin constant C. When unset it is chosen per peer so that the
  /// largest margin over the peer's classes equals kDefaultLdamMaxMargin.
  std::optional<double> margin_scale;
  double logit_scale = 30.0;
  friend bool operator==(const LdamSpec&, const LdamSpec&) = default;
};

struct ClassBalancedSpec {
  double beta = 0.9999;
  friend bool operator==(const ClassBalancedSpec&, const ClassBalancedSpec&) = default;
};

inline constexpr double kDefaultLdamMaxMargin = 0.5;

/// Loss choice plus exactly the hyperparameters that kind needs.
using LossSpec = std::variant<CrossEntropySpec, FocalSpec, LdamSpec, ClassBalancedSpec>;

LossKind loss_kind(const LossSpec& spec) noexcept;
/// Throws ConfigError on out-of-range hyperparameters.
void validate(const LossSpec& spec);
/// Short human-readable form, e.g. "focal(gamma=2)".
std::string describe(const LossSpec& spec);

struct LossValue {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Max-shifted softmax. Throws NumericError on empty or non-finite input.
std::vector<double> softmax(std::span<const double> logits);

/// -w_y * ln p_y. `class_weights`, when nonempty, has one positive entry per logit.
LossValue cross_entropy(std::span<const double> logits, int label,
                        std::span<const double> class_weights = {});

/// -(1 - p_y)^gamma * ln p_y.
LossValue focal_loss(std::span<const double> logits, int label, double gamma);

/// C / n_j^(1/4) for every entry of `counts`. Throws ConfigError on a zero
/// count; exclude the class or smooth its count first.
std::vector<double> ldam_margins(std::span<const std::int64_t> counts, double margin_scale);
std::vector<double> ldam_margins(const FrequencyTable& freq, double margin_scale);

/// Cross entropy on s*z with the true logit shifted to s*(z_y - margin_y).
/// The gradient is with respect to the unscaled logits z.
LossValue ldam_loss(std::span<const double> logits, int label, std::span<const double> margins,
                    double logit_scale);

/// Effective-number weights (1 - beta) / (1 - beta^n_j), rescaled to mean 1.
std::vector<double> class_balanced_weights(std::span<const std::int64_t> counts, double beta);
std::vector<double> class_balanced_weights(const FrequencyTable& freq, double beta);

/// A LossSpec bound to the class counts of one peer's output space, so that
/// LDAM margins and class-balanced weights are computed once.
class BoundLoss {
 public:
  BoundLoss(LossSpec spec, std::span<const std::int64_t> subset_counts);

  LossValue operator()(std::span<const double> logits, int label) const;

  const LossSpec& spec() const noexcept { return spec_; }
  /// LDAM margins or class-balanced weights; empty for the other kinds.
  const std::vector<double>& per_class() const noexcept { return per_class_; }

 private:
  LossSpec spec_;
  std::vector<double> per_class_;
};

}  // namespace pscv
