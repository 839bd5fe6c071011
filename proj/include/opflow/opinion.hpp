#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace opflow {

/// Absolute tolerance for b + d + u = 1.
inline constexpr double kMassTolerance = 1e-9;
inline constexpr double kDefaultPriorWeight = 2.0;
inline constexpr double kDefaultBaseRate = 0.5;

/// Binomial subjective opinion (belief, disbelief, uncertainty, base rate).
///
/// Always satisfies b + d + u = 1 and all components in [0, 1]. Inputs that
/// violate either constraint by no more than kMassTolerance are normalized
/// instead of rejected.
class Opinion {
 public:
  /// Vacuous opinion (0, 0, 1) with base rate 0.5.
  Opinion() = default;

  /// Throws Error(mass_sum_violation | range_violation).
  static Opinion make(double b, double d, double u, double a = kDefaultBaseRate);

  static Opinion vacuous(double a = kDefaultBaseRate) { return {0.0, 0.0, 1.0, a}; }

  double b() const noexcept { return b_; }
  double d() const noexcept { return d_; }
  double u() const noexcept { return u_; }
  double a() const noexcept { return a_; }

  bool operator==(const Opinion&) const = default;

 private:
  Opinion(double b, double d, double u, double a) : b_(b), d_(d), u_(u), a_(a) {}

  double b_ = 0.0;
  double d_ = 0.0;
  double u_ = 1.0;
  double a_ = kDefaultBaseRate;
};

/// Positive/negative observation counts plus the non-informative prior.
struct Evidence {
  std::size_t r = 0;
  std::size_t s = 0;
  double prior_weight = kDefaultPriorWeight;
  double base_rate = kDefaultBaseRate;
};

/// K trailing observation slots; std::nullopt marks a missing observation.
struct ObservationWindow {
  std::vector<std::optional<bool>> slots;

  std::size_t size() const noexcept { return slots.size(); }
  std::size_t present_count() const noexcept;
};

/// b = r/(r+s+W), d = s/(r+s+W), u = W/(r+s+W).
Opinion from_evidence(const Evidence& ev);

/// Counts the present slots of the window and maps them through from_evidence.
Opinion estimate_from_window(const ObservationWindow& win, double prior_weight = kDefaultPriorWeight,
                             double base_rate = kDefaultBaseRate);

/// Trust transitivity: the opinion `referral` holds about a source, applied to
/// the source's opinion `source`.
Opinion discount(const Opinion& referral, const Opinion& source);

/// Fusion of two independent opinions about the same proposition.
Opinion consensus(const Opinion& w1, const Opinion& w2);

double projected_probability(const Opinion& w) noexcept;

}  // namespace opflow
