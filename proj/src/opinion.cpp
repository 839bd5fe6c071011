#include "opflow/opinion.hpp"

#include <cmath>
#include <sstream>

#include "opflow/errors.hpp"

namespace opflow {
namespace {

double clamp_component(double x, const char* name) {
  if (!(x >= -kMassTolerance && x <= 1.0 + kMassTolerance)) {
    std::ostringstream msg;
    msg << name << " = " << x << " outside [0, 1]";
    throw Error(ErrorCode::range_violation, msg.str());
  }
  return std::fmin(1.0, std::fmax(0.0, x));
}

}  // namespace

Opinion Opinion::make(double b, double d, double u, double a) {
  b = clamp_component(b, "b");
  d = clamp_component(d, "d");
  u = clamp_component(u, "u");
  a = clamp_component(a, "a");
  const double sum = b + d + u;
  if (std::fabs(sum - 1.0) > kMassTolerance) {
    std::ostringstream msg;
    msg << "b + d + u = " << sum;
    throw Error(ErrorCode::mass_sum_violation, msg.str());
  }
  if (sum != 1.0) {
    b /= sum;
    d /= sum;
    u = 1.0 - b - d;
    if (u < 0.0) u = 0.0;
  }
  return {b, d, u, a};
}

std::size_t ObservationWindow::present_count() const noexcept {
  std::size_t k = 0;
  for (const auto& slot : slots) k += slot.has_value() ? 1 : 0;
  return k;
}

Opinion from_evidence(const Evidence& ev) {
  if (!(ev.prior_weight > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "prior weight must be positive");
  }
  const double r = static_cast<double>(ev.r);
  const double s = static_cast<double>(ev.s);
  const double total = r + s + ev.prior_weight;
  return Opinion::make(r / total, s / total, ev.prior_weight / total, ev.base_rate);
}

Opinion estimate_from_window(const ObservationWindow& win, double prior_weight, double base_rate) {
  Evidence ev{.r = 0, .s = 0, .prior_weight = prior_weight, .base_rate = base_rate};
  for (const auto& slot : win.slots) {
    if (!slot) continue;
    if (*slot) {
      ++ev.r;
    } else {
      ++ev.s;
    }
  }
  return from_evidence(ev);
}

Opinion discount(const Opinion& referral, const Opinion& source) {
  const double b = referral.b() * source.b();
  const double d = referral.b() * source.d();
  const double u = referral.d() + referral.u() + referral.b() * source.u();
  return Opinion::make(b, d, u, source.a());
}

Opinion consensus(const Opinion& w1, const Opinion& w2) {
  const double u1 = w1.u();
  const double u2 = w2.u();
  const double zeta = u1 + u2 - u1 * u2;
  if (zeta > 0.0) {
    return Opinion::make((w1.b() * u2 + w2.b() * u1) / zeta, (w1.d() * u2 + w2.d() * u1) / zeta,
                         u1 * u2 / zeta, w1.a());
  }
  // Both dogmatic. The limit ratio u1/u2 is unavailable once both are zero, so
  // the two opinions are weighted equally.
  const double psi = 1.0;
  return Opinion::make((psi * w1.b() + w2.b()) / (psi + 1.0), (psi * w1.d() + w2.d()) / (psi + 1.0),
                       0.0, w1.a());
}

double projected_probability(const Opinion& w) noexcept { return w.b() + w.a() * w.u(); }

}  // namespace opflow
