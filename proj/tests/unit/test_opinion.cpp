#include <doctest.h>

#include <cmath>

#include "opflow/errors.hpp"
#include "opflow/opinion.hpp"
#include "opflow/rng.hpp"

using namespace opflow;

namespace {

Opinion random_opinion(Rng& rng) {
  const double u = rng.uniform();
  const double b = rng.uniform() * (1.0 - u);
  return Opinion::make(b, 1.0 - u - b, u, rng.uniform());
}

bool closed(const Opinion& w) { return std::fabs(w.b() + w.d() + w.u() - 1.0) <= kMassTolerance; }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST_CASE("opinion construction") {
  const auto full = Opinion::make(1, 0, 0, 0.5);
  CHECK(full.b() == 1.0);
  const auto vac = Opinion::make(0, 0, 1, 0.5);
  CHECK(vac == Opinion::vacuous());
  CHECK(code_of([] { Opinion::make(0.5, 0.5, 0.1, 0.5); }) == ErrorCode::mass_sum_violation);
  CHECK(code_of([] { Opinion::make(1.2, -0.2, 0.0); }) == ErrorCode::range_violation);
  CHECK(code_of([] { Opinion::make(0.5, 0.5, 0.0, 1.5); }) == ErrorCode::range_violation);

  // Within tolerance: normalized, not rejected.
  const auto near = Opinion::make(0.5 + 4e-10, 0.3, 0.2);
  CHECK(near.b() + near.d() + near.u() == doctest::Approx(1.0).epsilon(1e-15));
  const auto tiny_negative = Opinion::make(-5e-10, 0.5 + 5e-10, 0.5);
  CHECK(tiny_negative.b() == 0.0);
}

TEST_CASE("evidence mapping") {
  CHECK(from_evidence({0, 0}) == Opinion::vacuous());
  CHECK(from_evidence({38, 0}).u() == doctest::Approx(0.05).epsilon(1e-15));
  const auto w = from_evidence({6, 2});
  CHECK(w.b() == doctest::Approx(0.6));
  CHECK(w.d() == doctest::Approx(0.2));
  CHECK(w.u() == doctest::Approx(0.2));

  for (std::size_t r = 0; r < 40; ++r) {
    for (std::size_t s = 0; s < 40; ++s) {
      CHECK(from_evidence({r + 1, s}).u() < from_evidence({r, s}).u());
    }
  }
}

TEST_CASE("window estimation") {
  ObservationWindow empty{std::vector<std::optional<bool>>(38)};
  CHECK(estimate_from_window(empty) == Opinion::vacuous());
  CHECK(empty.present_count() == 0);

  ObservationWindow full{std::vector<std::optional<bool>>(38, true)};
  CHECK(estimate_from_window(full).u() == doctest::Approx(0.05));

  ObservationWindow mixed;
  mixed.slots = {true, true, false, true, true, false, true, true};
  const auto w = estimate_from_window(mixed);
  CHECK(w.b() == doctest::Approx(0.6));
  CHECK(w.d() == doctest::Approx(0.2));
  CHECK(w.u() == doctest::Approx(0.2));

  Rng rng(5);
  for (int k = 0; k < 500; ++k) {
    ObservationWindow win;
    const std::size_t K = 1 + rng.below(50);
    for (std::size_t i = 0; i < K; ++i) {
      const double r = rng.uniform();
      win.slots.push_back(r < 0.3 ? std::nullopt : std::optional<bool>(r < 0.7));
    }
    const auto est = estimate_from_window(win);
    CHECK(est.u() >= 2.0 / (static_cast<double>(K) + 2.0) - 1e-15);
    CHECK(est.u() <= 1.0);
    CHECK(win.present_count() <= win.size());
  }
}

TEST_CASE("discount") {
  const auto x = Opinion::make(0.3, 0.5, 0.2, 0.4);
  CHECK(discount(Opinion::make(1, 0, 0), x) == x);
  CHECK(discount(Opinion::vacuous(), x).u() == 1.0);
  const auto w = discount(Opinion::make(0.8, 0.1, 0.1), Opinion::make(0.5, 0.3, 0.2));
  CHECK(w.b() == doctest::Approx(0.40));
  CHECK(w.d() == doctest::Approx(0.24));
  CHECK(w.u() == doctest::Approx(0.36));
}

TEST_CASE("consensus") {
  const auto x = Opinion::make(0.3, 0.5, 0.2);
  CHECK(consensus(Opinion::vacuous(), x) == x);
  const auto w = consensus(Opinion::make(0.6, 0.2, 0.2), Opinion::make(0.2, 0.6, 0.2));
  CHECK(w.b() == doctest::Approx(4.0 / 9.0));
  CHECK(w.d() == doctest::Approx(4.0 / 9.0));
  CHECK(w.u() == doctest::Approx(1.0 / 9.0));

  // Two dogmatic opinions: equal weighting.
  const auto dog = consensus(Opinion::make(1, 0, 0), Opinion::make(0, 1, 0));
  CHECK(dog.b() == doctest::Approx(0.5));
  CHECK(dog.d() == doctest::Approx(0.5));
  CHECK(dog.u() == 0.0);
}

TEST_CASE("projected probability") {
  CHECK(projected_probability(Opinion::make(1, 0, 0, 0.3)) == 1.0);
  CHECK(projected_probability(Opinion::vacuous()) == 0.5);
  CHECK(projected_probability(Opinion::make(0.6, 0.2, 0.2)) == doctest::Approx(0.7));
}

TEST_CASE("opinion algebra over random cases") {
  Rng rng(20240611);
  for (int k = 0; k < 10000; ++k) {
    const auto w1 = random_opinion(rng), w2 = random_opinion(rng), w3 = random_opinion(rng);
    const auto c12 = consensus(w1, w2), c21 = consensus(w2, w1);
    REQUIRE(closed(c12));
    REQUIRE(std::fabs(c12.b() - c21.b()) <= 1e-12);
    REQUIRE(std::fabs(c12.d() - c21.d()) <= 1e-12);
    REQUIRE(std::fabs(c12.u() - c21.u()) <= 1e-12);
    if (w1.u() < 1.0 && w2.u() < 1.0 && w1.u() > 0.0 && w2.u() > 0.0) {
      REQUIRE(c12.u() < std::min(w1.u(), w2.u()));
    }

    const auto left = discount(discount(w1, w2), w3), right = discount(w1, discount(w2, w3));
    REQUIRE(closed(left));
    REQUIRE(closed(right));
    REQUIRE(std::fabs(left.b() - right.b()) <= 1e-12);
    REQUIRE(std::fabs(left.d() - right.d()) <= 1e-12);
    REQUIRE(std::fabs(left.u() - right.u()) <= 1e-12);

    const auto neutral = consensus(Opinion::vacuous(), w1);
    REQUIRE(std::fabs(neutral.b() - w1.b()) <= 1e-12);
    REQUIRE(std::fabs(neutral.d() - w1.d()) <= 1e-12);
    REQUIRE(std::fabs(neutral.u() - w1.u()) <= 1e-12);
    REQUIRE(discount(Opinion::vacuous(), w1).u() == 1.0);

    const Evidence ev{rng.below(100), rng.below(100), 0.5 + 3.0 * rng.uniform()};
    REQUIRE(closed(from_evidence(ev)));
  }
}
