#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"

#include "arraytune/errors.hpp"
#include "arraytune/geometry_adapt.hpp"

using namespace arraytune;
using namespace arraytune::adapt;

namespace {

MscValue m(double v) { return MscValue{v}; }

// Straightforward re-statement of the step rules, used as a reference.
struct ReferenceModel {
  AdaptParams p;
  double d[2];
  std::size_t a[2] = {1, 1};
  int sup = 0;
  std::deque<double> window;  // superior measures since the last doubling, inclusive

  static std::size_t a_limit(double d_sup, double eps) {
    std::size_t a = 1;
    while (d_sup / static_cast<double>(a + 1) > eps) ++a;
    return a;
  }

  StepEvent step(double f1, double f2) {
    if (f1 < f2) {
      sup = 1;
    } else if (f2 < f1) {
      sup = 2;
    } else if (sup == 0) {
      sup = 1;
    }
    const int s = sup - 1, i = 1 - s;
    a[s] = 1;
    const double fs = sup == 1 ? f1 : f2;
    window.push_back(fs);
    bool worse = window.size() > p.t_max;
    if (worse) {
      const double ref = window[window.size() - 1 - p.t_max];
      for (std::size_t t = 1; t <= p.t_max; ++t) worse = worse && window[window.size() - 1 - p.t_max + t] > ref;
    }
    double next;
    StepEvent e = StepEvent::kCompetitor;
    if (worse) {
      next = 2.0 * d[i];
      window.assign(1, fs);
      e = StepEvent::kDoubled;
    } else if (a[i] <= a_limit(d[s], p.epsilon)) {
      const double sign = a[i] % 2 ? 1.0 : -1.0;
      next = d[s] * (1.0 + sign / static_cast<double>(a[i] + 1));
      ++a[i];
    } else {
      next = d[s];
      e = StepEvent::kHeld;
    }
    if (next > p.d_max || next < p.d_min) e = StepEvent::kClamped;
    d[i] = std::clamp(next, p.d_min, p.d_max);
    return e;
  }
};

}  // namespace

TEST_CASE("competitor spacing follows the alternating sequence") {
  CHECK(competitor_spacing(0.20, 1) == doctest::Approx(0.30));
  CHECK(competitor_spacing(0.30, 2) == doctest::Approx(0.20));
  const double ratios[] = {1.5, 2.0 / 3.0, 1.25, 0.8, 7.0 / 6.0, 6.0 / 7.0, 1.125, 8.0 / 9.0};
  for (std::size_t a = 1; a <= 8; ++a) CHECK(std::abs(competitor_spacing(1.0, a) - ratios[a - 1]) < 1e-12);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t a = 1; a <= 200; ++a) {
    const double dist = std::abs(competitor_spacing(0.2, a) - 0.2);
    CHECK(dist < prev);
    CHECK(dist == doctest::Approx(0.2 / static_cast<double>(a + 1)));
    CHECK((competitor_spacing(0.2, a) > 0.2) == (a % 2 == 1));
    prev = dist;
  }
}

TEST_CASE("a_max is the first count within epsilon") {
  CHECK(a_max(0.20, 0.05) == 3);
  CHECK(a_max(0.20, 0.2) == 1);
  CHECK(a_max(0.20, 1.0) == 1);
  CHECK(a_max(0.20, 1e-6) > 100000);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ud(0.02, 0.6), ue(0.001, 0.3);
  for (int trial = 0; trial < 2000; ++trial) {
    const double d = ud(rng), e = ue(rng);
    const std::size_t am = a_max(d, e);
    CHECK(am == ReferenceModel::a_limit(d, e));
    CHECK(std::abs(competitor_spacing(d, am) - d) <= e * (1.0 + 1e-12));
    if (am > 1) CHECK(std::abs(competitor_spacing(d, am - 1) - d) > e);
  }
}

TEST_CASE("parameter validation") {
  AdaptParams p;
  CHECK_NOTHROW(p.validate());
  p.epsilon = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = AdaptParams{};
  p.t_max = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = AdaptParams{};
  p.m_max = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = AdaptParams{};
  p.d_min = 0.7;
  CHECK_THROWS_AS(initial_state(0.1, 0.2, p), ConfigError);
}

TEST_CASE("the first two steps of the desk run") {
  AdaptParams p;
  auto s = initial_state(0.15, 0.20, p);
  auto r = geometry_step(s, m(0.4), m(0.3), p);
  CHECK(r.superior == 2);
  CHECK(s.d1() == doctest::Approx(0.30));
  CHECK(s.d2() == doctest::Approx(0.20));
  CHECK(s.a[0] == 2);
  CHECK(s.j == 1);
  CHECK(r.event == StepEvent::kCompetitor);

  r = geometry_step(s, m(0.2), m(0.3), p);
  CHECK(r.superior == 1);
  CHECK(s.d1() == doctest::Approx(0.30));
  CHECK(s.d2() == doctest::Approx(0.45));
  CHECK(s.a[0] == 1);
  CHECK(s.a[1] == 2);
}

TEST_CASE("ties keep the incumbent superior, sub-array 1 on the first step") {
  AdaptParams p;
  auto s = initial_state(0.15, 0.20, p);
  CHECK(geometry_step(s, m(0.3), m(0.3), p).superior == 1);
  CHECK(s.d2() == doctest::Approx(0.225));
  geometry_step(s, m(0.5), m(0.1), p);
  CHECK(geometry_step(s, m(0.3), m(0.3), p).superior == 2);
}

TEST_CASE("inferior spacing is held at d_sup after a_max competitors") {
  AdaptParams p;
  p.epsilon = 0.05;
  auto s = initial_state(0.10, 0.20, p);
  const double expected[] = {0.30, 0.20 * 2.0 / 3.0, 0.25, 0.20, 0.20};
  const StepEvent events[] = {StepEvent::kCompetitor, StepEvent::kCompetitor, StepEvent::kCompetitor,
                              StepEvent::kHeld, StepEvent::kHeld};
  double f = 0.5;
  for (std::size_t k = 0; k < 5; ++k) {
    const auto r = geometry_step(s, m(f + 0.1), m(f), p);
    f -= 0.01;  // superior keeps improving, no degradation
    CHECK(s.d1() == doctest::Approx(expected[k]));
    CHECK(s.d2() == doctest::Approx(0.20));
    CHECK(r.event == events[k]);
  }
}

TEST_CASE("worsening superior measure doubles the inferior spacing") {
  AdaptParams p;  // t_max = 3
  auto s = initial_state(0.10, 0.20, p);
  const double f2[] = {0.30, 0.31, 0.32, 0.33};
  std::vector<StepEvent> events;
  for (double f : f2) events.push_back(geometry_step(s, m(0.9), m(f), p).event);
  CHECK(events[0] == StepEvent::kCompetitor);
  CHECK(events[1] == StepEvent::kCompetitor);
  CHECK(events[2] == StepEvent::kCompetitor);
  CHECK(events[3] == StepEvent::kDoubled);
  // d1 before the fourth step was competitor_spacing(0.2, 3) = 0.25
  CHECK(s.d1() == doctest::Approx(0.50));
  CHECK(s.d2() == doctest::Approx(0.20));
  CHECK(s.t == 0);
  // the window restarts: further worsening needs t_max new steps
  CHECK(geometry_step(s, m(0.9), m(0.34), p).event != StepEvent::kDoubled);
}

TEST_CASE("a non-monotone worsening does not double") {
  AdaptParams p;
  auto s = initial_state(0.10, 0.20, p);
  for (double f : {0.30, 0.35, 0.29, 0.36}) CHECK(geometry_step(s, m(0.9), m(f), p).event != StepEvent::kDoubled);
}

TEST_CASE("spacings are clamped to the reach limits") {
  AdaptParams p;
  auto s = initial_state(0.01, 0.9, p);
  CHECK(s.d1() == p.d_min);
  CHECK(s.d2() == p.d_max);
  // superior 2 at 0.6: competitor 0.9 clamps to 0.6
  const auto r = geometry_step(s, m(0.5), m(0.1), p);
  CHECK(r.event == StepEvent::kClamped);
  CHECK(s.d1() == p.d_max);
}

TEST_CASE("non-finite measures are rejected without touching the state") {
  AdaptParams p;
  auto s = initial_state(0.15, 0.20, p);
  CHECK_THROWS_AS(geometry_step(s, m(std::nan("")), m(0.2), p), MeasurementError);
  CHECK_THROWS_AS(geometry_step(s, m(0.2), m(std::numeric_limits<double>::infinity()), p), MeasurementError);
  CHECK(s.j == 0);
  CHECK(s.d1() == 0.15);
  CHECK(s.sup_history.empty());
}

TEST_CASE("geometry steps match the reference model on random scripts") {
  std::mt19937_64 rng(12345);
  std::uniform_int_distribution<int> level(0, 5);
  std::uniform_int_distribution<int> len(1, 40);
  std::uniform_real_distribution<double> ud(0.02, 0.6), ue(0.005, 0.1);
  std::uniform_int_distribution<std::size_t> tm(1, 4);
  std::size_t doubled = 0, held = 0, clamped = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    AdaptParams p;
    p.epsilon = ue(rng);
    p.t_max = tm(rng);
    auto s = initial_state(ud(rng), ud(rng), p);
    ReferenceModel ref{p, {s.d1(), s.d2()}, {1, 1}, 0, {}};
    const int steps = len(rng);
    for (int k = 0; k < steps; ++k) {
      const double f1 = 0.1 * level(rng), f2 = 0.1 * level(rng);
      const double before[2] = {s.d1(), s.d2()};
      const auto expected = ref.step(f1, f2);
      const auto r = geometry_step(s, m(f1), m(f2), p);
      REQUIRE(r.event == expected);
      REQUIRE(r.superior == ref.sup);
      REQUIRE(s.d1() == ref.d[0]);
      REQUIRE(s.d2() == ref.d[1]);
      REQUIRE(s.a[0] == ref.a[0]);
      REQUIRE(s.a[1] == ref.a[1]);
      // the superior spacing never moves
      REQUIRE(s.d[r.superior - 1] == before[r.superior - 1]);
      doubled += r.event == StepEvent::kDoubled;
      held += r.event == StepEvent::kHeld;
      clamped += r.event == StepEvent::kClamped;
    }
  }
  // every branch was exercised
  CHECK(doubled > 100);
  CHECK(held > 100);
  CHECK(clamped > 100);
}

TEST_CASE("output selection hysteresis") {
  AdaptParams p;  // m_max = 3
  auto s = initial_state(0.15, 0.20, p);
  CHECK(s.selected_output == 1);
  CHECK_FALSE(select_output(s, m(0.5), m(0.4), p));
  CHECK_FALSE(select_output(s, m(0.5), m(0.4), p));
  CHECK(select_output(s, m(0.5), m(0.4), p));
  CHECK(s.selected_output == 2);
  CHECK(s.switch_streak == 0);

  auto t = initial_state(0.15, 0.20, p);
  CHECK_FALSE(select_output(t, m(0.5), m(0.4), p));
  CHECK_FALSE(select_output(t, m(0.5), m(0.4), p));
  CHECK_FALSE(select_output(t, m(0.5), m(0.6), p));
  CHECK_FALSE(select_output(t, m(0.5), m(0.4), p));
  CHECK(t.selected_output == 1);
  // ties do not count
  for (int i = 0; i < 10; ++i) CHECK_FALSE(select_output(t, m(0.5), m(0.5), p));
}

TEST_CASE("output switches exactly after m_max strictly better blocks") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> coin(0, 2);
  for (int trial = 0; trial < 10000; ++trial) {
    AdaptParams p;
    p.m_max = 1 + trial % 5;
    auto s = initial_state(0.15, 0.20, p);
    std::size_t run = 0;
    for (int b = 0; b < 30; ++b) {
      const int c = coin(rng);  // 0 better, 1 tie, 2 worse
      const double other = c == 0 ? 0.3 : (c == 1 ? 0.5 : 0.7);
      const int prev = s.selected_output;
      run = c == 0 ? run + 1 : 0;
      const bool expect = run == p.m_max;
      if (expect) run = 0;
      REQUIRE(select_output(s, m(0.5), m(other), p) == expect);
      REQUIRE(s.selected_output == (expect ? 3 - prev : prev));
    }
  }
}

TEST_CASE("identical scripts give identical trajectories") {
  AdaptParams p;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<double, double>> script(50);
  for (auto& v : script) v = {u(rng), u(rng)};
  auto a = initial_state(0.15, 0.2, p), b = initial_state(0.15, 0.2, p);
  for (auto [f1, f2] : script) {
    const auto ra = geometry_step(a, m(f1), m(f2), p);
    const auto rb = geometry_step(b, m(f1), m(f2), p);
    CHECK(ra.d1 == rb.d1);
    CHECK(ra.d2 == rb.d2);
    CHECK(ra.event == rb.event);
  }
  CHECK(to_string(StepEvent::kHeld) == "held");
}
