#include "arraytune/geometry_adapt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "arraytune/errors.hpp"

namespace arraytune::adapt {

void AdaptParams::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (t_max < 1) throw ConfigError("t_max must be at least 1");
  if (m_max < 1) throw ConfigError("m_max must be at least 1");
  if (!(d_min > 0.0 && d_min < d_max)) throw ConfigError("need 0 < d_min < d_max");
  if (!(segment_seconds > 0.0)) throw ConfigError("segment_seconds must be positive");
}

std::string_view to_string(StepEvent e) {
  switch (e) {
    case StepEvent::kCompetitor:
      return "competitor";
    case StepEvent::kDoubled:
      return "doubled";
    case StepEvent::kHeld:
      return "held";
    case StepEvent::kClamped:
      return "clamped";
  }
  return "unknown";
}

AdaptationState initial_state(double d1, double d2, const AdaptParams& params) {
  params.validate();
  AdaptationState s;
  s.d = {std::clamp(d1, params.d_min, params.d_max), std::clamp(d2, params.d_min, params.d_max)};
  return s;
}

double competitor_spacing(double d_sup, std::size_t a) {
  if (!(d_sup > 0.0)) throw std::invalid_argument("competitor_spacing: d_sup must be positive");
  if (a < 1) throw std::invalid_argument("competitor_spacing: a must be >= 1");
  const double sign = (a % 2 == 1) ? 1.0 : -1.0;  // (-1)^(a+1)
  return (1.0 + sign / static_cast<double>(a + 1)) * d_sup;
}

std::size_t a_max(double d_sup, double epsilon) {
  if (!(d_sup > 0.0) || !(epsilon > 0.0)) {
    throw std::invalid_argument("a_max: d_sup and epsilon must be positive");
  }
  constexpr double kCap = 1e15;
  const double ratio = d_sup / epsilon;
  if (!(ratio < kCap)) return static_cast<std::size_t>(kCap);
  auto a = static_cast<std::size_t>(std::max(1.0, std::ceil(ratio) - 1.0));
  // Settle rounding of the division against the defining inequality.
  while (a > 1 && d_sup / static_cast<double>(a) <= epsilon) --a;
  while (d_sup / static_cast<double>(a + 1) > epsilon) ++a;
  return a;
}

namespace {

bool degradation_due(const AdaptationState& s, std::size_t t_max) {
  const std::size_t n = s.sup_history.size() - 1;
  if (n < s.degradation_origin + t_max) return false;
  const double reference = s.sup_history[n - t_max].f_sup;
  for (std::size_t k = n - t_max + 1; k <= n; ++k) {
    if (!(s.sup_history[k].f_sup > reference)) return false;
  }
  return true;
}

}  // namespace

StepRecord geometry_step(AdaptationState& state, MscValue f1, MscValue f2, const AdaptParams& params) {
  if (!std::isfinite(f1.value) || !std::isfinite(f2.value)) {
    throw MeasurementError("geometry step " + std::to_string(state.j) + ": non-finite performance measure");
  }

  int sup = 0;
  if (f1.value < f2.value) {
    sup = 1;
  } else if (f2.value < f1.value) {
    sup = 2;
  } else {
    sup = state.superior != 0 ? state.superior : 1;
  }
  const auto si = static_cast<std::size_t>(sup - 1);
  const std::size_t ii = 1 - si;

  state.a[si] = 1;
  const double d_sup = state.d[si];
  const double f_sup = sup == 1 ? f1.value : f2.value;
  state.sup_history.push_back({state.j, sup, d_sup, f_sup});

  StepEvent event = StepEvent::kCompetitor;
  double target = 0.0;
  if (degradation_due(state, params.t_max)) {
    target = 2.0 * state.d[ii];
    state.degradation_origin = state.sup_history.size() - 1;
    event = StepEvent::kDoubled;
  } else if (state.a[ii] <= a_max(d_sup, params.epsilon)) {
    target = competitor_spacing(d_sup, state.a[ii]);
    ++state.a[ii];
  } else {
    target = d_sup;
    event = StepEvent::kHeld;
  }
  const double clamped = std::clamp(target, params.d_min, params.d_max);
  if (clamped != target) event = StepEvent::kClamped;
  state.d[ii] = clamped;

  state.t = state.sup_history.size() - 1 - state.degradation_origin;
  state.superior = sup;

  StepRecord rec;
  rec.j = state.j;
  rec.d1 = state.d[0];
  rec.d2 = state.d[1];
  rec.a1 = state.a[0];
  rec.a2 = state.a[1];
  rec.f1 = f1.value;
  rec.f2 = f2.value;
  rec.superior = sup;
  rec.selected_output = state.selected_output;
  rec.event = event;
  ++state.j;
  return rec;
}

bool select_output(AdaptationState& state, MscValue f_selected, MscValue f_other, const AdaptParams& params) {
  if (f_other.value < f_selected.value) {
    ++state.switch_streak;
  } else {
    state.switch_streak = 0;
  }
  if (state.switch_streak >= params.m_max) {
    state.selected_output = 3 - state.selected_output;
    state.switch_streak = 0;
    return true;
  }
  return false;
}

}  // namespace arraytune::adapt
