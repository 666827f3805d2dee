#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "arraytune/perf_metrics.hpp"

namespace arraytune::adapt {

using metrics::MscValue;

struct AdaptParams {
  double epsilon = 0.01;        ///< meters; competitor search stops within this distance
  std::size_t t_max = 3;        ///< geometry steps of degradation before the aperture is doubled
  std::size_t m_max = 3;        ///< consecutive better blocks needed to switch the output
  double d_min = 0.02;          ///< meters
  double d_max = 0.60;          ///< meters
  double segment_seconds = 10;  ///< BSS adaptation time per geometry step

  /// Throws ConfigError on invalid values.
  void validate() const;
};

enum class StepEvent { kCompetitor, kDoubled, kHeld, kClamped };

std::string_view to_string(StepEvent e);

/// Superior spacing and its measure at one geometry step.
struct SupRecord {
  std::size_t j = 0;
  int sub_array = 1;
  double d_sup = 0.0;
  double f_sup = 0.0;
};

/// Sub-arrays are numbered 1 and 2; index 0 of the arrays below is sub-array 1.
struct AdaptationState {
  std::size_t j = 0;
  std::array<double, 2> d{};
  std::array<std::size_t, 2> a{1, 1};
  /// Geometry steps since the degradation window was last reset.
  std::size_t t = 0;
  std::vector<SupRecord> sup_history;
  /// sup_history index from which the degradation reference may be taken.
  std::size_t degradation_origin = 0;
  /// Superior sub-array of the last step, 0 before the first step.
  int superior = 0;
  int selected_output = 1;
  std::size_t switch_streak = 0;

  double d1() const { return d[0]; }
  double d2() const { return d[1]; }
};

/// One record per geometry_step, as written to the geometry trace.
struct StepRecord {
  std::size_t j = 0;
  double d1 = 0.0;
  double d2 = 0.0;
  std::size_t a1 = 1;
  std::size_t a2 = 1;
  double f1 = 0.0;
  double f2 = 0.0;
  int superior = 1;
  int selected_output = 1;
  StepEvent event = StepEvent::kCompetitor;
};

/// Initial state with a1 = a2 = 1. Spacings are clamped into [d_min, d_max].
AdaptationState initial_state(double d1, double d2, const AdaptParams& params);

/// (1 + (-1)^(a+1) / (a+1)) * d_sup. Requires d_sup > 0 and a >= 1.
double competitor_spacing(double d_sup, std::size_t a);

/// Smallest a >= 1 with d_sup / (a+1) <= epsilon.
std::size_t a_max(double d_sup, double epsilon);

/// One geometry iteration given the converged measures of both sub-arrays (lower is
/// better). Only the inferior sub-array's spacing may change:
///  - the superior sub-array's competitor counter is reset to 1 and its spacing and
///    measure are appended to sup_history;
///  - if each of the last t_max recorded superior measures is strictly worse than the
///    one t_max steps back, the inferior spacing is doubled and the window restarts;
///  - otherwise the inferior spacing becomes competitor_spacing(d_sup, a_inf) and a_inf
///    is incremented, or, once a_inf exceeds a_max, it is held at d_sup;
///  - the result is clamped to [d_min, d_max].
/// Equal measures keep the previous superior (sub-array 1 on the first step).
/// Throws MeasurementError for non-finite measures.
StepRecord geometry_step(AdaptationState& state, MscValue f1, MscValue f2, const AdaptParams& params);

/// Per-block output hysteresis: the selected output moves to the other sub-array once
/// the other one has had the strictly lower measure for m_max consecutive blocks.
/// Returns true when the selection switched.
bool select_output(AdaptationState& state, MscValue f_selected, MscValue f_other, const AdaptParams& params);

}  // namespace arraytune::adapt
