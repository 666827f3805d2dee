#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "arraytune/fft.hpp"

namespace arraytune::metrics {

enum class Taper { kHann, kRectangular };

struct WelchConfig {
  std::size_t window_length = 4096;
  double overlap_fraction = 0.5;
  Taper taper = Taper::kHann;
  /// Weight of the newest block in the recursive average; 1 keeps only the newest.
  double averaging_constant = 0.3;

  std::size_t hop() const;
  /// Throws ConfigError on invalid values.
  void validate() const;
};

/// Weighted magnitude-squared coherence, always within [0, 1].
struct MscValue {
  double value = 0.0;
  friend auto operator<=>(const MscValue&, const MscValue&) = default;
};

/// Running Welch estimate of the auto and cross spectra of two signals, recursively
/// averaged over blocks.
class CoherenceEstimator {
 public:
  explicit CoherenceEstimator(const WelchConfig& cfg);

  /// Restores a state, e.g. from a dump. All spectra need window_length/2 + 1 bins.
  CoherenceEstimator(const WelchConfig& cfg, std::vector<double> s11, std::vector<double> s22,
                     std::vector<Complex> s12, std::size_t segments_seen);

  /// Adds one block: averages the tapered, overlapped periodograms of the block and
  /// blends them in as S <- (1 - a) S + a * block (the first block is taken as is).
  /// Throws DataError for unequal lengths, blocks shorter than the window, or
  /// non-finite samples.
  void update(std::span<const double> y1, std::span<const double> y2);

  const WelchConfig& config() const { return cfg_; }
  std::size_t num_bins() const { return s11_.size(); }
  std::size_t segments_seen() const { return segments_seen_; }
  bool initialized() const { return initialized_; }
  const std::vector<double>& s11() const { return s11_; }
  const std::vector<double>& s22() const { return s22_; }
  const std::vector<Complex>& s12() const { return s12_; }

  /// CSV with header `bin,S11,S22,ReS12,ImS12`.
  void dump_csv(const std::filesystem::path& path) const;

 private:
  WelchConfig cfg_;
  RealFft fft_;
  std::vector<double> window_;
  std::vector<double> s11_;
  std::vector<double> s22_;
  std::vector<Complex> s12_;
  std::size_t segments_seen_ = 0;
  bool initialized_ = false;
};

/// Free-function form of CoherenceEstimator::update.
void update_psd(CoherenceEstimator& est, std::span<const double> y1, std::span<const double> y2);

/// W(v) = (S11(v) + S22(v)) / 2.
std::vector<double> weighting(const CoherenceEstimator& est);

/// Per-bin |S12|^2 / (S11 S22), clamped to [0, 1]; 0 where the denominator vanishes.
std::vector<double> coherence(const CoherenceEstimator& est);

/// W-weighted average of the per-bin coherence. Bins whose S11*S22 falls below 1e-12
/// of the largest such product are left out of numerator and normaliser. Throws
/// UndefinedMeasureError when no bin carries power.
MscValue weighted_msc(const CoherenceEstimator& est);

// --- signal-to-interference ratio ------------------------------------------

/// energies[o][s]: energy of source s's component at output o.
using EnergyMatrix = std::array<std::array<double, 2>, 2>;
/// components[o][s]: the component of source s in output o.
using ComponentSet = std::array<std::array<std::span<const double>, 2>, 2>;
/// assignment[o]: index of the source considered desired at output o.
using Assignment = std::array<int, 2>;

struct SirReport {
  std::array<double, 2> sir_per_output{};  ///< dB, may be +/-infinity
  double sir_mean = 0.0;                   ///< arithmetic mean of the two dB values
};

EnergyMatrix component_energies(const ComponentSet& components);

/// 10 log10(desired energy / interference energy) per output. Zero interference gives
/// +infinity, zero desired energy -infinity.
SirReport sir(const EnergyMatrix& energies, const Assignment& assignment);
SirReport sir(const ComponentSet& components, const Assignment& assignment);

/// Each output takes the source that dominates it; if both outputs are dominated by
/// the same source, the permutation with the larger mean SIR wins, ties going to the
/// identity.
Assignment default_assignment(const EnergyMatrix& energies);
Assignment default_assignment(const ComponentSet& components);

/// Spearman rank correlation (average ranks for ties). Needs at least two points.
double spearman_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace arraytune::metrics
