#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "arraytune/convolution.hpp"
#include "arraytune/fft.hpp"

namespace arraytune::bss {

/// 2x2 complex matrix, row-major: [m00 m01; m10 m11].
struct Mat2 {
  Complex m00{1.0, 0.0};
  Complex m01{};
  Complex m10{};
  Complex m11{1.0, 0.0};

  static Mat2 identity() { return {}; }
  static Mat2 zero() { return {Complex{}, Complex{}, Complex{}, Complex{}}; }
  Complex det() const { return m00 * m11 - m01 * m10; }
  Mat2 hermitian() const { return {std::conj(m00), std::conj(m10), std::conj(m01), std::conj(m11)}; }
  Mat2 inverse() const;
  /// Ratio of the singular values (infinity when singular).
  double condition_number() const;
  double frobenius_norm() const;

  friend Mat2 operator*(const Mat2& a, const Mat2& b) {
    return {a.m00 * b.m00 + a.m01 * b.m10, a.m00 * b.m01 + a.m01 * b.m11,
            a.m10 * b.m00 + a.m11 * b.m10, a.m10 * b.m01 + a.m11 * b.m11};
  }
  friend Mat2 operator+(const Mat2& a, const Mat2& b) {
    return {a.m00 + b.m00, a.m01 + b.m01, a.m10 + b.m10, a.m11 + b.m11};
  }
  friend Mat2 operator-(const Mat2& a, const Mat2& b) {
    return {a.m00 - b.m00, a.m01 - b.m01, a.m10 - b.m10, a.m11 - b.m11};
  }
  friend Mat2 operator*(double s, const Mat2& a) { return {s * a.m00, s * a.m01, s * a.m10, s * a.m11}; }
};

struct BssConfig {
  std::size_t filter_length = 1024;  ///< L, taps per demixing filter
  std::size_t fft_size = 2048;       ///< frame length of the frequency-domain model, >= 2L
  std::size_t block_length = 8192;   ///< samples per adaptation block, >= L
  double forgetting_factor = 0.9;    ///< per-block weight decay of past statistics
  std::size_t num_inner_iterations = 10;
  /// Diagonal loading of each cross-power matrix, relative to the mean power of its bin.
  double regularization = 0.05;
  /// Natural-gradient step size.
  double step_size = 0.2;
  /// Past block statistics kept for the joint off-diagonalization.
  std::size_t max_history_blocks = 32;
  /// Frames of envelope history used for permutation alignment.
  std::size_t alignment_frames = 64;

  /// Throws ConfigError on invalid values.
  void validate() const;
  std::size_t hop() const { return fft_size / 2; }
  std::size_t num_bins() const { return fft_size / 2 + 1; }
};

using TwoChannel = std::array<std::span<const double>, 2>;

/// Single-owner adaptation state of one two-microphone separator.
class BssState {
 public:
  explicit BssState(const BssConfig& cfg);

  const BssConfig& config() const { return cfg_; }
  std::size_t num_bins() const { return unmixing_.size(); }
  std::size_t blocks_processed() const { return blocks_processed_; }

  /// Unmixing matrix of a bin as adapted (before output scaling).
  const Mat2& unmixing(std::size_t bin) const { return unmixing_.at(bin); }
  /// Unmixing matrix after minimal-distortion scaling: diag(W^-1) W. Output o then
  /// estimates each source's image at microphone o.
  Mat2 demixing(std::size_t bin) const;
  /// Recursively averaged input cross-power matrix of a bin.
  const Mat2& statistics(std::size_t bin) const { return statistics_.at(bin); }

  /// Time-domain demixing filters [output][input], filter_length taps each, with the
  /// non-causal part shifted by filter_delay() samples.
  std::array<std::array<Signal, 2>, 2> filters() const;
  std::size_t filter_delay() const { return cfg_.filter_length / 2; }

  /// Mean over bins of |Y01|^2 / (Y00 Y11) for Y = W S W^H; 0 means fully decorrelated.
  double offdiagonal_ratio() const;

  /// CSV `bin,W00re,W00im,W01re,W01im,W10re,W10im,W11re,W11im` of the unmixing matrices.
  void export_csv(const std::filesystem::path& path) const;
  /// Loads unmixing matrices written by export_csv; statistics start from zero.
  static BssState import_csv(const BssConfig& cfg, const std::filesystem::path& path);

 private:
  friend void bss_adapt_block(BssState& state, const TwoChannel& block);

  struct Frame {
    std::vector<std::array<Complex, 2>> bins;
  };

  void push_frames(const std::vector<Frame>& frames);
  void natural_gradient_steps();
  void align_permutations();

  BssConfig cfg_;
  RealFft fft_;
  std::vector<double> window_;
  std::vector<Mat2> unmixing_;
  std::vector<Mat2> statistics_;
  std::vector<std::vector<Mat2>> history_;  ///< newest last
  std::vector<Frame> frames_;               ///< alignment ring, newest last
  std::array<std::vector<double>, 2> carry_;
  double mean_power_ = 0.0;
  std::size_t blocks_processed_ = 0;
};

/// Fresh state: identity unmixing in every bin, zero statistics.
BssState bss_init(const BssConfig& cfg);

/// Adapts on one block of block_length samples per channel. Throws DataError for a
/// wrong block length or non-finite samples.
void bss_adapt_block(BssState& state, const TwoChannel& block);

struct BssOutputs {
  std::array<Signal, 2> y;
  /// components[s][o]: source s's contribution to output o (only when requested).
  std::optional<std::vector<std::array<Signal, 2>>> components;
};

/// Filters `signals` with the current demixing filters (linear convolution, delay
/// compensated so that identity filters return the input). Every entry of
/// `components` (per-source microphone images) is filtered the same way.
BssOutputs bss_apply(const BssState& state, const TwoChannel& signals,
                     std::span<const TwoChannel> components = {});

}  // namespace arraytune::bss
