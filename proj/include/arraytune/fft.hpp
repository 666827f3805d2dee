#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace arraytune {

using Complex = std::complex<double>;

/// Real-input FFT of fixed size backed by FFTW.
///
/// Plans are created with FFTW_ESTIMATE so that the chosen algorithm, and therefore
/// every rounding decision, is identical from run to run. Plan creation is serialised
/// internally; `forward` and `inverse` may be called concurrently from different
/// instances.
class RealFft {
 public:
  explicit RealFft(std::size_t size);
  ~RealFft();

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&& other) noexcept;
  RealFft& operator=(RealFft&& other) noexcept;

  std::size_t size() const { return size_; }
  std::size_t num_bins() const { return size_ / 2 + 1; }

  /// `in` holds size() samples, `out` receives num_bins() coefficients (unnormalised).
  void forward(std::span<const double> in, std::span<Complex> out) const;

  /// Inverse transform including the 1/size normalisation.
  void inverse(std::span<const Complex> in, std::span<double> out) const;

 private:
  void release();

  std::size_t size_ = 0;
  double* real_buf_ = nullptr;
  Complex* spec_buf_ = nullptr;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

}  // namespace arraytune
