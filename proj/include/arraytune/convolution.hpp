#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "arraytune/fft.hpp"

namespace arraytune {

using Signal = std::vector<double>;

/// Full linear convolution (length x.size() + h.size() - 1) computed block-wise in the
/// frequency domain. Either argument empty yields an empty result.
Signal fft_convolve(std::span<const double> x, std::span<const double> h);

/// Multi-input multi-output FIR filter bank evaluated by overlap-save.
///
/// filters[o][q] is the impulse response from input q to output o; all responses share
/// one length. `apply` returns, per output o, the full linear convolution
/// sum_q filters[o][q] * inputs[q] of length N + L - 1.
class MimoOverlapSave {
 public:
  MimoOverlapSave(const std::vector<std::vector<Signal>>& filters, std::size_t fft_size);

  std::size_t num_outputs() const { return spectra_.size(); }
  std::size_t num_inputs() const { return spectra_.empty() ? 0 : spectra_.front().size(); }
  std::size_t filter_length() const { return filter_length_; }

  std::vector<Signal> apply(const std::vector<std::span<const double>>& inputs) const;

 private:
  std::size_t filter_length_ = 0;
  RealFft fft_;
  std::vector<std::vector<std::vector<Complex>>> spectra_;
};

}  // namespace arraytune
