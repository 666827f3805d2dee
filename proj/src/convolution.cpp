#include "arraytune/convolution.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace arraytune {

Signal fft_convolve(std::span<const double> x, std::span<const double> h) {
  if (x.empty() || h.empty()) return {};
  std::vector<std::vector<Signal>> bank{{Signal(h.begin(), h.end())}};
  const std::size_t fft_size = std::max<std::size_t>(1024, std::bit_ceil(2 * h.size()));
  MimoOverlapSave conv(bank, fft_size);
  return conv.apply({x}).front();
}

MimoOverlapSave::MimoOverlapSave(const std::vector<std::vector<Signal>>& filters,
                                 std::size_t fft_size)
    : fft_(fft_size) {
  if (filters.empty() || filters.front().empty()) {
    throw std::invalid_argument("MimoOverlapSave: empty filter bank");
  }
  filter_length_ = filters.front().front().size();
  if (filter_length_ == 0 || fft_size < 2 * filter_length_) {
    throw std::invalid_argument("MimoOverlapSave: fft_size must be at least 2 * filter_length");
  }
  Signal padded(fft_size);
  spectra_.resize(filters.size());
  for (std::size_t o = 0; o < filters.size(); ++o) {
    if (filters[o].size() != filters.front().size()) {
      throw std::invalid_argument("MimoOverlapSave: ragged filter bank");
    }
    for (const auto& h : filters[o]) {
      if (h.size() != filter_length_) {
        throw std::invalid_argument("MimoOverlapSave: filters differ in length");
      }
      std::fill(padded.begin(), padded.end(), 0.0);
      std::copy(h.begin(), h.end(), padded.begin());
      auto& spec = spectra_[o].emplace_back(fft_.num_bins());
      fft_.forward(padded, spec);
    }
  }
}

std::vector<Signal> MimoOverlapSave::apply(const std::vector<std::span<const double>>& inputs) const {
  if (inputs.size() != num_inputs()) {
    throw std::invalid_argument("MimoOverlapSave: input count does not match filter bank");
  }
  const std::size_t n = inputs.front().size();
  for (const auto& in : inputs) {
    if (in.size() != n) throw std::invalid_argument("MimoOverlapSave: inputs differ in length");
  }
  const std::size_t fft_size = fft_.size();
  const std::size_t overlap = filter_length_ - 1;
  const std::size_t hop = fft_size - overlap;
  const std::size_t out_len = n == 0 ? 0 : n + overlap;

  std::vector<Signal> out(num_outputs(), Signal(out_len, 0.0));
  if (out_len == 0) return out;

  const std::size_t bins = fft_.num_bins();
  std::vector<std::vector<Complex>> in_spec(num_inputs(), std::vector<Complex>(bins));
  std::vector<Complex> acc(bins);
  Signal frame(fft_size);
  Signal time(fft_size);

  // Output sample k of block b is y[b*hop + k]; the frame covers inputs
  // [b*hop - overlap, b*hop + hop) and the first `overlap` results are discarded.
  for (std::size_t start = 0; start < out_len; start += hop) {
    for (std::size_t q = 0; q < num_inputs(); ++q) {
      for (std::size_t k = 0; k < fft_size; ++k) {
        const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(start + k) - static_cast<std::ptrdiff_t>(overlap);
        frame[k] = (idx >= 0 && static_cast<std::size_t>(idx) < n) ? inputs[q][static_cast<std::size_t>(idx)] : 0.0;
      }
      fft_.forward(frame, in_spec[q]);
    }
    const std::size_t count = std::min(hop, out_len - start);
    for (std::size_t o = 0; o < num_outputs(); ++o) {
      std::fill(acc.begin(), acc.end(), Complex{});
      for (std::size_t q = 0; q < num_inputs(); ++q) {
        const auto& h = spectra_[o][q];
        for (std::size_t b = 0; b < bins; ++b) acc[b] += h[b] * in_spec[q][b];
      }
      fft_.inverse(acc, time);
      std::copy_n(time.begin() + static_cast<std::ptrdiff_t>(overlap), count,
                  out[o].begin() + static_cast<std::ptrdiff_t>(start));
    }
  }
  return out;
}

}  // namespace arraytune
