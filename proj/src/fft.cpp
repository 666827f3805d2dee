#include "arraytune/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace arraytune {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RealFft::RealFft(std::size_t size) : size_(size) {
  if (size < 2) throw std::invalid_argument("RealFft: size must be >= 2");
  real_buf_ = static_cast<double*>(fftw_malloc(sizeof(double) * size_));
  spec_buf_ = static_cast<Complex*>(fftw_malloc(sizeof(fftw_complex) * num_bins()));
  std::lock_guard lock(planner_mutex());
  auto* spec = reinterpret_cast<fftw_complex*>(spec_buf_);
  forward_plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(size_), real_buf_, spec, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(size_), spec, real_buf_, FFTW_ESTIMATE);
}

RealFft::~RealFft() { release(); }

RealFft::RealFft(RealFft&& other) noexcept
    : size_(other.size_),
      real_buf_(std::exchange(other.real_buf_, nullptr)),
      spec_buf_(std::exchange(other.spec_buf_, nullptr)),
      forward_plan_(std::exchange(other.forward_plan_, nullptr)),
      inverse_plan_(std::exchange(other.inverse_plan_, nullptr)) {}

RealFft& RealFft::operator=(RealFft&& other) noexcept {
  if (this != &other) {
    release();
    size_ = other.size_;
    real_buf_ = std::exchange(other.real_buf_, nullptr);
    spec_buf_ = std::exchange(other.spec_buf_, nullptr);
    forward_plan_ = std::exchange(other.forward_plan_, nullptr);
    inverse_plan_ = std::exchange(other.inverse_plan_, nullptr);
  }
  return *this;
}

void RealFft::release() {
  {
    std::lock_guard lock(planner_mutex());
    if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    if (inverse_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
  }
  if (real_buf_) fftw_free(real_buf_);
  if (spec_buf_) fftw_free(spec_buf_);
  forward_plan_ = inverse_plan_ = nullptr;
  real_buf_ = nullptr;
  spec_buf_ = nullptr;
}

// The new-array execute functions keep the plans reentrant; the scratch buffers are
// only touched by the owning instance.
void RealFft::forward(std::span<const double> in, std::span<Complex> out) const {
  std::copy_n(in.begin(), size_, real_buf_);
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), real_buf_,
                       reinterpret_cast<fftw_complex*>(spec_buf_));
  std::copy_n(spec_buf_, num_bins(), out.begin());
}

void RealFft::inverse(std::span<const Complex> in, std::span<double> out) const {
  // c2r destroys its input, so work on the scratch copy.
  std::copy_n(in.begin(), num_bins(), spec_buf_);
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(spec_buf_), real_buf_);
  const double scale = 1.0 / static_cast<double>(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = real_buf_[i] * scale;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n)));
  }
  return w;
}

}  // namespace arraytune
