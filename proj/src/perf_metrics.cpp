#include "arraytune/perf_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "arraytune/errors.hpp"

namespace arraytune::metrics {

std::size_t WelchConfig::hop() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(window_length) * (1.0 - overlap_fraction)));
}

void WelchConfig::validate() const {
  if (window_length < 2) throw ConfigError("Welch window_length must be >= 2");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw ConfigError("Welch overlap_fraction must lie in [0, 1)");
  }
  const double hop_exact = static_cast<double>(window_length) * (1.0 - overlap_fraction);
  if (std::abs(hop_exact - std::round(hop_exact)) > 1e-9 || hop() == 0) {
    throw ConfigError("Welch overlap_fraction must give an integer hop");
  }
  if (!(averaging_constant > 0.0 && averaging_constant <= 1.0)) {
    throw ConfigError("Welch averaging_constant must lie in (0, 1]");
  }
}

CoherenceEstimator::CoherenceEstimator(const WelchConfig& cfg)
    : cfg_((cfg.validate(), cfg)), fft_(cfg.window_length) {
  window_ = cfg_.taper == Taper::kHann ? hann_window(cfg_.window_length)
                                       : std::vector<double>(cfg_.window_length, 1.0);
  s11_.assign(fft_.num_bins(), 0.0);
  s22_.assign(fft_.num_bins(), 0.0);
  s12_.assign(fft_.num_bins(), Complex{});
}

CoherenceEstimator::CoherenceEstimator(const WelchConfig& cfg, std::vector<double> s11,
                                       std::vector<double> s22, std::vector<Complex> s12,
                                       std::size_t segments_seen)
    : CoherenceEstimator(cfg) {
  const std::size_t bins = fft_.num_bins();
  if (s11.size() != bins || s22.size() != bins || s12.size() != bins) {
    throw DataError("restored spectra must have " + std::to_string(bins) + " bins");
  }
  for (std::size_t k = 0; k < bins; ++k) {
    if (!(s11[k] >= 0.0) || !(s22[k] >= 0.0) || !std::isfinite(s11[k]) || !std::isfinite(s22[k]) ||
        !std::isfinite(s12[k].real()) || !std::isfinite(s12[k].imag())) {
      throw DataError("restored auto spectra must be finite and non-negative");
    }
  }
  s11_ = std::move(s11);
  s22_ = std::move(s22);
  s12_ = std::move(s12);
  segments_seen_ = segments_seen;
  initialized_ = true;
}

void CoherenceEstimator::update(std::span<const double> y1, std::span<const double> y2) {
  if (y1.size() != y2.size()) throw DataError("coherence update: channels differ in length");
  const std::size_t win = cfg_.window_length;
  if (y1.size() < win) {
    throw DataError("coherence update: block of " + std::to_string(y1.size()) +
                    " samples is shorter than the window (" + std::to_string(win) + ")");
  }
  for (std::size_t n = 0; n < y1.size(); ++n) {
    if (!std::isfinite(y1[n]) || !std::isfinite(y2[n])) {
      throw DataError("coherence update: non-finite sample");
    }
  }

  const std::size_t bins = fft_.num_bins();
  const std::size_t hop = cfg_.hop();
  const std::size_t count = (y1.size() - win) / hop + 1;
  const double norm = std::inner_product(window_.begin(), window_.end(), window_.begin(), 0.0);

  std::vector<double> p11(bins, 0.0), p22(bins, 0.0);
  std::vector<Complex> p12(bins);
  std::vector<double> seg(win);
  std::vector<Complex> x1(bins), x2(bins);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t start = i * hop;
    for (std::size_t k = 0; k < win; ++k) seg[k] = window_[k] * y1[start + k];
    fft_.forward(seg, x1);
    for (std::size_t k = 0; k < win; ++k) seg[k] = window_[k] * y2[start + k];
    fft_.forward(seg, x2);
    for (std::size_t k = 0; k < bins; ++k) {
      p11[k] += std::norm(x1[k]);
      p22[k] += std::norm(x2[k]);
      p12[k] += std::conj(x1[k]) * x2[k];
    }
  }
  const double scale = 1.0 / (static_cast<double>(count) * norm);
  const double a = initialized_ ? cfg_.averaging_constant : 1.0;
  for (std::size_t k = 0; k < bins; ++k) {
    s11_[k] = (1.0 - a) * s11_[k] + a * p11[k] * scale;
    s22_[k] = (1.0 - a) * s22_[k] + a * p22[k] * scale;
    s12_[k] = (1.0 - a) * s12_[k] + a * p12[k] * scale;
  }
  segments_seen_ += count;
  initialized_ = true;
}

void CoherenceEstimator::dump_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write coherence dump '" + path.string() + "'");
  out.precision(17);
  out << "bin,S11,S22,ReS12,ImS12\n";
  for (std::size_t k = 0; k < num_bins(); ++k) {
    out << k << ',' << s11_[k] << ',' << s22_[k] << ',' << s12_[k].real() << ',' << s12_[k].imag() << '\n';
  }
  if (!out) throw IoError("failed writing coherence dump '" + path.string() + "'");
}

void update_psd(CoherenceEstimator& est, std::span<const double> y1, std::span<const double> y2) {
  est.update(y1, y2);
}

std::vector<double> weighting(const CoherenceEstimator& est) {
  std::vector<double> w(est.num_bins());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = 0.5 * (est.s11()[k] + est.s22()[k]);
  return w;
}

std::vector<double> coherence(const CoherenceEstimator& est) {
  std::vector<double> c(est.num_bins(), 0.0);
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double denom = est.s11()[k] * est.s22()[k];
    if (denom > 0.0) c[k] = std::clamp(std::norm(est.s12()[k]) / denom, 0.0, 1.0);
  }
  return c;
}

MscValue weighted_msc(const CoherenceEstimator& est) {
  if (!est.initialized()) throw UndefinedMeasureError("weighted MSC requested before any PSD update");
  double max_product = 0.0;
  for (std::size_t k = 0; k < est.num_bins(); ++k) {
    max_product = std::max(max_product, est.s11()[k] * est.s22()[k]);
  }
  if (!(max_product > 0.0)) throw UndefinedMeasureError("weighted MSC is undefined for all-zero spectra");

  const double floor = 1e-12 * max_product;
  const auto w = weighting(est);
  const auto c = coherence(est);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < est.num_bins(); ++k) {
    if (est.s11()[k] * est.s22()[k] < floor) continue;
    num += w[k] * c[k];
    den += w[k];
  }
  if (!(den > 0.0)) throw UndefinedMeasureError("weighted MSC has zero total weight");
  return MscValue{std::clamp(num / den, 0.0, 1.0)};
}

// ---------------------------------------------------------------------------

EnergyMatrix component_energies(const ComponentSet& components) {
  EnergyMatrix e{};
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t s = 0; s < 2; ++s) {
      double acc = 0.0;
      for (double v : components[o][s]) {
        if (!std::isfinite(v)) throw DataError("SIR: non-finite component sample");
        acc += v * v;
      }
      e[o][s] = acc;
    }
  }
  return e;
}

SirReport sir(const EnergyMatrix& energies, const Assignment& assignment) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  SirReport r;
  for (std::size_t o = 0; o < 2; ++o) {
    const int d = assignment[o];
    if (d != 0 && d != 1) throw DataError("SIR: assignment must name source 0 or 1");
    const double desired = energies[o][static_cast<std::size_t>(d)];
    const double interference = energies[o][static_cast<std::size_t>(1 - d)];
    if (desired == 0.0) {
      r.sir_per_output[o] = -kInf;
    } else if (interference == 0.0) {
      r.sir_per_output[o] = kInf;
    } else {
      r.sir_per_output[o] = 10.0 * std::log10(desired / interference);
    }
  }
  r.sir_mean = 0.5 * (r.sir_per_output[0] + r.sir_per_output[1]);
  return r;
}

SirReport sir(const ComponentSet& components, const Assignment& assignment) {
  return sir(component_energies(components), assignment);
}

Assignment default_assignment(const EnergyMatrix& energies) {
  Assignment claims{};
  for (std::size_t o = 0; o < 2; ++o) {
    if (energies[o][0] > energies[o][1]) {
      claims[o] = 0;
    } else if (energies[o][1] > energies[o][0]) {
      claims[o] = 1;
    } else {
      claims[o] = static_cast<int>(o);
    }
  }
  if (claims[0] != claims[1]) return claims;
  const Assignment identity{0, 1};
  const Assignment swapped{1, 0};
  return sir(energies, swapped).sir_mean > sir(energies, identity).sir_mean ? swapped : identity;
}

Assignment default_assignment(const ComponentSet& components) {
  return default_assignment(component_energies(components));
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw DataError("Spearman correlation needs two equally long series of at least two points");
  }
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace arraytune::metrics
