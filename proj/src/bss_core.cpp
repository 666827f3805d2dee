#include "arraytune/bss_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "arraytune/errors.hpp"

namespace arraytune::bss {

Mat2 Mat2::inverse() const {
  const Complex d = det();
  if (d == Complex{}) throw DataError("singular 2x2 matrix");
  const Complex inv = 1.0 / d;
  return {m11 * inv, -m01 * inv, -m10 * inv, m00 * inv};
}

double Mat2::frobenius_norm() const {
  return std::sqrt(std::norm(m00) + std::norm(m01) + std::norm(m10) + std::norm(m11));
}

double Mat2::condition_number() const {
  // Singular values from the eigenvalues of A^H A.
  const double f2 = std::norm(m00) + std::norm(m01) + std::norm(m10) + std::norm(m11);
  const double ad = std::abs(det());
  const double disc = std::sqrt(std::max(0.0, f2 * f2 - 4.0 * ad * ad));
  const double smax2 = 0.5 * (f2 + disc);
  const double smin2 = 0.5 * (f2 - disc);
  if (!(smin2 > 0.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(smax2 / smin2);
}

void BssConfig::validate() const {
  if (filter_length < 2) throw ConfigError("BSS filter_length must be >= 2");
  if (fft_size < 2 * filter_length) throw ConfigError("BSS fft_size must be >= 2 * filter_length");
  if (fft_size % 2 != 0) throw ConfigError("BSS fft_size must be even");
  if (block_length < filter_length) throw ConfigError("BSS block_length must be >= filter_length");
  if (block_length % hop() != 0) throw ConfigError("BSS block_length must be a multiple of fft_size / 2");
  if (!(forgetting_factor > 0.0 && forgetting_factor <= 1.0)) {
    throw ConfigError("BSS forgetting_factor must lie in (0, 1]");
  }
  if (!(regularization >= 0.0)) throw ConfigError("BSS regularization must be >= 0");
  if (!(step_size > 0.0 && step_size < 1.0)) throw ConfigError("BSS step_size must lie in (0, 1)");
  if (max_history_blocks < 1) throw ConfigError("BSS max_history_blocks must be >= 1");
  if (alignment_frames < 2) throw ConfigError("BSS alignment_frames must be >= 2");
}

BssState::BssState(const BssConfig& cfg) : cfg_((cfg.validate(), cfg)), fft_(cfg.fft_size) {
  window_ = hann_window(cfg_.fft_size);
  unmixing_.assign(cfg_.num_bins(), Mat2::identity());
  statistics_.assign(cfg_.num_bins(), Mat2::zero());
  for (auto& c : carry_) c.assign(cfg_.fft_size - cfg_.hop(), 0.0);
}

BssState bss_init(const BssConfig& cfg) { return BssState(cfg); }

Mat2 BssState::demixing(std::size_t bin) const {
  const Mat2& w = unmixing_.at(bin);
  Complex d = w.det();
  if (std::abs(d) < 1e-300) d = Complex{1e-300, 0.0};
  // diag(W^-1) = (m11, m00) / det
  const Complex s0 = w.m11 / d;
  const Complex s1 = w.m00 / d;
  return {s0 * w.m00, s0 * w.m01, s1 * w.m10, s1 * w.m11};
}

std::array<std::array<Signal, 2>, 2> BssState::filters() const {
  const std::size_t n = cfg_.fft_size;
  const std::size_t taps = cfg_.filter_length;
  const std::size_t delay = filter_delay();
  const auto taper = hann_window(taps);
  std::array<std::array<Signal, 2>, 2> h;
  std::array<std::array<std::vector<Complex>, 2>, 2> spec;
  for (auto& row : spec) {
    for (auto& s : row) s.resize(num_bins());
  }
  for (std::size_t k = 0; k < num_bins(); ++k) {
    const Mat2 d = demixing(k);
    spec[0][0][k] = d.m00;
    spec[0][1][k] = d.m01;
    spec[1][0][k] = d.m10;
    spec[1][1][k] = d.m11;
  }
  Signal circ(n);
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t q = 0; q < 2; ++q) {
      fft_.inverse(spec[o][q], circ);
      auto& taps_out = h[o][q];
      taps_out.resize(taps);
      for (std::size_t k = 0; k < taps; ++k) {
        const std::size_t idx = (k + n - delay) % n;
        taps_out[k] = circ[idx] * taper[k];
      }
    }
  }
  return h;
}

double BssState::offdiagonal_ratio() const {
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < num_bins(); ++k) {
    const Mat2& w = unmixing_[k];
    const Mat2 y = w * statistics_[k] * w.hermitian();
    const double p0 = y.m00.real();
    const double p1 = y.m11.real();
    if (!(p0 > 0.0 && p1 > 0.0)) continue;
    acc += std::norm(y.m01) / (p0 * p1);
    ++used;
  }
  return used == 0 ? 0.0 : acc / static_cast<double>(used);
}

void BssState::push_frames(const std::vector<Frame>& frames) {
  for (const auto& f : frames) frames_.push_back(f);
  if (frames_.size() > cfg_.alignment_frames) {
    frames_.erase(frames_.begin(), frames_.begin() + static_cast<std::ptrdiff_t>(frames_.size() - cfg_.alignment_frames));
  }
}

// Joint off-diagonalization of the weighted block statistics. The cost
//   sum_k w_k [log det diag(Y_k) - log det Y_k],  Y_k = W R_k W^H,
// has the relative gradient sum_k w_k (diag(Y_k)^-1 Y_k - I), whose off-diagonal part
// drives the multiplicative update W <- W - mu G W.
void BssState::natural_gradient_steps() {
  const std::size_t num_hist = history_.size();
  std::vector<double> weights(num_hist);
  double wsum = 0.0;
  for (std::size_t i = 0; i < num_hist; ++i) {
    const auto age = static_cast<double>(num_hist - 1 - i);
    weights[i] = std::pow(cfg_.forgetting_factor, age);
    wsum += weights[i];
  }
  for (auto& w : weights) w /= wsum;

  const double mu = cfg_.step_size;
  for (std::size_t k = 0; k < num_bins(); ++k) {
    Mat2& w = unmixing_[k];
    for (std::size_t it = 0; it < cfg_.num_inner_iterations; ++it) {
      Complex g01{}, g10{};
      for (std::size_t i = 0; i < num_hist; ++i) {
        Mat2 r = history_[i][k];
        const double loading =
            cfg_.regularization * 0.5 * (r.m00.real() + r.m11.real()) + std::numeric_limits<double>::min();
        r.m00 += loading;
        r.m11 += loading;
        const Mat2 y = w * r * w.hermitian();
        g01 += weights[i] * y.m01 / y.m00.real();
        g10 += weights[i] * y.m10 / y.m11.real();
      }
      // Keep the step a contraction when the outputs are strongly correlated.
      const double gnorm = std::sqrt(std::norm(g01) + std::norm(g10));
      const double scale = gnorm > 1.0 ? mu / gnorm : mu;
      const Mat2 g{Complex{}, scale * g01, scale * g10, Complex{}};
      w = w - g * w;
    }
  }
}

// Sorts each bin's two outputs so that their magnitude envelopes follow the
// cross-bin centroid envelopes (iterated to a fixed point). Global labels follow the
// majority of bins so that the output order is stable from block to block.
void BssState::align_permutations() {
  const std::size_t nf = frames_.size();
  if (nf < 2) return;
  const std::size_t bins = num_bins();

  // env[k][o][f], normalised to zero mean and unit norm per (bin, output)
  std::vector<std::array<std::vector<double>, 2>> env(bins);
  std::vector<char> usable(bins, 0);
  for (std::size_t k = 1; k + 1 < bins; ++k) {
    const Mat2& w = unmixing_[k];
    bool ok = true;
    for (std::size_t o = 0; o < 2; ++o) {
      auto& e = env[k][o];
      e.resize(nf);
      const Complex a = o == 0 ? w.m00 : w.m10;
      const Complex b = o == 0 ? w.m01 : w.m11;
      for (std::size_t f = 0; f < nf; ++f) {
        const auto& x = frames_[f].bins[k];
        e[f] = std::abs(a * x[0] + b * x[1]);
      }
      const double mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(nf);
      double ss = 0.0;
      for (auto& v : e) {
        v -= mean;
        ss += v * v;
      }
      if (!(ss > 0.0)) {
        ok = false;
        break;
      }
      const double inv = 1.0 / std::sqrt(ss);
      for (auto& v : e) v *= inv;
    }
    usable[k] = ok ? 1 : 0;
  }

  std::vector<char> swap(bins, 0);
  const auto dot = [nf](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t f = 0; f < nf; ++f) s += a[f] * b[f];
    return s;
  };
  std::array<std::vector<double>, 2> centroid{std::vector<double>(nf), std::vector<double>(nf)};
  for (int sweep = 0; sweep < 20; ++sweep) {
    for (auto& c : centroid) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t k = 0; k < bins; ++k) {
      if (!usable[k]) continue;
      for (std::size_t o = 0; o < 2; ++o) {
        const auto& src = env[k][swap[k] ? 1 - o : o];
        for (std::size_t f = 0; f < nf; ++f) centroid[o][f] += src[f];
      }
    }
    for (auto& c : centroid) {
      const double mean = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(nf);
      double ss = 0.0;
      for (auto& v : c) {
        v -= mean;
        ss += v * v;
      }
      if (ss > 0.0) {
        const double inv = 1.0 / std::sqrt(ss);
        for (auto& v : c) v *= inv;
      }
    }
    bool changed = false;
    for (std::size_t k = 0; k < bins; ++k) {
      if (!usable[k]) continue;
      const double keep = dot(env[k][0], centroid[0]) + dot(env[k][1], centroid[1]);
      const double flip = dot(env[k][1], centroid[0]) + dot(env[k][0], centroid[1]);
      const char s = flip > keep ? 1 : 0;
      if (s != swap[k]) {
        swap[k] = s;
        changed = true;
      }
    }
    if (!changed) break;
  }

  // Leave the order alone when the envelopes share no structure across bins
  // (e.g. stationary noise): their correlation with the other bins' centroid is then
  // at the chance level of about 1/sqrt(nf) and any reordering would be arbitrary.
  std::array<std::vector<double>, 2> total{std::vector<double>(nf, 0.0), std::vector<double>(nf, 0.0)};
  for (std::size_t k = 0; k < bins; ++k) {
    if (!usable[k]) continue;
    for (std::size_t o = 0; o < 2; ++o) {
      const auto& src = env[k][swap[k] ? 1 - o : o];
      for (std::size_t f = 0; f < nf; ++f) total[o][f] += src[f];
    }
  }
  double agreement = 0.0;
  std::size_t counted = 0;
  std::array<std::vector<double>, 2> others{std::vector<double>(nf), std::vector<double>(nf)};
  for (std::size_t k = 0; k < bins; ++k) {
    if (!usable[k]) continue;
    std::array<double, 2> norm{};
    for (std::size_t o = 0; o < 2; ++o) {
      const auto& own = env[k][swap[k] ? 1 - o : o];
      for (std::size_t f = 0; f < nf; ++f) others[o][f] = total[o][f] - own[f];
      norm[o] = std::sqrt(dot(others[o], others[o]));
    }
    if (!(norm[0] > 0.0 && norm[1] > 0.0)) continue;
    const double keep = dot(env[k][0], others[0]) / norm[0] + dot(env[k][1], others[1]) / norm[1];
    const double flip = dot(env[k][1], others[0]) / norm[0] + dot(env[k][0], others[1]) / norm[1];
    agreement += 0.5 * std::max(keep, flip);
    ++counted;
  }
  if (counted == 0 || agreement / static_cast<double>(counted) < 1.6 / std::sqrt(static_cast<double>(nf))) return;

  std::size_t used = 0, swapped = 0;
  for (std::size_t k = 0; k < bins; ++k) {
    used += static_cast<std::size_t>(usable[k]);
    swapped += static_cast<std::size_t>(usable[k] && swap[k]);
  }
  const bool relabel = 2 * swapped > used;
  for (std::size_t k = 0; k < bins; ++k) {
    if (!usable[k]) continue;
    if (static_cast<bool>(swap[k]) != relabel) {
      Mat2& w = unmixing_[k];
      std::swap(w.m00, w.m10);
      std::swap(w.m01, w.m11);
    }
  }
}

void bss_adapt_block(BssState& state, const TwoChannel& block) {
  const BssConfig& cfg = state.cfg_;
  for (const auto& ch : block) {
    if (ch.size() != cfg.block_length) {
      throw DataError("BSS block has " + std::to_string(ch.size()) + " samples, expected " +
                      std::to_string(cfg.block_length));
    }
    for (double v : ch) {
      if (!std::isfinite(v)) throw DataError("BSS block contains non-finite samples");
    }
  }

  const std::size_t n = cfg.fft_size;
  const std::size_t hop = cfg.hop();
  const std::size_t bins = cfg.num_bins();
  const std::size_t carry_len = n - hop;

  std::array<std::vector<double>, 2> ext;
  for (std::size_t c = 0; c < 2; ++c) {
    ext[c] = state.carry_[c];
    ext[c].insert(ext[c].end(), block[c].begin(), block[c].end());
  }
  const std::size_t num_frames = (ext[0].size() - n) / hop + 1;
  std::vector<BssState::Frame> frames(num_frames);
  std::vector<Mat2> r(bins, Mat2::zero());
  std::vector<double> seg(n);
  std::array<std::vector<Complex>, 2> spec{std::vector<Complex>(bins), std::vector<Complex>(bins)};
  for (std::size_t f = 0; f < num_frames; ++f) {
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t i = 0; i < n; ++i) seg[i] = state.window_[i] * ext[c][f * hop + i];
      state.fft_.forward(seg, spec[c]);
    }
    frames[f].bins.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      const Complex x0 = spec[0][k];
      const Complex x1 = spec[1][k];
      frames[f].bins[k] = {x0, x1};
      r[k].m00 += std::norm(x0);
      r[k].m01 += x0 * std::conj(x1);
      r[k].m10 += x1 * std::conj(x0);
      r[k].m11 += std::norm(x1);
    }
  }
  for (std::size_t c = 0; c < 2; ++c) {
    state.carry_[c].assign(ext[c].end() - static_cast<std::ptrdiff_t>(carry_len), ext[c].end());
  }

  const double inv_frames = 1.0 / static_cast<double>(num_frames);
  const double lambda = cfg.forgetting_factor;
  double block_power = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    r[k] = inv_frames * r[k];
    state.statistics_[k] = lambda * state.statistics_[k] + (1.0 - lambda) * r[k];
    block_power += 0.5 * (r[k].m00.real() + r[k].m11.real());
  }
  block_power /= static_cast<double>(bins);
  state.push_frames(frames);

  // Silent blocks carry no information about the mixing; statistics decay only.
  const bool excited = block_power > 1e-12 * state.mean_power_ && block_power > 0.0;
  if (excited) {
    state.mean_power_ = state.blocks_processed_ == 0 || state.mean_power_ == 0.0
                            ? block_power
                            : lambda * state.mean_power_ + (1.0 - lambda) * block_power;
    state.history_.push_back(std::move(r));
    if (state.history_.size() > cfg.max_history_blocks) state.history_.erase(state.history_.begin());
    state.natural_gradient_steps();
    state.align_permutations();
  }
  ++state.blocks_processed_;
}

BssOutputs bss_apply(const BssState& state, const TwoChannel& signals, std::span<const TwoChannel> components) {
  const std::size_t len = signals[0].size();
  if (signals[1].size() != len) throw DataError("BSS apply: input channels differ in length");
  for (const auto& ch : signals) {
    for (double v : ch) {
      if (!std::isfinite(v)) throw DataError("BSS apply: non-finite input sample");
    }
  }
  for (const auto& comp : components) {
    if (comp[0].size() != len || comp[1].size() != len) {
      throw DataError("BSS apply: component channels must match the input length");
    }
  }

  const auto h = state.filters();
  std::vector<std::vector<Signal>> bank(2);
  for (std::size_t o = 0; o < 2; ++o) bank[o] = {h[o][0], h[o][1]};
  const MimoOverlapSave conv(bank, state.config().fft_size);
  const std::size_t delay = state.filter_delay();

  const auto run = [&](const TwoChannel& in) {
    auto full = conv.apply({in[0], in[1]});
    std::array<Signal, 2> out;
    for (std::size_t o = 0; o < 2; ++o) {
      out[o].assign(full[o].begin() + static_cast<std::ptrdiff_t>(delay),
                    full[o].begin() + static_cast<std::ptrdiff_t>(delay + len));
    }
    return out;
  };

  BssOutputs result;
  result.y = run(signals);
  if (!components.empty()) {
    auto& comps = result.components.emplace();
    for (const auto& comp : components) comps.push_back(run(comp));
  }
  return result;
}

void BssState::export_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write filter dump '" + path.string() + "'");
  out.precision(17);
  out << "bin,W00re,W00im,W01re,W01im,W10re,W10im,W11re,W11im\n";
  for (std::size_t k = 0; k < num_bins(); ++k) {
    const Mat2& w = unmixing_[k];
    out << k << ',' << w.m00.real() << ',' << w.m00.imag() << ',' << w.m01.real() << ',' << w.m01.imag() << ','
        << w.m10.real() << ',' << w.m10.imag() << ',' << w.m11.real() << ',' << w.m11.imag() << '\n';
  }
  if (!out) throw IoError("failed writing filter dump '" + path.string() + "'");
}

BssState BssState::import_csv(const BssConfig& cfg, const std::filesystem::path& path) {
  BssState state(cfg);
  std::ifstream in(path);
  if (!in) throw IoError("cannot read filter dump '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::size_t bin = 0;
    std::array<double, 8> v{};
    ss >> bin;
    for (auto& x : v) ss >> x;
    if (!ss || bin >= state.num_bins()) throw DataError("malformed filter dump line: " + line);
    state.unmixing_[bin] = {{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}};
    ++rows;
  }
  if (rows != state.num_bins()) {
    throw DataError("filter dump has " + std::to_string(rows) + " bins, expected " + std::to_string(state.num_bins()));
  }
  return state;
}

}  // namespace arraytune::bss
