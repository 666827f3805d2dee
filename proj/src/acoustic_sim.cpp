#include "arraytune/acoustic_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <mutex>
#include <string>
#include <utility>

#include "arraytune/errors.hpp"

namespace arraytune::sim {
namespace {

constexpr double kPi = std::numbers::pi;
// Half width of the windowed-sinc fractional delay; 2 * kHalfTaps taps in total.
constexpr int kHalfTaps = 4;

Vec3 normalized(Vec3 v) {
  const double n = norm(v);
  if (!(n > 0.0)) throw DomainError("array orientation must be a non-zero vector");
  return (1.0 / n) * v;
}

void validate(const RoomScenario& s) {
  if (!(s.dimensions.x > 0.0 && s.dimensions.y > 0.0 && s.dimensions.z > 0.0)) {
    throw DomainError("room dimensions must be positive");
  }
  if (!(s.t60 >= 0.0)) throw DomainError("t60 must be non-negative");
  if (!(s.fs > 0.0)) throw DomainError("sampling rate must be positive");
  if (!(s.speed_of_sound > 0.0)) throw DomainError("speed of sound must be positive");
}

// Adds a Hann-windowed sinc centred at `delay` samples.
void add_fractional_impulse(Signal& h, double delay, double gain) {
  const auto base = static_cast<long>(std::floor(delay));
  for (long n = base - kHalfTaps + 1; n <= base + kHalfTaps; ++n) {
    if (n < 0 || n >= static_cast<long>(h.size())) continue;
    const double x = static_cast<double>(n) - delay;
    const double window = 0.5 * (1.0 + std::cos(kPi * x / kHalfTaps));
    const double sinc = x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x);
    h[static_cast<std::size_t>(n)] += gain * window * sinc;
  }
}

double gain_for(double distance) { return 1.0 / (4.0 * kPi * distance); }

// Second-order high-pass (cut-off ~100 Hz) after Allen and Berkley. Removes the DC
// build-up of the all-positive image contributions.
void allen_berkley_highpass(Signal& h, double fs) {
  const double w = 2.0 * kPi * 100.0 / fs;
  const double r1 = std::exp(-w);
  const double b1 = 2.0 * r1 * std::cos(w);
  const double b2 = -r1 * r1;
  const double a1 = -(1.0 + r1);
  double y0 = 0.0, y1 = 0.0, y2 = 0.0;
  for (auto& v : h) {
    y2 = y1;
    y1 = y0;
    y0 = b1 * y1 + b2 * y2 + v;
    v = y0 + a1 * y1 + r1 * y2;
  }
}

// Image-method response for a given uniform reflection coefficient (beta > 0).
Signal image_response(const RoomScenario& scenario, Vec3 s, Vec3 r, double beta, std::size_t length) {
  Signal h(length, 0.0);
  const double samples_per_meter = scenario.fs / scenario.speed_of_sound;
  const double max_distance = static_cast<double>(length + kHalfTaps) / samples_per_meter;
  const Vec3& room = scenario.dimensions;
  const int nx = static_cast<int>(std::ceil(max_distance / (2.0 * room.x))) + 1;
  const int ny = static_cast<int>(std::ceil(max_distance / (2.0 * room.y))) + 1;
  const int nz = static_cast<int>(std::ceil(max_distance / (2.0 * room.z))) + 1;

  const int max_order = 2 * (nx + ny + nz) + 3;
  std::vector<double> beta_pow(static_cast<std::size_t>(max_order) + 1);
  beta_pow[0] = 1.0;
  for (std::size_t i = 1; i < beta_pow.size(); ++i) beta_pow[i] = beta_pow[i - 1] * beta;

  for (int mx = -nx; mx <= nx; ++mx) {
    for (int qx = 0; qx <= 1; ++qx) {
      const double dx = (1 - 2 * qx) * s.x - r.x + 2.0 * mx * room.x;
      const int ox = std::abs(mx - qx) + std::abs(mx);
      for (int my = -ny; my <= ny; ++my) {
        for (int qy = 0; qy <= 1; ++qy) {
          const double dy = (1 - 2 * qy) * s.y - r.y + 2.0 * my * room.y;
          const int oy = std::abs(my - qy) + std::abs(my);
          for (int mz = -nz; mz <= nz; ++mz) {
            for (int qz = 0; qz <= 1; ++qz) {
              const double dz = (1 - 2 * qz) * s.z - r.z + 2.0 * mz * room.z;
              const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
              if (dist > max_distance) continue;
              const int oz = std::abs(mz - qz) + std::abs(mz);
              const double g = beta_pow[static_cast<std::size_t>(ox + oy + oz)] * gain_for(dist);
              add_fractional_impulse(h, dist * samples_per_meter, g);
            }
          }
        }
      }
    }
  }
  allen_berkley_highpass(h, scenario.fs);
  return h;
}

}  // namespace

double norm(Vec3 v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

double RoomScenario::surface_area() const {
  const auto& d = dimensions;
  return 2.0 * (d.x * d.y + d.x * d.z + d.y * d.z);
}

std::array<Vec3, ArrayGeometry::kNumMics> ArrayGeometry::mic_positions() const {
  if (!(d1 > 0.0 && d2 > 0.0)) throw DomainError("microphone spacings must be positive");
  const Vec3 axis = normalized(orientation);
  return {center - d1 * axis, center, center + d2 * axis};
}

Vec3 ArrayGeometry::broadside() const {
  const Vec3 axis = normalized(orientation);
  // up x axis
  const Vec3 b{-axis.y, axis.x, 0.0};
  return normalized(b);
}

Vec3 ArrayGeometry::source_position(const SourceSpec& source) const {
  const double theta = source.angle_deg * kPi / 180.0;
  const Vec3 axis = normalized(orientation);
  return center + source.distance * (std::cos(theta) * broadside() + std::sin(theta) * axis);
}

void require_inside(const RoomScenario& scenario, Vec3 p, const char* what) {
  const auto& d = scenario.dimensions;
  const bool inside = p.x > 0.0 && p.x < d.x && p.y > 0.0 && p.y < d.y && p.z > 0.0 && p.z < d.z;
  if (!inside) {
    throw DomainError(std::string(what) + " at (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                      ", " + std::to_string(p.z) + ") is not strictly inside the room");
  }
}

double eyring_reflection_coefficient(const RoomScenario& scenario) {
  validate(scenario);
  if (scenario.t60 == 0.0) return 0.0;
  // T60 = 24 ln(10) V / (-c S ln(1 - alpha)), with beta^2 = 1 - alpha.
  const double k = 24.0 * std::log(10.0) / scenario.speed_of_sound;
  const double exponent = -k * scenario.volume() / (2.0 * scenario.surface_area() * scenario.t60);
  const double beta = std::exp(exponent);
  if (!std::isfinite(scenario.t60) || !(beta < 1.0)) {
    throw InfeasibleRoomError("t60 = " + std::to_string(scenario.t60) +
                              " s requires wall reflection coefficients of at least 1");
  }
  return beta;
}

namespace {

// Mean reverberation time measured on image-method responses for a few fixed
// source/receiver pairs (relative room coordinates, 0.9 m to 2.9 m apart in the
// default room). Used only to calibrate the reflection coefficient.
double calibration_t60(const RoomScenario& scenario, double beta) {
  static constexpr std::array<std::array<double, 6>, 4> kPairs{{
      {0.31, 0.43, 0.47, 0.62, 0.58, 0.52},
      {0.50, 0.50, 0.48, 0.55, 0.70, 0.48},
      {0.40, 0.60, 0.45, 0.60, 0.62, 0.45},
      {0.25, 0.30, 0.50, 0.70, 0.75, 0.50},
  }};
  const Vec3& room = scenario.dimensions;
  double sum = 0.0;
  for (const auto& p : kPairs) {
    const Vec3 s{p[0] * room.x, p[1] * room.y, p[2] * room.z};
    const Vec3 r{p[3] * room.x, p[4] * room.y, p[5] * room.z};
    // Same truncation as the responses handed out, so their measured decay matches.
    sum += estimate_t60(image_response(scenario, s, r, beta, rir_length(scenario)), scenario.fs);
  }
  return sum / static_cast<double>(kPairs.size());
}

}  // namespace

double reflection_coefficient(const RoomScenario& scenario) {
  const double eyring = eyring_reflection_coefficient(scenario);
  if (eyring == 0.0) return 0.0;

  struct Key {
    double lx, ly, lz, t60, fs, c;
    bool operator==(const Key&) const = default;
  };
  static std::mutex cache_mutex;
  static std::vector<std::pair<Key, double>> cache;
  const Key key{scenario.dimensions.x, scenario.dimensions.y, scenario.dimensions.z,
                scenario.t60, scenario.fs, scenario.speed_of_sound};
  {
    std::lock_guard lock(cache_mutex);
    for (const auto& [k, v] : cache) {
      if (k == key) return v;
    }
  }

  // The image-method decay of a shoebox is slower than the diffuse-field prediction, so
  // the Eyring coefficient is only the starting point. The decay rate is close to
  // proportional to -ln(beta), so a fixed-point iteration on ln(beta) suffices.
  double log_beta = std::log(eyring);
  for (int iter = 0; iter < 8; ++iter) {
    const double measured = calibration_t60(scenario, std::exp(log_beta));
    const double ratio = measured / scenario.t60;
    log_beta *= ratio;
    if (std::abs(ratio - 1.0) < 0.005) break;
  }
  const double beta = std::exp(log_beta);
  if (!(beta < 1.0)) {
    throw InfeasibleRoomError("t60 = " + std::to_string(scenario.t60) +
                              " s requires wall reflection coefficients of at least 1");
  }
  std::lock_guard lock(cache_mutex);
  cache.emplace_back(key, beta);
  return beta;
}

std::size_t rir_length(const RoomScenario& scenario) {
  const double n = std::ceil(1.25 * scenario.t60 * scenario.fs);
  return std::max<std::size_t>(1024, static_cast<std::size_t>(n));
}

Signal generate_rir(const RoomScenario& scenario, Vec3 source_position, Vec3 mic_position) {
  validate(scenario);
  require_inside(scenario, source_position, "source");
  require_inside(scenario, mic_position, "microphone");
  const double beta = reflection_coefficient(scenario);

  const double samples_per_meter = scenario.fs / scenario.speed_of_sound;
  const double direct = norm(source_position - mic_position);
  const std::size_t length =
      std::max(rir_length(scenario), static_cast<std::size_t>(std::ceil(direct * samples_per_meter)) + kHalfTaps + 1);

  if (beta == 0.0) {
    Signal h(length, 0.0);
    add_fractional_impulse(h, direct * samples_per_meter, gain_for(direct));
    return h;
  }
  return image_response(scenario, source_position, mic_position, beta, length);
}

RirSet compute_rirs(const RoomScenario& scenario, const ArrayGeometry& geometry) {
  validate(scenario);
  const auto mics = geometry.mic_positions();
  for (const auto& m : mics) require_inside(scenario, m, "microphone");

  RirSet set;
  for (const auto& src : scenario.sources) {
    if (!(src.distance > 0.0)) throw DomainError("source distance must be positive");
    const Vec3 pos = geometry.source_position(src);
    auto& row = set.impulse_responses.emplace_back();
    for (const auto& m : mics) row.push_back(generate_rir(scenario, pos, m));
  }
  // Pad to a common length (long direct paths may extend individual responses).
  for (const auto& row : set.impulse_responses) {
    for (const auto& h : row) set.length = std::max(set.length, h.size());
  }
  for (auto& row : set.impulse_responses) {
    for (auto& h : row) h.resize(set.length, 0.0);
  }
  return set;
}

MicSignals render(const RoomScenario& scenario, const RirSet& rirs) {
  if (rirs.impulse_responses.size() != scenario.sources.size()) {
    throw DataError("RIR set does not match the number of sources");
  }
  MicSignals out;
  out.fs = scenario.fs;
  std::size_t out_len = 0;
  for (std::size_t s = 0; s < scenario.sources.size(); ++s) {
    const auto& src = scenario.sources[s];
    if (!src.signal || src.signal->empty()) throw DataError("source signal is empty");
    Signal scaled(src.signal->size());
    for (std::size_t n = 0; n < scaled.size(); ++n) {
      const double v = (*src.signal)[n];
      if (!std::isfinite(v)) throw DataError("source signal contains non-finite samples");
      scaled[n] = v * src.power_scale;
    }
    auto& comps = out.per_source_components.emplace_back();
    for (const auto& h : rirs.impulse_responses[s]) {
      comps.push_back(fft_convolve(scaled, h));
      out_len = std::max(out_len, comps.back().size());
    }
  }
  const std::size_t num_mics = rirs.impulse_responses.empty() ? 0 : rirs.impulse_responses.front().size();
  out.total.assign(num_mics, Signal(out_len, 0.0));
  for (auto& comps : out.per_source_components) {
    for (std::size_t m = 0; m < num_mics; ++m) {
      comps[m].resize(out_len, 0.0);
      for (std::size_t n = 0; n < out_len; ++n) out.total[m][n] += comps[m][n];
    }
  }
  return out;
}

MicSignals synthesize(const RoomScenario& scenario, const ArrayGeometry& geometry) {
  return render(scenario, compute_rirs(scenario, geometry));
}

double critical_distance(const RoomScenario& scenario) {
  validate(scenario);
  if (scenario.t60 == 0.0) throw DomainError("critical distance is undefined for t60 = 0");
  return 0.057 * std::sqrt(scenario.volume() / scenario.t60);
}

std::vector<double> schroeder_decay_db(std::span<const double> rir) {
  std::vector<double> edc(rir.size());
  double acc = 0.0;
  for (std::size_t i = rir.size(); i-- > 0;) {
    acc += rir[i] * rir[i];
    edc[i] = acc;
  }
  const double total = acc;
  for (auto& e : edc) e = total > 0.0 ? 10.0 * std::log10(std::max(e / total, 1e-300)) : -3000.0;
  return edc;
}

double estimate_t60(std::span<const double> rir, double fs) {
  const auto edc = schroeder_decay_db(rir);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < edc.size(); ++i) {
    if (edc[i] > -5.0 || edc[i] < -25.0) continue;
    const double t = static_cast<double>(i) / fs;
    sx += t;
    sy += edc[i];
    sxx += t * t;
    sxy += t * edc[i];
    ++count;
  }
  if (count < 2) throw DataError("decay curve does not span -5..-25 dB");
  const double n = static_cast<double>(count);
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return -60.0 / slope;
}

// ---------------------------------------------------------------------------

namespace {

struct ProfileShape {
  double tilt_pole;
  double formant1_hz;
  double formant2_hz;
  double formant_radius;
  double formant_gain;
};

ProfileShape shape_of(VoiceProfile p) {
  switch (p) {
    case VoiceProfile::kLow:
      return {0.92, 500.0, 1500.0, 0.97, 0.6};
    case VoiceProfile::kHigh:
      return {0.80, 750.0, 2300.0, 0.96, 0.6};
  }
  return {0.9, 600.0, 1800.0, 0.96, 0.5};
}

Signal resonate(const Signal& x, double freq, double radius, double fs) {
  const double a1 = 2.0 * radius * std::cos(2.0 * kPi * freq / fs);
  const double a2 = -radius * radius;
  const double g = 1.0 - radius;
  Signal y(x.size());
  double y1 = 0.0, y2 = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double v = g * x[n] + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = v;
    y[n] = v;
  }
  return y;
}

// Talk spurts of syllables with raised-sine envelopes, separated by pauses.
Signal syllable_envelope(std::mt19937_64& rng, std::size_t num_samples, double fs) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto draw = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };
  constexpr double kFloor = 1e-3;
  Signal env(num_samples, kFloor);
  std::size_t pos = static_cast<std::size_t>(draw(0.0, 0.3) * fs);
  while (pos < num_samples) {
    const double spurt_end = static_cast<double>(pos) + draw(0.8, 2.5) * fs;
    while (static_cast<double>(pos) < spurt_end && pos < num_samples) {
      const auto len = static_cast<std::size_t>(draw(0.12, 0.30) * fs);
      const double peak = draw(0.5, 1.0);
      for (std::size_t k = 0; k < len && pos + k < num_samples; ++k) {
        const double s = std::sin(kPi * static_cast<double>(k) / static_cast<double>(len));
        env[pos + k] = std::max(kFloor, peak * s * s);
      }
      pos += len + static_cast<std::size_t>(draw(0.02, 0.08) * fs);
    }
    pos += static_cast<std::size_t>(draw(0.2, 0.8) * fs);
  }
  return env;
}

}  // namespace

Signal speech_shaped_noise(VoiceProfile profile, std::uint64_t seed, std::size_t num_samples, double fs) {
  if (num_samples == 0) return {};
  const ProfileShape shape = shape_of(profile);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Signal white(num_samples);
  for (auto& v : white) v = gauss(rng);

  Signal tilted(num_samples);
  double prev = 0.0;
  for (std::size_t n = 0; n < num_samples; ++n) {
    prev = white[n] + shape.tilt_pole * prev;
    tilted[n] = prev;
  }
  const Signal f1 = resonate(white, shape.formant1_hz, shape.formant_radius, fs);
  const Signal f2 = resonate(white, shape.formant2_hz, shape.formant_radius, fs);

  // Remove DC and the lowest octave, which real speech barely occupies.
  Signal colored(num_samples);
  double x_prev = 0.0, y_prev = 0.0;
  const double tilt_norm = 1.0 - shape.tilt_pole;
  for (std::size_t n = 0; n < num_samples; ++n) {
    const double x = tilt_norm * tilted[n] + shape.formant_gain * (f1[n] + 0.5 * f2[n]) * 4.0;
    y_prev = x - x_prev + 0.98 * y_prev;
    x_prev = x;
    colored[n] = y_prev;
  }

  const Signal env = syllable_envelope(rng, num_samples, fs);
  double energy = 0.0;
  for (std::size_t n = 0; n < num_samples; ++n) {
    colored[n] *= env[n];
    energy += colored[n] * colored[n];
  }
  const double rms = std::sqrt(energy / static_cast<double>(num_samples));
  if (rms > 0.0) {
    for (auto& v : colored) v /= rms;
  }
  return colored;
}

}  // namespace arraytune::sim
