#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "arraytune/convolution.hpp"

namespace arraytune::sim {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

double norm(Vec3 v);

/// A sound source placed relative to the array center.
struct SourceSpec {
  double angle_deg = 0.0;  ///< relative to broadside, positive towards +orientation
  double distance = 1.0;   ///< meters from the array center
  std::shared_ptr<const Signal> signal;
  double power_scale = 1.0;
};

struct RoomScenario {
  Vec3 dimensions{4.5, 4.5, 2.5};
  double t60 = 0.2;
  double fs = 16000.0;
  double speed_of_sound = 343.0;
  std::vector<SourceSpec> sources;

  double volume() const { return dimensions.x * dimensions.y * dimensions.z; }
  double surface_area() const;
};

/// Three-sensor linear array: microphone 1 at center - d1*orientation, microphone 2 at
/// the (fixed) center, microphone 3 at center + d2*orientation.
struct ArrayGeometry {
  Vec3 center{2.25, 2.25, 1.2};
  double d1 = 0.15;
  double d2 = 0.20;
  Vec3 orientation{1.0, 0.0, 0.0};

  static constexpr std::size_t kNumMics = 3;
  std::array<Vec3, kNumMics> mic_positions() const;
  /// Horizontal unit vector perpendicular to the array axis.
  Vec3 broadside() const;
  Vec3 source_position(const SourceSpec& source) const;
};

/// impulse_responses[source][mic]; every response has `length` samples.
struct RirSet {
  std::vector<std::vector<Signal>> impulse_responses;
  std::size_t length = 0;
};

/// total[mic] and per_source_components[source][mic]; total is by construction the
/// sample-wise sum of the components.
struct MicSignals {
  std::vector<Signal> total;
  std::vector<std::vector<Signal>> per_source_components;
  double fs = 0.0;
};

/// Uniform wall reflection coefficient from Eyring's formula (0 for t60 = 0).
double eyring_reflection_coefficient(const RoomScenario& scenario);

/// Uniform wall reflection coefficient for which the image-method decay of this room
/// has reverberation time t60. Starts from the Eyring value and is cached per room.
double reflection_coefficient(const RoomScenario& scenario);

/// Impulse response length used for the scenario: max(1024, ceil(1.25 * t60 * fs)).
std::size_t rir_length(const RoomScenario& scenario);

/// Image-method room impulse response between two points inside the room.
Signal generate_rir(const RoomScenario& scenario, Vec3 source_position, Vec3 mic_position);

RirSet compute_rirs(const RoomScenario& scenario, const ArrayGeometry& geometry);

/// Convolves every source (scaled by its power_scale) with the given responses.
MicSignals render(const RoomScenario& scenario, const RirSet& rirs);

MicSignals synthesize(const RoomScenario& scenario, const ArrayGeometry& geometry);

/// 0.057 * sqrt(V / t60), in meters.
double critical_distance(const RoomScenario& scenario);

/// Schroeder backward-integrated energy decay curve in dB (0 dB at the first sample).
std::vector<double> schroeder_decay_db(std::span<const double> rir);

/// Reverberation time from a least-squares fit of the decay curve between -5 dB and
/// -25 dB, extrapolated to -60 dB.
double estimate_t60(std::span<const double> rir, double fs);

/// Throws DomainError unless p lies strictly inside the room.
void require_inside(const RoomScenario& scenario, Vec3 p, const char* what);

// Built-in speech-shaped test material --------------------------------------

enum class VoiceProfile { kLow, kHigh };

/// Seeded Gaussian noise, coloured with a low-pass tilt and two formant-like
/// resonances, gated by a syllable/pause amplitude envelope and normalised to unit RMS.
Signal speech_shaped_noise(VoiceProfile profile, std::uint64_t seed, std::size_t num_samples,
                           double fs);

}  // namespace arraytune::sim
