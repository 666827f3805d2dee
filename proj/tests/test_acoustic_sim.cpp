#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "doctest.h"
#include "test_support.hpp"

#include "arraytune/acoustic_sim.hpp"
#include "arraytune/errors.hpp"

using namespace arraytune;
using namespace arraytune::sim;

namespace {

RoomScenario desk_room(double t60 = 0.2) {
  RoomScenario s;
  s.t60 = t60;
  return s;
}

std::shared_ptr<const Signal> shared(Signal s) { return std::make_shared<const Signal>(std::move(s)); }

std::size_t first_nonzero(const Signal& h) {
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] != 0.0) return i;
  }
  return h.size();
}

}  // namespace

TEST_CASE("array geometry places microphones along the axis") {
  ArrayGeometry g;
  g.d1 = 0.1;
  g.d2 = 0.3;
  const auto m = g.mic_positions();
  CHECK(m[0].x == doctest::Approx(2.15));
  CHECK(m[1] == g.center);
  CHECK(m[2].x == doctest::Approx(2.55));
  CHECK(m[0].y == doctest::Approx(2.25));

  const Vec3 b = g.broadside();
  CHECK(norm(b) == doctest::Approx(1.0));
  CHECK(b.x * g.orientation.x + b.y * g.orientation.y + b.z * g.orientation.z == doctest::Approx(0.0));

  SourceSpec src{20.0, 1.0, nullptr, 1.0};
  const Vec3 p = g.source_position(src);
  CHECK(norm(p - g.center) == doctest::Approx(1.0));
  // positive angles lean towards +orientation
  CHECK(p.x - g.center.x == doctest::Approx(std::sin(20.0 * std::numbers::pi / 180.0)));
  CHECK(p.z == doctest::Approx(g.center.z));
}

TEST_CASE("anechoic RIR is a single delayed impulse with 1/(4 pi r) gain") {
  const RoomScenario room = desk_room(0.0);
  const Vec3 mic{2.0, 2.25, 1.2};
  const Vec3 src{3.0, 2.25, 1.2};
  const Signal h = generate_rir(room, src, mic);
  const auto peak = static_cast<std::size_t>(std::max_element(h.begin(), h.end(),
                                                              [](double a, double b) { return std::abs(a) < std::abs(b); }) -
                                             h.begin());
  const double delay = 16000.0 / 343.0;  // 46.65 samples
  CHECK((peak == 46 || peak == 47));
  double sum = 0.0;
  for (double v : h) sum += v;
  CHECK(sum == doctest::Approx(1.0 / (4.0 * std::numbers::pi)).epsilon(0.02));
  // energy is confined to the interpolation kernel around the delay
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (std::abs(static_cast<double>(i) - delay) > 5.0) CHECK(h[i] == 0.0);
  }
}

TEST_CASE("reverberant desk room decays with the requested T60") {
  const RoomScenario room = desk_room(0.2);
  ArrayGeometry g;
  for (double angle : {20.0, -20.0}) {
    const Vec3 src = g.source_position({angle, 1.0, nullptr, 1.0});
    for (const Vec3& m : g.mic_positions()) {
      const double t60 = estimate_t60(generate_rir(room, src, m), room.fs);
      CHECK(t60 >= 0.16);
      CHECK(t60 <= 0.24);
    }
  }
}

TEST_CASE("T60 follows the target across rooms") {
  for (double target : {0.1, 0.3, 0.5}) {
    const RoomScenario room = desk_room(target);
    const double t60 = estimate_t60(generate_rir(room, {3.0, 2.0, 1.2}, {2.0, 2.5, 1.4}), room.fs);
    CHECK(t60 == doctest::Approx(target).epsilon(0.2));
  }
}

TEST_CASE("Eyring coefficient inverts the Eyring formula") {
  for (double t60 : {0.1, 0.2, 0.6}) {
    const RoomScenario room = desk_room(t60);
    const double beta = eyring_reflection_coefficient(room);
    const double alpha = 1.0 - beta * beta;
    const double back =
        24.0 * std::log(10.0) * room.volume() / (-room.speed_of_sound * room.surface_area() * std::log(1.0 - alpha));
    CHECK(back == doctest::Approx(t60).epsilon(1e-9));
  }
  CHECK(eyring_reflection_coefficient(desk_room(0.0)) == 0.0);
  CHECK(eyring_reflection_coefficient(desk_room(0.3)) > eyring_reflection_coefficient(desk_room(0.2)));
  CHECK_THROWS_AS(eyring_reflection_coefficient(desk_room(INFINITY)), InfeasibleRoomError);
}

TEST_CASE("RIR is causal and its decay curve non-increasing") {
  const RoomScenario room = desk_room(0.2);
  const std::vector<std::pair<Vec3, Vec3>> pairs{{{1.0, 1.0, 1.0}, {3.5, 3.0, 1.5}},
                                                 {{2.25, 3.25, 1.2}, {2.1, 2.25, 1.2}},
                                                 {{0.3, 4.0, 2.2}, {4.1, 0.5, 0.4}}};
  for (const auto& [s, m] : pairs) {
    const Signal h = generate_rir(room, s, m);
    const double direct = norm(s - m) * room.fs / room.speed_of_sound;
    const auto earliest = static_cast<long>(std::floor(direct)) - 3;
    CHECK(static_cast<long>(first_nonzero(h)) >= earliest);
    const auto edc = schroeder_decay_db(h);
    CHECK(edc.front() == doctest::Approx(0.0));
    for (std::size_t i = 1; i < edc.size(); ++i) CHECK(edc[i] <= edc[i - 1] + 1e-12);
  }
}

TEST_CASE("mirror-symmetric microphones receive equal energy") {
  const RoomScenario room = desk_room(0.2);
  const Vec3 src{2.25, 2.25, 1.2};
  const double e1 = testing::energy(generate_rir(room, src, {1.75, 2.25, 1.2}));
  const double e2 = testing::energy(generate_rir(room, src, {2.75, 2.25, 1.2}));
  CHECK(std::abs(e1 - e2) <= 1e-9 * e1);
}

TEST_CASE("positions outside the room are rejected") {
  const RoomScenario room = desk_room(0.2);
  CHECK_THROWS_AS(generate_rir(room, {5.0, 1.0, 1.0}, {1.0, 1.0, 1.0}), DomainError);
  CHECK_THROWS_AS(generate_rir(room, {1.0, 1.0, 1.0}, {1.0, 1.0, 0.0}), DomainError);
  ArrayGeometry g;
  g.d2 = 3.0;
  CHECK_THROWS_AS(compute_rirs(room, g), DomainError);
  RoomScenario bad = room;
  bad.dimensions.y = 0.0;
  CHECK_THROWS_AS(generate_rir(bad, {1.0, 1.0, 1.0}, {2.0, 1.0, 1.0}), DomainError);
}

TEST_CASE("Schroeder T60 estimate recovers a synthetic exponential decay") {
  const double fs = 16000.0;
  for (double t60 : {0.15, 0.3, 0.8}) {
    auto h = testing::white_noise(static_cast<std::size_t>(1.5 * t60 * fs), 5);
    for (std::size_t n = 0; n < h.size(); ++n) h[n] *= std::pow(10.0, -3.0 * static_cast<double>(n) / (t60 * fs));
    CHECK(estimate_t60(h, fs) == doctest::Approx(t60).epsilon(0.05));
  }
}

TEST_CASE("critical distance") {
  CHECK(critical_distance(desk_room(0.2)) == doctest::Approx(0.057 * std::sqrt(50.625 / 0.2)));
  CHECK(std::abs(critical_distance(desk_room(0.2)) - 0.9) <= 0.05);

  RoomScenario big = desk_room(0.2);
  big.dimensions.x *= 4.0;
  CHECK(critical_distance(big) == doctest::Approx(2.0 * critical_distance(desk_room(0.2))));

  RoomScenario unit;
  unit.dimensions = {1.0, 1.0, 1.0};
  unit.t60 = 0.057 * 0.057;
  CHECK(critical_distance(unit) == doctest::Approx(1.0));
  CHECK_THROWS_AS(critical_distance(desk_room(0.0)), DomainError);
}

TEST_CASE("anechoic synthesis of a unit impulse returns the RIR") {
  RoomScenario room = desk_room(0.0);
  room.sources = {{30.0, 1.0, shared({1.0}), 1.0}};
  const ArrayGeometry g;
  const RirSet rirs = compute_rirs(room, g);
  const MicSignals mics = synthesize(room, g);
  REQUIRE(mics.total.size() == 3);
  for (std::size_t m = 0; m < 3; ++m) {
    const Signal& h = rirs.impulse_responses[0][m];
    REQUIRE(mics.total[m].size() == h.size());
    CHECK(testing::max_abs_diff(mics.total[m], h) < 1e-12);
  }
}

TEST_CASE("synthesis is linear, superposes exactly and is deterministic") {
  RoomScenario room = desk_room(0.2);
  const auto a = shared(speech_shaped_noise(VoiceProfile::kLow, 1, 8000, room.fs));
  const auto b = shared(speech_shaped_noise(VoiceProfile::kHigh, 2, 8000, room.fs));
  const ArrayGeometry g;

  room.sources = {{20.0, 1.0, a, 1.0}, {-20.0, 1.0, b, 1.0}};
  const MicSignals both = synthesize(room, g);
  const MicSignals again = synthesize(room, g);
  CHECK(both.total == again.total);
  CHECK(both.per_source_components == again.per_source_components);

  // total is the sum of components, and the sum of single-source totals
  RoomScenario only_a = room, only_b = room;
  only_a.sources = {room.sources[0]};
  only_b.sources = {room.sources[1]};
  const MicSignals sa = synthesize(only_a, g);
  const MicSignals sb = synthesize(only_b, g);
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t n = 0; n < both.total[m].size(); ++n) {
      CHECK_EQ(both.total[m][n], both.per_source_components[0][m][n] + both.per_source_components[1][m][n]);
      CHECK_EQ(both.total[m][n], sa.total[m][n] + sb.total[m][n]);
    }
  }

  // equal-power sources at equal distance arrive with similar power
  for (std::size_t m = 0; m < 3; ++m) {
    const double ratio = testing::energy(both.per_source_components[0][m]) / testing::energy(both.per_source_components[1][m]);
    CHECK(std::abs(10.0 * std::log10(ratio)) < 3.0);
  }

  // doubling one source's power scale doubles exactly its components
  RoomScenario louder = room;
  louder.sources[0].power_scale = 2.0;
  const MicSignals l = synthesize(louder, g);
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t n = 0; n < l.total[m].size(); ++n) {
      CHECK_EQ(l.per_source_components[0][m][n], 2.0 * both.per_source_components[0][m][n]);
      CHECK_EQ(l.per_source_components[1][m][n], both.per_source_components[1][m][n]);
    }
  }
}

TEST_CASE("synthesis rejects empty or non-finite sources") {
  RoomScenario room = desk_room(0.0);
  room.sources = {{0.0, 1.0, shared({}), 1.0}};
  CHECK_THROWS_AS(synthesize(room, ArrayGeometry{}), DataError);
  room.sources = {{0.0, 1.0, shared({1.0, NAN}), 1.0}};
  CHECK_THROWS_AS(synthesize(room, ArrayGeometry{}), DataError);
}

TEST_CASE("speech-shaped noise is seeded, normalised and profile dependent") {
  const double fs = 16000.0;
  const auto a = speech_shaped_noise(VoiceProfile::kLow, 7, 48000, fs);
  const auto b = speech_shaped_noise(VoiceProfile::kLow, 7, 48000, fs);
  const auto c = speech_shaped_noise(VoiceProfile::kLow, 8, 48000, fs);
  const auto hi = speech_shaped_noise(VoiceProfile::kHigh, 7, 48000, fs);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(std::sqrt(testing::energy(a) / 48000.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::sqrt(testing::energy(hi) / 48000.0) == doctest::Approx(1.0).epsilon(1e-9));

  // amplitude modulation: short-term power varies strongly across 50 ms frames
  double lo_frame = INFINITY, hi_frame = 0.0;
  for (std::size_t f = 0; f + 800 <= a.size(); f += 800) {
    const double p = testing::energy(std::span<const double>(a).subspan(f, 800));
    lo_frame = std::min(lo_frame, p);
    hi_frame = std::max(hi_frame, p);
  }
  CHECK(hi_frame > 100.0 * lo_frame);

  // the first-difference energy is a cheap proxy for high-frequency content
  const auto diff_energy = [](const Signal& s) {
    double e = 0.0;
    for (std::size_t n = 1; n < s.size(); ++n) e += (s[n] - s[n - 1]) * (s[n] - s[n - 1]);
    return e;
  };
  CHECK(diff_energy(hi) > diff_energy(a));
}
