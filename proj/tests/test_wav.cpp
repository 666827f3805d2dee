#include <fstream>

#include "doctest.h"
#include "test_support.hpp"

#include "arraytune/errors.hpp"
#include "arraytune/wav.hpp"

using namespace arraytune;

TEST_CASE("float WAV round trip is exact for float-representable samples") {
  const auto dir = testing::scratch_dir("wav_float");
  wav::Audio a;
  a.sample_rate = 16000;
  a.channels = {{0.0, 0.5, -0.25, 1.5}, {1.0, -1.0, 0.125, 0.0}};
  wav::write(dir / "a.wav", a);
  const auto b = wav::read(dir / "a.wav");
  CHECK(b.sample_rate == 16000);
  REQUIRE(b.channels.size() == 2);
  CHECK(b.channels == a.channels);
}

TEST_CASE("16-bit WAV round trip within one quantisation step, clipped to range") {
  const auto dir = testing::scratch_dir("wav_pcm");
  wav::Audio a;
  a.sample_rate = 8000;
  a.channels = {{0.0, 0.3, -0.7, 2.0, -2.0}};
  wav::write(dir / "p.wav", a, wav::SampleFormat::kPcm16);
  const auto b = wav::read(dir / "p.wav");
  REQUIRE(b.channels.size() == 1);
  REQUIRE(b.channels[0].size() == 5);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(b.channels[0][i] - a.channels[0][i]) <= 1.0 / 32767.0);
  CHECK(b.channels[0][3] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(b.channels[0][4] == doctest::Approx(-1.0).epsilon(1e-4));
}

TEST_CASE("read_mono checks rate and channel count") {
  const auto dir = testing::scratch_dir("wav_mono");
  wav::Audio mono{16000, {{0.1, 0.2}}};
  wav::Audio stereo{16000, {{0.1}, {0.2}}};
  wav::write(dir / "m.wav", mono);
  wav::write(dir / "s.wav", stereo);
  CHECK(wav::read_mono(dir / "m.wav", 16000).size() == 2);
  CHECK_THROWS_AS(wav::read_mono(dir / "m.wav", 44100), DataError);
  CHECK_THROWS_AS(wav::read_mono(dir / "s.wav", 16000), DataError);
}

TEST_CASE("malformed and missing files") {
  const auto dir = testing::scratch_dir("wav_bad");
  CHECK_THROWS_AS(wav::read(dir / "missing.wav"), IoError);
  {
    std::ofstream out(dir / "junk.wav", std::ios::binary);
    out << "this is not a wave file";
  }
  CHECK_THROWS_AS(wav::read(dir / "junk.wav"), Error);
  CHECK_THROWS_AS(wav::write(dir / "x.wav", wav::Audio{16000, {{1.0}, {1.0, 2.0}}}), DataError);
  CHECK_THROWS_AS(wav::write(dir / "x.wav", wav::Audio{16000, {}}), DataError);
}
