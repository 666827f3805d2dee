#include "arraytune/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "arraytune/errors.hpp"

namespace arraytune::wav {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T load(const std::vector<char>& buf, std::size_t offset) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  return value;
}

template <typename T>
void store(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

Audio read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file '" + path.string() + "'");
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto bad = [&](const std::string& what) {
    return DataError("malformed WAV file '" + path.string() + "': " + what);
  };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw bad("missing RIFF/WAVE header");
  }

  std::uint16_t format = 0;
  std::uint16_t num_channels = 0;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_offset = 0;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(buf.data() + pos, 4);
    const auto size = load<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > buf.size()) {
      if (id != "data") throw bad("truncated chunk '" + id + "'");
    }
    if (id == "fmt ") {
      if (size < 16) throw bad("short fmt chunk");
      format = load<std::uint16_t>(buf, body);
      num_channels = load<std::uint16_t>(buf, body + 2);
      rate = load<std::uint32_t>(buf, body + 4);
      bits = load<std::uint16_t>(buf, body + 14);
      if (format == kFormatExtensible && size >= 26) format = load<std::uint16_t>(buf, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      data_offset = body;
      data_size = std::min<std::size_t>(size, buf.size() - body);
      break;
    }
    pos = body + size + (size & 1U);
  }
  if (!have_fmt) throw bad("no fmt chunk");
  if (data_offset == 0) throw bad("no data chunk");
  if (num_channels == 0) throw bad("zero channels");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw bad("unsupported sample format (only 16-bit PCM and 32-bit float are accepted)");
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = data_size / (bytes_per_sample * num_channels);
  Audio audio;
  audio.sample_rate = rate;
  audio.channels.assign(num_channels, std::vector<double>(frames));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < num_channels; ++c) {
      const std::size_t off = data_offset + (n * num_channels + c) * bytes_per_sample;
      double v = pcm16 ? load<std::int16_t>(buf, off) / 32768.0 : static_cast<double>(load<float>(buf, off));
      if (!std::isfinite(v)) throw DataError("non-finite sample in '" + path.string() + "'");
      audio.channels[c][n] = v;
    }
  }
  return audio;
}

std::vector<double> read_mono(const std::filesystem::path& path, std::uint32_t expected_rate) {
  Audio audio = read(path);
  if (audio.channels.size() != 1) {
    throw DataError("'" + path.string() + "' has " + std::to_string(audio.channels.size()) +
                    " channels, expected mono");
  }
  if (audio.sample_rate != expected_rate) {
    throw DataError("'" + path.string() + "' is sampled at " + std::to_string(audio.sample_rate) +
                    " Hz, expected " + std::to_string(expected_rate) + " Hz (no resampling is done)");
  }
  if (audio.channels.front().empty()) throw DataError("'" + path.string() + "' holds no samples");
  return std::move(audio.channels.front());
}

void write(const std::filesystem::path& path, const Audio& audio, SampleFormat format) {
  if (audio.channels.empty()) throw DataError("cannot write a WAV file without channels");
  const std::size_t frames = audio.channels.front().size();
  for (const auto& ch : audio.channels) {
    if (ch.size() != frames) throw DataError("WAV channels differ in length");
  }
  const auto num_channels = static_cast<std::uint16_t>(audio.channels.size());
  const std::uint16_t bits = format == SampleFormat::kPcm16 ? 16 : 32;
  const std::uint16_t block_align = static_cast<std::uint16_t>(num_channels * bits / 8);
  const auto data_size = static_cast<std::uint32_t>(frames * block_align);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create WAV file '" + path.string() + "'");
  out.write("RIFF", 4);
  store<std::uint32_t>(out, 36 + data_size);
  out.write("WAVEfmt ", 8);
  store<std::uint32_t>(out, 16);
  store<std::uint16_t>(out, format == SampleFormat::kPcm16 ? kFormatPcm : kFormatFloat);
  store<std::uint16_t>(out, num_channels);
  store<std::uint32_t>(out, audio.sample_rate);
  store<std::uint32_t>(out, audio.sample_rate * block_align);
  store<std::uint16_t>(out, block_align);
  store<std::uint16_t>(out, bits);
  out.write("data", 4);
  store<std::uint32_t>(out, data_size);
  for (std::size_t n = 0; n < frames; ++n) {
    for (const auto& ch : audio.channels) {
      if (format == SampleFormat::kPcm16) {
        const double v = std::clamp(ch[n], -1.0, 32767.0 / 32768.0);
        store<std::int16_t>(out, static_cast<std::int16_t>(std::lround(v * 32768.0)));
      } else {
        store<float>(out, static_cast<float>(ch[n]));
      }
    }
  }
  if (!out) throw IoError("failed writing WAV file '" + path.string() + "'");
}

}  // namespace arraytune::wav
