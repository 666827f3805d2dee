#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace arraytune::wav {

enum class SampleFormat { kPcm16, kFloat32 };

struct Audio {
  std::uint32_t sample_rate = 0;
  /// channels[c][n], samples scaled to [-1, 1] for PCM input.
  std::vector<std::vector<double>> channels;
};

/// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE float samples.
Audio read(const std::filesystem::path& path);

/// Reads a single-channel file and checks its rate; throws DataError on mismatch.
std::vector<double> read_mono(const std::filesystem::path& path, std::uint32_t expected_rate);

/// Writes all channels interleaved. Channels must share one length. PCM output is
/// clipped to the representable range.
void write(const std::filesystem::path& path, const Audio& audio,
           SampleFormat format = SampleFormat::kFloat32);

}  // namespace arraytune::wav
