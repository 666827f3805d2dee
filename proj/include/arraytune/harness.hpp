#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "arraytune/acoustic_sim.hpp"
#include "arraytune/bss_core.hpp"
#include "arraytune/geometry_adapt.hpp"
#include "arraytune/perf_metrics.hpp"

namespace arraytune::harness {

/// One source of the experiment. Without a WAV file the built-in speech-shaped
/// material of the given profile is used.
struct SourceConfig {
  double angle_deg = 0.0;
  double distance = 1.0;
  double power_scale = 1.0;
  sim::VoiceProfile profile = sim::VoiceProfile::kLow;
  std::optional<std::filesystem::path> wav;
};

struct OutputConfig {
  std::filesystem::path dir = "out";
  std::string trace = "trace.csv";
  std::string geometry_trace = "geometry.csv";
  std::string audio = "selected_output.wav";
  std::string sweep = "sweep.csv";
  /// Write one trace row per block instead of one per geometry iteration.
  bool trace_every_block = false;
};

struct ExperimentConfig {
  /// Room and sampling parameters; `sources` is filled from `source_configs` at run time.
  sim::RoomScenario scenario;
  std::vector<SourceConfig> source_configs;
  /// Array placement and the initial spacings d1, d2.
  sim::ArrayGeometry geometry;
  adapt::AdaptParams adapt;
  bss::BssConfig bss;
  metrics::WelchConfig welch;
  double total_duration = 30.0;
  std::vector<double> sweep;
  std::uint64_t seed = 1;
  /// Restart a sub-array's separator and coherence estimate when its spacing changes.
  bool bss_reset_on_move = true;
  OutputConfig output;
  /// Non-fatal remarks collected while parsing (e.g. swapped initial spacings).
  std::vector<std::string> warnings;

  /// Default experiment: the desk scenario with two sources at +/-20 degrees, 1 m.
  static ExperimentConfig defaults();

  /// Throws ConfigError on invalid values.
  void validate() const;
  std::size_t segment_samples() const;
  std::size_t blocks_per_segment() const;
  std::size_t num_iterations() const;
};

/// Parses a JSON document (see README for the schema). Missing keys keep their
/// defaults, unknown keys are rejected. Relative WAV paths are resolved against
/// `base_dir`. Throws ConfigError.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct TraceRow {
  double time = 0.0;  ///< seconds at the end of the block
  std::size_t j = 0;
  std::size_t block = 0;  ///< block index within the whole run
  double d1 = 0.0;
  double d2 = 0.0;
  double msc1 = 0.0;
  double msc2 = 0.0;
  /// SIR values cover the current geometry segment up to this block.
  double sir_mean1 = 0.0;
  double sir_mean2 = 0.0;
  double sir_mean_out = 0.0;
  int selected_output = 1;
  /// Last block of its geometry iteration.
  bool segment_end = false;
};

struct ExperimentResult {
  std::vector<TraceRow> trace;
  std::vector<adapt::StepRecord> steps;
  /// Both outputs of the selected sub-array, block by block.
  std::array<Signal, 2> output;
  double fs = 0.0;
};

/// Runs the full loop: per geometry iteration re-synthesise the microphone signals,
/// adapt and measure both sub-arrays block by block, select the output, then take one
/// geometry step. Deterministic for a given config.
ExperimentResult run_adaptation_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  double spacing = 0.0;
  double msc = 0.0;
  double sir_mean = 0.0;
};

/// Runs sub-array 2 at each fixed spacing of cfg.sweep over the same segments as the
/// adaptation experiment. After every segment the weighted MSC and sir_mean of the
/// current filters are measured over that segment; a row holds their mean.
std::vector<SweepRow> run_spacing_sweep(const ExperimentConfig& cfg);

/// Header `time,j,block,d1,d2,msc1,msc2,sir_mean1,sir_mean2,sir_mean_out,selected_output`.
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace,
                     bool every_block);
/// Header `j,d1,d2,a1,a2,f1,f2,selected_output,event`; spacings after the step.
void write_geometry_csv(const std::filesystem::path& path, const std::vector<adapt::StepRecord>& steps);
/// Header `spacing,msc,sir_mean`.
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

/// Writes trace, geometry trace and selected-output audio into cfg.output.dir.
void write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentResult& result);

/// Writes `msc_vs_time.csv` (time,msc1,msc2), `sir_vs_time.csv`
/// (time,sir_mean1,sir_mean2,sir_mean_out,selected_output) and `spacing_vs_iteration.csv`
/// (time,j,d1,d2), one data line per trace row. Throws DataError for an empty trace.
void emit_plot_data(const std::vector<TraceRow>& trace, const std::filesystem::path& dir);

/// Writes one WAV per source holding its responses to the three microphones at the
/// initial geometry (`rir_source<k>.wav`, k = 1, 2) and returns the paths.
std::vector<std::filesystem::path> dump_rirs(const ExperimentConfig& cfg);

}  // namespace arraytune::harness
