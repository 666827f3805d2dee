#include "arraytune/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iterator>
#include <memory>
#include <sstream>

#include "json.hpp"

#include "arraytune/errors.hpp"
#include "arraytune/wav.hpp"

namespace arraytune::harness {

using nlohmann::json;

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig cfg;
  cfg.source_configs = {{20.0, 1.0, 1.0, sim::VoiceProfile::kLow, std::nullopt},
                        {-20.0, 1.0, 1.0, sim::VoiceProfile::kHigh, std::nullopt}};
  return cfg;
}

void ExperimentConfig::validate() const {
  adapt.validate();
  bss.validate();
  welch.validate();
  const auto& s = scenario;
  if (!(s.fs > 0.0) || std::round(s.fs) != s.fs) throw ConfigError("fs must be a positive integer rate");
  if (!(s.speed_of_sound > 0.0)) throw ConfigError("speed_of_sound must be positive");
  if (!(s.t60 >= 0.0) || !std::isfinite(s.t60)) throw ConfigError("t60 must be finite and >= 0");
  if (!(s.dimensions.x > 0.0 && s.dimensions.y > 0.0 && s.dimensions.z > 0.0)) {
    throw ConfigError("room dimensions must be positive");
  }
  if (source_configs.size() != 2) throw ConfigError("exactly two sources are required");
  for (const auto& src : source_configs) {
    if (!(src.distance > 0.0)) throw ConfigError("source distance must be positive");
    if (!(src.power_scale >= 0.0) || !std::isfinite(src.power_scale)) {
      throw ConfigError("source power_scale must be finite and >= 0");
    }
  }
  if (!(geometry.d1 > 0.0 && geometry.d2 > 0.0)) throw ConfigError("initial spacings must be positive");
  if (!(total_duration > 0.0) || !std::isfinite(total_duration)) {
    throw ConfigError("total_duration must be positive");
  }
  if (blocks_per_segment() == 0) throw ConfigError("a segment must hold at least one BSS block");
  if (bss.block_length < welch.window_length) {
    throw ConfigError("BSS block_length must be at least the Welch window_length");
  }
  if (num_iterations() == 0) throw ConfigError("total_duration must cover at least one segment");
  for (double d : sweep) {
    if (!(d > 0.0)) throw ConfigError("sweep spacings must be positive");
  }
}

std::size_t ExperimentConfig::segment_samples() const {
  return static_cast<std::size_t>(std::llround(adapt.segment_seconds * scenario.fs));
}

std::size_t ExperimentConfig::blocks_per_segment() const { return segment_samples() / bss.block_length; }

std::size_t ExperimentConfig::num_iterations() const {
  // Tolerate durations written as a rounded multiple of the segment length.
  return static_cast<std::size_t>(std::floor(total_duration / adapt.segment_seconds + 1e-9));
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.emplace_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("'" + name_ + "." + key + "' has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.emplace_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        throw ConfigError("unknown key '" + name_ + "." + key + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::vector<std::string> seen_;
};

sim::Vec3 parse_vec3(const json& j, const std::string& name) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("'" + name + "' must be an array of three numbers");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const json::exception&) {
    throw ConfigError("'" + name + "' must be an array of three numbers");
  }
}

sim::VoiceProfile parse_profile(const std::string& s) {
  if (s == "low") return sim::VoiceProfile::kLow;
  if (s == "high") return sim::VoiceProfile::kHigh;
  throw ConfigError("source profile must be 'low' or 'high', got '" + s + "'");
}

metrics::Taper parse_taper(const std::string& s) {
  if (s == "hann") return metrics::Taper::kHann;
  if (s == "rectangular") return metrics::Taper::kRectangular;
  throw ConfigError("welch taper must be 'hann' or 'rectangular', got '" + s + "'");
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  ExperimentConfig cfg = ExperimentConfig::defaults();
  Section top(doc, "config");

  if (const json* j = top.child("room")) {
    Section s(*j, "room");
    if (const json* dims = s.child("dimensions")) cfg.scenario.dimensions = parse_vec3(*dims, "room.dimensions");
    s.get("t60", cfg.scenario.t60);
    s.get("fs", cfg.scenario.fs);
    s.get("speed_of_sound", cfg.scenario.speed_of_sound);
    s.finish();
  }

  if (const json* j = top.child("sources")) {
    if (!j->is_array()) throw ConfigError("'sources' must be an array");
    cfg.source_configs.clear();
    for (std::size_t k = 0; k < j->size(); ++k) {
      const std::string name = "sources[" + std::to_string(k) + "]";
      Section s((*j)[k], name);
      SourceConfig src;
      src.profile = k % 2 == 0 ? sim::VoiceProfile::kLow : sim::VoiceProfile::kHigh;
      s.get("angle_deg", src.angle_deg);
      s.get("distance", src.distance);
      s.get("power_scale", src.power_scale);
      std::string profile;
      s.get("profile", profile);
      if (!profile.empty()) src.profile = parse_profile(profile);
      std::string wav;
      s.get("wav", wav);
      if (!wav.empty()) {
        std::filesystem::path p(wav);
        src.wav = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
      }
      s.finish();
      cfg.source_configs.push_back(std::move(src));
    }
  }

  if (const json* j = top.child("array")) {
    Section s(*j, "array");
    if (const json* c = s.child("center")) cfg.geometry.center = parse_vec3(*c, "array.center");
    if (const json* o = s.child("orientation")) cfg.geometry.orientation = parse_vec3(*o, "array.orientation");
    s.get("d1", cfg.geometry.d1);
    s.get("d2", cfg.geometry.d2);
    s.finish();
  }

  if (const json* j = top.child("adapt")) {
    Section s(*j, "adapt");
    s.get("epsilon", cfg.adapt.epsilon);
    s.get("t_max", cfg.adapt.t_max);
    s.get("m_max", cfg.adapt.m_max);
    s.get("d_min", cfg.adapt.d_min);
    s.get("d_max", cfg.adapt.d_max);
    s.get("segment_seconds", cfg.adapt.segment_seconds);
    s.finish();
  }

  if (const json* j = top.child("bss")) {
    Section s(*j, "bss");
    s.get("filter_length", cfg.bss.filter_length);
    s.get("fft_size", cfg.bss.fft_size);
    s.get("block_length", cfg.bss.block_length);
    s.get("forgetting_factor", cfg.bss.forgetting_factor);
    s.get("num_inner_iterations", cfg.bss.num_inner_iterations);
    s.get("regularization", cfg.bss.regularization);
    s.get("step_size", cfg.bss.step_size);
    s.get("max_history_blocks", cfg.bss.max_history_blocks);
    s.get("alignment_frames", cfg.bss.alignment_frames);
    s.get("reset_on_move", cfg.bss_reset_on_move);
    s.finish();
  }

  if (const json* j = top.child("welch")) {
    Section s(*j, "welch");
    s.get("window_length", cfg.welch.window_length);
    s.get("overlap_fraction", cfg.welch.overlap_fraction);
    s.get("averaging_constant", cfg.welch.averaging_constant);
    std::string taper;
    s.get("taper", taper);
    if (!taper.empty()) cfg.welch.taper = parse_taper(taper);
    s.finish();
  }

  top.get("total_duration", cfg.total_duration);
  top.get("sweep", cfg.sweep);
  top.get("seed", cfg.seed);

  if (const json* j = top.child("output")) {
    Section s(*j, "output");
    std::string dir;
    s.get("dir", dir);
    if (!dir.empty()) cfg.output.dir = dir;
    s.get("trace", cfg.output.trace);
    s.get("geometry_trace", cfg.output.geometry_trace);
    s.get("audio", cfg.output.audio);
    s.get("sweep", cfg.output.sweep);
    s.get("trace_every_block", cfg.output.trace_every_block);
    s.finish();
  }
  top.finish();

  if (cfg.geometry.d1 >= cfg.geometry.d2) {
    std::ostringstream msg;
    msg << "initial spacings d1 = " << cfg.geometry.d1 << " and d2 = " << cfg.geometry.d2
        << " are not ordered (d1 < d2 expected); labels swapped";
    std::swap(cfg.geometry.d1, cfg.geometry.d2);
    cfg.warnings.push_back(msg.str());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return parse_config(text, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Experiment loop

namespace {

template <class E>
void rethrow_if(const Error& e, const std::string& msg) {
  if (dynamic_cast<const E*>(&e) != nullptr) throw E(msg);
}

// Rethrows a library error with a context prefix, keeping its type.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string msg = context + ": " + e.what();
  rethrow_if<DomainError>(e, msg);
  rethrow_if<InfeasibleRoomError>(e, msg);
  rethrow_if<ConfigError>(e, msg);
  rethrow_if<DataError>(e, msg);
  rethrow_if<MeasurementError>(e, msg);
  rethrow_if<UndefinedMeasureError>(e, msg);
  rethrow_if<IoError>(e, msg);
  throw Error(msg);
}

std::uint64_t source_seed(std::uint64_t seed, std::size_t k) {
  // splitmix64 finaliser keeps neighbouring seeds decorrelated
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Whole source material: pre-roll followed by `samples` samples per source.
std::vector<Signal> load_material(const ExperimentConfig& cfg, std::size_t preroll, std::size_t samples) {
  std::vector<Signal> material;
  const std::size_t needed = preroll + samples;
  for (std::size_t k = 0; k < cfg.source_configs.size(); ++k) {
    const auto& src = cfg.source_configs[k];
    if (src.wav) {
      Signal s = wav::read_mono(*src.wav, static_cast<std::uint32_t>(cfg.scenario.fs));
      if (s.size() < needed) {
        throw DataError("source " + std::to_string(k) + " ('" + src.wav->string() + "') has " +
                        std::to_string(s.size()) + " samples, the experiment needs " + std::to_string(needed));
      }
      s.resize(needed);
      material.push_back(std::move(s));
    } else {
      material.push_back(sim::speech_shaped_noise(src.profile, source_seed(cfg.seed, k), needed, cfg.scenario.fs));
    }
  }
  return material;
}

// Microphone signals for samples [offset, offset + length) of the material. The
// preceding pre-roll is rendered too so that the slice starts with a full reverberant
// tail, then dropped.
sim::MicSignals synthesize_slice(const ExperimentConfig& cfg, const std::vector<Signal>& material,
                                 const sim::ArrayGeometry& geometry, std::size_t offset, std::size_t preroll,
                                 std::size_t length) {
  sim::RoomScenario scenario = cfg.scenario;
  scenario.sources.clear();
  for (std::size_t k = 0; k < material.size(); ++k) {
    const auto& src = cfg.source_configs[k];
    const auto first = material[k].begin() + static_cast<std::ptrdiff_t>(offset);
    auto slice = std::make_shared<Signal>(first, first + static_cast<std::ptrdiff_t>(preroll + length));
    scenario.sources.push_back({src.angle_deg, src.distance, std::move(slice), src.power_scale});
  }
  sim::MicSignals mics = sim::synthesize(scenario, geometry);
  const auto cut = [&](Signal& s) {
    s.erase(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(preroll));
    s.resize(length);
  };
  for (auto& ch : mics.total) cut(ch);
  for (auto& src : mics.per_source_components) {
    for (auto& ch : src) cut(ch);
  }
  return mics;
}

struct BlockMeasure {
  double msc = 0.0;
  double sir_mean = 0.0;
  std::array<Signal, 2> y;
};

// One two-microphone separator with its blind and oracle measurements.
struct SubArray {
  std::array<std::size_t, 2> mics;
  bss::BssState bss;
  metrics::CoherenceEstimator coherence;

  SubArray(std::array<std::size_t, 2> m, const ExperimentConfig& cfg)
      : mics(m), bss(bss::bss_init(cfg.bss)), coherence(cfg.welch) {}

  void reset(const ExperimentConfig& cfg) {
    bss = bss::bss_init(cfg.bss);
    coherence = metrics::CoherenceEstimator(cfg.welch);
  }

  // Adapts over `blocks` blocks of the signals and measures after every block.
  std::vector<BlockMeasure> process(const ExperimentConfig& cfg, const sim::MicSignals& sig, std::size_t blocks,
                                    bool keep_audio) {
    const std::size_t len = cfg.bss.block_length;
    const std::size_t context = cfg.bss.filter_length;
    // SIR covers the segment evaluated so far.
    metrics::EnergyMatrix energies{};
    std::vector<BlockMeasure> out;
    out.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
      const std::size_t start = b * len;
      const auto view = [&](const Signal& s, std::size_t from, std::size_t n) {
        return std::span<const double>(s).subspan(from, n);
      };
      bss::bss_adapt_block(bss, {view(sig.total[mics[0]], start, len), view(sig.total[mics[1]], start, len)});

      // Filter with preceding context so that the block output is free of start-up transients.
      const std::size_t from = start - std::min(start, context);
      const std::size_t n = start + len - from;
      const bss::TwoChannel input{view(sig.total[mics[0]], from, n), view(sig.total[mics[1]], from, n)};
      std::vector<bss::TwoChannel> comps;
      for (const auto& src : sig.per_source_components) {
        comps.push_back({view(src[mics[0]], from, n), view(src[mics[1]], from, n)});
      }
      const bss::BssOutputs res = bss::bss_apply(bss, input, comps);
      const std::size_t skip = start - from;

      BlockMeasure m;
      for (std::size_t o = 0; o < 2; ++o) m.y[o].assign(res.y[o].begin() + static_cast<std::ptrdiff_t>(skip), res.y[o].end());
      coherence.update(m.y[0], m.y[1]);
      m.msc = metrics::weighted_msc(coherence).value;

      metrics::ComponentSet set;
      for (std::size_t o = 0; o < 2; ++o) {
        for (std::size_t s = 0; s < 2; ++s) set[o][s] = std::span<const double>((*res.components)[s][o]).subspan(skip);
      }
      const metrics::EnergyMatrix e = metrics::component_energies(set);
      for (std::size_t o = 0; o < 2; ++o) {
        for (std::size_t s = 0; s < 2; ++s) energies[o][s] += e[o][s];
      }
      m.sir_mean = metrics::sir(energies, metrics::default_assignment(energies)).sir_mean;
      if (!keep_audio) m.y = {};
      out.push_back(std::move(m));
    }
    return out;
  }
};

// Final filters applied to the whole segment; MSC from one Welch average over all of it
// and SIR from the total component energies.
SweepRow converged_measures(const ExperimentConfig& cfg, const bss::BssState& state, const sim::MicSignals& sig,
                            std::array<std::size_t, 2> mics, double spacing) {
  const bss::TwoChannel input{sig.total[mics[0]], sig.total[mics[1]]};
  std::vector<bss::TwoChannel> comps;
  for (const auto& src : sig.per_source_components) comps.push_back({src[mics[0]], src[mics[1]]});
  const bss::BssOutputs res = bss::bss_apply(state, input, comps);

  // Skip the filter start-up at the beginning of the segment.
  const std::size_t skip = std::min(cfg.bss.filter_length, res.y[0].size() - cfg.welch.window_length);
  const auto tail = [&](const Signal& s) { return std::span<const double>(s).subspan(skip); };
  metrics::CoherenceEstimator coherence(cfg.welch);
  coherence.update(tail(res.y[0]), tail(res.y[1]));

  metrics::ComponentSet set;
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t s = 0; s < 2; ++s) set[o][s] = tail((*res.components)[s][o]);
  }
  const auto energies = metrics::component_energies(set);
  return {spacing, metrics::weighted_msc(coherence).value,
          metrics::sir(energies, metrics::default_assignment(energies)).sir_mean};
}

}  // namespace

ExperimentResult run_adaptation_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t seg = cfg.segment_samples();
  const std::size_t blocks = cfg.blocks_per_segment();
  const std::size_t iterations = cfg.num_iterations();
  const std::size_t preroll = sim::rir_length(cfg.scenario);
  const double fs = cfg.scenario.fs;

  const std::vector<Signal> material = load_material(cfg, preroll, iterations * seg);

  adapt::AdaptationState state = adapt::initial_state(cfg.geometry.d1, cfg.geometry.d2, cfg.adapt);
  std::array<SubArray, 2> subs{SubArray({0, 1}, cfg), SubArray({1, 2}, cfg)};

  ExperimentResult result;
  result.fs = fs;
  for (std::size_t j = 0; j < iterations; ++j) {
    const std::array<double, 2> spacing = state.d;
    try {
      sim::ArrayGeometry geometry = cfg.geometry;
      geometry.d1 = spacing[0];
      geometry.d2 = spacing[1];
      const sim::MicSignals mics = synthesize_slice(cfg, material, geometry, j * seg, preroll, seg);

      // The two sub-arrays are independent until the geometry step.
      auto second = std::async(std::launch::async, [&] { return subs[1].process(cfg, mics, blocks, true); });
      std::array<std::vector<BlockMeasure>, 2> measures;
      measures[0] = subs[0].process(cfg, mics, blocks, true);
      measures[1] = second.get();

      for (std::size_t b = 0; b < blocks; ++b) {
        const BlockMeasure& m1 = measures[0][b];
        const BlockMeasure& m2 = measures[1][b];
        const bool first_selected = state.selected_output == 1;
        adapt::select_output(state, metrics::MscValue{first_selected ? m1.msc : m2.msc},
                             metrics::MscValue{first_selected ? m2.msc : m1.msc}, cfg.adapt);

        TraceRow row;
        row.block = j * blocks + b;
        row.time = static_cast<double>(j * seg + (b + 1) * cfg.bss.block_length) / fs;
        row.j = j;
        row.d1 = spacing[0];
        row.d2 = spacing[1];
        row.msc1 = m1.msc;
        row.msc2 = m2.msc;
        row.sir_mean1 = m1.sir_mean;
        row.sir_mean2 = m2.sir_mean;
        row.selected_output = state.selected_output;
        row.sir_mean_out = state.selected_output == 1 ? m1.sir_mean : m2.sir_mean;
        row.segment_end = b + 1 == blocks;
        result.trace.push_back(row);

        const BlockMeasure& sel = state.selected_output == 1 ? m1 : m2;
        for (std::size_t o = 0; o < 2; ++o) result.output[o].insert(result.output[o].end(), sel.y[o].begin(), sel.y[o].end());
      }

      result.steps.push_back(adapt::geometry_step(state, metrics::MscValue{measures[0].back().msc},
                                                  metrics::MscValue{measures[1].back().msc}, cfg.adapt));
    } catch (const Error& e) {
      rethrow_with_context(e, "geometry iteration " + std::to_string(j));
    }

    if (cfg.bss_reset_on_move) {
      for (std::size_t i = 0; i < 2; ++i) {
        if (state.d[i] != spacing[i]) subs[i].reset(cfg);
      }
    }
  }
  return result;
}

std::vector<SweepRow> run_spacing_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.sweep.empty()) throw ConfigError("the sweep list is empty");
  const std::size_t seg = cfg.segment_samples();
  const std::size_t iterations = cfg.num_iterations();
  const std::size_t preroll = sim::rir_length(cfg.scenario);
  const std::vector<Signal> material = load_material(cfg, preroll, iterations * seg);

  std::vector<SweepRow> rows;
  for (double spacing : cfg.sweep) {
    try {
      sim::ArrayGeometry geometry = cfg.geometry;
      geometry.d2 = spacing;
      SubArray sub({1, 2}, cfg);
      SweepRow row{spacing, 0.0, 0.0};
      for (std::size_t j = 0; j < iterations; ++j) {
        const sim::MicSignals mics = synthesize_slice(cfg, material, geometry, j * seg, preroll, seg);
        sub.process(cfg, mics, cfg.blocks_per_segment(), false);
        const SweepRow m = converged_measures(cfg, sub.bss, mics, {1, 2}, spacing);
        row.msc += m.msc / static_cast<double>(iterations);
        row.sir_mean += m.sir_mean / static_cast<double>(iterations);
      }
      rows.push_back(row);
    } catch (const Error& e) {
      std::ostringstream ctx;
      ctx << "sweep spacing " << spacing;
      rethrow_with_context(e, ctx.str());
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output files

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.precision(10);
  return out;
}

void close_csv(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace, bool every_block) {
  auto out = open_csv(path);
  out << "time,j,block,d1,d2,msc1,msc2,sir_mean1,sir_mean2,sir_mean_out,selected_output\n";
  for (const auto& r : trace) {
    if (!every_block && !r.segment_end) continue;
    out << r.time << ',' << r.j << ',' << r.block << ',' << r.d1 << ',' << r.d2 << ',' << r.msc1 << ',' << r.msc2
        << ',' << r.sir_mean1 << ',' << r.sir_mean2 << ',' << r.sir_mean_out << ',' << r.selected_output << '\n';
  }
  close_csv(out, path);
}

void write_geometry_csv(const std::filesystem::path& path, const std::vector<adapt::StepRecord>& steps) {
  auto out = open_csv(path);
  out << "j,d1,d2,a1,a2,f1,f2,selected_output,event\n";
  for (const auto& s : steps) {
    out << s.j << ',' << s.d1 << ',' << s.d2 << ',' << s.a1 << ',' << s.a2 << ',' << s.f1 << ',' << s.f2 << ','
        << s.selected_output << ',' << adapt::to_string(s.event) << '\n';
  }
  close_csv(out, path);
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  auto out = open_csv(path);
  out << "spacing,msc,sir_mean\n";
  for (const auto& r : rows) out << r.spacing << ',' << r.msc << ',' << r.sir_mean << '\n';
  close_csv(out, path);
}

void write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentResult& result) {
  const auto& dir = cfg.output.dir;
  write_trace_csv(dir / cfg.output.trace, result.trace, cfg.output.trace_every_block);
  write_geometry_csv(dir / cfg.output.geometry_trace, result.steps);
  wav::Audio audio;
  audio.sample_rate = static_cast<std::uint32_t>(result.fs);
  audio.channels = {result.output[0], result.output[1]};
  wav::write(dir / cfg.output.audio, audio);
}

void emit_plot_data(const std::vector<TraceRow>& trace, const std::filesystem::path& dir) {
  if (trace.empty()) throw DataError("cannot emit plot data for an empty trace");
  const auto msc_path = dir / "msc_vs_time.csv";
  const auto sir_path = dir / "sir_vs_time.csv";
  const auto spacing_path = dir / "spacing_vs_iteration.csv";
  auto msc = open_csv(msc_path);
  auto sir = open_csv(sir_path);
  auto spacing = open_csv(spacing_path);
  msc << "time,msc1,msc2\n";
  sir << "time,sir_mean1,sir_mean2,sir_mean_out,selected_output\n";
  spacing << "time,j,d1,d2\n";
  for (const auto& r : trace) {
    msc << r.time << ',' << r.msc1 << ',' << r.msc2 << '\n';
    sir << r.time << ',' << r.sir_mean1 << ',' << r.sir_mean2 << ',' << r.sir_mean_out << ',' << r.selected_output
        << '\n';
    spacing << r.time << ',' << r.j << ',' << r.d1 << ',' << r.d2 << '\n';
  }
  close_csv(msc, msc_path);
  close_csv(sir, sir_path);
  close_csv(spacing, spacing_path);
}

std::vector<std::filesystem::path> dump_rirs(const ExperimentConfig& cfg) {
  cfg.validate();
  sim::RoomScenario scenario = cfg.scenario;
  scenario.sources.clear();
  for (const auto& src : cfg.source_configs) scenario.sources.push_back({src.angle_deg, src.distance, nullptr, 1.0});
  const sim::RirSet rirs = sim::compute_rirs(scenario, cfg.geometry);

  std::error_code ec;
  std::filesystem::create_directories(cfg.output.dir, ec);
  if (ec) throw IoError("cannot create directory '" + cfg.output.dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> paths;
  for (std::size_t s = 0; s < rirs.impulse_responses.size(); ++s) {
    wav::Audio audio;
    audio.sample_rate = static_cast<std::uint32_t>(scenario.fs);
    audio.channels = rirs.impulse_responses[s];
    const auto path = cfg.output.dir / ("rir_source" + std::to_string(s + 1) + ".wav");
    wav::write(path, audio);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace arraytune::harness
