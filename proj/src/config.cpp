#include "picosync/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "picosync/error.hpp"

namespace picosync {

void AnalysisConfig::validate() const {
    if (bin_fs <= 0) throw ConfigError("analysis.bin_ps must be positive");
    if (window_fs < 2 * bin_fs) throw ConfigError("analysis.window_ps must span at least two bins");
    if (n_peaks < 1) throw ConfigError("analysis.n_peaks must be >= 1");
    if (exclude_center_neighbors < 0) throw ConfigError("analysis.exclude_center_neighbors must be >= 0");
    if (!(rate_guard > 0.0)) throw ConfigError("analysis.rate_guard must be positive");
    if (!(jitter_window_s > 0.0)) throw ConfigError("analysis.jitter_window_s must be positive");
}

void ExperimentConfig::sync_period() {
    const DurationFs p = period();
    source.period_fs = p;
    channel_1.period_fs = p;
    channel_2.period_fs = p;
}

void ExperimentConfig::validate() const {
    tx.validate();
    node_1.validate();
    node_2.validate();
    if (source.period_fs != period() || channel_1.period_fs != period() || channel_2.period_fs != period())
        throw ConfigError("sub-config periods disagree with the clock frequency");
    source.validate();
    channel_1.validate();
    channel_2.validate();
    detector_1.validate();
    detector_2.validate();
    sync.validate();
    analysis.validate();
    if (analysis.window_fs > period().value) throw ConfigError("analysis.window_ps exceeds the clock period");
    if (n_slots < 1) throw ConfigError("run.n_slots must be >= 1");
    if (chunk_slots < 2) throw ConfigError("run.chunk_slots must be >= 2");
    if (series_every_slots < 1) throw ConfigError("run.series_every_slots must be >= 1");
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    // 11 km of standard fiber per arm.
    const DurationFs fiber_delay = round_fs(11'000.0 * 1.4682 / 299'792'458.0 * 1e15);
    const double det_loss_db = 10.0 * std::log10(1.0 / c.detector_1.efficiency);
    c.channel_1.loss_db = 24.0 - det_loss_db;
    c.channel_2.loss_db = 26.0 - det_loss_db;
    c.channel_1.base_delay_fs = fiber_delay;
    c.channel_2.base_delay_fs = fiber_delay;
    c.tx.jitter_fwhm_fs = 800.0;
    c.node_1.phase_walk_fs_per_sqrt_s = 200.0;
    c.node_2.phase_walk_fs_per_sqrt_s = 200.0;
    c.sync_period();
    return c;
}

namespace {

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }

double to_double(const std::string& key, const std::string& s) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || std::isnan(v))
        throw ConfigError(key + ": not a number: '" + s + "'");
    return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ConfigError(key + ": not a non-negative integer: '" + s + "'");
    return v;
}

bool to_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "on" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "off" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": not a boolean: '" + s + "'");
}

struct Field {
    std::string key;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
};

class Registry {
public:
    std::vector<Field> fields;

    void real(std::string key, double& v, double scale = 1.0) {
        fields.push_back({key, [&v, scale] { return fmt(v / scale); },
                          [&v, scale, key](const std::string& s) { v = to_double(key, s) * scale; }});
    }
    void duration(std::string key, DurationFs& v, double scale) {
        fields.push_back({key, [&v, scale] { return fmt(static_cast<double>(v.value) / scale); },
                          [&v, scale, key](const std::string& s) {
                              const double fs = to_double(key, s) * scale;
                              if (!std::isfinite(fs) || std::abs(fs) >= 9.2e18) throw ConfigError(key + ": out of range");
                              v = round_fs(fs);
                          }});
    }
    void duration(std::string key, std::int64_t& v, double scale) {
        fields.push_back({key, [&v, scale] { return fmt(static_cast<double>(v) / scale); },
                          [&v, scale, key](const std::string& s) {
                              const double fs = to_double(key, s) * scale;
                              if (!std::isfinite(fs) || std::abs(fs) >= 9.2e18) throw ConfigError(key + ": out of range");
                              v = std::llround(fs);
                          }});
    }
    void count(std::string key, std::uint64_t& v) {
        fields.push_back({key, [&v] { return fmt(v); }, [&v, key](const std::string& s) { v = to_u64(key, s); }});
    }
    void small(std::string key, int& v) {
        fields.push_back({key, [&v] { return std::to_string(v); }, [&v, key](const std::string& s) {
                              const auto u = to_u64(key, s);
                              if (u > 1'000'000) throw ConfigError(key + ": too large");
                              v = static_cast<int>(u);
                          }});
    }
    void small(std::string key, std::uint32_t& v) {
        fields.push_back({key, [&v] { return std::to_string(v); }, [&v, key](const std::string& s) {
                              const auto u = to_u64(key, s);
                              if (u > 0xffffffffu) throw ConfigError(key + ": too large");
                              v = static_cast<std::uint32_t>(u);
                          }});
    }
    void flag(std::string key, bool& v) {
        fields.push_back({key, [&v] { return std::string(v ? "true" : "false"); },
                          [&v, key](const std::string& s) { v = to_bool(key, s); }});
    }
    void text(std::string key, std::string& v) {
        fields.push_back({key, [&v] { return v; }, [&v](const std::string& s) { v = s; }});
    }
    template <class E>
    void choice(std::string key, E& v, std::vector<std::pair<std::string, E>> names) {
        fields.push_back({key,
                          [&v, names] {
                              for (auto& [n, e] : names)
                                  if (e == v) return n;
                              return std::string("?");
                          },
                          [&v, names, key](const std::string& s) {
                              for (auto& [n, e] : names)
                                  if (n == s) {
                                      v = e;
                                      return;
                                  }
                              throw ConfigError(key + ": unknown value '" + s + "'");
                          }});
    }
};

constexpr double kPs = 1e3;
constexpr double kNs = 1e6;
constexpr double kUs = 1e9;

void add_channel(Registry& r, const std::string& p, ChannelConfig& c) {
    r.real(p + ".loss_db", c.loss_db);
    r.duration(p + ".base_delay_us", c.base_delay_fs, kUs);
    r.choice(p + ".drift.kind", c.drift.kind,
             {{"none", DriftKind::none},
              {"sinusoid", DriftKind::sinusoid},
              {"random_walk", DriftKind::random_walk},
              {"sum", DriftKind::sum}});
    r.real(p + ".drift.amplitude_ps", c.drift.amplitude_fs, kPs);
    r.real(p + ".drift.period_s", c.drift.period_s);
    r.real(p + ".drift.walk_ps_per_sqrt_s", c.drift.walk_sigma_fs_per_sqrt_s, kPs);
    r.real(p + ".drift.walk_step_s", c.drift.walk_step_s);
    r.real(p + ".raman_rate_per_slot", c.raman_rate_per_slot);
    r.choice(p + ".raman_profile", c.raman_profile,
             {{"pulse_gated", RamanProfile::pulse_gated}, {"uniform_period", RamanProfile::uniform_period}});
    r.duration(p + ".clock_pulse_width_ps", c.clock_pulse_width_fs, kPs);
}

void add_detector(Registry& r, const std::string& p, DetectorConfig& d) {
    r.real(p + ".efficiency", d.efficiency);
    r.duration(p + ".jitter_fwhm_ps", d.jitter_fwhm_fs, kPs);
    r.duration(p + ".dead_time_ns", d.dead_time_fs, kNs);
    r.real(p + ".dark_rate_hz", d.dark_rate_hz);
    r.duration(p + ".tdc_bin_ps", d.tdc_bin_fs, kPs);
    r.duration(p + ".tdc_jitter_fwhm_ps", d.tdc_jitter_fwhm_fs, kPs);
}

void add_oscillator(Registry& r, const std::string& p, OscillatorConfig& o, bool with_frequency) {
    if (with_frequency) r.real(p + ".frequency_hz", o.frequency_hz);
    r.real(p + ".jitter_fwhm_ps", o.jitter_fwhm_fs, kPs);
    r.real(p + ".phase_walk_fs_per_sqrt_s", o.phase_walk_fs_per_sqrt_s);
}

Registry registry(ExperimentConfig& c) {
    Registry r;
    r.real("source.pair_prob_per_pulse", c.source.pair_prob_per_pulse);
    r.flag("source.prob_is_mean", c.source.prob_is_mean);
    r.choice("source.multi_pair_model", c.source.multi_pair_model,
             {{"poisson", MultiPairModel::poisson}, {"thermal", MultiPairModel::thermal}});
    r.real("source.emission_fwhm_ps", c.source.emission_sigma_fs, kPs / kFwhmPerSigma);
    add_channel(r, "channel_1", c.channel_1);
    add_channel(r, "channel_2", c.channel_2);
    add_detector(r, "detector_1", c.detector_1);
    add_detector(r, "detector_2", c.detector_2);
    r.flag("sync.enabled", c.sync.enabled);
    r.real("sync.rec_jitter_fwhm_ps", c.sync.rec_jitter_fwhm_fs, kPs);
    r.real("sync.loop_gain", c.sync.loop_gain);
    r.small("sync.averaging_edges", c.sync.averaging_edges);
    add_oscillator(r, "clock.tx", c.tx, true);
    add_oscillator(r, "clock.node_1", c.node_1, false);
    add_oscillator(r, "clock.node_2", c.node_2, false);
    r.duration("analysis.window_ps", c.analysis.window_fs, kPs);
    r.duration("analysis.bin_ps", c.analysis.bin_fs, kPs);
    r.small("analysis.n_peaks", c.analysis.n_peaks);
    r.small("analysis.exclude_center_neighbors", c.analysis.exclude_center_neighbors);
    r.real("analysis.rate_guard", c.analysis.rate_guard);
    r.real("analysis.jitter_window_s", c.analysis.jitter_window_s);
    r.count("run.n_slots", c.n_slots);
    r.count("run.master_seed", c.master_seed);
    r.text("run.output_dir", c.output_dir);
    r.count("run.chunk_slots", c.chunk_slots);
    r.count("run.series_every_slots", c.series_every_slots);
    r.flag("run.write_tags", c.write_tags);
    return r;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, ExperimentConfig cfg) {
    Registry reg = registry(cfg);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        bool found = false;
        for (auto& f : reg.fields) {
            if (f.key == key) {
                f.set(value);
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    cfg.sync_period();
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::map<std::string, std::string> config_entries(const ExperimentConfig& cfg) {
    ExperimentConfig copy = cfg;
    Registry reg = registry(copy);
    std::map<std::string, std::string> out;
    for (auto& f : reg.fields) out[f.key] = f.get();
    return out;
}

std::string config_to_text(const ExperimentConfig& cfg) {
    ExperimentConfig copy = cfg;
    Registry reg = registry(copy);
    std::string out;
    for (auto& f : reg.fields) out += f.key + " = " + f.get() + "\n";
    return out;
}

}  // namespace picosync
