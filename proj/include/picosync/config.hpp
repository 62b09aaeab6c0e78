#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "picosync/channel.hpp"
#include "picosync/detector.hpp"
#include "picosync/source.hpp"
#include "picosync/sync.hpp"

namespace picosync {

struct AnalysisConfig {
    std::int64_t window_fs = 200'000;
    std::int64_t bin_fs = 10'000;
    int n_peaks = 10;
    int exclude_center_neighbors = 0;
    double rate_guard = 6e-4;
    double jitter_window_s = 60.0;

    void validate() const;
};

/// Full description of one run. Durations are stored in fs; the text format
/// uses ps (or the unit named in the key).
struct ExperimentConfig {
    SourceConfig source;
    ChannelConfig channel_1;
    ChannelConfig channel_2;
    DetectorConfig detector_1;
    DetectorConfig detector_2;
    SyncConfig sync;
    OscillatorConfig tx;
    OscillatorConfig node_1;
    OscillatorConfig node_2;
    AnalysisConfig analysis;

    std::uint64_t n_slots = 200'000'000;
    std::uint64_t master_seed = 1;
    std::string output_dir = "run";
    std::uint64_t chunk_slots = std::uint64_t{1} << 22;
    std::uint64_t series_every_slots = 200'000;
    bool write_tags = true;

    DurationFs period() const { return tx.period(); }
    /// Copies the shared period into the sub-configs.
    void sync_period();
    void validate() const;
};

/// Values representative of the published setup: 24/26 dB end-to-end arm
/// losses, 50 ps SNSPD jitter, 200 MHz clock, about 11 km of fiber per arm.
/// Pair probability and Raman rate still need calibration for a target CAR.
ExperimentConfig default_config();

/// Parses `key = value` lines; `#` starts a comment. Unknown keys and bad
/// values throw ConfigError. Keys not given keep their defaults.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = default_config());
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, one per line, in the parser's format.
std::string config_to_text(const ExperimentConfig& cfg);
std::map<std::string, std::string> config_entries(const ExperimentConfig& cfg);

}  // namespace picosync
