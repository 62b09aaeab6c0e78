#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "json.hpp"
#include "picosync/analysis.hpp"
#include "picosync/config.hpp"

namespace picosync {

struct RunSummary {
    CarReport car;
    Histogram histogram;
    ClockPhaseSeries rx_offset;  // node 1 minus node 2 clock phase, base delays removed
    std::optional<JitterStats> jitter;
    CarPrediction prediction;

    std::uint64_t n_slots = 0;
    double duration_s = 0.0;
    std::uint64_t n_pairs = 0;
    std::uint64_t singles_1 = 0;
    std::uint64_t singles_2 = 0;
    std::array<std::uint64_t, 3> kinds_1{};  // by TagKind
    std::array<std::uint64_t, 3> kinds_2{};
    double loss_arm_1_db = 0.0;  // NaN when no net coincidences
    double loss_arm_2_db = 0.0;
    double clock_sigma_fs = 0.0;  // stdev of the node 1 - node 2 offset
    double max_rate_hz = 0.0;
};

/// Called once per chunk with the tags both arms released.
using ChunkCallback = std::function<void(std::span<const TimeTag>, std::span<const TimeTag>)>;

/// Runs source -> channels -> detectors on node clocks -> coincidence analysis
/// in bounded chunks. With sync disabled the Raman rates are forced to zero
/// and tags are stamped on free-running clocks.
RunSummary simulate(const ExperimentConfig& cfg, const ChunkCallback& on_chunk = {});

/// The configuration as the engine runs it (Raman zeroed without sync).
ExperimentConfig effective_config(const ExperimentConfig& cfg);

/// Node clock of arm 1 or 2, seeded as in simulate().
NodeClock make_node_clock(const ExperimentConfig& cfg, int arm);

/// Node 1 minus node 2 clock offset sampled every `every` slots over
/// [begin, end), without photon traffic.
ClockPhaseSeries simulate_rx_offset(const ExperimentConfig& cfg, std::uint64_t begin, std::uint64_t end,
                                    std::uint64_t every);

/// Timing spread (sigma, fs) one node's clock adds to its tags.
double node_clock_sigma_fs(const ExperimentConfig& cfg, int arm);

/// Windowed oracle inputs implied by a configuration.
CarModel car_model(const ExperimentConfig& cfg);
CarPrediction predict_car(const ExperimentConfig& cfg);

/// Sync off: solves the pair probability; sync on: solves a common Raman rate
/// per slot for both arms. Returns the adjusted configuration.
ExperimentConfig calibrate_for_car(const ExperimentConfig& cfg, double target_car);

struct RunArtifacts {
    std::filesystem::path dir;
    std::filesystem::path tags_1;
    std::filesystem::path tags_2;
    std::filesystem::path histogram_csv;
    std::filesystem::path car_report_json;
    std::filesystem::path rx_offset_csv;
    std::filesystem::path manifest_json;
    RunSummary summary;
};

/// Writes all artifacts into cfg.output_dir (or $PICOSYNC_OUTPUT_DIR).
RunArtifacts run_experiment(const ExperimentConfig& cfg);

/// Output directory after applying the environment override.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

nlohmann::json to_json(const CarReport& r);
nlohmann::json to_json(const RunSummary& s);

}  // namespace picosync
