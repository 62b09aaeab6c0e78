#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "picosync/channel.hpp"
#include "picosync/random.hpp"
#include "picosync/timebase.hpp"

namespace picosync {

struct OscillatorConfig {
    double frequency_hz = 200e6;
    double jitter_fwhm_fs = 0.0;            // white, per edge
    double phase_walk_fs_per_sqrt_s = 0.0;  // free-running phase random walk

    void validate() const;
    DurationFs period() const;
};

/// First-order phase lock of an end-node oscillator to the received clock.
struct SyncConfig {
    double rec_jitter_fwhm_fs = 47'000.0;
    double loop_gain = 0.01;
    std::uint32_t averaging_edges = 1;  // edges averaged per correction
    bool enabled = true;
    // Start from the first measured edge instead of the oscillator's own
    // nominal phase.
    bool acquire_on_first_edge = true;

    void validate() const;
};

struct ClockPhaseSeries {
    std::vector<double> time_s;
    std::vector<double> offset_fs;

    std::size_t size() const { return time_s.size(); }
    bool empty() const { return time_s.empty(); }
};

class SyncError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Edge k at k / frequency plus the oscillator's walk and edge jitter.
std::vector<Timestamp> emit_clock_edges(std::uint64_t n, const OscillatorConfig& cfg, std::uint64_t seed);

/// Edge-by-edge first-order loop over a received edge train. The series holds
/// one sample per edge: the local clock's phase (fs) relative to the nominal
/// grid anchored at the first received edge's slot.
ClockPhaseSeries lock_phase(std::span<const Timestamp> received_edges, const SyncConfig& cfg,
                            const OscillatorConfig& local, std::uint64_t seed);

/// Pointwise a - b on a's samples inside the common range, pairing each with
/// the nearest sample of b.
ClockPhaseSeries rx_offset_series(const ClockPhaseSeries& a, const ClockPhaseSeries& b);

/// Steady-state residual of the first-order loop for white measurement noise.
double loop_residual_sigma(double measurement_sigma_fs, double loop_gain);

/// Residual sigma for a full configuration, including averaging, local edge
/// jitter in the measurement and free-running walk between corrections.
double loop_residual_sigma(const SyncConfig& sync, const OscillatorConfig& local);

/// Rate at which the analysis timebase can still separate adjacent slots:
/// guard / sigma. The guard is a fitted constant, not derived.
double rate_upper_bound_hz(double timing_sigma_fs, double guard);

/// Phase of an end-node clock against the central timebase, evaluated at
/// non-decreasing slot indices.
///
/// Locked: the clock follows the received pulse train (base delay plus the
/// fiber drift the pulses experienced), lagging slow drift by
/// drift_rate * correction_interval / gain, with a stationary AR(1) residual
/// that is advanced exactly over skipped corrections.
///
/// Free-running: base delay (static calibration) plus the oscillator's
/// Brownian phase walk.
class NodeClock {
public:
    NodeClock(const SyncConfig& sync, const OscillatorConfig& local, DurationFs base_delay, const DriftModel& drift,
              std::uint64_t drift_seed, DurationFs period, std::uint64_t seed);

    /// Clock phase offset in fs at the given slot.
    double offset_fs(std::uint64_t slot);

    /// Independent white jitter of one local clock edge (fs).
    double edge_jitter_fs();

    bool locked() const { return sync_.enabled; }

private:
    SyncConfig sync_;
    OscillatorConfig local_;
    DurationFs base_delay_;
    DriftProcess drift_;
    double period_s_;
    Rng rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};

    double pole_ = 0.0;             // 1 - gain
    double innovation_var_ = 0.0;   // per correction
    double stationary_var_ = 0.0;
    std::uint64_t last_update_ = 0;
    double residual_ = 0.0;
    bool started_ = false;

    double walk_ = 0.0;
    std::uint64_t last_slot_ = 0;
};

/// Samples a NodeClock every `every` slots over [begin, end).
ClockPhaseSeries sample_node_clock(NodeClock& clock, std::uint64_t begin, std::uint64_t end, std::uint64_t every,
                                   DurationFs period);

}  // namespace picosync
