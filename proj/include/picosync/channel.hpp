#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "picosync/random.hpp"
#include "picosync/timebase.hpp"

namespace picosync {

enum class DriftKind { none, sinusoid, random_walk, sum };

/// Slow fiber-length drift of the propagation delay.
struct DriftModel {
    DriftKind kind = DriftKind::none;
    double amplitude_fs = 0.0;
    double period_s = 0.0;
    double walk_sigma_fs_per_sqrt_s = 0.0;
    double walk_step_s = 1.0;  // grid of the piecewise-linear walk

    void validate() const;
};

/// Evaluates a DriftModel. The random walk is a Brownian path on a fixed
/// time grid, linearly interpolated, generated from a counter-based stream so
/// that values depend only on (seed, t).
class DriftProcess {
public:
    DriftProcess(const DriftModel& model, std::uint64_t seed);

    double at(double t_s);

private:
    double walk_at(double t_s);

    DriftModel model_;
    std::uint64_t seed_;
    std::vector<double> walk_knots_{0.0};
};

DurationFs drift_at(double t_abs_s, const DriftModel& m, std::uint64_t seed);

enum class RamanProfile { uniform_period, pulse_gated };

struct ChannelConfig {
    double loss_db = 0.0;  // +inf blocks the channel
    DurationFs base_delay_fs{0};
    DriftModel drift;
    double raman_rate_per_slot = 0.0;
    RamanProfile raman_profile = RamanProfile::pulse_gated;
    DurationFs clock_pulse_width_fs{2'500'000};
    DurationFs period_fs = kDefaultPeriod;

    void validate() const;
    double transmission() const;
    /// Width of the window Raman arrivals are spread over.
    DurationFs raman_window() const;
};

/// One fiber arm. Survival, drift and Raman noise use independent streams
/// derived from the channel seed.
class Channel {
public:
    Channel(const ChannelConfig& cfg, std::uint64_t seed);

    const ChannelConfig& config() const { return cfg_; }
    double transmission() const { return transmission_; }

    std::optional<Timestamp> propagate(Timestamp t_emit);

    /// Arrival time of light emitted at t_emit (no loss applied).
    Timestamp arrival(Timestamp t_emit);

    /// Delay change relative to base_delay at the given emission time.
    double drift_fs(double t_emit_s) { return drift_.at(t_emit_s); }

    /// Appends Raman noise times in the emitting pulse's frame (slot plus
    /// offset within the gate) for slots [begin, end), sorted.
    void sample_raman_emissions(std::uint64_t begin, std::uint64_t end, std::vector<Timestamp>& out);

    /// Appends Raman noise arrivals for emission slots [begin, end), sorted.
    void sample_raman(std::uint64_t begin, std::uint64_t end, std::vector<Timestamp>& out);

private:
    ChannelConfig cfg_;
    Timebase timebase_;
    double transmission_;
    Rng survival_rng_;
    Rng raman_rng_;
    DriftProcess drift_;
    std::uint64_t raman_next_slot_ = 0;
    bool raman_started_ = false;
};

std::optional<Timestamp> propagate(Timestamp t_emit, const ChannelConfig& cfg, std::uint64_t seed);

std::vector<Timestamp> sample_raman(std::uint64_t slot_begin, std::uint64_t slot_end, const ChannelConfig& cfg,
                                    std::uint64_t seed);

}  // namespace picosync
