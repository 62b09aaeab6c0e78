#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "picosync/random.hpp"
#include "picosync/timebase.hpp"

namespace picosync {

enum class TagKind : std::uint8_t { signal = 0, raman = 1, dark = 2 };

/// Detection event. `kind` is retained for diagnostics only; analysis never
/// reads it.
struct TimeTag {
    std::uint8_t node_id = 0;
    std::uint8_t channel_id = 0;
    Timestamp t;
    TagKind kind = TagKind::signal;

    bool operator==(const TimeTag&) const = default;
};

/// Photon (or noise photon) at the detector input.
struct Arrival {
    Timestamp t;
    TagKind kind = TagKind::signal;
};

/// SNSPD plus time tagger.
struct DetectorConfig {
    double efficiency = 0.8;
    DurationFs jitter_fwhm_fs{50'000};
    DurationFs dead_time_fs{50'000'000};
    double dark_rate_hz = 100.0;
    DurationFs tdc_bin_fs{1'000};
    DurationFs tdc_jitter_fwhm_fs{7'000};

    void validate() const;
};

/// Stateful detector channel for chunked streams. Dead time and pending
/// events carry across chunks, so feeding a run in chunks gives the same
/// result as feeding it at once.
class Detector {
public:
    Detector(const DetectorConfig& cfg, DurationFs period, std::uint64_t seed, std::uint8_t node_id = 0,
             std::uint8_t channel_id = 0);

    /// Efficiency thinning decision for one arrival.
    bool accepts();

    /// Processes arrivals that have already passed efficiency thinning and
    /// belong to slots [begin, end). Adds jitter, dark counts over the span,
    /// quantizes, sorts and applies dead time. Tags that could still be
    /// preceded by events of later slots are held back until the next call
    /// or finish().
    void process(std::span<const Arrival> arrivals, std::uint64_t begin, std::uint64_t end,
                 std::vector<TimeTag>& out);

    void finish(std::vector<TimeTag>& out);

    const DetectorConfig& config() const { return cfg_; }

private:
    Timestamp quantize(Timestamp t) const;
    void emit(std::vector<TimeTag>& ready, std::vector<TimeTag>& out);

    DetectorConfig cfg_;
    Timebase timebase_;
    Rng efficiency_rng_;
    Rng jitter_rng_;
    std::normal_distribution<double> jitter_{0.0, 1.0};
    Rng dark_rng_;
    std::uint8_t node_id_;
    std::uint8_t channel_id_;
    std::vector<TimeTag> pending_;
    std::vector<TimeTag> scratch_;
    bool have_last_ = false;
    Timestamp last_accepted_;
    bool dark_started_ = false;
    __int128 dark_next_ = 0;
};

/// One-shot detection of a sorted arrival stream over slots [begin, end).
/// Throws std::invalid_argument on unsorted input.
std::vector<TimeTag> detect(std::span<const Arrival> arrivals, const DetectorConfig& cfg, std::uint64_t begin,
                            std::uint64_t end, DurationFs period, std::uint64_t seed, std::uint8_t node_id = 0,
                            std::uint8_t channel_id = 0);

/// True when tags are strictly increasing with gaps of at least `dead_time`.
bool satisfies_dead_time(std::span<const TimeTag> tags, DurationFs dead_time, DurationFs period);

}  // namespace picosync
