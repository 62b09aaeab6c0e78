#pragma once

#include <cstdint>
#include <vector>

#include "picosync/random.hpp"
#include "picosync/timebase.hpp"

namespace picosync {

enum class MultiPairModel { poisson, thermal };

struct SourceConfig {
    double pair_prob_per_pulse = 0.01;
    // When true, pair_prob_per_pulse is read as the mean pair number instead
    // of the probability of emitting at least one pair.
    bool prob_is_mean = false;
    MultiPairModel multi_pair_model = MultiPairModel::poisson;
    double emission_sigma_fs = 74'000.0 / kFwhmPerSigma;
    DurationFs period_fs = kDefaultPeriod;

    void validate() const;

    /// Mean pairs per pulse implied by the configuration.
    double mean_pairs() const;
    /// Probability that a pulse carries at least one pair.
    double occupancy() const;
    /// E[n(n-1)] / E[n]^2 of the multi-pair distribution: 1 (Poisson), 2 (thermal).
    double multi_pair_factor() const;
};

struct PairEmission {
    std::uint64_t slot = 0;
    Timestamp t_emit;  // shared by both photons
    std::uint32_t pair_index_in_slot = 0;
};

/// Streaming pulsed pair source. Empty slots are skipped geometrically so the
/// cost is proportional to the number of emitted pairs.
class PairSource {
public:
    PairSource(const SourceConfig& cfg, std::uint64_t seed);

    /// Appends emissions for slots in [begin, end) in time order. Calls must
    /// cover contiguous, increasing slot ranges starting at slot 0.
    void generate(std::uint64_t begin, std::uint64_t end, std::vector<PairEmission>& out);

private:
    void advance_from(std::uint64_t slot);

    SourceConfig cfg_;
    Timebase timebase_;
    Rng rng_;
    std::normal_distribution<double> spread_{0.0, 1.0};  // kept across calls so chunking does not change draws
    double occupancy_;
    double mean_;
    std::uint64_t next_slot_ = 0;
    std::uint64_t generated_to_ = 0;
    bool exhausted_ = false;
};

std::vector<PairEmission> sample_emissions(std::uint64_t n_slots, const SourceConfig& cfg, std::uint64_t seed);

}  // namespace picosync
