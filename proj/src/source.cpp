#include "picosync/source.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "picosync/error.hpp"

namespace picosync {

void SourceConfig::validate() const {
    if (!(pair_prob_per_pulse >= 0.0 && pair_prob_per_pulse <= 0.5)) {
        throw ConfigError("source.pair_prob_per_pulse must lie in [0, 0.5]");
    }
    if (!(emission_sigma_fs >= 0.0) || !std::isfinite(emission_sigma_fs)) {
        throw ConfigError("source.emission_sigma_fs must be non-negative");
    }
    if (period_fs.value <= 0) {
        throw ConfigError("source period must be positive");
    }
}

double SourceConfig::mean_pairs() const {
    const double p = pair_prob_per_pulse;
    if (prob_is_mean) {
        return p;
    }
    // Solve P(n >= 1) = p for the mean.
    return multi_pair_model == MultiPairModel::poisson ? -std::log1p(-p) : p / (1.0 - p);
}

double SourceConfig::occupancy() const {
    if (!prob_is_mean) {
        return pair_prob_per_pulse;
    }
    const double mu = pair_prob_per_pulse;
    return multi_pair_model == MultiPairModel::poisson ? -std::expm1(-mu) : mu / (1.0 + mu);
}

double SourceConfig::multi_pair_factor() const {
    return multi_pair_model == MultiPairModel::poisson ? 1.0 : 2.0;
}

PairSource::PairSource(const SourceConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), timebase_(cfg.period_fs), rng_(seed) {
    cfg_.validate();
    occupancy_ = cfg_.occupancy();
    mean_ = cfg_.mean_pairs();
    advance_from(0);
}

void PairSource::advance_from(std::uint64_t slot) {
    const std::uint64_t skip = skip_empty_slots(rng_, occupancy_);
    if (skip == std::numeric_limits<std::uint64_t>::max() ||
        skip > std::numeric_limits<std::uint64_t>::max() - slot) {
        exhausted_ = true;
        return;
    }
    next_slot_ = slot + skip;
}

void PairSource::generate(std::uint64_t begin, std::uint64_t end, std::vector<PairEmission>& out) {
    if (begin != generated_to_ || end < begin) {
        throw std::logic_error("PairSource::generate: slot ranges must be contiguous");
    }
    generated_to_ = end;
    const std::size_t first = out.size();
    while (!exhausted_ && next_slot_ < end) {
        const std::uint64_t slot = next_slot_;
        const std::uint32_t n = cfg_.multi_pair_model == MultiPairModel::poisson
                                    ? zero_truncated_poisson(rng_, mean_)
                                    : zero_truncated_thermal(rng_, mean_);
        const std::size_t slot_first = out.size();
        for (std::uint32_t i = 0; i < n; ++i) {
            const double dt = cfg_.emission_sigma_fs > 0.0 ? cfg_.emission_sigma_fs * spread_(rng_) : 0.0;
            PairEmission e;
            e.slot = slot;
            e.t_emit = Timestamp{slot, std::llround(dt)};
            out.push_back(e);
        }
        if (n > 1) {
            std::sort(out.begin() + static_cast<std::ptrdiff_t>(slot_first), out.end(),
                      [](const PairEmission& a, const PairEmission& b) { return a.t_emit.offset_fs < b.t_emit.offset_fs; });
            for (std::uint32_t i = 0; i < n; ++i) {
                out[slot_first + i].pair_index_in_slot = i;
            }
        }
        if (slot == std::numeric_limits<std::uint64_t>::max()) {
            exhausted_ = true;
        } else {
            advance_from(slot + 1);
        }
    }
    // Only a spread comparable to the period can reorder neighbouring slots.
    const auto chunk = out.begin() + static_cast<std::ptrdiff_t>(first);
    const auto by_time = [order = timebase_.ordering()](const PairEmission& a, const PairEmission& b) {
        return order(a.t_emit, b.t_emit);
    };
    if (!std::is_sorted(chunk, out.end(), by_time)) {
        std::stable_sort(chunk, out.end(), by_time);
    }
}

std::vector<PairEmission> sample_emissions(std::uint64_t n_slots, const SourceConfig& cfg, std::uint64_t seed) {
    PairSource source(cfg, seed);
    std::vector<PairEmission> out;
    source.generate(0, n_slots, out);
    return out;
}

}  // namespace picosync
