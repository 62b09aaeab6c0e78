#include "picosync/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "picosync/error.hpp"

namespace picosync {

void DriftModel::validate() const {
    if (!(amplitude_fs >= 0.0) || !std::isfinite(amplitude_fs)) {
        throw ConfigError("drift amplitude must be finite and non-negative");
    }
    if (!(walk_sigma_fs_per_sqrt_s >= 0.0) || !std::isfinite(walk_sigma_fs_per_sqrt_s)) {
        throw ConfigError("drift walk sigma must be finite and non-negative");
    }
    const bool periodic = kind == DriftKind::sinusoid || kind == DriftKind::sum;
    if (periodic && !(period_s > 0.0 && std::isfinite(period_s))) {
        throw ConfigError("sinusoidal drift needs a positive period");
    }
    if (!(walk_step_s > 0.0 && std::isfinite(walk_step_s))) {
        throw ConfigError("drift walk step must be positive");
    }
}

DriftProcess::DriftProcess(const DriftModel& model, std::uint64_t seed) : model_(model), seed_(seed) {
    model_.validate();
}

double DriftProcess::walk_at(double t_s) {
    const double pos = t_s / model_.walk_step_s;
    const auto k = static_cast<std::size_t>(pos);
    const double step_sigma = model_.walk_sigma_fs_per_sqrt_s * std::sqrt(model_.walk_step_s);
    while (walk_knots_.size() < k + 2) {
        const std::size_t i = walk_knots_.size() - 1;
        walk_knots_.push_back(walk_knots_.back() + step_sigma * counter_normal(seed_, i));
    }
    const double frac = pos - static_cast<double>(k);
    return walk_knots_[k] + frac * (walk_knots_[k + 1] - walk_knots_[k]);
}

double DriftProcess::at(double t_s) {
    if (t_s <= 0.0) {
        return 0.0;
    }
    double d = 0.0;
    if (model_.kind == DriftKind::sinusoid || model_.kind == DriftKind::sum) {
        d += model_.amplitude_fs * std::sin(2.0 * M_PI * t_s / model_.period_s);
    }
    if (model_.kind == DriftKind::random_walk || model_.kind == DriftKind::sum) {
        d += walk_at(t_s);
    }
    return d;
}

DurationFs drift_at(double t_abs_s, const DriftModel& m, std::uint64_t seed) {
    DriftProcess p(m, seed);
    return round_fs(p.at(t_abs_s));
}

void ChannelConfig::validate() const {
    if (!(loss_db >= 0.0)) {
        throw ConfigError("channel loss_db must be non-negative");
    }
    if (!(raman_rate_per_slot >= 0.0) || !std::isfinite(raman_rate_per_slot)) {
        throw ConfigError("channel raman_rate_per_slot must be non-negative");
    }
    if (period_fs.value <= 0) {
        throw ConfigError("channel period must be positive");
    }
    if (clock_pulse_width_fs.value <= 0 || clock_pulse_width_fs > period_fs) {
        throw ConfigError("clock pulse width must lie in (0, period]");
    }
    if (base_delay_fs.value < 0) {
        throw ConfigError("channel base delay must be non-negative");
    }
    drift.validate();
}

double ChannelConfig::transmission() const {
    if (std::isinf(loss_db)) {
        return 0.0;
    }
    return std::pow(10.0, -loss_db / 10.0);
}

DurationFs ChannelConfig::raman_window() const {
    return raman_profile == RamanProfile::pulse_gated ? clock_pulse_width_fs : period_fs;
}

Channel::Channel(const ChannelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      timebase_(cfg.period_fs),
      transmission_(cfg.transmission()),
      survival_rng_(derive_seed(seed, "survival")),
      raman_rng_(derive_seed(seed, "raman")),
      drift_(cfg.drift, derive_seed(seed, "drift")) {
    cfg_.validate();
}

Timestamp Channel::arrival(Timestamp t_emit) {
    const double drift = drift_.at(timebase_.seconds(t_emit));
    return timebase_.shift(t_emit, cfg_.base_delay_fs + round_fs(drift));
}

std::optional<Timestamp> Channel::propagate(Timestamp t_emit) {
    if (!(uniform01(survival_rng_) < transmission_)) {
        return std::nullopt;
    }
    return arrival(t_emit);
}

void Channel::sample_raman_emissions(std::uint64_t begin, std::uint64_t end, std::vector<Timestamp>& out) {
    const double rate = cfg_.raman_rate_per_slot;
    if (rate <= 0.0 || begin >= end) {
        return;
    }
    const double occupancy = -std::expm1(-rate);
    constexpr auto kNever = std::numeric_limits<std::uint64_t>::max();
    auto next_from = [&](std::uint64_t slot) {
        const std::uint64_t skip = skip_empty_slots(raman_rng_, occupancy);
        return (skip == kNever || skip > kNever - slot) ? kNever : slot + skip;
    };
    if (!raman_started_ || raman_next_slot_ < begin) {
        raman_next_slot_ = next_from(begin);
        raman_started_ = true;
    }
    const double width = static_cast<double>(cfg_.raman_window().value);
    std::vector<std::int64_t> offsets;
    while (raman_next_slot_ < end) {
        const std::uint64_t slot = raman_next_slot_;
        const std::uint32_t n = zero_truncated_poisson(raman_rng_, rate);
        offsets.clear();
        for (std::uint32_t i = 0; i < n; ++i) {
            offsets.push_back(static_cast<std::int64_t>(std::floor((uniform01(raman_rng_) - 0.5) * width)));
        }
        std::sort(offsets.begin(), offsets.end());
        for (std::int64_t off : offsets) {
            out.push_back(Timestamp{slot, off});
        }
        raman_next_slot_ = slot == kNever ? kNever : next_from(slot + 1);
    }
}

void Channel::sample_raman(std::uint64_t begin, std::uint64_t end, std::vector<Timestamp>& out) {
    const std::size_t first = out.size();
    sample_raman_emissions(begin, end, out);
    for (std::size_t i = first; i < out.size(); ++i) {
        out[i] = arrival(out[i]);
    }
    // Drift evaluated per event can reorder events a few fs apart.
    std::stable_sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(), timebase_.ordering());
}

std::optional<Timestamp> propagate(Timestamp t_emit, const ChannelConfig& cfg, std::uint64_t seed) {
    Channel ch(cfg, seed);
    return ch.propagate(t_emit);
}

std::vector<Timestamp> sample_raman(std::uint64_t slot_begin, std::uint64_t slot_end, const ChannelConfig& cfg,
                                    std::uint64_t seed) {
    Channel ch(cfg, seed);
    std::vector<Timestamp> out;
    ch.sample_raman(slot_begin, slot_end, out);
    return out;
}

}  // namespace picosync
