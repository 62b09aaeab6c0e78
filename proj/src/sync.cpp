#include "picosync/sync.hpp"

#include <cmath>

#include "picosync/error.hpp"

namespace picosync {

void OscillatorConfig::validate() const {
    if (!(frequency_hz > 0.0) || !std::isfinite(frequency_hz)) {
        throw ConfigError("oscillator frequency must be positive");
    }
    if (!(jitter_fwhm_fs >= 0.0) || !(phase_walk_fs_per_sqrt_s >= 0.0)) {
        throw ConfigError("oscillator jitter and walk must be non-negative");
    }
}

DurationFs OscillatorConfig::period() const {
    return round_fs(1e15 / frequency_hz);
}

void SyncConfig::validate() const {
    if (!(loop_gain > 0.0 && loop_gain <= 1.0)) {
        throw ConfigError("sync.loop_gain must lie in (0, 1]");
    }
    if (averaging_edges < 1) {
        throw ConfigError("sync.averaging_edges must be >= 1");
    }
    if (!(rec_jitter_fwhm_fs >= 0.0) || !std::isfinite(rec_jitter_fwhm_fs)) {
        throw ConfigError("sync.rec_jitter_fwhm_fs must be non-negative");
    }
}

std::vector<Timestamp> emit_clock_edges(std::uint64_t n, const OscillatorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const DurationFs period = cfg.period();
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sigma_jitter = fwhm_to_sigma(cfg.jitter_fwhm_fs);
    const double sigma_step = cfg.phase_walk_fs_per_sqrt_s * std::sqrt(period.seconds());
    std::vector<Timestamp> edges;
    edges.reserve(n);
    double walk = 0.0;
    for (std::uint64_t k = 0; k < n; ++k) {
        if (sigma_step > 0.0 && k > 0) {
            walk += sigma_step * normal(rng);
        }
        const double jitter = sigma_jitter > 0.0 ? sigma_jitter * normal(rng) : 0.0;
        edges.push_back(normalize(Timestamp{k, std::llround(walk + jitter)}, period));
    }
    return edges;
}

ClockPhaseSeries lock_phase(std::span<const Timestamp> received_edges, const SyncConfig& cfg,
                            const OscillatorConfig& local, std::uint64_t seed) {
    cfg.validate();
    local.validate();
    if (received_edges.empty()) {
        if (cfg.enabled) {
            throw SyncError("no clock received");
        }
        return {};
    }
    const Timebase tb(local.period());
    const double period_fs = static_cast<double>(tb.period().value);
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sigma_rec = fwhm_to_sigma(cfg.rec_jitter_fwhm_fs);
    const double sigma_edge = fwhm_to_sigma(local.jitter_fwhm_fs);
    const double sigma_step = local.phase_walk_fs_per_sqrt_s * std::sqrt(tb.period().seconds());

    const Timestamp anchor{tb.normalize(received_edges.front()).slot, 0};
    ClockPhaseSeries series;
    series.time_s.reserve(received_edges.size());
    series.offset_fs.reserve(received_edges.size());

    double phase = 0.0;
    double error_sum = 0.0;
    std::uint32_t in_block = 0;
    for (std::size_t k = 0; k < received_edges.size(); ++k) {
        const Timestamp& r = received_edges[k];
        if (k > 0 && tb.less(r, received_edges[k - 1])) {
            throw std::invalid_argument("lock_phase: received edges are not sorted");
        }
        // Received delay relative to the anchored nominal grid, unwrapped.
        const double target =
            static_cast<double>(tb.diff(r, anchor).value) - static_cast<double>(k) * period_fs;
        const double edge = sigma_edge > 0.0 ? sigma_edge * normal(rng) : 0.0;
        const double noise = sigma_rec > 0.0 ? sigma_rec * normal(rng) : 0.0;
        if (k == 0 && cfg.enabled && cfg.acquire_on_first_edge) {
            phase = target + noise;
        }
        if (cfg.enabled) {
            error_sum += (phase + edge) - (target + noise);
            if (++in_block == cfg.averaging_edges) {
                phase -= cfg.loop_gain * error_sum / cfg.averaging_edges;
                error_sum = 0.0;
                in_block = 0;
            }
        }
        if (sigma_step > 0.0) {
            phase += sigma_step * normal(rng);
        }
        series.time_s.push_back(static_cast<double>(tb.absolute(r)) * 1e-15);
        series.offset_fs.push_back(phase + edge);
    }
    return series;
}

ClockPhaseSeries rx_offset_series(const ClockPhaseSeries& a, const ClockPhaseSeries& b) {
    if (a.empty() || b.empty()) {
        throw SyncError("rx_offset_series: empty series");
    }
    const double lo = std::max(a.time_s.front(), b.time_s.front());
    const double hi = std::min(a.time_s.back(), b.time_s.back());
    if (lo > hi) {
        throw SyncError("rx_offset_series: series do not overlap");
    }
    ClockPhaseSeries out;
    std::size_t j = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a.time_s[i];
        if (t < lo || t > hi) {
            continue;
        }
        while (j + 1 < b.size() && std::fabs(b.time_s[j + 1] - t) <= std::fabs(b.time_s[j] - t)) {
            ++j;
        }
        out.time_s.push_back(t);
        out.offset_fs.push_back(a.offset_fs[i] - b.offset_fs[j]);
    }
    return out;
}

double loop_residual_sigma(double measurement_sigma_fs, double loop_gain) {
    return measurement_sigma_fs * std::sqrt(loop_gain / (2.0 - loop_gain));
}

namespace {

struct LoopNoise {
    double pole;
    double innovation_var;
    double stationary_var;
};

LoopNoise loop_noise(const SyncConfig& sync, const OscillatorConfig& local) {
    const double n = sync.averaging_edges;
    const double sigma_meas =
        std::hypot(fwhm_to_sigma(sync.rec_jitter_fwhm_fs), fwhm_to_sigma(local.jitter_fwhm_fs));
    const double g = sync.loop_gain;
    const double walk_var = local.phase_walk_fs_per_sqrt_s * local.phase_walk_fs_per_sqrt_s *
                            local.period().seconds() * n;
    LoopNoise ln;
    ln.pole = 1.0 - g;
    ln.innovation_var = g * g * sigma_meas * sigma_meas / n + walk_var;
    ln.stationary_var = ln.innovation_var / (1.0 - ln.pole * ln.pole);
    return ln;
}

}  // namespace

double loop_residual_sigma(const SyncConfig& sync, const OscillatorConfig& local) {
    return std::sqrt(loop_noise(sync, local).stationary_var);
}

double rate_upper_bound_hz(double timing_sigma_fs, double guard) {
    if (!(timing_sigma_fs > 0.0)) {
        throw std::invalid_argument("rate_upper_bound_hz: sigma must be positive");
    }
    return guard / (timing_sigma_fs * 1e-15);
}

NodeClock::NodeClock(const SyncConfig& sync, const OscillatorConfig& local, DurationFs base_delay,
                     const DriftModel& drift, std::uint64_t drift_seed, DurationFs period, std::uint64_t seed)
    : sync_(sync),
      local_(local),
      base_delay_(base_delay),
      drift_(drift, drift_seed),
      period_s_(period.seconds()),
      rng_(seed) {
    sync_.validate();
    local_.validate();
    const LoopNoise ln = loop_noise(sync_, local_);
    pole_ = ln.pole;
    innovation_var_ = ln.innovation_var;
    stationary_var_ = ln.stationary_var;
}

double NodeClock::offset_fs(std::uint64_t slot) {
    const double t = static_cast<double>(slot) * period_s_;
    if (!sync_.enabled) {
        if (!started_) {
            started_ = true;
            last_slot_ = slot;
        }
        if (slot > last_slot_ && local_.phase_walk_fs_per_sqrt_s > 0.0) {
            const double dt = static_cast<double>(slot - last_slot_) * period_s_;
            walk_ += local_.phase_walk_fs_per_sqrt_s * std::sqrt(dt) * normal_(rng_);
        }
        last_slot_ = std::max(last_slot_, slot);
        return static_cast<double>(base_delay_.value) + walk_;
    }

    const std::uint64_t update = slot / sync_.averaging_edges;
    if (!started_) {
        started_ = true;
        last_update_ = update;
        residual_ = std::sqrt(stationary_var_) * normal_(rng_);
    } else if (update > last_update_) {
        // Exact m-step transition of the AR(1) residual.
        const double m = static_cast<double>(update - last_update_);
        const double decay = std::pow(pole_, m);
        const double var = pole_ < 1.0 ? stationary_var_ * (1.0 - decay * decay) : innovation_var_ * m;
        residual_ = decay * residual_ + std::sqrt(std::max(var, 0.0)) * normal_(rng_);
        last_update_ = update;
    }
    const double interval_s = period_s_ * sync_.averaging_edges;
    const double d_now = drift_.at(t);
    const double d_prev = drift_.at(std::max(0.0, t - interval_s));
    const double lag = (d_now - d_prev) / sync_.loop_gain;
    return static_cast<double>(base_delay_.value) + d_now - lag + residual_;
}

double NodeClock::edge_jitter_fs() {
    const double sigma = fwhm_to_sigma(local_.jitter_fwhm_fs);
    return sigma > 0.0 ? sigma * normal_(rng_) : 0.0;
}

ClockPhaseSeries sample_node_clock(NodeClock& clock, std::uint64_t begin, std::uint64_t end, std::uint64_t every,
                                   DurationFs period) {
    if (every == 0) {
        throw std::invalid_argument("sample_node_clock: sampling interval must be positive");
    }
    ClockPhaseSeries s;
    for (std::uint64_t slot = begin; slot < end; slot += every) {
        s.time_s.push_back(static_cast<double>(slot) * period.seconds());
        s.offset_fs.push_back(clock.offset_fs(slot) + clock.edge_jitter_fs());
    }
    return s;
}

}  // namespace picosync
