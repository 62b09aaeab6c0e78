#include "picosync/detector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "picosync/error.hpp"

namespace picosync {

void DetectorConfig::validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
        throw ConfigError("detector efficiency must lie in [0, 1]");
    }
    if (jitter_fwhm_fs.value < 0 || dead_time_fs.value < 0 || tdc_jitter_fwhm_fs.value < 0) {
        throw ConfigError("detector timing parameters must be non-negative");
    }
    if (tdc_bin_fs.value < 0) {
        throw ConfigError("detector tdc_bin_fs must be non-negative");
    }
    if (!(dark_rate_hz >= 0.0) || !std::isfinite(dark_rate_hz)) {
        throw ConfigError("detector dark_rate_hz must be non-negative");
    }
}

Detector::Detector(const DetectorConfig& cfg, DurationFs period, std::uint64_t seed, std::uint8_t node_id,
                   std::uint8_t channel_id)
    : cfg_(cfg),
      timebase_(period),
      efficiency_rng_(derive_seed(seed, "efficiency")),
      jitter_rng_(derive_seed(seed, "jitter")),
      dark_rng_(derive_seed(seed, "dark")),
      node_id_(node_id),
      channel_id_(channel_id) {
    cfg_.validate();
}

bool Detector::accepts() {
    return uniform01(efficiency_rng_) < cfg_.efficiency;
}

Timestamp Detector::quantize(Timestamp t) const {
    const std::int64_t bin = cfg_.tdc_bin_fs.value;
    if (bin <= 1) {
        return t;
    }
    // The TDC bins time relative to the local clock edge of the slot.
    const double q = std::round(static_cast<double>(t.offset_fs) / static_cast<double>(bin));
    return timebase_.normalize(Timestamp{t.slot, static_cast<std::int64_t>(q) * bin});
}

void Detector::emit(std::vector<TimeTag>& ready, std::vector<TimeTag>& out) {
    for (const TimeTag& tag : ready) {
        if (have_last_) {
            const DurationFs gap = timebase_.diff(tag.t, last_accepted_);
            if (gap.value <= 0 || gap < cfg_.dead_time_fs) {
                continue;  // non-paralyzable: blocked clicks do not extend the window
            }
        }
        out.push_back(tag);
        last_accepted_ = tag.t;
        have_last_ = true;
    }
}

void Detector::process(std::span<const Arrival> arrivals, std::uint64_t begin, std::uint64_t end,
                       std::vector<TimeTag>& out) {
    const auto order = timebase_.ordering();
    const double sigma_det = fwhm_to_sigma(static_cast<double>(cfg_.jitter_fwhm_fs.value));
    const double sigma_tdc = fwhm_to_sigma(static_cast<double>(cfg_.tdc_jitter_fwhm_fs.value));
    const double sigma = std::hypot(sigma_det, sigma_tdc);

    std::vector<TimeTag>& batch = scratch_;
    batch.assign(pending_.begin(), pending_.end());
    pending_.clear();

    for (const Arrival& a : arrivals) {
        TimeTag tag{node_id_, channel_id_, a.t, a.kind};
        if (sigma > 0.0) {
            // Two independent draws keep the SNSPD and TDC contributions
            // separately reproducible.
            const double d = sigma_det * jitter_(jitter_rng_) + sigma_tdc * jitter_(jitter_rng_);
            tag.t = timebase_.shift(tag.t, round_fs(d));
        }
        tag.t = quantize(tag.t);
        batch.push_back(tag);
    }

    if (cfg_.dark_rate_hz > 0.0 && end > begin) {
        // Dark clicks run on one absolute schedule across calls.
        std::exponential_distribution<double> gap(cfg_.dark_rate_hz * 1e-15);
        const std::int64_t period = timebase_.period().value;
        const auto next_gap = [&] { return static_cast<__int128>(std::llround(std::ceil(gap(dark_rng_)))); };
        const __int128 from = static_cast<__int128>(begin) * period;
        const __int128 to = static_cast<__int128>(end) * period;
        if (!dark_started_) {
            dark_next_ = from + next_gap();
            dark_started_ = true;
        }
        while (dark_next_ < from) dark_next_ += next_gap();
        while (dark_next_ < to) {
            const Timestamp at{static_cast<std::uint64_t>(dark_next_ / period),
                               static_cast<std::int64_t>(dark_next_ % period)};
            batch.push_back(TimeTag{node_id_, channel_id_, quantize(at), TagKind::dark});
            dark_next_ += next_gap();
        }
    }

    std::stable_sort(batch.begin(), batch.end(),
                     [&order](const TimeTag& a, const TimeTag& b) { return order(a.t, b.t); });

    // A later slot's event lands before end*T - T only if it is displaced by
    // more than a period, so everything earlier is final.
    const __int128 watermark =
        static_cast<__int128>(end) * timebase_.period().value - timebase_.period().value;
    auto split = std::partition_point(batch.begin(), batch.end(),
                                      [&](const TimeTag& tag) { return timebase_.absolute(tag.t) < watermark; });
    pending_.assign(split, batch.end());
    batch.erase(split, batch.end());

    if (have_last_ && !batch.empty() && order(batch.front().t, last_accepted_)) {
        throw std::runtime_error("detector stream went backwards across a chunk boundary");
    }
    emit(batch, out);
}

void Detector::finish(std::vector<TimeTag>& out) {
    std::vector<TimeTag> rest;
    rest.swap(pending_);
    emit(rest, out);
}

std::vector<TimeTag> detect(std::span<const Arrival> arrivals, const DetectorConfig& cfg, std::uint64_t begin,
                            std::uint64_t end, DurationFs period, std::uint64_t seed, std::uint8_t node_id,
                            std::uint8_t channel_id) {
    const Timebase tb(period);
    for (std::size_t i = 1; i < arrivals.size(); ++i) {
        if (tb.less(arrivals[i].t, arrivals[i - 1].t)) {
            throw std::invalid_argument("detect: arrivals are not sorted");
        }
    }
    Detector det(cfg, period, seed, node_id, channel_id);
    std::vector<Arrival> kept;
    kept.reserve(arrivals.size());
    for (const Arrival& a : arrivals) {
        if (det.accepts()) {
            kept.push_back(a);
        }
    }
    std::vector<TimeTag> out;
    det.process(kept, begin, end, out);
    det.finish(out);
    return out;
}

bool satisfies_dead_time(std::span<const TimeTag> tags, DurationFs dead_time, DurationFs period) {
    const Timebase tb(period);
    for (std::size_t i = 1; i < tags.size(); ++i) {
        const DurationFs gap = tb.diff(tags[i].t, tags[i - 1].t);
        if (gap.value <= 0 || gap < dead_time) {
            return false;
        }
    }
    return true;
}

}  // namespace picosync
