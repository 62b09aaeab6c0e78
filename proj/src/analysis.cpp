#include "picosync/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace picosync {

Histogram& Histogram::operator+=(const Histogram& o) {
    if (!same_binning(o)) throw AnalysisError("histogram merge: binning differs");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    n_pairs_total += o.n_pairs_total;
    return *this;
}

Histogram make_histogram(std::int64_t bin_fs, std::int64_t range_fs) {
    if (bin_fs <= 0) throw AnalysisError("histogram: bin width must be positive");
    if (range_fs <= 0) throw AnalysisError("histogram: range must be positive");
    const std::int64_t half_bins = (range_fs + bin_fs - 1) / bin_fs;
    Histogram h;
    h.bin_width_fs = bin_fs;
    h.t_min_fs = -half_bins * bin_fs;
    h.counts.assign(static_cast<std::size_t>(2 * half_bins), 0);
    return h;
}

CoincidenceCounter::CoincidenceCounter(std::int64_t bin_fs, std::int64_t range_fs, DurationFs period)
    : hist_(make_histogram(bin_fs, range_fs)), timebase_(period), range_(-hist_.t_min_fs) {}

void CoincidenceCounter::push(std::span<const TimeTag> tags1, std::span<const TimeTag> tags2, Timestamp watermark) {
    for (const auto& t : tags1) {
        const __int128 a = timebase_.absolute(t.t);
        if (a < last1_) throw AnalysisError("coincidence: stream 1 not sorted");
        last1_ = a;
        pending1_.push_back(a);
    }
    for (const auto& t : tags2) {
        const __int128 b = timebase_.absolute(t.t);
        if (b < last2_) throw AnalysisError("coincidence: stream 2 not sorted");
        last2_ = b;
        window2_.push_back(b);
    }
    settle(timebase_.absolute(watermark));
}

void CoincidenceCounter::finish() {
    settle(std::numeric_limits<__int128>::max());
}

void CoincidenceCounter::settle(__int128 limit) {
    // A stream-1 tag is complete once every stream-2 tag up to a + range is
    // known; stream-2 tags older than the oldest open a - range are dropped.
    std::size_t done = 0;
    const std::size_t nbins = hist_.counts.size();
    for (; done < pending1_.size(); ++done) {
        const __int128 a = pending1_[done];
        if (limit != std::numeric_limits<__int128>::max() && a + range_ >= limit) break;
        while (window_begin_ < window2_.size() && window2_[window_begin_] <= a - range_) ++window_begin_;
        for (std::size_t j = window_begin_; j < window2_.size(); ++j) {
            const __int128 d = a - window2_[j];
            if (d < -range_) break;
            const auto bin = static_cast<std::size_t>((d + range_) / hist_.bin_width_fs);
            if (bin < nbins) {
                ++hist_.counts[bin];
                ++hist_.n_pairs_total;
            }
        }
    }
    pending1_.erase(pending1_.begin(), pending1_.begin() + static_cast<std::ptrdiff_t>(done));
    if (!pending1_.empty() || limit != std::numeric_limits<__int128>::max()) {
        const __int128 oldest = pending1_.empty() ? limit : pending1_.front();
        while (window_begin_ < window2_.size() && window2_[window_begin_] <= oldest - range_) ++window_begin_;
    }
    if (window_begin_ > 4096 && window_begin_ * 2 > window2_.size()) {
        window2_.erase(window2_.begin(), window2_.begin() + static_cast<std::ptrdiff_t>(window_begin_));
        window_begin_ = 0;
    }
}

Histogram coincidence_histogram(std::span<const TimeTag> tags1, std::span<const TimeTag> tags2, std::int64_t bin_fs,
                                std::int64_t range_fs, DurationFs period) {
    CoincidenceCounter counter(bin_fs, range_fs, period);
    counter.push(tags1, tags2, Timestamp{0, 0});
    counter.finish();
    return counter.histogram();
}

FidelityVisibility fidelity_visibility(double car) {
    if (!(car > 0.0)) throw AnalysisError("fidelity: car must be positive");
    FidelityVisibility fv;
    if (std::isinf(car)) {
        fv.fidelity = 1.0;
        fv.visibility = 1.0;
    } else {
        fv.fidelity = car / (car + 1.0);
        fv.visibility = (car - 1.0) / (car + 1.0);
    }
    fv.passes_classical = car > 2.0;
    fv.passes_werner = fv.visibility > 1.0 / 3.0;
    fv.passes_nonlocality = fv.visibility > 1.0 / std::numbers::sqrt2;
    return fv;
}

CarReport car_from_histogram(const Histogram& h, const CarOptions& opt) {
    const std::int64_t bw = h.bin_width_fs;
    if (bw <= 0 || h.counts.empty()) throw AnalysisError("car: empty histogram");
    if (opt.window_fs < 2 * bw) throw AnalysisError("car: window must span at least 2 bins");
    if (opt.window_fs > opt.period_fs) throw AnalysisError("car: window wider than the period");
    if (opt.n_peaks < 1 || opt.exclude_center_neighbors < 0) throw AnalysisError("car: invalid peak selection");

    const double half_t = 0.5 * static_cast<double>(opt.period_fs);
    std::size_t best = h.counts.size();
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const double c = h.bin_center_fs(i);
        if (c < -half_t || c >= half_t) continue;
        if (best == h.counts.size() || h.counts[i] > h.counts[best]) best = i;
    }
    if (best == h.counts.size()) throw AnalysisError("car: histogram does not cover zero delay");
    const double center = h.bin_center_fs(best);
    const double half_w = 0.5 * static_cast<double>(opt.window_fs);

    const auto window_sum = [&](double c) {
        if (c - half_w < static_cast<double>(h.t_min_fs) || c + half_w > static_cast<double>(h.t_max_fs()))
            throw AnalysisError("car: histogram range too small for the requested peaks");
        const auto first = static_cast<std::int64_t>(std::ceil((c - half_w - h.bin_center_fs(0)) / bw));
        std::uint64_t sum = 0;
        for (auto i = std::max<std::int64_t>(first, 0); i < static_cast<std::int64_t>(h.counts.size()); ++i) {
            const double bc = h.bin_center_fs(static_cast<std::size_t>(i));
            if (bc < c - half_w) continue;
            if (bc >= c + half_w) break;
            sum += h.counts[static_cast<std::size_t>(i)];
        }
        return sum;
    };

    CarReport r;
    r.window_fs = opt.window_fs;
    r.center_fs = static_cast<std::int64_t>(std::llround(center));
    r.c_counts = window_sum(center);
    for (int k = opt.exclude_center_neighbors + 1; k <= opt.exclude_center_neighbors + opt.n_peaks; ++k) {
        const double off = static_cast<double>(k) * static_cast<double>(opt.period_fs);
        r.a_total_counts += window_sum(center - off) + window_sum(center + off);
        r.n_accidental_peaks_used += 2;
    }
    r.a_mean_counts = static_cast<double>(r.a_total_counts) / r.n_accidental_peaks_used;

    if (r.a_total_counts == 0) {
        r.car = std::numeric_limits<double>::infinity();
        r.car_sigma = std::numeric_limits<double>::infinity();
        r.car_infinite = true;
    } else {
        r.car = static_cast<double>(r.c_counts) / r.a_mean_counts;
        const double inv_a = 1.0 / static_cast<double>(r.a_total_counts);
        // With no center counts, the uncertainty of a single count is used.
        r.car_sigma = r.c_counts > 0 ? r.car * std::sqrt(1.0 / static_cast<double>(r.c_counts) + inv_a)
                                     : 1.0 / r.a_mean_counts;
    }
    if (r.car > 0.0) {
        const auto fv = fidelity_visibility(r.car);
        r.fidelity_bound = fv.fidelity;
        r.visibility_bound = fv.visibility;
        r.passes_classical = fv.passes_classical;
        r.passes_werner = fv.passes_werner;
        r.passes_nonlocality = fv.passes_nonlocality;
    } else {
        r.fidelity_bound = 0.0;
        r.visibility_bound = -1.0;
    }
    return r;
}

double loss_estimate(double coincidence_rate_hz, double singles_rate_hz) {
    if (!(coincidence_rate_hz > 0.0) || !(singles_rate_hz > 0.0)) throw AnalysisError("loss: rates must be positive");
    if (coincidence_rate_hz > singles_rate_hz) throw AnalysisError("nonphysical rates");
    return -10.0 * std::log10(coincidence_rate_hz / singles_rate_hz);
}

JitterStats jitter_stats(const ClockPhaseSeries& s, double window_s) {
    if (s.time_s.size() != s.offset_fs.size()) throw AnalysisError("jitter: series length mismatch");
    if (s.size() < 10) throw AnalysisError("jitter: need at least 10 samples");
    if (!(window_s > 0.0)) throw AnalysisError("jitter: window must be positive");

    JitterStats st;
    const auto [mn, mx] = std::minmax_element(s.offset_fs.begin(), s.offset_fs.end());
    st.peak_to_peak_fs = *mx - *mn;

    struct Acc {
        std::size_t n = 0;
        double mean = 0.0;
        double m2 = 0.0;
    };
    std::vector<Acc> windows;
    const double t0 = s.time_s.front();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto w = static_cast<std::size_t>(std::floor((s.time_s[i] - t0) / window_s));
        if (w >= windows.size()) windows.resize(w + 1);
        Acc& a = windows[w];
        ++a.n;
        const double d = s.offset_fs[i] - a.mean;
        a.mean += d / static_cast<double>(a.n);
        a.m2 += d * (s.offset_fs[i] - a.mean);
    }
    std::size_t fullest = 0;
    for (const auto& a : windows) fullest = std::max(fullest, a.n);
    // Windows with under half the typical population (the trailing partial
    // window, gaps) are left out.
    std::vector<double> sds;
    double lo = 0.0, hi = 0.0;
    for (const auto& a : windows) {
        if (a.n < 2 || 2 * a.n < fullest) continue;
        sds.push_back(std::sqrt(a.m2 / static_cast<double>(a.n - 1)));
        if (sds.size() == 1) lo = hi = a.mean;
        lo = std::min(lo, a.mean);
        hi = std::max(hi, a.mean);
    }
    if (sds.empty()) throw AnalysisError("jitter: no window holds two samples");
    std::sort(sds.begin(), sds.end());
    const std::size_t m = sds.size();
    st.stdev_fs = m % 2 ? sds[m / 2] : 0.5 * (sds[m / 2 - 1] + sds[m / 2]);
    st.drift_fs_over_span = hi - lo;
    st.windows = m;
    return st;
}

double analytic_car_oracle(double mu, double eta1, double eta2, double n1, double n2, double f) {
    if (!(mu >= 0.0) || !(eta1 >= 0.0 && eta1 <= 1.0) || !(eta2 >= 0.0 && eta2 <= 1.0) || !(n1 >= 0.0) ||
        !(n2 >= 0.0) || !(f >= 0.0 && f <= 1.0))
        throw AnalysisError("oracle: parameter out of range");
    const double a = (mu * eta1 + n1) * (mu * eta2 + n2);
    if (a == 0.0) return std::numeric_limits<double>::infinity();
    return (f * mu * eta1 * eta2 + a) / a;
}

double solve_noise_for_car(double mu, double eta1, double eta2, double f, double target) {
    const auto car = [&](double n) { return analytic_car_oracle(mu, eta1, eta2, n, n, f); };
    if (!(target > 1.0)) throw AnalysisError("calibration: target CAR must exceed 1");
    if (car(0.0) < target) throw AnalysisError("calibration: target CAR unreachable even without noise");
    double hi = 1e-12;
    while (car(hi) > target) {
        hi *= 2.0;
        if (hi > 1e6) throw AnalysisError("calibration: no bracket");
    }
    return bisect_decreasing(car, 0.0, hi, target);
}

namespace {

double phi_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double phi_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
// Antiderivative of the standard normal CDF.
double phi_integral(double z) { return z * phi_cdf(z) + phi_pdf(z); }

// Periods that can bring two profiles of the given half extents into a window.
int shift_span(double extent_fs, double period_fs) {
    return static_cast<int>(std::ceil(extent_fs / period_fs)) + 1;
}

}  // namespace

double window_capture_gauss_gauss(double sigma_fs, double window_fs) {
    if (sigma_fs <= 0.0) return 1.0;
    return std::erf(0.5 * window_fs / (sigma_fs * std::numbers::sqrt2));
}

double window_capture_gauss_uniform(double sigma_fs, double width_fs, double window_fs, double period_fs) {
    if (!(width_fs > 0.0)) throw AnalysisError("capture: uniform width must be positive");
    const double s = std::max(sigma_fs, 1.0);
    const double c = 0.5 * window_fs;
    const int span = shift_span(0.5 * width_fs + 10.0 * s + c, period_fs);
    double total = 0.0;
    for (int m = -span; m <= span; ++m) {
        const double a = m * period_fs - 0.5 * width_fs;
        const double b = m * period_fs + 0.5 * width_fs;
        // (1/G) int_a^b [Phi((v + c)/s) - Phi((v - c)/s)] dv
        total += s * (phi_integral((b + c) / s) - phi_integral((a + c) / s) - phi_integral((b - c) / s) +
                      phi_integral((a - c) / s));
    }
    return total / width_fs;
}

double window_capture_uniform_uniform(double g1, double g2, double window_fs, double period_fs) {
    if (!(g1 > 0.0) || !(g2 > 0.0)) throw AnalysisError("capture: uniform width must be positive");
    // Density of u1 - u2: overlap length of the two boxes over g1 g2.
    const auto density = [&](double d) {
        const double lo = std::max(-0.5 * g1, d - 0.5 * g2);
        const double hi = std::min(0.5 * g1, d + 0.5 * g2);
        return std::max(0.0, hi - lo) / (g1 * g2);
    };
    const double knots[] = {-0.5 * (g1 + g2), -0.5 * std::abs(g1 - g2), 0.5 * std::abs(g1 - g2), 0.5 * (g1 + g2)};
    const auto integrate = [&](double lo, double hi) {
        std::vector<double> pts{lo};
        for (double k : knots)
            if (k > lo && k < hi) pts.push_back(k);
        pts.push_back(hi);
        double acc = 0.0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            acc += 0.5 * (density(pts[i - 1]) + density(pts[i])) * (pts[i] - pts[i - 1]);
        return acc;
    };
    const int span = shift_span(0.5 * (g1 + g2) + window_fs, period_fs);
    double total = 0.0;
    for (int m = -span; m <= span; ++m) total += integrate(m * period_fs - 0.5 * window_fs, m * period_fs + 0.5 * window_fs);
    return total;
}

CarPrediction predict_car(const CarModel& m) {
    const double w = m.window_fs;
    const double T = m.period_fs;
    const double p1 = m.mu * m.arm1.eta;
    const double p2 = m.mu * m.arm2.eta;

    CarPrediction out;
    out.true_capture = window_capture_gauss_gauss(m.true_sigma_fs, w);
    const double f_pp = window_capture_gauss_gauss(std::hypot(m.arm1.pair_sigma_fs, m.arm2.pair_sigma_fs), w);

    double a = p1 * p2 * f_pp;
    for (const auto& n : m.arm2.noise)
        if (n.per_slot > 0.0) a += p1 * n.per_slot * window_capture_gauss_uniform(m.arm1.pair_sigma_fs, n.width_fs, w, T);
    for (const auto& n : m.arm1.noise)
        if (n.per_slot > 0.0) a += n.per_slot * p2 * window_capture_gauss_uniform(m.arm2.pair_sigma_fs, n.width_fs, w, T);
    for (const auto& n1 : m.arm1.noise)
        for (const auto& n2 : m.arm2.noise)
            if (n1.per_slot > 0.0 && n2.per_slot > 0.0)
                a += n1.per_slot * n2.per_slot * window_capture_uniform_uniform(n1.width_fs, n2.width_fs, w, T);

    out.a_per_slot = a;
    out.c_per_slot = out.true_capture * m.mu * m.arm1.eta * m.arm2.eta + a +
                     (m.multi_pair_factor - 1.0) * p1 * p2 * f_pp;
    out.car = a > 0.0 ? out.c_per_slot / a : std::numeric_limits<double>::infinity();
    return out;
}

}  // namespace picosync
