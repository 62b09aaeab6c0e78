#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "picosync/detector.hpp"
#include "picosync/sync.hpp"
#include "picosync/timebase.hpp"

namespace picosync {

class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Histogram of t1 - t2 over [t_min, t_min + bins * width).
struct Histogram {
    std::int64_t bin_width_fs = 10'000;
    std::int64_t t_min_fs = 0;
    std::vector<std::uint64_t> counts;
    std::uint64_t n_pairs_total = 0;

    std::int64_t t_max_fs() const { return t_min_fs + bin_width_fs * static_cast<std::int64_t>(counts.size()); }
    double bin_center_fs(std::size_t i) const {
        return static_cast<double>(t_min_fs) + (static_cast<double>(i) + 0.5) * static_cast<double>(bin_width_fs);
    }
    bool same_binning(const Histogram& o) const {
        return bin_width_fs == o.bin_width_fs && t_min_fs == o.t_min_fs && counts.size() == o.counts.size();
    }
    Histogram& operator+=(const Histogram& o);
};

/// Empty histogram covering [-range, range), range rounded up to whole bins.
Histogram make_histogram(std::int64_t bin_fs, std::int64_t range_fs);

/// All pairwise differences t1 - t2 within the histogram range.
Histogram coincidence_histogram(std::span<const TimeTag> tags1, std::span<const TimeTag> tags2, std::int64_t bin_fs,
                                std::int64_t range_fs, DurationFs period = kDefaultPeriod);

/// Incremental version of coincidence_histogram for chunked streams.
class CoincidenceCounter {
public:
    CoincidenceCounter(std::int64_t bin_fs, std::int64_t range_fs, DurationFs period);

    /// Adds sorted chunks. No later tag of either stream may precede
    /// `watermark`.
    void push(std::span<const TimeTag> tags1, std::span<const TimeTag> tags2, Timestamp watermark);
    void finish();

    const Histogram& histogram() const { return hist_; }

private:
    void settle(__int128 limit);

    Histogram hist_;
    Timebase timebase_;
    __int128 range_;
    std::vector<__int128> pending1_;
    std::vector<__int128> window2_;
    std::size_t window_begin_ = 0;
    __int128 last1_ = std::numeric_limits<std::int64_t>::min();
    __int128 last2_ = std::numeric_limits<std::int64_t>::min();
};

struct FidelityVisibility {
    double fidelity = 0.0;
    double visibility = 0.0;
    bool passes_classical = false;    // car > 2
    bool passes_werner = false;       // visibility > 1/3
    bool passes_nonlocality = false;  // visibility > 1/sqrt(2)
};

FidelityVisibility fidelity_visibility(double car);

struct CarReport {
    std::uint64_t c_counts = 0;
    double a_mean_counts = 0.0;
    std::uint64_t a_total_counts = 0;
    double car = 0.0;
    double car_sigma = 0.0;
    bool car_infinite = false;
    double fidelity_bound = 0.0;
    double visibility_bound = 0.0;
    bool passes_classical = false;
    bool passes_werner = false;
    bool passes_nonlocality = false;
    std::int64_t window_fs = 0;
    std::int64_t center_fs = 0;
    int n_accidental_peaks_used = 0;
};

struct CarOptions {
    std::int64_t window_fs = 200'000;
    std::int64_t period_fs = 5'000'000;
    int n_peaks = 10;
    int exclude_center_neighbors = 0;
};

CarReport car_from_histogram(const Histogram& h, const CarOptions& opt = {});

/// Loss of the other arm in dB from a coincidence and a singles rate.
double loss_estimate(double coincidence_rate_hz, double singles_rate_hz);

struct JitterStats {
    double stdev_fs = 0.0;
    double peak_to_peak_fs = 0.0;
    double drift_fs_over_span = 0.0;
    std::size_t windows = 0;
};

/// Splits the series into consecutive windows of window_s. stdev is the median
/// window standard deviation; drift is the peak-to-peak of the window means.
JitterStats jitter_stats(const ClockPhaseSeries& series, double window_s);

/// Closed-form CAR with all detection windows capturing every accidental:
/// singles s_i = mu eta_i + n_i, A = s1 s2, C = f mu eta1 eta2 + A.
double analytic_car_oracle(double mu, double eta1, double eta2, double noise_per_slot_1, double noise_per_slot_2,
                           double window_capture_fraction);

/// Noise per slot (equal on both arms) giving the target oracle CAR.
double solve_noise_for_car(double mu, double eta1, double eta2, double window_capture_fraction, double target_car);

/// Singles component with a known arrival-time profile within the slot.
struct NoiseComponent {
    double per_slot = 0.0;  // detected counts per slot
    double width_fs = 0.0;  // uniform spread centered on the slot; width = period for unstructured noise
};

struct ArmModel {
    double eta = 0.0;            // end-to-end detection probability of a pair photon
    double pair_sigma_fs = 0.0;  // spread of pair-photon tags around the slot center
    std::vector<NoiseComponent> noise;
};

/// Windowed CAR model with per-component capture fractions.
struct CarModel {
    double mu = 0.0;
    double multi_pair_factor = 1.0;  // E[n(n-1)] / mu^2
    double true_sigma_fs = 0.0;      // spread of t1 - t2 for photons of the same pair
    ArmModel arm1;
    ArmModel arm2;
    double window_fs = 200'000.0;
    double period_fs = 5'000'000.0;
};

struct CarPrediction {
    double c_per_slot = 0.0;
    double a_per_slot = 0.0;
    double car = 0.0;
    double true_capture = 0.0;
};

CarPrediction predict_car(const CarModel& m);

/// Probability that t1 - t2 lies inside a centered window (or one of its
/// period translates, for noise) for the two arrival profiles.
double window_capture_gauss_gauss(double sigma_fs, double window_fs);
double window_capture_gauss_uniform(double sigma_fs, double width_fs, double window_fs, double period_fs);
double window_capture_uniform_uniform(double width1_fs, double width2_fs, double window_fs, double period_fs);

/// Bisection for a monotone decreasing function f on [lo, hi] with f(lo) >=
/// target >= f(hi).
template <class F>
double bisect_decreasing(F f, double lo, double hi, double target, int iterations = 200) {
    for (int i = 0; i < iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (f(mid) > target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace picosync
