#include "picosync/pulsechain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace picosync {

void Waveform::validate() const {
    if (!(dt_fs > 0.0) || !std::isfinite(dt_fs)) throw PulseError("waveform: dt_fs must be positive");
    if (samples.size() < 2) throw PulseError("waveform: need at least 2 samples");
    if (!std::isfinite(t0_fs)) throw PulseError("waveform: t0 not finite");
    for (double v : samples)
        if (!std::isfinite(v)) throw PulseError("waveform: non-finite sample");
}

double Waveform::peak() const {
    if (samples.empty()) throw PulseError("waveform: empty");
    return *std::max_element(samples.begin(), samples.end());
}

namespace {

// A logic signal as alternating transition times starting from `initial`.
struct LogicTrace {
    bool initial = false;
    std::vector<double> edges;  // sorted

    bool state_at(double t) const {
        auto n = std::upper_bound(edges.begin(), edges.end(), t) - edges.begin();
        return initial ^ (n % 2 == 1);
    }
};

// Time spent high in (-inf, t], relative to a reference far to the left.
double high_time_until(const LogicTrace& s, double t, double t_ref) {
    double acc = 0.0;
    bool state = s.initial;
    double from = t_ref;
    for (double e : s.edges) {
        if (e >= t) break;
        if (state) acc += e - from;
        from = e;
        state = !state;
    }
    if (state && t > from) acc += t - from;
    return acc;
}

// Renders a logic trace convolved with a box of width `ramp`, so every
// transition becomes a linear edge of full duration `ramp` centered on it.
Waveform render(const LogicTrace& s, double high, double ramp, double dt, double t0, std::size_t n) {
    Waveform out{dt, t0, std::vector<double>(n, 0.0)};
    const double t_ref = std::min(t0 - ramp, s.edges.empty() ? t0 - ramp : s.edges.front() - ramp);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = out.time_at(i);
        const double lo = t - 0.5 * ramp;
        const double hi = t + 0.5 * ramp;
        const double frac = (high_time_until(s, hi, t_ref) - high_time_until(s, lo, t_ref)) / ramp;
        out.samples[i] = high * std::clamp(frac, 0.0, 1.0);
    }
    return out;
}

LogicTrace threshold_crossings(const Waveform& w, double threshold) {
    LogicTrace s;
    s.initial = w.samples.front() > threshold;
    bool state = s.initial;
    for (std::size_t i = 1; i < w.size(); ++i) {
        const bool now = w.samples[i] > threshold;
        if (now == state) continue;
        const double a = w.samples[i - 1];
        const double b = w.samples[i];
        const double frac = (threshold - a) / (b - a);
        s.edges.push_back(w.time_at(i - 1) + frac * w.dt_fs);
        state = now;
    }
    return s;
}

LogicTrace shifted(const LogicTrace& s, double d, bool invert) {
    LogicTrace out{s.initial != invert, s.edges};
    for (double& e : out.edges) e += d;
    return out;
}

// Intervals where both traces are high.
std::vector<std::pair<double, double>> and_intervals(const LogicTrace& a, const LogicTrace& b) {
    std::vector<double> cuts;
    cuts.reserve(a.edges.size() + b.edges.size());
    std::merge(a.edges.begin(), a.edges.end(), b.edges.begin(), b.edges.end(), std::back_inserter(cuts));
    std::vector<std::pair<double, double>> out;
    const double inf = std::numeric_limits<double>::infinity();
    double from = -inf;
    bool prev = a.initial && b.initial;
    for (double c : cuts) {
        const bool now = a.state_at(c) && b.state_at(c);
        if (now == prev) continue;
        if (now) from = c;
        else out.emplace_back(from, c);
        prev = now;
    }
    if (prev) out.emplace_back(from, inf);
    return out;
}

}  // namespace

Waveform rectangular_pulse(double dt_fs, double t0_fs, std::size_t n, double start_fs, double width_fs,
                           double amplitude, double edge_fs) {
    LogicTrace s{false, {start_fs, start_fs + width_fs}};
    auto w = render(s, amplitude, std::max(edge_fs, dt_fs * 1e-6), dt_fs, t0_fs, n);
    w.validate();
    return w;
}

Waveform gaussian_pulse(double dt_fs, double t0_fs, std::size_t n, double center_fs, double sigma_fs,
                        double amplitude, double baseline) {
    Waveform w{dt_fs, t0_fs, std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const double x = (w.time_at(i) - center_fs) / sigma_fs;
        w.samples[i] = baseline + amplitude * std::exp(-0.5 * x * x);
    }
    w.validate();
    return w;
}

Waveform comparator(const Waveform& w, double threshold_v, double out_high_v, double edge_time_fs) {
    w.validate();
    if (!(edge_time_fs > 0.0)) throw PulseError("comparator: edge time must be positive");
    return render(threshold_crossings(w, threshold_v), out_high_v, linear_edge_full_fs(edge_time_fs), w.dt_fs,
                  w.t0_fs, w.size());
}

void PicoshortConfig::validate() const {
    for (double d : {delay_a_fs, delay_b_fs})
        if (!(d >= 0.0 && d <= kDelayRangeFs)) throw PulseError("picoshort: delay outside [0, 100 ps]");
    if (!(edge_time_fs > 0.0)) throw PulseError("picoshort: edge time must be positive");
    if (!(out_high_v > 0.0)) throw PulseError("picoshort: output level must be positive");
}

double PicoshortConfig::quantize_delay(double delay_fs) {
    return std::round(delay_fs / kDelayStepFs) * kDelayStepFs;
}

Waveform picoshort(const Waveform& input, const PicoshortConfig& cfg) {
    input.validate();
    cfg.validate();
    const LogicTrace a = threshold_crossings(input, cfg.threshold_v);
    bool rising = false;
    for (std::size_t i = 0; i < a.edges.size(); ++i)
        if (a.initial ^ (i % 2 == 0)) rising = true;
    if (!rising) throw PulseError("no edge");

    const double da = PicoshortConfig::quantize_delay(cfg.delay_a_fs);
    const double db = PicoshortConfig::quantize_delay(cfg.delay_b_fs);
    const LogicTrace pos = shifted(a, da, false);
    const LogicTrace neg = shifted(a, db, true);

    // The gate cannot output a pulse shorter than one full rise plus fall;
    // any nonzero overlap is stretched to that width.
    LogicTrace gate;
    for (auto [lo, hi] : and_intervals(pos, neg)) {
        if (!(hi > lo)) continue;
        if (std::isinf(lo) || std::isinf(hi)) {
            if (std::isinf(lo)) gate.initial = true;
            else gate.edges.push_back(lo);
            if (!std::isinf(hi)) gate.edges.push_back(hi);
            continue;
        }
        const double width = std::max(hi - lo, cfg.min_pulse_fs());
        const double mid = 0.5 * (lo + hi);
        const double start = std::max(mid - 0.5 * width, gate.edges.empty() ? lo : gate.edges.back());
        gate.edges.push_back(start);
        gate.edges.push_back(start + width);
    }
    return render(gate, cfg.out_high_v, linear_edge_full_fs(cfg.edge_time_fs), input.dt_fs, input.t0_fs,
                  input.size());
}

void PicoampConfig::validate() const {
    if (!(gain_db_lowfreq >= 0.0) || !std::isfinite(gain_db_lowfreq)) throw PulseError("picoamp: gain must be >= 0 dB");
    if (!(bandwidth_3db_hz > 0.0)) throw PulseError("picoamp: bandwidth must be positive");
    if (filter_order < 1) throw PulseError("picoamp: filter order must be >= 1");
    if (resonance_enabled && !(resonance_hz > 0.0 && resonance_q > 0.0))
        throw PulseError("picoamp: invalid resonance");
}

namespace {

// Single real pole as a causal FIR: the sampled exponential impulse response,
// truncated and normalized to unit DC gain.
std::vector<double> pole_kernel(double cutoff_hz, double dt_fs) {
    const double tau_fs = 1e15 / (2.0 * std::numbers::pi * cutoff_hz);
    const double a = std::exp(-dt_fs / tau_fs);
    std::vector<double> h;
    double v = 1.0 - a;
    while (v > 1e-14 * (1.0 - a) || h.size() < 2) {
        h.push_back(v);
        v *= a;
    }
    double sum = 0.0;
    for (double x : h) sum += x;
    for (double& x : h) x /= sum;
    return h;
}

std::vector<double> convolve_causal(const std::vector<double>& x, const std::vector<double>& h) {
    std::vector<double> y(x.size(), 0.0);
    for (std::size_t n = 0; n < x.size(); ++n) {
        const std::size_t kmax = std::min(h.size(), n + 1);
        double acc = 0.0;
        for (std::size_t k = 0; k < kmax; ++k) acc += h[k] * x[n - k];
        y[n] = acc;
    }
    return y;
}

// RBJ peaking biquad; negative gain gives a notch-like dip.
std::vector<double> peaking_biquad(const std::vector<double>& x, double f0, double q, double gain_db, double fs) {
    const double amp = std::pow(10.0, gain_db / 40.0);
    const double w0 = 2.0 * std::numbers::pi * f0 / fs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double b0 = 1 + alpha * amp, b1 = -2 * std::cos(w0), b2 = 1 - alpha * amp;
    const double a0 = 1 + alpha / amp, a1 = -2 * std::cos(w0), a2 = 1 - alpha / amp;
    std::vector<double> y(x.size());
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double v = (b0 * x[n] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2) / a0;
        x2 = x1;
        x1 = x[n];
        y2 = y1;
        y1 = v;
        y[n] = v;
    }
    return y;
}

}  // namespace

Waveform picoamp(const Waveform& w, const PicoampConfig& cfg) {
    w.validate();
    cfg.validate();
    const double fs_hz = 1e15 / w.dt_fs;
    const double gain = std::pow(10.0, cfg.gain_db_lowfreq / 20.0);
    Waveform out = w;
    if (std::isfinite(cfg.bandwidth_3db_hz)) {
        if (fs_hz / 2.0 <= 3.0 * cfg.bandwidth_3db_hz) throw PulseError("picoamp: sampling too coarse for bandwidth");
        const int n = cfg.filter_order;
        const double pole_hz = cfg.bandwidth_3db_hz / std::sqrt(std::pow(2.0, 1.0 / n) - 1.0);
        const auto h = pole_kernel(pole_hz, w.dt_fs);
        for (int i = 0; i < n; ++i) out.samples = convolve_causal(out.samples, h);
    }
    if (cfg.resonance_enabled) {
        if (fs_hz / 2.0 <= cfg.resonance_hz) throw PulseError("picoamp: resonance above Nyquist");
        out.samples = peaking_biquad(out.samples, cfg.resonance_hz, cfg.resonance_q, cfg.resonance_gain_db, fs_hz);
    }
    for (double& v : out.samples) v *= gain;
    return out;
}

void MzmConfig::validate() const {
    if (!(v_pi > 0.0)) throw PulseError("mzm: v_pi must be positive");
    if (!(static_extinction_db > 0.0)) throw PulseError("mzm: extinction must be positive");
    if (!(input_power_mw >= 0.0)) throw PulseError("mzm: input power must be >= 0");
}

Waveform mzm_transfer(const Waveform& v, const MzmConfig& cfg) {
    v.validate();
    cfg.validate();
    const double eps = std::pow(10.0, -cfg.static_extinction_db / 10.0);
    Waveform out = v;
    for (double& x : out.samples) {
        const double s = std::sin(std::numbers::pi * (x + cfg.bias) / (2.0 * cfg.v_pi));
        x = cfg.input_power_mw * ((1.0 - eps) * s * s + eps);
    }
    return out;
}

namespace {

std::size_t peak_index(const Waveform& w) {
    w.validate();
    const auto [mn, mx] = std::minmax_element(w.samples.begin(), w.samples.end());
    if (!(*mx > *mn) || !(*mx > 0.0)) throw PulseError("no pulse");
    return static_cast<std::size_t>(mx - w.samples.begin());
}

}  // namespace

double fwhm(const Waveform& w) {
    const std::size_t ip = peak_index(w);
    const double half = 0.5 * w.samples[ip];
    std::size_t l = ip;
    while (l > 0 && w.samples[l - 1] >= half) --l;
    std::size_t r = ip;
    while (r + 1 < w.size() && w.samples[r + 1] >= half) ++r;
    if (l == 0 || r + 1 == w.size()) throw PulseError("pulse not resolved within waveform");
    const auto cross = [&](std::size_t below, std::size_t above) {
        const double a = w.samples[below];
        const double b = w.samples[above];
        const double frac = (half - a) / (b - a);
        return w.time_at(below) + frac * (w.time_at(above) - w.time_at(below));
    };
    return cross(r + 1, r) - cross(l - 1, l);
}

double extinction_db(const Waveform& w) {
    const std::size_t ip = peak_index(w);
    const double width = fwhm(w);
    const double tp = w.time_at(ip);
    std::vector<double> outside;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (std::abs(w.time_at(i) - tp) > 3.0 * width) outside.push_back(w.samples[i]);
    if (outside.empty()) throw PulseError("extinction: no baseline samples");
    auto mid = outside.begin() + static_cast<std::ptrdiff_t>(outside.size() / 2);
    std::nth_element(outside.begin(), mid, outside.end());
    double base = *mid;
    if (outside.size() % 2 == 0) {
        const double lower = *std::max_element(outside.begin(), mid);
        base = 0.5 * (base + lower);
    }
    if (!(base > 0.0)) throw PulseError("extinction: baseline not positive");
    return 10.0 * std::log10(w.samples[ip] / base);
}

PulseChainResult run_pulse_chain(const PulseChainConfig& cfg) {
    if (!(cfg.dt_fs > 0.0) || !(cfg.span_fs > cfg.dt_fs)) throw PulseError("pulse chain: bad sampling");
    const auto n = static_cast<std::size_t>(cfg.span_fs / cfg.dt_fs);
    PulseChainResult r;
    r.input = rectangular_pulse(cfg.dt_fs, 0.0, n, cfg.input_start_fs, cfg.input_width_fs, cfg.input_amplitude_v,
                                cfg.input_edge_fs);
    r.shortened = picoshort(r.input, cfg.picoshort);
    r.shortened_fwhm_fs = fwhm(r.shortened);

    PicoampConfig amp = cfg.picoamp;
    if (cfg.drive_amplitude_v > 0.0) {
        amp.gain_db_lowfreq = 0.0;
        const double unity_peak = picoamp(r.shortened, amp).peak();
        amp.gain_db_lowfreq = 20.0 * std::log10(cfg.drive_amplitude_v / unity_peak);
    }
    r.applied_gain_db = amp.gain_db_lowfreq;
    r.amplified = picoamp(r.shortened, amp);
    r.amplified_fwhm_fs = fwhm(r.amplified);

    r.optical = mzm_transfer(r.amplified, cfg.mzm);
    r.optical_fwhm_fs = fwhm(r.optical);
    r.optical_extinction_db = extinction_db(r.optical);
    return r;
}

}  // namespace picosync
