#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace picosync {

class PulseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniformly sampled real waveform (V for electrical, mW for optical).
struct Waveform {
    double dt_fs = 500.0;
    double t0_fs = 0.0;
    std::vector<double> samples;

    void validate() const;
    std::size_t size() const { return samples.size(); }
    double time_at(std::size_t i) const { return t0_fs + dt_fs * static_cast<double>(i); }
    double peak() const;
};

/// Rectangular pulse with linear edges of full duration `edge_fs`,
/// switching on at `start_fs` (edge midpoint) for `width_fs`.
Waveform rectangular_pulse(double dt_fs, double t0_fs, std::size_t n, double start_fs, double width_fs,
                           double amplitude, double edge_fs);

Waveform gaussian_pulse(double dt_fs, double t0_fs, std::size_t n, double center_fs, double sigma_fs,
                        double amplitude, double baseline = 0.0);

/// Full 0-100% duration of a linear edge whose 10-90% time is `edge_time_fs`.
inline double linear_edge_full_fs(double edge_time_fs) { return edge_time_fs / 0.8; }

/// Threshold discriminator with linear output edges (10-90% = edge_time_fs).
Waveform comparator(const Waveform& w, double threshold_v, double out_high_v, double edge_time_fs);

/// Comparator -> complementary logic pair -> two delay lines -> AND gate.
struct PicoshortConfig {
    double threshold_v = 0.2;
    double delay_a_fs = 0.0;
    double delay_b_fs = 3'000.0;
    double edge_time_fs = 10'000.0;  // AND gate 10-90% rise/fall
    double out_high_v = 0.569;       // single-ended equivalent of 270 mV + 299 mV sides

    static constexpr double kDelayStepFs = 3'000.0;
    static constexpr double kDelayRangeFs = 100'000.0;

    void validate() const;
    /// Delay as realized by the programmable line (nearest 3 ps step).
    static double quantize_delay(double delay_fs);
    /// Shortest pulse the gate output can complete: full rise plus full fall.
    double min_pulse_fs() const { return 2.0 * linear_edge_full_fs(edge_time_fs); }
};

Waveform picoshort(const Waveform& input, const PicoshortConfig& cfg);

/// Band-limited differential-to-single-ended amplifier.
struct PicoampConfig {
    double gain_db_lowfreq = 30.0;  // voltage gain
    double bandwidth_3db_hz = 10e9;  // +inf disables filtering
    int filter_order = 1;            // identical cascaded poles, overall -3 dB at bandwidth
    // Optional single resonance (peaking/notch biquad), off by default.
    bool resonance_enabled = false;
    double resonance_hz = 6e9;
    double resonance_q = 2.0;
    double resonance_gain_db = -3.0;

    void validate() const;
};

Waveform picoamp(const Waveform& w, const PicoampConfig& cfg);

struct MzmConfig {
    double v_pi = 4.0;
    double bias = 0.0;  // 0 = null (extinction) bias
    double static_extinction_db = 28.0;
    double input_power_mw = 1.0;

    void validate() const;
};

Waveform mzm_transfer(const Waveform& v, const MzmConfig& cfg);

/// Full width at half maximum, interpolating the half-max crossings (fs).
double fwhm(const Waveform& w);

/// 10 log10(max / baseline), baseline = median of samples farther than
/// 3 FWHM from the peak.
double extinction_db(const Waveform& w);

/// AnyClock-like drive through the whole chain.
struct PulseChainConfig {
    double dt_fs = 500.0;
    double span_fs = 8'000'000.0;
    double input_start_fs = 1'000'000.0;
    double input_width_fs = 2'500'000.0;
    double input_amplitude_v = 0.8;
    double input_edge_fs = 100'000.0;
    PicoshortConfig picoshort;
    PicoampConfig picoamp;
    // The mezzanine sets the amplifier gain; when > 0 the gain is chosen so
    // that the drive peak equals this amplitude.
    double drive_amplitude_v = 3.76;
    MzmConfig mzm;
};

struct PulseChainResult {
    Waveform input;
    Waveform shortened;
    Waveform amplified;
    Waveform optical;
    double applied_gain_db = 0.0;
    double shortened_fwhm_fs = 0.0;
    double amplified_fwhm_fs = 0.0;
    double optical_fwhm_fs = 0.0;
    double optical_extinction_db = 0.0;
};

PulseChainResult run_pulse_chain(const PulseChainConfig& cfg);

}  // namespace picosync
