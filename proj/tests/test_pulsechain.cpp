#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "picosync/pulsechain.hpp"
#include "picosync/timebase.hpp"

using namespace picosync;

namespace {

// Sampled at 0.5 ps over 8 ns with a 0.8 V, 2.5 ns drive starting at 1 ns.
Waveform drive() { return rectangular_pulse(500.0, 0.0, 16000, 1'000'000.0, 2'500'000.0, 0.8, 100'000.0); }

Waveform shortened(double delay_a_ps, double delay_b_ps) {
    PicoshortConfig c;
    c.delay_a_fs = delay_a_ps * 1e3;
    c.delay_b_fs = delay_b_ps * 1e3;
    return picoshort(drive(), c);
}

// Total time a waveform spends above a level.
double time_above(const Waveform& w, double level) {
    std::size_t n = 0;
    for (double v : w.samples) n += v > level;
    return static_cast<double>(n) * w.dt_fs;
}

}  // namespace

TEST_CASE("waveform validation") {
    Waveform w{500.0, 0.0, {1.0}};
    CHECK_THROWS_AS(w.validate(), PulseError);
    w.samples = {1.0, NAN};
    CHECK_THROWS_AS(w.validate(), PulseError);
    w = Waveform{0.0, 0.0, {1.0, 2.0}};
    CHECK_THROWS_AS(w.validate(), PulseError);
}

TEST_CASE("comparator on a constant input above threshold") {
    Waveform w{500.0, 0.0, std::vector<double>(1000, 0.7)};
    const auto out = comparator(w, 0.2, 1.0, 10'000.0);
    for (double v : out.samples) REQUIRE(v == 1.0);
    const auto low = comparator(w, 0.9, 1.0, 10'000.0);
    for (double v : low.samples) REQUIRE(v == 0.0);
}

TEST_CASE("comparator reproduces a 2.5 ns pulse") {
    const auto out = comparator(drive(), 0.4, 1.0, 10'000.0);
    CHECK(std::abs(time_above(out, 0.5) - 2'500'000.0) <= 500.0);
    CHECK(std::abs(fwhm(out) - 2'500'000.0) <= 500.0);
}

TEST_CASE("comparator turns a sine into a 50 percent square wave") {
    Waveform w{500.0, 0.0, std::vector<double>(40000)};
    for (std::size_t i = 0; i < w.size(); ++i) w.samples[i] = std::sin(2 * std::numbers::pi * w.time_at(i) / 1e6);
    const auto out = comparator(w, 0.0, 1.0, 10'000.0);
    // Threshold-crossing oracle: a sine is positive for exactly half its period.
    const double span = w.dt_fs * static_cast<double>(w.size());
    CHECK(std::abs(time_above(out, 0.5) - 0.5 * span) <= 20 * w.dt_fs);  // one sample per crossing
}

TEST_CASE("comparator is idempotent on digital input") {
    const auto once = comparator(drive(), 0.4, 1.0, 10'000.0);
    const auto twice = comparator(once, 0.5, 1.0, 10'000.0);
    for (std::size_t i = 0; i < once.size(); ++i) REQUIRE(std::abs(once.samples[i] - twice.samples[i]) < 1e-9);
}

TEST_CASE("picoshort pulse width follows the delay difference") {
    CHECK(std::abs(fwhm(shortened(0, 50)) - 50'000.0) <= 3'000.0);
    CHECK(std::abs(fwhm(shortened(12, 87)) - 75'000.0) <= 3'000.0);
}

TEST_CASE("picoshort minimum setting is edge limited near 25 ps") {
    CHECK(std::abs(fwhm(shortened(0, 3)) - 25'000.0) <= 2'000.0);
}

TEST_CASE("picoshort with equal delays gives no pulse") {
    const auto out = shortened(30, 30);
    CHECK(out.peak() < 0.5 * PicoshortConfig{}.out_high_v);
}

TEST_CASE("picoshort FWHM is monotone over the delay grid") {
    double last = 0.0;
    for (int k = 1; k <= 33; ++k) {
        const double w = fwhm(shortened(0, 3.0 * k));
        REQUIRE(w >= last - 1e-6);
        last = w;
    }
}

TEST_CASE("picoshort errors") {
    Waveform flat{500.0, 0.0, std::vector<double>(1000, 0.0)};
    CHECK_THROWS_WITH_AS(picoshort(flat, PicoshortConfig{}), "no edge", PulseError);
    PicoshortConfig c;
    c.delay_b_fs = 120'000;
    CHECK_THROWS_AS(c.validate(), PulseError);
    CHECK(PicoshortConfig::quantize_delay(10'000) == 9'000);
}

TEST_CASE("picoamp DC gain") {
    Waveform w{500.0, 0.0, std::vector<double>(20000, 0.1)};
    const auto out = picoamp(w, PicoampConfig{});
    CHECK(out.samples.back() == doctest::Approx(0.1 * std::pow(10.0, 1.5)).epsilon(0.01));
}

TEST_CASE("picoamp without band limit is a pure gain") {
    PicoampConfig c;
    c.bandwidth_3db_hz = std::numeric_limits<double>::infinity();
    const auto in = drive();
    const auto out = picoamp(in, c);
    for (std::size_t i = 0; i < in.size(); ++i)
        REQUIRE(out.samples[i] == doctest::Approx(in.samples[i] * std::pow(10.0, 1.5)).epsilon(1e-3));
}

TEST_CASE("picoamp broadens a 25 ps Gaussian like a single pole") {
    const auto in = gaussian_pulse(500.0, 0.0, 4000, 300'000.0, 25'000.0 / kFwhmPerSigma, 0.1);
    const auto out = picoamp(in, PicoampConfig{});
    // Exact exponentially-modified Gaussian FWHM, see tests/oracle.
    CHECK(fwhm(out) == doctest::Approx(34'350.65).epsilon(0.005));
}

TEST_CASE("picoamp higher order keeps the overall 3 dB point") {
    // Response to a sine at the 3 dB frequency.
    for (int order : {1, 2, 3}) {
        PicoampConfig c;
        c.gain_db_lowfreq = 0.0;
        c.filter_order = order;
        Waveform w{500.0, 0.0, std::vector<double>(40000)};
        for (std::size_t i = 0; i < w.size(); ++i) w.samples[i] = std::sin(2 * std::numbers::pi * 10e9 * w.time_at(i) * 1e-15);
        const auto out = picoamp(w, c);
        double peak = 0.0;
        for (std::size_t i = 20000; i < out.size(); ++i) peak = std::max(peak, std::abs(out.samples[i]));
        CHECK(peak == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.01));
    }
}

TEST_CASE("picoamp is linear") {
    const auto a = drive();
    const auto b = gaussian_pulse(500.0, 0.0, 16000, 2'000'000.0, 30'000.0, 1.0);
    Waveform mix = a;
    for (std::size_t i = 0; i < mix.size(); ++i) mix.samples[i] = 2.0 * a.samples[i] - 0.5 * b.samples[i];
    PicoampConfig c;
    const auto ya = picoamp(a, c), yb = picoamp(b, c), ym = picoamp(mix, c);
    double scale = 0.0;
    for (double v : ym.samples) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < mix.size(); ++i)
        REQUIRE(std::abs(ym.samples[i] - (2.0 * ya.samples[i] - 0.5 * yb.samples[i])) <= 1e-6 * scale);
}

TEST_CASE("picoamp rejects coarse sampling") {
    Waveform w{20'000.0, 0.0, std::vector<double>(100, 0.0)};  // 50 GHz sampling
    CHECK_THROWS_AS(picoamp(w, PicoampConfig{}), PulseError);
}

TEST_CASE("picoamp optional resonance changes the response only when enabled") {
    PicoampConfig c;
    const auto base = picoamp(drive(), c);
    c.resonance_enabled = true;
    const auto res = picoamp(drive(), c);
    double diff = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) diff = std::max(diff, std::abs(base.samples[i] - res.samples[i]));
    CHECK(diff > 1e-3);
    CHECK(res.samples.back() == doctest::Approx(base.samples.back()).epsilon(1e-6));
}

TEST_CASE("MZM transfer end points, bounds and periodicity") {
    MzmConfig m;
    const double eps = std::pow(10.0, -2.8);
    Waveform v{500.0, 0.0, {m.v_pi, 0.0, -m.v_pi, 0.5 * m.v_pi}};
    const auto p = mzm_transfer(v, m);
    CHECK(p.samples[0] == doctest::Approx(1.0).epsilon(eps));
    CHECK(p.samples[1] == doctest::Approx(eps));
    CHECK(p.samples[2] == doctest::Approx(1.0).epsilon(eps));
    CHECK(p.samples[3] == doctest::Approx(0.5 * (1 - eps) + eps));

    Waveform sweep{500.0, 0.0, std::vector<double>(2001)};
    for (std::size_t i = 0; i < sweep.size(); ++i) sweep.samples[i] = -10.0 + 0.01 * static_cast<double>(i);
    Waveform shifted = sweep;
    for (double& x : shifted.samples) x += 2.0 * m.v_pi;
    const auto a = mzm_transfer(sweep, m), b = mzm_transfer(shifted, m);
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a.samples[i] >= eps * (1 - 1e-12));
        REQUIRE(a.samples[i] <= 1.0 + 1e-12);
        REQUIRE(a.samples[i] == doctest::Approx(b.samples[i]).epsilon(1e-9));
    }
}

TEST_CASE("fwhm and extinction metrics") {
    const auto g = gaussian_pulse(500.0, 0.0, 2000, 500'000.0, 10'000.0, 1.0);
    CHECK(std::abs(fwhm(g) - 23'548.2) <= 500.0);
    const auto r = rectangular_pulse(500.0, 0.0, 2000, 300'000.0, 74'000.0, 1.0, 1.0);
    CHECK(std::abs(fwhm(r) - 74'000.0) <= 500.0);
    const auto e = gaussian_pulse(500.0, 0.0, 4000, 1'000'000.0, 10'000.0, 1.0 - std::pow(10.0, -2.8),
                                  std::pow(10.0, -2.8));
    CHECK(extinction_db(e) == doctest::Approx(28.0).epsilon(0.1 / 28.0));
    Waveform flat{500.0, 0.0, std::vector<double>(100, 0.3)};
    CHECK_THROWS_WITH_AS(fwhm(flat), "no pulse", PulseError);
}

TEST_CASE("full chain regression against the convolution oracle") {
    const auto r = run_pulse_chain(PulseChainConfig{});
    CHECK(r.amplified.peak() == doctest::Approx(3.76));
    // tests/oracle/reference_values.py: 25.0, 30.522, 29.129 ps
    CHECK(r.shortened_fwhm_fs == doctest::Approx(25'000.0).epsilon(1e-3));
    CHECK(r.amplified_fwhm_fs == doctest::Approx(30'522.0).epsilon(2e-3));
    CHECK(r.optical_fwhm_fs == doctest::Approx(29'129.4).epsilon(2e-3));
    CHECK(r.optical_extinction_db >= 27.0);
}
