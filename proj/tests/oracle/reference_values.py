"""Independent reference values for the C++ tests.

Computed with numpy/scipy by direct numerical integration or dense
simulation, sharing no code with the library. Run:
    python3 tests/oracle/reference_values.py
"""
import numpy as np
from scipy import integrate, special, stats

FWHM = 2.0 * np.sqrt(2.0 * np.log(2.0))


def capture_gauss_uniform(sigma, width, window, period, shifts=3):
    # P(|x - u - mT| <= w/2) summed over m, x ~ N(0, sigma), u ~ U(-G/2, G/2)
    def inner(u):
        tot = 0.0
        for m in range(-shifts, shifts + 1):
            c = u + m * period
            tot += stats.norm.cdf((c + window / 2) / sigma) - stats.norm.cdf((c - window / 2) / sigma)
        return tot / width
    pts = np.linspace(-width / 2, width / 2, 41)
    val, _ = integrate.quad(inner, -width / 2, width / 2, points=pts[1:-1], limit=400, epsabs=1e-14)
    return val


def capture_uniform_uniform_mc(g1, g2, window, period, n=20_000_000, seed=5):
    rng = np.random.default_rng(seed)
    d = rng.uniform(-g1 / 2, g1 / 2, n) - rng.uniform(-g2 / 2, g2 / 2, n)
    d = (d + period / 2) % period - period / 2
    return np.mean(np.abs(d) <= window / 2)


def capture_uniform_uniform(g1, g2, window, period):
    def dens(d):
        lo = max(-g1 / 2, d - g2 / 2)
        hi = min(g1 / 2, d + g2 / 2)
        return max(0.0, hi - lo) / (g1 * g2)
    tot = 0.0
    for m in range(-3, 4):
        a, b = m * period - window / 2, m * period + window / 2
        v, _ = integrate.quad(dens, a, b, limit=200, epsabs=1e-15)
        tot += v
    return tot


def fwhm_of(t, y):
    i = int(np.argmax(y))
    half = y[i] / 2
    l = i
    while y[l - 1] >= half:
        l -= 1
    r = i
    while y[r + 1] >= half:
        r += 1
    tl = np.interp(half, [y[l - 1], y[l]], [t[l - 1], t[l]])
    tr = np.interp(half, [y[r + 1], y[r]], [t[r + 1], t[r]])
    return tr - tl


def exgauss_fwhm(fwhm_in_ps, f3db_hz):
    # Gaussian pulse through a continuous single-pole low-pass (exact exGaussian).
    sigma = fwhm_in_ps / FWHM
    tau = 1e12 / (2 * np.pi * f3db_hz)
    t = np.linspace(-200, 400, 600_001)
    lam = 1 / tau
    y = lam / 2 * np.exp(lam / 2 * (lam * sigma**2 - 2 * t)) * special.erfc((lam * sigma**2 - t) / (np.sqrt(2) * sigma))
    return fwhm_of(t, y)


def chain(dt_ps=0.05):
    # 25 ps trapezoid (linear 12.5 ps edges), continuous single pole at 10 GHz,
    # levelled to 3.76 V, then sin^2 MZM with v_pi = 4 V and 28 dB static ER.
    ramp = 10.0 / 0.8
    width = 2 * ramp
    t = np.arange(-200, 800, dt_ps)
    def high_time(x):  # time high in (-inf, x] of a logic pulse on [0, width]
        return np.clip(x, 0, width)
    logic = (high_time(t + ramp / 2) - high_time(t - ramp / 2)) / ramp
    tau = 1e12 / (2 * np.pi * 10e9)
    k = np.exp(-np.arange(0, 40 * tau, dt_ps) / tau)
    k /= k.sum()
    amp = np.convolve(logic, k)[: len(t)]
    amp *= 3.76 / amp.max()
    eps = 10 ** (-2.8)
    opt = (1 - eps) * np.sin(np.pi * amp / 8.0) ** 2 + eps
    return fwhm_of(t, logic), fwhm_of(t, amp), fwhm_of(t, opt)


if __name__ == "__main__":
    print("gauss_uniform(40 ps, 2.5 ns, 200 ps, 5 ns) =", repr(capture_gauss_uniform(40e3, 2.5e6, 200e3, 5e6)))
    print("gauss_uniform(60 ps, 0.3 ns, 200 ps, 5 ns) =", repr(capture_gauss_uniform(60e3, 0.3e6, 200e3, 5e6)))
    print("uniform_uniform(2.5 ns, 2.5 ns) =", repr(capture_uniform_uniform(2.5e6, 2.5e6, 200e3, 5e6)))
    print("uniform_uniform(2.5 ns, 1.0 ns) =", repr(capture_uniform_uniform(2.5e6, 1.0e6, 200e3, 5e6)))
    print("uniform_uniform(4.9 ns, 4.0 ns) =", repr(capture_uniform_uniform(4.9e6, 4.0e6, 200e3, 5e6)),
          "mc", capture_uniform_uniform_mc(4.9e6, 4.0e6, 200e3, 5e6))
    print("exgauss fwhm(25 ps, 10 GHz) =", repr(exgauss_fwhm(25.0, 10e9)))
    print("chain fwhm (logic, amplified, optical) =", chain())
