#include "picosync/random.hpp"

#include <cmath>
#include <limits>

namespace picosync {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view component) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : component) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(master ^ splitmix64(h));
}

double counter_normal(std::uint64_t seed, std::uint64_t index) {
    const std::uint64_t a = splitmix64(seed ^ splitmix64(2 * index));
    const std::uint64_t b = splitmix64(seed ^ splitmix64(2 * index + 1));
    // 53-bit uniforms in (0, 1]
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t skip_empty_slots(Rng& rng, double p) {
    if (p <= 0.0) {
        return std::numeric_limits<std::uint64_t>::max();
    }
    if (p >= 1.0) {
        return 0;
    }
    // Inversion: floor(log(U) / log(1 - p)).
    const double u = 1.0 - uniform01(rng);  // (0, 1]
    const double k = std::floor(std::log(u) / std::log1p(-p));
    if (k >= 1.8e19) {
        return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(k);
}

std::uint32_t zero_truncated_poisson(Rng& rng, double mean) {
    // Inversion over the conditional pmf e^-m m^n / n! / (1 - e^-m), n >= 1.
    const double norm = -std::expm1(-mean);
    double pmf = std::exp(-mean) * mean / norm;
    double u = uniform01(rng);
    std::uint32_t n = 1;
    while (u > pmf && n < 1000) {
        u -= pmf;
        ++n;
        pmf *= mean / n;
    }
    return n;
}

std::uint32_t zero_truncated_thermal(Rng& rng, double mean) {
    // Thermal P(n) = r^n (1 - r), r = m / (1 + m); conditioned on n >= 1 the
    // count is 1 + Geometric(1 - r).
    const double r = mean / (1.0 + mean);
    if (r <= 0.0) {
        return 1;
    }
    const double u = 1.0 - uniform01(rng);
    return 1 + static_cast<std::uint32_t>(std::floor(std::log(u) / std::log(r)));
}

}  // namespace picosync
