#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace picosync {

class TimebaseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Signed duration in femtoseconds.
struct DurationFs {
    std::int64_t value = 0;

    constexpr DurationFs() = default;
    constexpr explicit DurationFs(std::int64_t fs) : value(fs) {}

    constexpr auto operator<=>(const DurationFs&) const = default;

    constexpr DurationFs operator-() const { return DurationFs{-value}; }
    constexpr DurationFs& operator+=(DurationFs o) { value += o.value; return *this; }
    constexpr DurationFs& operator-=(DurationFs o) { value -= o.value; return *this; }
    friend constexpr DurationFs operator+(DurationFs a, DurationFs b) { return DurationFs{a.value + b.value}; }
    friend constexpr DurationFs operator-(DurationFs a, DurationFs b) { return DurationFs{a.value - b.value}; }

    double ps() const { return static_cast<double>(value) * 1e-3; }
    double seconds() const { return static_cast<double>(value) * 1e-15; }
};

/// Rounds a floating-point femtosecond value to the nearest integer femtosecond.
DurationFs round_fs(double fs);

/// Largest magnitude for which DurationFs arithmetic is guaranteed closed.
inline constexpr std::int64_t kMaxDurationFs = std::int64_t{1} << 62;

/// Event time as a pulse-slot index plus a signed femtosecond offset from the
/// slot's nominal time (slot * period).
struct Timestamp {
    std::uint64_t slot = 0;
    std::int64_t offset_fs = 0;

    constexpr bool operator==(const Timestamp&) const = default;
};

// Moves whole periods out of the offset so that |offset_fs| < period.
// Throws TimebaseError("time before epoch") if the slot would go negative.
Timestamp normalize(Timestamp t, DurationFs period);

// Exact a - b in femtoseconds. Throws TimebaseError on |result| >= 2^62.
DurationFs diff_fs(Timestamp a, Timestamp b, DurationFs period);

// slot * period + offset, exact.
__int128 absolute_fs(Timestamp t, DurationFs period);

/// Binds the slot period so streams can be compared, shifted and differenced.
class Timebase {
public:
    explicit Timebase(DurationFs period);

    DurationFs period() const { return period_; }

    Timestamp normalize(Timestamp t) const { return picosync::normalize(t, period_); }
    DurationFs diff(Timestamp a, Timestamp b) const { return diff_fs(a, b, period_); }
    __int128 absolute(Timestamp t) const { return absolute_fs(t, period_); }

    Timestamp shift(Timestamp t, DurationFs d) const;
    Timestamp nominal(std::uint64_t slot) const { return Timestamp{slot, 0}; }

    /// Slot time in seconds, for slow processes (drift, walks).
    double seconds(Timestamp t) const;

    bool less(Timestamp a, Timestamp b) const { return absolute(a) < absolute(b); }

    /// Strict-weak ordering functor for std::sort and friends.
    auto ordering() const {
        return [p = period_](const Timestamp& a, const Timestamp& b) {
            return absolute_fs(a, p) < absolute_fs(b, p);
        };
    }

private:
    DurationFs period_;
};

/// 200 MHz clock period.
inline constexpr DurationFs kDefaultPeriod{5'000'000};

/// Gaussian FWHM to standard deviation.
inline constexpr double kFwhmPerSigma = 2.3548200450309493;
inline double fwhm_to_sigma(double fwhm) { return fwhm / kFwhmPerSigma; }

}  // namespace picosync
