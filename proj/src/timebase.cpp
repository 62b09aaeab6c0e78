#include "picosync/timebase.hpp"

#include <cmath>

namespace picosync {

DurationFs round_fs(double fs) {
    if (!std::isfinite(fs) || std::fabs(fs) >= static_cast<double>(kMaxDurationFs)) {
        throw TimebaseError("duration out of range");
    }
    return DurationFs{std::llround(fs)};
}

Timestamp normalize(Timestamp t, DurationFs period) {
    if (period.value <= 0) {
        throw TimebaseError("period must be positive");
    }
    const std::int64_t carry = t.offset_fs / period.value;
    const std::int64_t rem = t.offset_fs % period.value;
    if (carry < 0 && static_cast<std::uint64_t>(-carry) > t.slot) {
        throw TimebaseError("time before epoch");
    }
    return Timestamp{t.slot + static_cast<std::uint64_t>(carry), rem};
}

__int128 absolute_fs(Timestamp t, DurationFs period) {
    return static_cast<__int128>(t.slot) * period.value + t.offset_fs;
}

DurationFs diff_fs(Timestamp a, Timestamp b, DurationFs period) {
    const __int128 d = absolute_fs(a, period) - absolute_fs(b, period);
    if (d >= kMaxDurationFs || d <= -static_cast<__int128>(kMaxDurationFs)) {
        throw TimebaseError("time difference overflow");
    }
    return DurationFs{static_cast<std::int64_t>(d)};
}

Timebase::Timebase(DurationFs period) : period_(period) {
    if (period.value <= 0) {
        throw TimebaseError("period must be positive");
    }
}

Timestamp Timebase::shift(Timestamp t, DurationFs d) const {
    // Pre-normalize so the offset sum cannot overflow.
    Timestamp n = normalize(t);
    Timestamp dn{0, d.value % period_.value};
    const std::int64_t whole = d.value / period_.value;
    if (whole < 0 && static_cast<std::uint64_t>(-whole) > n.slot) {
        throw TimebaseError("time before epoch");
    }
    n.slot += static_cast<std::uint64_t>(whole);
    n.offset_fs += dn.offset_fs;
    return normalize(n);
}

double Timebase::seconds(Timestamp t) const {
    return static_cast<double>(t.slot) * period_.seconds() + static_cast<double>(t.offset_fs) * 1e-15;
}

}  // namespace picosync
