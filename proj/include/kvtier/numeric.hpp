#ifndef KVTIER_NUMERIC_HPP
#define KVTIER_NUMERIC_HPP

#include <cmath>
#include <cstdint>

namespace kvtier {

// ceil over a fraction-of-count product, absorbing representation noise:
// (1 - 1/3) * 3 evaluates to 2.0000000000000004 but must count as 2.
// The 1e-9 slack dwarfs double rounding error at supported trace sizes yet
// never swallows a real fractional part.
inline std::uint64_t ceil_fraction(double x) {
    if (x <= 0) return 0;
    return static_cast<std::uint64_t>(std::ceil(x - 1e-9));
}

} // namespace kvtier

#endif
