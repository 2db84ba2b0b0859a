#pragma once

#include <cmath>

namespace l1bsde::moduli {

// Cut-off points for the two Osgood moduli. Both functions are concave and
// nondecreasing on [0, inf), vanish at 0 and are linear past the cut-off.
inline constexpr double h_delta = 0.1353352832366127;     // e^-2, h'(delta-) = 1
inline constexpr double hbar_delta = 0.01831563888873418; // e^-4

/// h(x) = -x ln x on (0, delta], linear continuation beyond, 0 for x <= 0.
inline double h(double x) {
    if (!(x > 0.0)) {
        return 0.0;
    }
    if (x <= h_delta) {
        return -x * std::log(x);
    }
    const double slope = -std::log(h_delta) - 1.0;
    return slope * (x - h_delta) - h_delta * std::log(h_delta);
}

inline double h_slope_at_delta() { return -std::log(h_delta) - 1.0; }
inline double h_at_delta() { return -h_delta * std::log(h_delta); }

/// hbar(x) = x |ln x| ln|ln x| on (0, delta], linear continuation beyond.
inline double hbar(double x) {
    if (!(x > 0.0)) {
        return 0.0;
    }
    auto core = [](double u) {
        const double l = -std::log(u);
        return u * l * std::log(l);
    };
    if (x <= hbar_delta) {
        return core(x);
    }
    const double l = -std::log(hbar_delta);
    const double slope = l * std::log(l) - std::log(l) - 1.0;
    return slope * (x - hbar_delta) + core(hbar_delta);
}

inline double hbar_slope_at_delta() {
    const double l = -std::log(hbar_delta);
    return l * std::log(l) - std::log(l) - 1.0;
}

inline double hbar_at_delta() { return hbar(hbar_delta); }

} // namespace l1bsde::moduli
