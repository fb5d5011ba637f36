#pragma once

#include "core.hpp"

#include <cmath>

namespace hho {

// Thick hollow sphere under internal pressure, elastic-perfectly plastic von Mises.
struct SphereParams {
    double r_in = 100.0;
    double r_out = 200.0;
    double E = 210e3;
    double nu = 0.3;
    double sigma_y0 = 240.0;

    void validate() const
    {
        if (!(r_out > r_in && r_in > 0))
            throw DomainError("sphere radii must satisfy r_out > r_in > 0");
        if (!(sigma_y0 > 0))
            throw DomainError("sphere yield stress must be positive");
    }
};

struct SphereStress {
    double rr = 0.0;
    double tt = 0.0;
};

namespace detail {

// Internal pressure for plastic front radius c.
inline double sphere_pressure(const SphereParams& sp, double c)
{
    const double q = std::pow(c / sp.r_out, 3);
    return 2.0 * sp.sigma_y0 * std::log(c / sp.r_in) + 2.0 * sp.sigma_y0 / 3.0 * (1.0 - q);
}

} // namespace detail

inline double limit_load(const SphereParams& sp)
{
    sp.validate();
    return 2.0 * sp.sigma_y0 * std::log(sp.r_out / sp.r_in);
}

// Pressure at which yielding starts at the inner surface.
inline double yield_onset_pressure(const SphereParams& sp)
{
    sp.validate();
    return detail::sphere_pressure(sp, sp.r_in);
}

// Plastic front radius at pressure P; r_in while the shell is elastic.
inline double plastic_radius(const SphereParams& sp, double P)
{
    sp.validate();
    const double plim = limit_load(sp);
    if (!(P > 0) || !(P < plim))
        throw DomainError("pressure must lie in (0, P_lim)");
    if (P <= yield_onset_pressure(sp))
        return sp.r_in;
    // P(c) is increasing on [r_in, r_out].
    double lo = sp.r_in, hi = sp.r_out;
    while (hi - lo > 1e-10 * lo) {
        const double mid = 0.5 * (lo + hi);
        (detail::sphere_pressure(sp, mid) < P ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline SphereStress sphere_stress(const SphereParams& sp, double P, double r)
{
    sp.validate();
    const double a = sp.r_in, b = sp.r_out, sy = sp.sigma_y0;
    if (r < a * (1 - 1e-12) || r > b * (1 + 1e-12))
        throw DomainError("radius lies outside the shell");
    const double c = plastic_radius(sp, P);
    const double b3 = b * b * b, r3 = r * r * r;
    SphereStress s;
    if (c == a) {
        const double A = P * a * a * a / (b3 - a * a * a);
        s.rr = A * (1.0 - b3 / r3);
        s.tt = A * (1.0 + 0.5 * b3 / r3);
        return s;
    }
    const double c3 = c * c * c;
    if (r <= c) {
        s.rr = -2.0 * sy * std::log(c / r) - 2.0 * sy / 3.0 * (1.0 - c3 / b3);
        s.tt = s.rr + sy;
    } else {
        const double A = 2.0 * sy * c3 / (3.0 * b3);
        s.rr = -A * (b3 / r3 - 1.0);
        s.tt = A * (0.5 * b3 / r3 + 1.0);
    }
    return s;
}

} // namespace hho
