#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sublocal/errors.hpp"
#include "sublocal/magnus.hpp"
#include "sublocal/sources.hpp"

namespace sublocal {

/// Uniform 1D lattice [x_min, x_max] with n_x sites (Dirichlet ends) and a leapfrog step.
struct LatticeConfig {
    double x_min = -20.0;
    double x_max = 20.0;
    std::size_t n_x = 4001;
    double dt_step = 0.005;
    double mass = 1.0;

    double dx() const { return (x_max - x_min) / static_cast<double>(n_x - 1); }
    double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx(); }

    void validate() const {
        if (n_x < 3) throw InvalidParameter("lattice: need at least 3 sites");
        if (!(x_max > x_min)) throw InvalidParameter("lattice: x_max must exceed x_min");
        if (!(dt_step > 0.0)) throw InvalidParameter("lattice: dt_step must be positive");
        if (!(mass > 0.0)) throw InvalidParameter("lattice: mass must be positive");
        if (dt_step > dx() * (1.0 + 1e-12))
            throw CflViolation("lattice: dt_step " + std::to_string(dt_step) + " exceeds dx " + std::to_string(dx()));
    }

    /// Lattice with spacing dx on [-half_width, half_width] (rounded to whole cells) and dt = cfl * dx.
    static LatticeConfig centered(double half_width, double dx, double cfl, double mass) {
        const auto cells = static_cast<std::size_t>(std::ceil(2.0 * half_width / dx));
        LatticeConfig c;
        c.x_min = -0.5 * static_cast<double>(cells) * dx;
        c.x_max = -c.x_min;
        c.n_x = cells + 1;
        c.dt_step = cfl * dx;
        c.mass = mass;
        return c;
    }
};

struct FieldSnapshot {
    std::vector<double> x;
    std::vector<double> values;
    double time = 0.0;
    std::size_t steps = 0;
    bool margin_ok = true;   ///< the source never came within (t2 - t1) of a boundary

    void write_csv(std::ostream& os) const {
        os << "x,value\n";
        os.precision(17);
        for (std::size_t i = 0; i < x.size(); ++i) os << x[i] << ',' << values[i] << '\n';
    }
};

namespace detail {

inline void accumulate_density(std::span<const BranchSource> sources, const LatticeConfig& cfg, double t,
                               std::vector<double>& rho) {
    std::fill(rho.begin(), rho.end(), 0.0);
    const double dx = cfg.dx();
    for (const auto& src : sources) {
        if (!src.has_charge()) {
            (void)src.trajectory.center(t);
            continue;
        }
        const SupportInterval sup = support_at(src, t);
        const auto lo = static_cast<std::ptrdiff_t>(std::floor((sup.lo - cfg.x_min) / dx));
        const auto hi = static_cast<std::ptrdiff_t>(std::ceil((sup.hi - cfg.x_min) / dx));
        for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0);
             i <= std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(cfg.n_x) - 1); ++i)
            rho[static_cast<std::size_t>(i)] += branch_density(src, t, cfg.x(static_cast<std::size_t>(i)));
    }
}

} // namespace detail

/**
 * Retarded solution of phi_tt - phi_xx + m^2 phi = -rho with phi = phi_t = 0
 * at t1, advanced to t2 by leapfrog. The step is shrunk so that a whole
 * number of steps lands on t2.
 *
 * With the coupling H_int = +\int rho phi, this is the same sign as the
 * displacement amplitudes, so expected_field() needs no extra factor.
 */
inline FieldSnapshot solve_retarded(const LatticeConfig& cfg, std::span<const BranchSource> sources, double t1,
                                    double t2, bool strict = false) {
    cfg.validate();
    if (t2 < t1) throw InvalidParameter("solve_retarded: t2 < t1");
    const double duration = t2 - t1;
    FieldSnapshot snap;
    snap.time = t2;
    snap.x.resize(cfg.n_x);
    for (std::size_t i = 0; i < cfg.n_x; ++i) snap.x[i] = cfg.x(i);
    snap.values.assign(cfg.n_x, 0.0);

    const std::size_t steps = duration > 0.0 ? static_cast<std::size_t>(std::ceil(duration / cfg.dt_step - 1e-9)) : 0;
    snap.steps = steps;
    const double dt = steps ? duration / static_cast<double>(steps) : 0.0;

    bool all_static = true;
    for (const auto& s : sources) all_static = all_static && s.trajectory.stationary_path();

    // boundary margin, checked on the time nodes
    for (std::size_t n = 0; n <= steps; ++n) {
        const double t = t1 + static_cast<double>(n) * dt;
        for (const auto& s : sources) {
            if (!s.has_charge()) continue;
            const SupportInterval sup = support_at(s, t);
            if (sup.lo - cfg.x_min < duration || cfg.x_max - sup.hi < duration) snap.margin_ok = false;
        }
        if (all_static) break;
    }
    if (!snap.margin_ok && strict)
        throw MarginViolation("solve_retarded: source support is closer than t2 - t1 to the lattice boundary");
    if (steps == 0) return snap;

    const double dx = cfg.dx();
    const double c2 = (dt / dx) * (dt / dx);
    const double m2dt2 = cfg.mass * cfg.mass * dt * dt;
    std::vector<double> prev(cfg.n_x, 0.0), cur(cfg.n_x, 0.0), next(cfg.n_x, 0.0), rho(cfg.n_x, 0.0);

    detail::accumulate_density(sources, cfg, t1, rho);
    // Taylor start: phi(dt) = dt^2/2 * phi_tt(t1) = -dt^2/2 * rho(t1)
    for (std::size_t i = 1; i + 1 < cfg.n_x; ++i) cur[i] = -0.5 * dt * dt * rho[i];

    for (std::size_t n = 1; n < steps; ++n) {
        if (!all_static) detail::accumulate_density(sources, cfg, t1 + static_cast<double>(n) * dt, rho);
        for (std::size_t i = 1; i + 1 < cfg.n_x; ++i)
            next[i] = 2.0 * cur[i] - prev[i] + c2 * (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]) - m2dt2 * cur[i] -
                      dt * dt * rho[i];
        std::swap(prev, cur);
        std::swap(cur, next);
    }
    snap.values = cur;
    return snap;
}

inline FieldSnapshot solve_retarded(const LatticeConfig& cfg, const BranchSource& source, double t1, double t2,
                                    bool strict = false) {
    return solve_retarded(cfg, std::span<const BranchSource>(&source, 1), t1, t2, strict);
}

struct Region {
    double lo = -5.0;
    double hi = 5.0;
};

/// ||phi_lattice - phi_alpha|| / ||phi_lattice|| over lattice sites in the region; 0/0 is 0.
inline double compare_with_alpha(const FieldSnapshot& snap, const BranchPropagator& prop, Region region = {}) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < snap.x.size(); ++i) {
        if (snap.x[i] < region.lo || snap.x[i] > region.hi) continue;
        const double d = snap.values[i] - expected_field(prop, snap.x[i]);
        num += d * d;
        den += snap.values[i] * snap.values[i];
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

inline double compare_with_alpha(const LatticeConfig& cfg, std::span<const BranchSource> sources,
                                 const BranchPropagator& prop, Region region = {}, bool strict = false) {
    return compare_with_alpha(solve_retarded(cfg, sources, prop.t1(), prop.t2(), strict), prop, region);
}

} // namespace sublocal
