#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sublocal/errors.hpp"
#include "sublocal/modegrid.hpp"
#include "sublocal/quadrature.hpp"

namespace sublocal {

/// alpha(k; t1, t2) per grid mode, in continuum normalization. The amplitude of
/// the discrete oscillator for mode j is sqrt(measure(j)) * alpha[j].
struct DisplacementAmplitude {
    GridPtr grid;
    std::vector<cplx> alpha;
    double t1 = 0.0;
    double t2 = 0.0;

    cplx mode_amplitude(std::size_t j) const { return std::sqrt(grid->measure(j)) * alpha[j]; }
    std::vector<cplx> mode_amplitudes() const {
        std::vector<cplx> b(alpha.size());
        for (std::size_t j = 0; j < alpha.size(); ++j) b[j] = mode_amplitude(j);
        return b;
    }
};

/// Omega_2(t1, t2); purely imaginary.
struct PhaseExponent {
    cplx value{};
    double t1 = 0.0;
    double t2 = 0.0;
};

struct CrossPhase {
    cplx omega1_cross{};
    cplx omega2_cross{};
    cplx total{};
    double t1 = 0.0;
    double t2 = 0.0;
};

/// U(t1, t2) = e^{Omega_2} D[alpha] e^{-i H_0 (t2 - t1)}.
struct BranchPropagator {
    DisplacementAmplitude amplitude;
    PhaseExponent phase;

    double t1() const noexcept { return amplitude.t1; }
    double t2() const noexcept { return amplitude.t2; }
    double duration() const noexcept { return amplitude.t2 - amplitude.t1; }
    const GridPtr& grid() const noexcept { return amplitude.grid; }
};

/// The spectrum samples [first + i * stride], i = 0..panels, used to integrate
/// over [t1, t2] with `panels` uniform trapezoid panels.
struct TimePanels {
    std::size_t first = 0;
    std::size_t stride = 1;
    std::size_t panels = 0;
    double h = 0.0;
    double t1 = 0.0;
    double t2 = 0.0;

    std::vector<double> weights() const { return quad::trapezoid_weights(panels, h); }
};

inline TimePanels resolve_panels(const SourceSpectrum& spectrum, double t1, double t2, std::size_t n_time_steps) {
    if (t2 < t1) throw InvalidParameter("interval must satisfy t1 <= t2");
    TimePanels p;
    p.t1 = t1;
    p.t2 = t2;
    const std::size_t i1 = spectrum.find_time(t1);
    if (t2 == t1) {
        p.first = (i1 == SourceSpectrum::npos) ? 0 : i1;
        return p;
    }
    if (n_time_steps == 0) throw InvalidParameter("n_time_steps must be positive for a non-empty interval");
    const std::size_t i2 = spectrum.find_time(t2);
    if (i1 == SourceSpectrum::npos || i2 == SourceSpectrum::npos)
        throw InsufficientCoverage("spectrum has no samples at the interval ends [" + std::to_string(t1) + ", " +
                                   std::to_string(t2) + "]");
    if ((i2 - i1) % n_time_steps != 0)
        throw InsufficientCoverage("spectrum samples do not align with " + std::to_string(n_time_steps) +
                                   " panels on [" + std::to_string(t1) + ", " + std::to_string(t2) + "]");
    p.first = i1;
    p.stride = (i2 - i1) / n_time_steps;
    p.panels = n_time_steps;
    p.h = (t2 - t1) / static_cast<double>(n_time_steps);
    const auto ts = spectrum.times();
    for (std::size_t i = 1; i <= p.panels; ++i) {
        const double step = ts[i1 + i * p.stride] - ts[i1 + (i - 1) * p.stride];
        if (std::abs(step - p.h) > 1e-9 * p.h)
            throw InsufficientCoverage("spectrum samples on [t1, t2] are not uniform");
    }
    return p;
}

namespace detail {

// c_n = e^{i w (t_n - t1)} rho~(t_n, k_j) along the panel nodes of one mode.
inline void rotated_series(const SourceSpectrum& spectrum, const TimePanels& p, std::size_t j, std::vector<cplx>& c) {
    const double w = spectrum.grid()->omega(j);
    const auto ts = spectrum.times();
    c.resize(p.panels + 1);
    for (std::size_t i = 0; i <= p.panels; ++i) {
        const std::size_t ti = p.first + i * p.stride;
        c[i] = std::polar(1.0, w * (ts[ti] - p.t1)) * spectrum.value(ti, j);
    }
}

// Cumulative trapezoid S_n = \int_{t1}^{t_n} c dt on the panel nodes.
inline void cumulative(const std::vector<cplx>& c, double h, std::vector<cplx>& s) {
    s.assign(c.size(), cplx{});
    for (std::size_t i = 1; i < c.size(); ++i) s[i] = s[i - 1] + 0.5 * h * (c[i - 1] + c[i]);
}

inline cplx weighted_sum(const std::vector<cplx>& c, const std::vector<double>& w) {
    cplx acc{};
    for (std::size_t i = 0; i < c.size(); ++i) acc += w[i] * c[i];
    return acc;
}

// \sum_n W_n Im(conj(a_n) s_n)
inline double triangle_im(const std::vector<cplx>& a, const std::vector<cplx>& s, const std::vector<double>& w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += w[i] * std::imag(std::conj(a[i]) * s[i]);
    return acc;
}

inline void require_same_axis(const SourceSpectrum& a, const SourceSpectrum& b) {
    if (a.grid() != b.grid()) throw DimensionMismatch("spectra live on different mode grids");
    if (a.n_times() != b.n_times() || !std::equal(a.times().begin(), a.times().end(), b.times().begin()))
        throw DimensionMismatch("spectra live on different time axes");
}

} // namespace detail

/// alpha(k) = -(i / sqrt(2 w_k)) \int_{t1}^{t2} dt e^{-i w_k (t2 - t)} rho~(t, k).
inline DisplacementAmplitude displacement_amplitude(const SourceSpectrum& spectrum, double t1, double t2,
                                                    std::size_t n_time_steps) {
    const TimePanels p = resolve_panels(spectrum, t1, t2, n_time_steps);
    const GridPtr& grid = spectrum.grid();
    DisplacementAmplitude out{grid, std::vector<cplx>(grid->n_modes()), t1, t2};
    if (p.panels == 0) return out;
    const std::vector<double> w = p.weights();
    std::vector<cplx> c;
    const double duration = t2 - t1;
    for (std::size_t j = 0; j < grid->n_modes(); ++j) {
        detail::rotated_series(spectrum, p, j, c);
        const double om = grid->omega(j);
        out.alpha[j] = cplx(0.0, -1.0) / std::sqrt(2.0 * om) * std::polar(1.0, -om * duration) *
                       detail::weighted_sum(c, w);
    }
    return out;
}

/// Per-mode contributions Im Omega_2^{(j)}; Omega_2 = i * sum_j of them.
inline std::vector<double> omega2_per_mode(const SourceSpectrum& spectrum, double t1, double t2,
                                           std::size_t n_time_steps) {
    const TimePanels p = resolve_panels(spectrum, t1, t2, n_time_steps);
    const GridPtr& grid = spectrum.grid();
    std::vector<double> out(grid->n_modes(), 0.0);
    if (p.panels == 0) return out;
    const std::vector<double> w = p.weights();
    std::vector<cplx> c, s;
    for (std::size_t j = 0; j < grid->n_modes(); ++j) {
        detail::rotated_series(spectrum, p, j, c);
        detail::cumulative(c, p.h, s);
        out[j] = -0.5 * grid->measure(j) / grid->omega(j) * detail::triangle_im(c, s, w);
    }
    return out;
}

/**
 * Omega_2 = -1/2 \int dt \int_{t1}^{t} dt' \iint rho rho [phi_I, phi_I], evaluated in
 * momentum space. The inner integral is a cumulative trapezoid on the same
 * nodes as the outer one, so the triangle splits exactly at any node.
 */
inline PhaseExponent omega2(const SourceSpectrum& spectrum, double t1, double t2, std::size_t n_time_steps) {
    double acc = 0.0;
    for (double v : omega2_per_mode(spectrum, t1, t2, n_time_steps)) acc += v;
    return {cplx(0.0, acc), t1, t2};
}

/// Omega_cross = Omega_1^cross + Omega_2^cross for the source pair (A, B).
inline CrossPhase cross_phase(const SourceSpectrum& spectrum_a, const SourceSpectrum& spectrum_b, double t1, double t2,
                              std::size_t n_time_steps) {
    detail::require_same_axis(spectrum_a, spectrum_b);
    const TimePanels p = resolve_panels(spectrum_a, t1, t2, n_time_steps);
    CrossPhase out;
    out.t1 = t1;
    out.t2 = t2;
    if (p.panels == 0) return out;
    const GridPtr& grid = spectrum_a.grid();
    const std::vector<double> w = p.weights();
    std::vector<cplx> ca, cb, sa, sb;
    double o1 = 0.0, o2 = 0.0;
    for (std::size_t j = 0; j < grid->n_modes(); ++j) {
        detail::rotated_series(spectrum_a, p, j, ca);
        detail::rotated_series(spectrum_b, p, j, cb);
        const double pref = -0.5 * grid->measure(j) / grid->omega(j);
        // square: -1/2 \iint rho_A(t) rho_B(t') [phi, phi]
        o1 += pref * std::imag(std::conj(detail::weighted_sum(ca, w)) * detail::weighted_sum(cb, w));
        // triangle, both orderings
        detail::cumulative(ca, p.h, sa);
        detail::cumulative(cb, p.h, sb);
        o2 += pref * (detail::triangle_im(ca, sb, w) + detail::triangle_im(cb, sa, w));
    }
    out.omega1_cross = cplx(0.0, o1);
    out.omega2_cross = cplx(0.0, o2);
    out.total = out.omega1_cross + out.omega2_cross;
    return out;
}

struct SplitReport {
    cplx combined{};      ///< Omega_2[rho_A + rho_B]
    cplx parts{};         ///< Omega_2[rho_A] + Omega_2[rho_B] + Omega_2^cross
    double residual = 0.0;
};

/// Checks Omega_2[A + B] = Omega_2[A] + Omega_2[B] + Omega_2^cross, each side computed independently.
inline SplitReport split_check(const SourceSpectrum& spectrum_a, const SourceSpectrum& spectrum_b, double t1, double t2,
                               std::size_t n_time_steps) {
    SplitReport r;
    r.combined = omega2(spectrum_a + spectrum_b, t1, t2, n_time_steps).value;
    r.parts = omega2(spectrum_a, t1, t2, n_time_steps).value + omega2(spectrum_b, t1, t2, n_time_steps).value +
              cross_phase(spectrum_a, spectrum_b, t1, t2, n_time_steps).omega2_cross;
    r.residual = std::abs(r.combined - r.parts);
    return r;
}

inline BranchPropagator propagate(const SourceSpectrum& spectrum, double t1, double t2, std::size_t n_time_steps) {
    return {displacement_amplitude(spectrum, t1, t2, n_time_steps), omega2(spectrum, t1, t2, n_time_steps)};
}

/// Free evolution over [t1, t2]: alpha = 0, Omega_2 = 0.
inline BranchPropagator free_propagator(const GridPtr& grid, double t1, double t2) {
    return {{grid, std::vector<cplx>(grid->n_modes()), t1, t2}, {cplx{}, t1, t2}};
}

/// i sum_j measure_j Im(x_j conj(y_j)): the Weyl phase in D(x) D(y) = e^{phase} D(x + y).
inline cplx weyl_phase(const ModeGrid& grid, std::span<const cplx> x, std::span<const cplx> y) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += grid.measure(j) * std::imag(x[j] * std::conj(y[j]));
    return {0.0, acc};
}

/**
 * Group property: U(t1, t3) = U(t2, t3) U(t1, t2). Moving the free evolution
 * of `later` through the earlier displacement rotates it by e^{-i w T_later};
 * merging the two displacements then leaves the Weyl phase.
 */
inline BranchPropagator compose(const BranchPropagator& later, const BranchPropagator& earlier) {
    if (later.grid() != earlier.grid()) throw DimensionMismatch("compose: propagators live on different grids");
    const double tol = 1e-12 * std::max({1.0, std::abs(earlier.t2()), std::abs(later.t1())});
    if (std::abs(earlier.t2() - later.t1()) > tol)
        throw IntervalMismatch("compose: earlier ends at " + std::to_string(earlier.t2()) + " but later starts at " +
                               std::to_string(later.t1()));
    const ModeGrid& grid = *later.grid();
    const double tl = later.duration();
    std::vector<cplx> rotated(grid.n_modes());
    for (std::size_t j = 0; j < grid.n_modes(); ++j)
        rotated[j] = std::polar(1.0, -grid.omega(j) * tl) * earlier.amplitude.alpha[j];

    BranchPropagator out;
    out.amplitude = {later.grid(), std::vector<cplx>(grid.n_modes()), earlier.t1(), later.t2()};
    for (std::size_t j = 0; j < grid.n_modes(); ++j) out.amplitude.alpha[j] = later.amplitude.alpha[j] + rotated[j];
    out.phase = {later.phase.value + earlier.phase.value + weyl_phase(grid, later.amplitude.alpha, rotated),
                 earlier.t1(), later.t2()};
    return out;
}

/// <phi(x)> after the evolution from the vacuum: the classical retarded field at t2.
inline double expected_field(const BranchPropagator& prop, double x) {
    const ModeGrid& grid = *prop.grid();
    double acc = 0.0;
    for (std::size_t j = 0; j < grid.n_modes(); ++j)
        acc += grid.measure(j) / std::sqrt(2.0 * grid.omega(j)) * 2.0 *
               std::real(prop.amplitude.alpha[j] * std::polar(1.0, grid.k(j) * x));
    return acc;
}

} // namespace sublocal
