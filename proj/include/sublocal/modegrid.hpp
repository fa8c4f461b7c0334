#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sublocal/errors.hpp"
#include "sublocal/quadrature.hpp"

namespace sublocal {

using cplx = std::complex<double>;

enum class Quadrature { trapezoid, gauss_legendre };

inline std::string to_string(Quadrature q) {
    return q == Quadrature::trapezoid ? "trapezoid" : "gauss_legendre";
}

struct GridOptions {
    Quadrature quadrature = Quadrature::trapezoid;
    /// Fraction of the cutoff where a C-infinity roll-off of the mode measure
    /// starts. 1.0 means a sharp cutoff at K.
    double taper_start = 1.0;
};

/**
 * Momentum lattice for the 1+1D massive scalar field.
 *
 * Two weight arrays are kept apart:
 *  - `weight(j)`  the plain quadrature weight for dk; they sum to 2K.
 *  - `measure(j)` the mode measure dk/(2 pi) including any UV roll-off.
 *    Every momentum-space integral downstream is a plain sum over
 *    measure(j) * f(k_j).
 *
 * The lattice is mirror symmetric: k(mirror(j)) == -k(j) exactly, with equal
 * weights. Modes are ordered by increasing k.
 */
class ModeGrid {
public:
    ModeGrid(double mass, double k_cutoff, std::vector<double> k, std::vector<double> weights,
             GridOptions options)
        : mass_(mass), k_cutoff_(k_cutoff), k_(std::move(k)), weights_(std::move(weights)),
          options_(options) {
        omega_.resize(k_.size());
        measure_.resize(k_.size());
        for (std::size_t j = 0; j < k_.size(); ++j) {
            omega_[j] = std::sqrt(mass_ * mass_ + k_[j] * k_[j]);
            measure_[j] = weights_[j] * taper(k_[j]) / (2.0 * std::numbers::pi);
        }
    }

    double mass() const noexcept { return mass_; }
    double k_cutoff() const noexcept { return k_cutoff_; }
    std::size_t n_modes() const noexcept { return k_.size(); }
    const GridOptions& options() const noexcept { return options_; }

    double k(std::size_t j) const { return k_[j]; }
    double omega(std::size_t j) const { return omega_[j]; }
    double weight(std::size_t j) const { return weights_[j]; }
    double measure(std::size_t j) const { return measure_[j]; }
    std::size_t mirror(std::size_t j) const noexcept { return k_.size() - 1 - j; }

    std::span<const double> k_values() const noexcept { return k_; }
    std::span<const double> omegas() const noexcept { return omega_; }
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const double> measures() const noexcept { return measure_; }

    /// Smooth UV roll-off factor in [0, 1].
    double taper(double k) const {
        const double a = options_.taper_start;
        if (a >= 1.0) return 1.0;
        const double u = std::abs(k) / k_cutoff_;
        if (u <= a) return 1.0;
        if (u >= 1.0) return 0.0;
        const double v = (u - a) / (1.0 - a);
        const double lo = std::exp(-1.0 / v);
        const double hi = std::exp(-1.0 / (1.0 - v));
        return hi / (lo + hi);
    }

private:
    double mass_;
    double k_cutoff_;
    std::vector<double> k_;
    std::vector<double> weights_;
    std::vector<double> omega_;
    std::vector<double> measure_;
    GridOptions options_;
};

using GridPtr = std::shared_ptr<const ModeGrid>;

/// Symmetric momentum grid on [-K, K] with n_modes points (n_modes even).
/// Trapezoid puts nodes on both endpoints; Gauss-Legendre uses interior nodes.
inline ModeGrid build_grid(double mass, double k_cutoff, std::size_t n_modes,
                           GridOptions options = {}) {
    if (!(mass > 0.0)) throw InvalidParameter("build_grid: mass must be positive");
    if (!(k_cutoff > 0.0)) throw InvalidParameter("build_grid: k_cutoff must be positive");
    if (n_modes < 2 || n_modes % 2 != 0)
        throw InvalidParameter("build_grid: n_modes must be an even integer >= 2");
    if (!(options.taper_start > 0.0 && options.taper_start <= 1.0))
        throw InvalidParameter("build_grid: taper_start must lie in (0, 1]");

    std::vector<double> k(n_modes), w(n_modes);
    if (options.quadrature == Quadrature::trapezoid) {
        const double dk = 2.0 * k_cutoff / static_cast<double>(n_modes - 1);
        for (std::size_t j = 0; j < n_modes / 2; ++j) {
            // build from the ends inwards so k[mirror] == -k exactly
            const double kj = k_cutoff - static_cast<double>(j) * dk;
            k[n_modes - 1 - j] = kj;
            k[j] = -kj;
            w[j] = w[n_modes - 1 - j] = (j == 0) ? 0.5 * dk : dk;
        }
    } else {
        const quad::Rule& rule = quad::cached_gauss_legendre(n_modes);
        for (std::size_t j = 0; j < n_modes; ++j) {
            k[j] = k_cutoff * rule.nodes[j];
            w[j] = k_cutoff * rule.weights[j];
        }
    }
    return ModeGrid(mass, k_cutoff, std::move(k), std::move(w), options);
}

inline GridPtr make_grid(double mass, double k_cutoff, std::size_t n_modes, GridOptions options = {}) {
    return std::make_shared<const ModeGrid>(build_grid(mass, k_cutoff, n_modes, options));
}

inline double dispersion(const ModeGrid& grid, double k) {
    return std::sqrt(grid.mass() * grid.mass() + k * k);
}

/// Uniform time nodes t1 + i (t2 - t1) / n, i = 0..n. The last node is t2 exactly.
inline std::vector<double> uniform_times(double t1, double t2, std::size_t n) {
    std::vector<double> t(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        t[i] = (n == 0) ? t1 : t1 + (t2 - t1) * static_cast<double>(i) / static_cast<double>(n);
    if (n > 0) t.back() = t2;
    return t;
}

/**
 * Spatial Fourier transform rho~(t, k) = \int dx rho(t, x) e^{-ikx} sampled on a
 * uniform time axis and on every grid mode. Storage is row-major [time][mode].
 */
class SourceSpectrum {
public:
    SourceSpectrum(GridPtr grid, std::vector<double> times)
        : grid_(std::move(grid)), times_(std::move(times)),
          values_(times_.size() * grid_->n_modes(), cplx{}) {
        if (times_.empty()) throw InvalidParameter("SourceSpectrum: no time samples");
        for (std::size_t i = 1; i < times_.size(); ++i)
            if (!(times_[i] > times_[i - 1]))
                throw InvalidParameter("SourceSpectrum: time samples must be strictly increasing");
    }

    const GridPtr& grid() const noexcept { return grid_; }
    std::span<const double> times() const noexcept { return times_; }
    std::size_t n_times() const noexcept { return times_.size(); }
    std::size_t n_modes() const noexcept { return grid_->n_modes(); }

    cplx value(std::size_t ti, std::size_t j) const { return values_[ti * n_modes() + j]; }
    cplx& value(std::size_t ti, std::size_t j) { return values_[ti * n_modes() + j]; }
    std::span<const cplx> row(std::size_t ti) const {
        return std::span<const cplx>(values_).subspan(ti * n_modes(), n_modes());
    }
    std::span<cplx> row(std::size_t ti) { return std::span<cplx>(values_).subspan(ti * n_modes(), n_modes()); }

    /// Index of time sample t, or npos when absent (relative tolerance 1e-9 of the spacing).
    std::size_t find_time(double t) const {
        const double scale = times_.size() > 1 ? (times_.back() - times_.front()) / static_cast<double>(times_.size() - 1) : 1.0;
        const double tol = 1e-9 * std::max(scale, 1e-300);
        std::size_t lo = 0, hi = times_.size();
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (times_[mid] < t - tol) lo = mid + 1; else hi = mid;
        }
        if (lo < times_.size() && std::abs(times_[lo] - t) <= tol) return lo;
        return npos;
    }

    SourceSpectrum& operator+=(const SourceSpectrum& other) {
        check_compatible(other);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
        return *this;
    }
    friend SourceSpectrum operator+(SourceSpectrum a, const SourceSpectrum& b) { return a += b; }

    SourceSpectrum& operator*=(double s) {
        for (auto& v : values_) v *= s;
        return *this;
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    void check_compatible(const SourceSpectrum& other) const {
        if (other.grid_ != grid_ || other.times_ != times_)
            throw DimensionMismatch("SourceSpectrum: spectra live on different grids or time axes");
    }

    GridPtr grid_;
    std::vector<double> times_;
    std::vector<cplx> values_;
};

} // namespace sublocal
