#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "sublocal/errors.hpp"
#include "sublocal/magnus.hpp"

namespace sublocal {

using OperatorMatrix = Eigen::MatrixXcd;

/// Smallest cutoff N for which a coherent state of amplitude |a| is kept to ~1e-8.
inline std::size_t cutoff_rule(double abs_alpha) {
    return static_cast<std::size_t>(std::ceil(abs_alpha * abs_alpha + 6.0 * abs_alpha + 4.0));
}

/**
 * Tensor product of M truncated oscillators, each with levels 0..N. Mode 0 is
 * the most significant tensor factor.
 *
 * Truncated matrices are only trusted on the low-photon window n_m <= window()
 * for every mode; all residuals below are column norms over that window.
 * The default window is N/4, which leaves room for a displacement and its
 * inverse to act without touching the cutoff.
 */
class FockSpace {
public:
    static constexpr std::size_t default_max_dimension = 20736;

    FockSpace(std::vector<double> frequencies, std::size_t cutoff, std::size_t window = 0,
              std::size_t max_dimension = default_max_dimension)
        : freq_(std::move(frequencies)), cutoff_(cutoff), window_(window == 0 ? cutoff / 4 : window) {
        if (freq_.empty() || freq_.size() > 4) throw InvalidParameter("FockSpace: need 1 to 4 modes");
        if (cutoff_ < 1) throw InvalidParameter("FockSpace: cutoff must be at least 1");
        if (window_ > cutoff_) throw InvalidParameter("FockSpace: window exceeds cutoff");
        for (double w : freq_)
            if (!(w > 0.0)) throw InvalidParameter("FockSpace: frequencies must be positive");
        dim_ = 1;
        for (std::size_t m = 0; m < freq_.size(); ++m) {
            dim_ *= cutoff_ + 1;
            if (dim_ > max_dimension)
                throw InvalidParameter("FockSpace: dimension exceeds " + std::to_string(max_dimension));
        }
    }

    std::size_t n_modes() const noexcept { return freq_.size(); }
    std::size_t cutoff() const noexcept { return cutoff_; }
    std::size_t window() const noexcept { return window_; }
    std::size_t levels() const noexcept { return cutoff_ + 1; }
    std::size_t dimension() const noexcept { return dim_; }
    double frequency(std::size_t m) const { return freq_.at(m); }
    std::span<const double> frequencies() const noexcept { return freq_; }

    /// Occupation of `mode` in basis state `index`.
    std::size_t occupation(std::size_t index, std::size_t mode) const {
        return (index / stride(mode)) % levels();
    }
    std::size_t stride(std::size_t mode) const {
        std::size_t s = 1;
        for (std::size_t m = mode + 1; m < n_modes(); ++m) s *= levels();
        return s;
    }

    /// Basis indices with every occupation <= window().
    std::vector<std::size_t> window_states() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < dim_; ++i) {
            bool inside = true;
            for (std::size_t m = 0; m < n_modes() && inside; ++m) inside = occupation(i, m) <= window_;
            if (inside) out.push_back(i);
        }
        return out;
    }

private:
    std::vector<double> freq_;
    std::size_t cutoff_;
    std::size_t window_;
    std::size_t dim_ = 1;
};

/// Spectral norm of X restricted to the window columns.
inline double window_norm(const FockSpace& space, const OperatorMatrix& x) {
    const auto cols = space.window_states();
    OperatorMatrix sub(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = x.col(static_cast<Eigen::Index>(cols[c]));
    if (sub.size() == 0) return 0.0;
    return Eigen::JacobiSVD<OperatorMatrix>(sub).singularValues()(0);
}

inline double operator_norm(const OperatorMatrix& x) {
    if (x.size() == 0) return 0.0;
    return Eigen::JacobiSVD<OperatorMatrix>(x).singularValues()(0);
}

inline OperatorMatrix annihilation_matrix(const FockSpace& space, std::size_t mode) {
    if (mode >= space.n_modes()) throw DimensionMismatch("annihilation_matrix: mode index out of range");
    const auto d = static_cast<Eigen::Index>(space.dimension());
    const std::size_t st = space.stride(mode);
    OperatorMatrix a = OperatorMatrix::Zero(d, d);
    for (std::size_t i = 0; i < space.dimension(); ++i) {
        const std::size_t n = space.occupation(i, mode);
        if (n > 0) a(static_cast<Eigen::Index>(i - st), static_cast<Eigen::Index>(i)) = std::sqrt(static_cast<double>(n));
    }
    return a;
}

inline OperatorMatrix number_matrix(const FockSpace& space, std::size_t mode) {
    if (mode >= space.n_modes()) throw DimensionMismatch("number_matrix: mode index out of range");
    Eigen::VectorXcd diag(static_cast<Eigen::Index>(space.dimension()));
    for (std::size_t i = 0; i < space.dimension(); ++i)
        diag(static_cast<Eigen::Index>(i)) = static_cast<double>(space.occupation(i, mode));
    return diag.asDiagonal();
}

/// e^{-i H_0 T} with H_0 = sum_m w_m n_m.
inline OperatorMatrix free_evolution_matrix(const FockSpace& space, double duration) {
    Eigen::VectorXcd diag(static_cast<Eigen::Index>(space.dimension()));
    for (std::size_t i = 0; i < space.dimension(); ++i) {
        double e = 0.0;
        for (std::size_t m = 0; m < space.n_modes(); ++m)
            e += space.frequency(m) * static_cast<double>(space.occupation(i, m));
        diag(static_cast<Eigen::Index>(i)) = std::polar(1.0, -e * duration);
    }
    return diag.asDiagonal();
}

/// exp(a a^dag - conj(a) a) on a single truncated oscillator.
inline OperatorMatrix single_mode_displacement(std::size_t cutoff, cplx amp) {
    const auto d = static_cast<Eigen::Index>(cutoff + 1);
    OperatorMatrix gen = OperatorMatrix::Zero(d, d);
    for (Eigen::Index n = 1; n < d; ++n) {
        const double s = std::sqrt(static_cast<double>(n));
        gen(n, n - 1) = amp * s;              // a^dag
        gen(n - 1, n) = -std::conj(amp) * s;  // a
    }
    return gen.exp();
}

/**
 * D(alphas) = exp(sum_m alpha_m a_m^dag - h.c.). The modes commute, so this is
 * the Kronecker product of single-mode exponentials.
 */
inline OperatorMatrix displacement_matrix(const FockSpace& space, std::span<const cplx> alphas) {
    if (alphas.size() != space.n_modes()) throw DimensionMismatch("displacement_matrix: one amplitude per mode required");
    for (std::size_t m = 0; m < alphas.size(); ++m) {
        const std::size_t need = cutoff_rule(std::abs(alphas[m]));
        if (space.cutoff() < need)
            throw CutoffTooSmall("displacement_matrix: mode " + std::to_string(m) + " needs N >= " +
                                 std::to_string(need) + ", have " + std::to_string(space.cutoff()));
    }
    OperatorMatrix out = single_mode_displacement(space.cutoff(), alphas[0]);
    for (std::size_t m = 1; m < alphas.size(); ++m)
        out = Eigen::kroneckerProduct(out, single_mode_displacement(space.cutoff(), alphas[m])).eval();
    return out;
}

/// Grid modes represented by the factors of a FockSpace, in order.
struct ModeProjection {
    std::vector<std::size_t> modes;

    std::vector<double> frequencies(const ModeGrid& grid) const {
        std::vector<double> w;
        for (std::size_t j : modes) w.push_back(grid.omega(j));
        return w;
    }
};

/// The `count` modes with the largest |amplitude| (ties broken by index).
inline ModeProjection strongest_modes(std::span<const cplx> amplitudes, std::size_t count) {
    std::vector<std::size_t> idx(amplitudes.size());
    for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j;
    count = std::min(count, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double x = std::abs(amplitudes[a]), y = std::abs(amplitudes[b]);
                          return x != y ? x > y : a < b;
                      });
    idx.resize(count);
    return {idx};
}

/// A propagator's data on a handful of modes: discrete amplitudes, scalar phase, duration.
struct ModeRestriction {
    std::vector<cplx> beta;
    cplx phase{};
    double duration = 0.0;
};

inline ModeRestriction restrict_to(const BranchPropagator& prop, const ModeProjection& proj) {
    ModeRestriction r;
    for (std::size_t j : proj.modes) r.beta.push_back(prop.amplitude.mode_amplitude(j));
    r.phase = prop.phase.value;
    r.duration = prop.duration();
    return r;
}

/**
 * Phase the modes outside `proj` contribute when D(a) D(b) is merged into
 * D(a + b): i sum_{j not in proj} measure_j Im(a_j conj(b_j)). Needed to
 * compare a joint propagator with a product of partial ones on a subset.
 */
inline cplx complement_weyl_phase(const ModeGrid& grid, std::span<const cplx> a, std::span<const cplx> b,
                                  const ModeProjection& proj) {
    std::vector<bool> inside(grid.n_modes(), false);
    for (std::size_t j : proj.modes) inside.at(j) = true;
    double acc = 0.0;
    for (std::size_t j = 0; j < grid.n_modes(); ++j)
        if (!inside[j]) acc += grid.measure(j) * std::imag(a[j] * std::conj(b[j]));
    return {0.0, acc};
}

/// e^{phase} D(beta) e^{-i H_0 T}
inline OperatorMatrix branch_unitary_matrix(const FockSpace& space, const ModeRestriction& r) {
    return std::exp(r.phase) * displacement_matrix(space, r.beta) * free_evolution_matrix(space, r.duration);
}

inline OperatorMatrix branch_unitary_matrix(const FockSpace& space, const BranchPropagator& prop,
                                            const ModeProjection& proj) {
    const auto w = proj.frequencies(*prop.grid());
    for (std::size_t m = 0; m < w.size(); ++m)
        if (m >= space.n_modes() || std::abs(w[m] - space.frequency(m)) > 1e-12 * w[m])
            throw DimensionMismatch("branch_unitary_matrix: projection does not match the Fock space modes");
    if (w.size() != space.n_modes()) throw DimensionMismatch("branch_unitary_matrix: mode count mismatch");
    return branch_unitary_matrix(space, restrict_to(prop, proj));
}

inline double unitarity_defect(const FockSpace& space, const OperatorMatrix& u) {
    const auto d = static_cast<Eigen::Index>(space.dimension());
    return window_norm(space, u.adjoint() * u - OperatorMatrix::Identity(d, d));
}

/**
 * || U_AB - e^{cross} U_B U_A e^{-i H_0 T} || on the window, with U_X = e^{phase_X} D(beta_X)
 * (no free evolution inside the partial factors).
 */
inline double factorization_residual(const FockSpace& space, const ModeRestriction& ab, const ModeRestriction& a,
                                     const ModeRestriction& b, cplx cross) {
    if (std::abs(ab.duration - a.duration) > 1e-12 || std::abs(ab.duration - b.duration) > 1e-12)
        throw DimensionMismatch("factorization_residual: propagators cover different durations");
    const OperatorMatrix lhs = branch_unitary_matrix(space, ab);
    const OperatorMatrix ua = std::exp(a.phase) * displacement_matrix(space, a.beta);
    const OperatorMatrix ub = std::exp(b.phase) * displacement_matrix(space, b.beta);
    const OperatorMatrix rhs = std::exp(cross) * ub * ua * free_evolution_matrix(space, ab.duration);
    return window_norm(space, lhs - rhs);
}

/// Largest over modes of || U^dag a_m U - (a_m e^{-i w_m T} + beta_m) || on the window.
inline double heisenberg_residual(const FockSpace& space, const ModeRestriction& r) {
    const OperatorMatrix u = branch_unitary_matrix(space, r);
    const auto d = static_cast<Eigen::Index>(space.dimension());
    double worst = 0.0;
    for (std::size_t m = 0; m < space.n_modes(); ++m) {
        const OperatorMatrix a = annihilation_matrix(space, m);
        const OperatorMatrix expect =
            a * std::polar(1.0, -space.frequency(m) * r.duration) + r.beta[m] * OperatorMatrix::Identity(d, d);
        worst = std::max(worst, window_norm(space, u.adjoint() * a * u - expect));
    }
    return worst;
}

/// || (e^{-i A T/n} e^{-i B T/n})^n - e^{-i (A + B) T} ||, full operator norm.
inline double trotter_residual(const OperatorMatrix& h_a, const OperatorMatrix& h_b, double duration, std::size_t n_steps) {
    if (h_a.rows() != h_b.rows() || h_a.cols() != h_b.cols()) throw DimensionMismatch("trotter_residual: shape mismatch");
    if (n_steps == 0) throw InvalidParameter("trotter_residual: n_steps must be positive");
    const cplx mi(0.0, -1.0);
    const double h = duration / static_cast<double>(n_steps);
    const OperatorMatrix step = (mi * h * h_a).exp() * (mi * h * h_b).exp();
    OperatorMatrix prod = OperatorMatrix::Identity(h_a.rows(), h_a.cols());
    for (std::size_t i = 0; i < n_steps; ++i) prod = step * prod;
    const OperatorMatrix exact = (mi * duration * (h_a + h_b)).exp();
    return operator_norm(prod - exact);
}

struct TrotterPoint {
    std::size_t n_steps = 0;
    double residual = 0.0;
};

inline std::vector<TrotterPoint> trotter_sequence(const OperatorMatrix& h_a, const OperatorMatrix& h_b, double duration,
                                                  std::size_t max_steps = 64) {
    std::vector<TrotterPoint> out;
    for (std::size_t n = 1; n <= max_steps; n *= 2) out.push_back({n, trotter_residual(h_a, h_b, duration, n)});
    return out;
}

/// Least-squares slope of log(residual) against log(n).
inline double loglog_slope(std::span<const TrotterPoint> pts) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(pts.size());
    for (const auto& p : pts) {
        const double x = std::log(static_cast<double>(p.n_steps)), y = std::log(p.residual);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Two-mode toy split H = H_A + H_B: each half carries half of the free field
/// energy plus a linear drive of strength `coupling` on its own mode.
inline std::pair<OperatorMatrix, OperatorMatrix> toy_trotter_hamiltonians(const FockSpace& space, double coupling) {
    if (space.n_modes() != 2) throw DimensionMismatch("toy_trotter_hamiltonians: needs a two-mode space");
    const auto d = static_cast<Eigen::Index>(space.dimension());
    OperatorMatrix h0 = OperatorMatrix::Zero(d, d);
    for (std::size_t m = 0; m < 2; ++m) h0 += space.frequency(m) * number_matrix(space, m);
    const OperatorMatrix a0 = annihilation_matrix(space, 0), a1 = annihilation_matrix(space, 1);
    OperatorMatrix h_a = 0.5 * h0 + coupling * (a0 + a0.adjoint());
    OperatorMatrix h_b = 0.5 * h0 + coupling * (a1 + a1.adjoint());
    return {std::move(h_a), std::move(h_b)};
}

/// <alpha|beta> for multimode coherent states.
inline cplx coherent_overlap(std::span<const cplx> alphas, std::span<const cplx> betas) {
    if (alphas.size() != betas.size()) throw DimensionMismatch("coherent_overlap: mode counts differ");
    cplx acc{};
    for (std::size_t m = 0; m < alphas.size(); ++m)
        acc += -0.5 * std::norm(alphas[m]) - 0.5 * std::norm(betas[m]) + std::conj(alphas[m]) * betas[m];
    return std::exp(acc);
}

/**
 * Cross phase read off from operators: Omega_2 differences from the scalar
 * phases plus, per grid mode, the vacuum-element ratio
 * <0|D(b_A + b_B)|0> / <0|D(b_B) D(b_A)|0> in a single truncated oscillator.
 */
inline cplx fock_cross_phase(const BranchPropagator& ab, const BranchPropagator& a, const BranchPropagator& b) {
    const ModeGrid& grid = *ab.grid();
    cplx total = ab.phase.value - a.phase.value - b.phase.value;
    for (std::size_t j = 0; j < grid.n_modes(); ++j) {
        const cplx ba = a.amplitude.mode_amplitude(j), bb = b.amplitude.mode_amplitude(j);
        const std::size_t n = std::max<std::size_t>(8, 3 * cutoff_rule(std::abs(ba) + std::abs(bb)));
        const cplx joint = single_mode_displacement(n, ab.amplitude.mode_amplitude(j))(0, 0);
        const cplx split = (single_mode_displacement(n, bb) * single_mode_displacement(n, ba))(0, 0);
        total += std::log(joint / split);
    }
    return total;
}

} // namespace sublocal
