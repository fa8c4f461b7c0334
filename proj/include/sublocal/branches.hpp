#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <future>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sublocal/errors.hpp"
#include "sublocal/fock.hpp"
#include "sublocal/magnus.hpp"
#include "sublocal/modegrid.hpp"
#include "sublocal/sources.hpp"

namespace sublocal {

/**
 * Two qudits A and B, one classical source per computational-basis branch,
 * coupled to the same field over [t_initial, t_final].
 */
struct Scenario {
    std::vector<BranchSource> sources_a;
    std::vector<BranchSource> sources_b;
    double t_initial = 0.0;
    double t_final = 1.0;
    GridPtr grid;
    std::size_t time_steps = 256;        ///< trapezoid panels over the whole interval
    std::size_t subdivisions = 1;
    std::vector<double> breakpoints;     ///< interior breakpoints; overrides `subdivisions` when non-empty
    double safety_margin = 0.0;
    std::size_t distance_samples = 65;
    double relative_tolerance = 1e-6;

    std::size_t d_a() const noexcept { return sources_a.size(); }
    std::size_t d_b() const noexcept { return sources_b.size(); }

    void validate() const {
        if (!grid) throw InvalidParameter("scenario: no mode grid");
        if (sources_a.empty() || sources_b.empty()) throw InvalidParameter("scenario: each qudit needs at least one branch");
        if (sources_a.size() > 4 || sources_b.size() > 4) throw InvalidParameter("scenario: qudit dimension above 4");
        if (!(t_final > t_initial)) throw InvalidParameter("scenario: t_final must exceed t_initial");
        if (time_steps == 0) throw InvalidParameter("scenario: time_steps must be positive");
        if (subdivisions == 0) throw InvalidParameter("scenario: subdivisions must be at least 1");
        for (const auto* group : {&sources_a, &sources_b})
            for (const auto& src : *group)
                if (!src.trajectory.defined_at(t_initial) || !src.trajectory.defined_at(t_final))
                    throw UndefinedTime("scenario: branch " + std::to_string(src.label) +
                                        " trajectory does not cover the interval");
    }

    std::vector<double> time_axis() const { return uniform_times(t_initial, t_final, time_steps); }

    /// Interval endpoints t_initial = b_0 < ... < b_n = t_final.
    std::vector<double> interval_edges() const {
        std::vector<double> e{t_initial};
        if (!breakpoints.empty()) {
            for (double b : breakpoints) {
                if (!(b > e.back() && b < t_final)) throw InvalidParameter("scenario: breakpoints must increase inside the interval");
                e.push_back(b);
            }
        } else {
            for (std::size_t i = 1; i < subdivisions; ++i)
                e.push_back(t_initial + (t_final - t_initial) * static_cast<double>(i) / static_cast<double>(subdivisions));
        }
        e.push_back(t_final);
        return e;
    }
};

/// Spectra of every branch source on the scenario's time axis, computed once.
struct ScenarioSpectra {
    std::vector<SourceSpectrum> a;
    std::vector<SourceSpectrum> b;
    std::vector<double> times;
};

inline ScenarioSpectra compute_spectra(const Scenario& sc) {
    sc.validate();
    ScenarioSpectra out;
    out.times = sc.time_axis();
    for (const auto& s : sc.sources_a) out.a.push_back(transform_source(sc.grid, s, out.times));
    for (const auto& s : sc.sources_b) out.b.push_back(transform_source(sc.grid, s, out.times));
    return out;
}

struct BranchEntry {
    std::size_t r = 0;
    std::size_t s = 0;
    BranchPropagator joint;   ///< sourced by rho^r_A + rho^s_B
    CrossPhase cross;
};

struct BranchTable {
    std::size_t d_a = 0;
    std::size_t d_b = 0;
    double t1 = 0.0;
    double t2 = 0.0;
    GridPtr grid;
    std::vector<BranchPropagator> a;   ///< rho^r_A alone
    std::vector<BranchPropagator> b;   ///< rho^s_B alone
    std::vector<BranchEntry> entries;  ///< index r * d_b + s

    const BranchEntry& entry(std::size_t r, std::size_t s) const { return entries.at(r * d_b + s); }

    double max_cross() const {
        double m = 0.0;
        for (const auto& e : entries) m = std::max(m, std::abs(e.cross.total));
        return m;
    }
    double max_omega2() const {
        double m = 0.0;
        for (const auto& e : entries) m = std::max(m, std::abs(e.joint.phase.value));
        return m;
    }
    /// Certification threshold for |Omega^{rs}|, relative to the table's own phase scale.
    double tolerance(double relative = 1e-6) const { return relative * std::max(max_omega2(), 1e-12); }
};

/// Panels of the scenario axis falling in [t1, t2].
inline std::size_t panels_between(const Scenario& sc, double t1, double t2) {
    const double h = (sc.t_final - sc.t_initial) / static_cast<double>(sc.time_steps);
    const double n = (t2 - t1) / h;
    const double rounded = std::round(n);
    if (std::abs(n - rounded) > 1e-8)
        throw InsufficientCoverage("interval [" + std::to_string(t1) + ", " + std::to_string(t2) +
                                   "] does not fall on the scenario time axis");
    return static_cast<std::size_t>(rounded);
}

inline BranchTable assemble(const Scenario& sc, const ScenarioSpectra& spectra, double t1, double t2,
                            bool parallel = false) {
    const std::size_t n = panels_between(sc, t1, t2);
    BranchTable table;
    table.d_a = sc.d_a();
    table.d_b = sc.d_b();
    table.t1 = t1;
    table.t2 = t2;
    table.grid = sc.grid;
    for (const auto& sp : spectra.a) table.a.push_back(propagate(sp, t1, t2, n));
    for (const auto& sp : spectra.b) table.b.push_back(propagate(sp, t1, t2, n));

    auto make_entry = [&](std::size_t r, std::size_t s) {
        return BranchEntry{r, s, propagate(spectra.a[r] + spectra.b[s], t1, t2, n),
                           cross_phase(spectra.a[r], spectra.b[s], t1, t2, n)};
    };
    if (parallel) {
        std::vector<std::future<BranchEntry>> jobs;
        for (std::size_t r = 0; r < table.d_a; ++r)
            for (std::size_t s = 0; s < table.d_b; ++s) jobs.push_back(std::async(std::launch::async, make_entry, r, s));
        for (auto& j : jobs) table.entries.push_back(j.get());
    } else {
        for (std::size_t r = 0; r < table.d_a; ++r)
            for (std::size_t s = 0; s < table.d_b; ++s) table.entries.push_back(make_entry(r, s));
    }
    return table;
}

inline BranchTable assemble(const Scenario& sc, bool parallel = false) {
    return assemble(sc, compute_spectra(sc), sc.t_initial, sc.t_final, parallel);
}

struct LocalityVerdict {
    bool geometric = false;   ///< supports spacelike separated for every (r, s)
    bool analytic = false;    ///< max |Omega^{rs}| below tolerance
    bool agree = false;       ///< geometric implies analytic
    double max_cross = 0.0;
    double max_omega2 = 0.0;
    double tolerance = 0.0;
    std::size_t worst_r = 0;
    std::size_t worst_s = 0;
    SpacelikeCertificate certificate;
};

inline LocalityVerdict locality_verdict(const BranchTable& table, const Scenario& sc) {
    LocalityVerdict v;
    v.certificate = spacelike_separated(sc.sources_a, sc.sources_b, table.t1, table.t2, sc.distance_samples,
                                        sc.safety_margin);
    v.geometric = v.certificate.separated;
    v.max_omega2 = table.max_omega2();
    v.tolerance = table.tolerance(sc.relative_tolerance);
    for (const auto& e : table.entries) {
        const double m = std::abs(e.cross.total);
        if (m >= v.max_cross) {
            v.max_cross = m;
            v.worst_r = e.r;
            v.worst_s = e.s;
        }
    }
    v.analytic = v.max_cross < v.tolerance;
    v.agree = !v.geometric || v.analytic;
    return v;
}

/**
 * U = (sum_s |s><s| U_B^s) (sum_r |r><r| U_A^r). The free evolution
 * e^{-i H_0 T} is carried by the A factors; the B factors are bare
 * e^{Omega_2} D[alpha].
 */
struct TwoLocalDecomposition {
    double t1 = 0.0;
    double t2 = 0.0;
    std::vector<BranchPropagator> controlled_a;
    std::vector<BranchPropagator> controlled_b;
    double max_cross = 0.0;
    double tolerance = 0.0;
};

inline TwoLocalDecomposition two_local_decomposition(const BranchTable& table, double relative_tolerance = 1e-6) {
    const double tol = table.tolerance(relative_tolerance);
    for (const auto& e : table.entries)
        if (table.d_a > 1 && table.d_b > 1 && !(std::abs(e.cross.total) < tol))
            throw NotTwoLocal(e.r, e.s, std::abs(e.cross.total), tol);
    TwoLocalDecomposition d{table.t1, table.t2, table.a, table.b, table.max_cross(), tol};
    // With a single branch on one side the cross phase only depends on the
    // other side's label, so it is a local phase and moves into that factor.
    if (table.d_a == 1 || table.d_b == 1)
        for (const auto& e : table.entries) {
            auto& target = table.d_a == 1 ? d.controlled_b[e.s] : d.controlled_a[e.r];
            target.phase.value += e.cross.total;
        }
    return d;
}

struct ReconstructionOptions {
    std::size_t n_modes = 2;       ///< Fock factors used for the check
    std::size_t min_cutoff = 8;
};

/**
 * For each (r, s): || U^{rs} - U_B^s U_A^r e^{-i H_0 T} || on the window of a
 * small Fock space built from the modes with the largest joint amplitude.
 * The phase of the modes left out is carried along as a scalar.
 */
inline std::vector<double> reconstruction_residuals(const BranchTable& table, const TwoLocalDecomposition& dec,
                                                    ReconstructionOptions opt = {}) {
    std::vector<double> out;
    const ModeGrid& grid = *table.grid;
    for (const auto& e : table.entries) {
        const BranchPropagator& pa = dec.controlled_a.at(e.r);
        const BranchPropagator& pb = dec.controlled_b.at(e.s);
        const auto joint_beta = e.joint.amplitude.mode_amplitudes();
        const ModeProjection proj = strongest_modes(joint_beta, opt.n_modes);
        double biggest = 0.0;
        for (std::size_t j : proj.modes)
            biggest = std::max({biggest, std::abs(joint_beta[j]), std::abs(pa.amplitude.mode_amplitude(j)),
                                std::abs(pb.amplitude.mode_amplitude(j))});
        const std::size_t cutoff = std::max(opt.min_cutoff, 3 * cutoff_rule(biggest));
        const FockSpace space(proj.frequencies(grid), cutoff);

        ModeRestriction ab = restrict_to(e.joint, proj);
        ab.phase += complement_weyl_phase(grid, pa.amplitude.alpha, pb.amplitude.alpha, proj);
        out.push_back(factorization_residual(space, ab, restrict_to(pa, proj), restrict_to(pb, proj), cplx{}));
    }
    return out;
}

struct PropagatorError {
    double amplitude = 0.0;   ///< max_j |alpha_j - alpha'_j|
    double phase = 0.0;       ///< |Omega_2 - Omega_2'|
};

inline PropagatorError propagator_difference(const BranchPropagator& x, const BranchPropagator& y) {
    PropagatorError e;
    for (std::size_t j = 0; j < x.amplitude.alpha.size(); ++j)
        e.amplitude = std::max(e.amplitude, std::abs(x.amplitude.alpha[j] - y.amplitude.alpha[j]));
    e.phase = std::abs(x.phase.value - y.phase.value);
    return e;
}

struct Subdivision {
    std::vector<double> edges;
    std::vector<BranchTable> tables;
    std::vector<LocalityVerdict> verdicts;
    std::vector<BranchPropagator> composed;  ///< per (r, s), joint propagator over the whole interval
    BranchTable direct;
    PropagatorError error;                   ///< composed vs direct, worst over (r, s)

    bool all_two_local() const {
        return std::all_of(verdicts.begin(), verdicts.end(), [](const LocalityVerdict& v) { return v.analytic; });
    }
};

inline Subdivision subdivide(const Scenario& sc, const ScenarioSpectra& spectra, bool parallel = false) {
    Subdivision out;
    out.edges = sc.interval_edges();
    for (std::size_t i = 0; i + 1 < out.edges.size(); ++i) {
        out.tables.push_back(assemble(sc, spectra, out.edges[i], out.edges[i + 1], parallel));
        out.verdicts.push_back(locality_verdict(out.tables.back(), sc));
    }
    out.direct = assemble(sc, spectra, sc.t_initial, sc.t_final, parallel);
    for (std::size_t k = 0; k < out.direct.entries.size(); ++k) {
        BranchPropagator acc = out.tables.front().entries[k].joint;
        for (std::size_t i = 1; i < out.tables.size(); ++i) acc = compose(out.tables[i].entries[k].joint, acc);
        const PropagatorError e = propagator_difference(acc, out.direct.entries[k].joint);
        out.error.amplitude = std::max(out.error.amplitude, e.amplitude);
        out.error.phase = std::max(out.error.phase, e.phase);
        out.composed.push_back(std::move(acc));
    }
    return out;
}

inline Subdivision subdivide(const Scenario& sc, std::size_t n_sub) {
    Scenario copy = sc;
    copy.subdivisions = n_sub;
    copy.breakpoints.clear();
    return subdivide(copy, compute_spectra(copy));
}

/// Reduced state of the two qudits, index r * d_b + s.
struct QuditState {
    std::size_t d_a = 1;
    std::size_t d_b = 1;
    Eigen::MatrixXcd rho;
};

/**
 * rho_{ij} = (1/D) c_i conj(c_j) <f_j|f_i> for branch prefactors c and field
 * states f. `gram(i, j)` = <f_i|f_j>.
 */
inline QuditState qudit_state(std::size_t d_a, std::size_t d_b, std::span<const cplx> prefactors,
                              const Eigen::MatrixXcd& gram) {
    const std::size_t d = d_a * d_b;
    if (prefactors.size() != d || static_cast<std::size_t>(gram.rows()) != d || static_cast<std::size_t>(gram.cols()) != d)
        throw DimensionMismatch("qudit_state: sizes do not match d_a * d_b");
    QuditState st{d_a, d_b, Eigen::MatrixXcd(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))};
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            st.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                prefactors[i] * std::conj(prefactors[j]) * gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) /
                static_cast<double>(d);
    return st;
}

/// Uniform qudit superposition, field in vacuum, evolved branch by branch with the exact U^{rs}.
inline QuditState reduced_qudit_state(const BranchTable& table) {
    const std::size_t d = table.d_a * table.d_b;
    std::vector<cplx> pref(d);
    std::vector<std::vector<cplx>> beta(d);
    for (std::size_t i = 0; i < d; ++i) {
        pref[i] = std::exp(table.entries[i].joint.phase.value);
        beta[i] = table.entries[i].joint.amplitude.mode_amplitudes();
    }
    Eigen::MatrixXcd gram(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = coherent_overlap(beta[i], beta[j]);
    return qudit_state(table.d_a, table.d_b, pref, gram);
}

inline Eigen::MatrixXcd partial_transpose_b(const QuditState& st) {
    Eigen::MatrixXcd out(st.rho.rows(), st.rho.cols());
    for (std::size_t r = 0; r < st.d_a; ++r)
        for (std::size_t s = 0; s < st.d_b; ++s)
            for (std::size_t r2 = 0; r2 < st.d_a; ++r2)
                for (std::size_t s2 = 0; s2 < st.d_b; ++s2)
                    out(static_cast<Eigen::Index>(r * st.d_b + s), static_cast<Eigen::Index>(r2 * st.d_b + s2)) =
                        st.rho(static_cast<Eigen::Index>(r * st.d_b + s2), static_cast<Eigen::Index>(r2 * st.d_b + s));
    return out;
}

inline double negativity(const QuditState& st) {
    if (st.d_a * st.d_b > 16) throw InvalidParameter("negativity: d_a * d_b must not exceed 16");
    const Eigen::MatrixXcd pt = partial_transpose_b(st);
    const Eigen::MatrixXcd herm = 0.5 * (pt + pt.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i) < 0.0) acc -= es.eigenvalues()(i);
    return acc;
}

struct StateValidity {
    double trace_error = 0.0;
    double hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;

    bool ok(double tol = 1e-10) const {
        return trace_error < tol && hermiticity_error < 1e-12 && min_eigenvalue > -tol;
    }
};

inline StateValidity check_state(const QuditState& st) {
    StateValidity v;
    v.trace_error = std::abs(st.rho.trace() - cplx(1.0, 0.0));
    v.hermiticity_error = (st.rho - st.rho.adjoint()).cwiseAbs().maxCoeff();
    const Eigen::MatrixXcd herm = 0.5 * (st.rho + st.rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
    v.min_eigenvalue = es.eigenvalues().minCoeff();
    return v;
}

} // namespace sublocal
