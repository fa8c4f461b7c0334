#pragma once

// Check suites behind the CLI subcommands. Each returns one record for the
// JSON report; CSV side tables go to the output directory when enabled.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sublocal/sublocal.hpp"

namespace sublocal::cli {

using json = nlohmann::ordered_json;

inline std::string fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

inline json to_json(cplx z) { return json::array({z.real(), z.imag()}); }

struct RunOptions {
    bool deterministic = false;
    bool strict = false;
    std::string out_dir;   ///< empty: no side files
};

struct CheckRecord {
    std::string name;
    std::string tag;       ///< which quantity the values describe
    bool asserted = true;
    bool passed = true;
    json values = json::object();
    std::vector<std::string> notes;
    std::string inputs_digest;
    double wall_clock_s = 0.0;

    json to_json() const {
        json j;
        j["name"] = name;
        j["tag"] = tag;
        j["inputs_digest"] = inputs_digest;
        j["asserted"] = asserted;
        j["status"] = !asserted ? "info" : passed ? "pass" : "fail";
        j["values"] = values;
        if (!notes.empty()) j["notes"] = notes;
        j["wall_clock_s"] = wall_clock_s;
        return j;
    }
};

/// Everything the suites share, computed once before they run.
struct Context {
    ScenarioConfig cfg;
    bool has_config = false;
    std::string config_digest;
    RunOptions opt;
    GridPtr grid;
    Scenario scenario;
    ScenarioSpectra spectra;
    Subdivision subdivision;
    bool has_tables = false;

    void prepare_tables() {
        if (has_tables) return;
        subdivision = subdivide(scenario, spectra, !opt.deterministic);
        has_tables = true;
    }

    std::ofstream side_file(const std::string& name) const {
        std::filesystem::create_directories(opt.out_dir);
        std::ofstream os(std::filesystem::path(opt.out_dir) / name);
        os.precision(17);
        return os;
    }
    bool csv() const { return !opt.out_dir.empty() && (!has_config || cfg.output.csv); }
};

namespace detail {

inline json verdict_json(const LocalityVerdict& v, const BranchTable& t) {
    json j;
    j["t1"] = t.t1;
    j["t2"] = t.t2;
    j["geometric_spacelike"] = v.geometric;
    j["spacelike_margin"] = v.certificate.margin;
    j["closest_approach"] = v.certificate.d_min;
    j["two_local"] = v.analytic;
    j["consistent"] = v.agree;
    j["max_abs_cross_phase"] = v.max_cross;
    j["max_abs_joint_phase"] = v.max_omega2;
    j["tolerance"] = v.tolerance;
    j["worst_branch_pair"] = {v.worst_r, v.worst_s};
    json entries = json::array();
    for (const auto& e : t.entries)
        entries.push_back({{"r", e.r},
                           {"s", e.s},
                           {"joint_phase_exponent", to_json(e.joint.phase.value)},
                           {"displacement_cross_phase", to_json(e.cross.omega1_cross)},
                           {"phase_exponent_cross_term", to_json(e.cross.omega2_cross)},
                           {"cross_phase", to_json(e.cross.total)}});
    j["branch_pairs"] = std::move(entries);
    return j;
}

} // namespace detail

inline CheckRecord microcausality_suite(const Context& ctx) {
    CheckRecord rec{"microcausality", "commutator-kernel"};
    const auto pts = spacelike_sample_grid(20, 10, ctx.cfg.checks.microcausality_gap);
    const MicrocausalityResult res = microcausality_residual(*ctx.grid, pts);
    rec.values["samples"] = pts.size();
    rec.values["gap"] = ctx.cfg.checks.microcausality_gap;
    rec.values["normalized_residual"] = res.residual;
    rec.values["max_spacelike"] = res.max_spacelike;
    rec.values["max_reference"] = res.max_reference;
    rec.values["worst_point"] = {{"dt", res.worst.dt}, {"dx", res.worst.dx}};
    rec.values["tolerance"] = ctx.cfg.checks.microcausality_tolerance;
    rec.passed = res.residual < ctx.cfg.checks.microcausality_tolerance;

    // continuum comparison on the time axis; limited by the cutoff, reported only
    json bessel = json::array();
    for (double t : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        const cplx v = pauli_jordan(*ctx.grid, t, 0.0);
        const double ref = -0.5 * std::cyl_bessel_j(0.0, t);
        bessel.push_back({{"dt", t}, {"kernel_im", v.imag()}, {"continuum_im", ref}, {"deviation", std::abs(v - cplx(0.0, ref))}});
    }
    rec.values["continuum_comparison"] = std::move(bessel);
    return rec;
}

inline CheckRecord locality_suite(const Context& ctx) {
    CheckRecord rec{"locality", "cross-phase"};
    const Subdivision& sub = ctx.subdivision;
    json slices = json::array();
    bool consistent = true;
    for (std::size_t i = 0; i < sub.tables.size(); ++i) {
        slices.push_back(detail::verdict_json(sub.verdicts[i], sub.tables[i]));
        consistent = consistent && sub.verdicts[i].agree;
        if (!sub.verdicts[i].agree)
            rec.notes.push_back("slice " + std::to_string(i) +
                                ": supports are spacelike but the cross phase exceeds tolerance");
    }
    const LocalityVerdict whole = locality_verdict(sub.direct, ctx.scenario);
    const bool two_local = sub.all_two_local();
    rec.values["slices"] = std::move(slices);
    rec.values["whole_interval"] = detail::verdict_json(whole, sub.direct);
    rec.values["verdict"] = two_local ? "two-local" : "not-two-local";
    rec.values["expected"] = to_string(ctx.cfg.checks.expect);

    bool expected = true;
    if (ctx.cfg.checks.expect == Expectation::two_local) expected = two_local;
    if (ctx.cfg.checks.expect == Expectation::not_two_local) expected = !two_local;
    if (!expected) rec.notes.push_back("verdict differs from the expectation in the config");
    rec.passed = consistent && expected;

    if (ctx.csv()) {
        auto os = ctx.side_file("branch_phases.csv");
        os << "slice,t1,t2,r,s,joint_phase_im,displacement_cross_im,phase_cross_im,cross_abs\n";
        for (std::size_t i = 0; i < sub.tables.size(); ++i)
            for (const auto& e : sub.tables[i].entries)
                os << i << ',' << sub.tables[i].t1 << ',' << sub.tables[i].t2 << ',' << e.r << ',' << e.s << ','
                   << e.joint.phase.value.imag() << ',' << e.cross.omega1_cross.imag() << ','
                   << e.cross.omega2_cross.imag() << ',' << std::abs(e.cross.total) << '\n';
    }
    return rec;
}

inline CheckRecord factorization_suite(const Context& ctx) {
    CheckRecord rec{"factorization", "branch-unitary-factorization"};
    const auto& checks = ctx.cfg.checks;
    const Subdivision& sub = ctx.subdivision;
    const ModeGrid& grid = *ctx.grid;

    // per slice: the two-local reconstruction, when the cross phase allows it
    json slices = json::array();
    bool ok = true;
    for (std::size_t i = 0; i < sub.tables.size(); ++i) {
        const BranchTable& t = sub.tables[i];
        json js{{"t1", t.t1}, {"t2", t.t2}};
        try {
            const TwoLocalDecomposition dec = two_local_decomposition(t, checks.relative_tolerance);
            const auto res = reconstruction_residuals(t, dec, {checks.fock_modes, 8});
            const double worst = *std::max_element(res.begin(), res.end());
            js["decomposition"] = "two-local";
            js["reconstruction_residuals"] = res;
            js["max_reconstruction_residual"] = worst;
            ok = ok && worst < checks.reconstruction_tolerance;
        } catch (const NotTwoLocal& e) {
            js["decomposition"] = "not attempted";
            js["blocking_pair"] = {e.r(), e.s()};
            js["blocking_cross_phase"] = e.magnitude();
        }
        slices.push_back(std::move(js));
    }
    rec.values["reconstruction_tolerance"] = checks.reconstruction_tolerance;
    rec.values["slices"] = std::move(slices);

    // whole interval: the factorization with the computed cross phase, and with it dropped
    const BranchTable& t = sub.direct;
    json pairs = json::array();
    double worst_with = 0.0;
    bool control_ok = true;
    for (const auto& e : t.entries) {
        const BranchPropagator& pa = t.a[e.r];
        const BranchPropagator& pb = t.b[e.s];
        const auto joint_beta = e.joint.amplitude.mode_amplitudes();
        const ModeProjection proj = strongest_modes(joint_beta, checks.fock_modes);
        double biggest = 0.0;
        for (std::size_t j : proj.modes)
            biggest = std::max({biggest, std::abs(joint_beta[j]), std::abs(pa.amplitude.mode_amplitude(j)),
                                std::abs(pb.amplitude.mode_amplitude(j))});
        const FockSpace space(proj.frequencies(grid), std::max<std::size_t>(8, 3 * cutoff_rule(biggest)));
        ModeRestriction ab = restrict_to(e.joint, proj);
        ab.phase += complement_weyl_phase(grid, pa.amplitude.alpha, pb.amplitude.alpha, proj);
        const ModeRestriction ra = restrict_to(pa, proj), rb = restrict_to(pb, proj);
        const double with = factorization_residual(space, ab, ra, rb, e.cross.total);
        const double without = factorization_residual(space, ab, ra, rb, cplx{});
        const cplx from_operators = fock_cross_phase(e.joint, pa, pb);
        worst_with = std::max(worst_with, with);
        // dropping a cross phase of size c must cost about |e^c - 1|
        const bool detectable = std::abs(e.cross.total) > 1e-4;
        const bool detected = without > 0.5 * std::abs(std::exp(e.cross.total) - 1.0);
        if (detectable && !detected) control_ok = false;
        pairs.push_back({{"r", e.r},
                         {"s", e.s},
                         {"fock_dimension", space.dimension()},
                         {"residual_with_cross_phase", with},
                         {"residual_without_cross_phase", without},
                         {"cross_phase", to_json(e.cross.total)},
                         {"cross_phase_from_operators", to_json(from_operators)},
                         {"operator_deviation", std::abs(from_operators - e.cross.total)}});
    }
    rec.values["factorization_tolerance"] = checks.factorization_tolerance;
    rec.values["branch_pairs"] = std::move(pairs);
    rec.values["max_residual_with_cross_phase"] = worst_with;
    rec.values["dropped_phase_control_detects"] = control_ok;
    ok = ok && worst_with < checks.factorization_tolerance;
    if (!control_ok) {
        rec.notes.push_back("dropping a nonzero cross phase went unnoticed");
        if (ctx.opt.strict) ok = false;
    }

    // Heisenberg action on the strongest modes of the first branch pair
    const BranchEntry& e0 = t.entries.front();
    const ModeProjection proj = strongest_modes(e0.joint.amplitude.mode_amplitudes(), checks.fock_modes);
    double biggest = 0.0;
    for (std::size_t j : proj.modes) biggest = std::max(biggest, std::abs(e0.joint.amplitude.mode_amplitude(j)));
    const std::size_t cutoff = proj.modes.size() > 1 ? std::max<std::size_t>(10, 3 * cutoff_rule(biggest))
                                                     : std::max<std::size_t>(14, 3 * cutoff_rule(biggest));
    const FockSpace hs(proj.frequencies(grid), cutoff);
    const double heis = heisenberg_residual(hs, restrict_to(e0.joint, proj));
    rec.values["heisenberg_residual"] = heis;
    rec.values["heisenberg_tolerance"] = checks.heisenberg_tolerance;
    ok = ok && heis < checks.heisenberg_tolerance;

    rec.passed = ok;
    return rec;
}

inline CheckRecord group_suite(const Context& ctx) {
    CheckRecord rec{"group", "propagator-composition"};
    const auto& checks = ctx.cfg.checks;
    // a single interval is checked at its midpoint
    Subdivision local;
    const Subdivision* sub = &ctx.subdivision;
    if (ctx.subdivision.tables.size() < 2) {
        if (ctx.scenario.time_steps % 2) throw InsufficientCoverage("group: time_steps must be even to split at the midpoint");
        Scenario copy = ctx.scenario;
        copy.subdivisions = 2;
        copy.breakpoints.clear();
        local = subdivide(copy, ctx.spectra, !ctx.opt.deterministic);
        sub = &local;
    }
    rec.values["edges"] = sub->edges;
    rec.values["amplitude_error"] = sub->error.amplitude;
    rec.values["phase_error"] = sub->error.phase;
    rec.values["amplitude_tolerance"] = checks.amplitude_tolerance;
    rec.values["phase_tolerance"] = checks.phase_tolerance;
    bool ok = sub->error.amplitude < checks.amplitude_tolerance && sub->error.phase < checks.phase_tolerance;

    // negative control: compose with every slice phase exponent dropped
    double dropped = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < sub->direct.entries.size(); ++k) {
        auto strip = [](BranchPropagator p) {
            p.phase.value = cplx{};
            return p;
        };
        BranchPropagator acc = strip(sub->tables.front().entries[k].joint);
        for (std::size_t i = 1; i < sub->tables.size(); ++i) acc = compose(strip(sub->tables[i].entries[k].joint), acc);
        dropped = std::max(dropped, std::abs(acc.phase.value - sub->direct.entries[k].joint.phase.value));
        scale = std::max(scale, std::abs(sub->direct.entries[k].joint.phase.value));
    }
    const bool applicable = scale > checks.phase_tolerance;
    rec.values["dropped_phase_control"] = {
        {"phase_error", dropped}, {"applicable", applicable}, {"detected", dropped > checks.phase_tolerance}};
    if (applicable && !(dropped > checks.phase_tolerance)) {
        rec.notes.push_back("composition without phase exponents was not caught");
        ok = false;
    }
    rec.passed = ok;
    return rec;
}

inline CheckRecord oracle_suite(const Context& ctx) {
    CheckRecord rec{"oracle", "expected-field"};
    const auto& o = ctx.cfg.oracle;
    const LatticeConfig lattice = LatticeConfig::centered(o.half_width, o.dx, o.cfl, ctx.cfg.field.mass);
    const LatticeConfig coarse = LatticeConfig::centered(o.half_width, 2.0 * o.dx, o.cfl, ctx.cfg.field.mass);
    const Region region{-o.region, o.region};
    const double t1 = ctx.scenario.t_initial, t2 = ctx.scenario.t_final;

    json branches = json::array();
    bool ok = true;
    auto run = [&](const BranchSource& src, const SourceSpectrum& sp, const std::string& label) {
        const BranchPropagator prop = propagate(sp, t1, t2, ctx.scenario.time_steps);
        const FieldSnapshot snap = solve_retarded(lattice, src, t1, t2, ctx.opt.strict);
        const double err = compare_with_alpha(snap, prop, region);
        const double err_coarse = compare_with_alpha(solve_retarded(coarse, src, t1, t2), prop, region);
        FieldSnapshot flipped = snap;
        for (double& v : flipped.values) v = -v;
        json j{{"branch", label},
               {"relative_l2", err},
               {"relative_l2_coarse", err_coarse},
               {"refinement_ratio", err > 0.0 ? err_coarse / err : 0.0},
               {"sign_flip_control", compare_with_alpha(flipped, prop, region)},
               {"margin_ok", snap.margin_ok},
               {"steps", snap.steps}};
        if (!snap.margin_ok) rec.notes.push_back(label + ": source closer than the interval length to the lattice edge");
        const bool charged = src.has_charge();
        if (charged) ok = ok && err < ctx.cfg.checks.oracle_tolerance;
        branches.push_back(std::move(j));
        if (ctx.csv()) {
            auto os = ctx.side_file("field_" + label + ".csv");
            os << "x,lattice,modes\n";
            for (std::size_t i = 0; i < snap.x.size(); ++i)
                if (snap.x[i] >= region.lo && snap.x[i] <= region.hi)
                    os << snap.x[i] << ',' << snap.values[i] << ',' << expected_field(prop, snap.x[i]) << '\n';
        }
    };
    for (std::size_t r = 0; r < ctx.scenario.sources_a.size(); ++r)
        run(ctx.scenario.sources_a[r], ctx.spectra.a[r], "A" + std::to_string(r));
    for (std::size_t s = 0; s < ctx.scenario.sources_b.size(); ++s)
        run(ctx.scenario.sources_b[s], ctx.spectra.b[s], "B" + std::to_string(s));
    rec.values["lattice"] = {{"dx", lattice.dx()}, {"dt", lattice.dt_step}, {"sites", lattice.n_x}};
    rec.values["tolerance"] = ctx.cfg.checks.oracle_tolerance;
    rec.values["branches"] = std::move(branches);
    rec.passed = ok;
    return rec;
}

inline CheckRecord entanglement_suite(const Context& ctx) {
    CheckRecord rec{"entanglement", "reduced-qudit-state"};
    const BranchTable& t = ctx.subdivision.direct;
    const QuditState st = reduced_qudit_state(t);
    const StateValidity v = check_state(st);
    rec.values["d_a"] = st.d_a;
    rec.values["d_b"] = st.d_b;
    rec.values["negativity"] = negativity(st);
    rec.values["trace_error"] = v.trace_error;
    rec.values["hermiticity_error"] = v.hermiticity_error;
    rec.values["min_eigenvalue"] = v.min_eigenvalue;

    // the same phases with the field record ignored: the pure controlled-phase part
    std::vector<cplx> pref;
    for (const auto& e : t.entries) pref.push_back(std::exp(e.joint.phase.value));
    const auto d = static_cast<Eigen::Index>(t.entries.size());
    const QuditState coherent = qudit_state(t.d_a, t.d_b, pref, Eigen::MatrixXcd::Ones(d, d));
    rec.values["phase_only_negativity"] = negativity(coherent);
    rec.passed = v.ok(1e-10) && check_state(coherent).ok(1e-10);
    if (!rec.passed) rec.notes.push_back("reduced state is not a valid density matrix");
    return rec;
}

inline CheckRecord trotter_suite(const Context& ctx) {
    CheckRecord rec{"trotter", "splitting-residual"};
    const FockSpace space({1.0, 1.3}, 6);
    const double coupling = 0.1, duration = 1.0;
    const auto [h_a, h_b] = toy_trotter_hamiltonians(space, coupling);
    const auto seq = trotter_sequence(h_a, h_b, duration, 64);
    const double slope = loglog_slope(seq);
    json pts = json::array();
    for (const auto& p : seq) pts.push_back({{"n", p.n_steps}, {"residual", p.residual}});
    rec.values["frequencies"] = {1.0, 1.3};
    rec.values["cutoff"] = space.cutoff();
    rec.values["coupling"] = coupling;
    rec.values["duration"] = duration;
    rec.values["sequence"] = std::move(pts);
    rec.values["loglog_slope"] = slope;
    rec.passed = std::abs(slope + 1.0) < 0.1;
    if (ctx.csv()) {
        auto os = ctx.side_file("trotter.csv");
        os << "n,residual\n";
        for (const auto& p : seq) os << p.n_steps << ',' << p.residual << '\n';
    }
    return rec;
}

/// Light-cone map of the kernel: dt in [0, 4], dx in [-6, 6].
inline CheckRecord kernel_suite(const Context& ctx, std::ostream& fallback) {
    CheckRecord rec{"kernel", "commutator-kernel", false};
    const std::size_t n_dt = 81, n_dx = 121;
    std::ofstream file;
    std::ostream* os = &fallback;
    if (!ctx.opt.out_dir.empty()) {
        file = ctx.side_file("kernel.csv");
        os = &file;
    }
    os->precision(17);
    *os << "dt,dx,im\n";
    for (std::size_t i = 0; i < n_dt; ++i) {
        const double dt = 4.0 * static_cast<double>(i) / static_cast<double>(n_dt - 1);
        for (std::size_t k = 0; k < n_dx; ++k) {
            const double dx = -6.0 + 12.0 * static_cast<double>(k) / static_cast<double>(n_dx - 1);
            *os << dt << ',' << dx << ',' << pauli_jordan(*ctx.grid, dt, dx).imag() + 0.0 << '\n';  // no -0
        }
    }
    rec.values["points"] = n_dt * n_dx;
    rec.values["file"] = ctx.opt.out_dir.empty() ? "stdout" : "kernel.csv";
    return rec;
}

} // namespace sublocal::cli
