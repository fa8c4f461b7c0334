#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "sublocal/branches.hpp"

using namespace sublocal;

namespace {

BranchSource blob(double c, int label, double q = 0.1, double v = 0.0, double t1 = 0.0, double t2 = 1.0) {
    auto path = v == 0.0 ? PointerTrajectory::stationary(c, 0.05) : PointerTrajectory::linear(c, v, t1, t2, 0.05);
    return {ChargeDistribution::gaussian(q, 0.2), path, label};
}

// two branches per qudit, pointers at +-offset around -center / +center
Scenario pair_scenario(double center, std::size_t d_a = 2, std::size_t d_b = 2) {
    Scenario sc;
    sc.grid = make_grid(1.0, 20.0, 512);
    for (std::size_t r = 0; r < d_a; ++r) sc.sources_a.push_back(blob(-center + (r ? 0.1 : -0.1), static_cast<int>(r)));
    for (std::size_t s = 0; s < d_b; ++s) sc.sources_b.push_back(blob(center + (s ? 0.1 : -0.1), static_cast<int>(s)));
    sc.time_steps = 256;
    return sc;
}

} // namespace

TEST_CASE("scenario validation", "[branches]") {
    Scenario sc = pair_scenario(2.0);
    CHECK_NOTHROW(sc.validate());
    Scenario bad = sc;
    bad.grid.reset();
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = sc;
    bad.sources_a.clear();
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = sc;
    for (int i = 0; i < 3; ++i) bad.sources_a.push_back(blob(-2.0, 2 + i));
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = sc;
    bad.t_final = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = sc;
    bad.t_final = 2.0;
    bad.sources_b[0] = blob(2.0, 0, 0.1, 0.1, 0.0, 1.0);
    CHECK_THROWS_AS(bad.validate(), UndefinedTime);

    sc.breakpoints = {0.25, 0.5};
    CHECK(sc.interval_edges() == std::vector<double>{0.0, 0.25, 0.5, 1.0});
    sc.breakpoints = {0.5, 0.25};
    CHECK_THROWS_AS(sc.interval_edges(), InvalidParameter);
}

TEST_CASE("table layout and the split identity", "[branches]") {
    const Scenario sc = pair_scenario(0.3, 2, 3);
    const BranchTable t = assemble(sc);
    REQUIRE(t.entries.size() == 6);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t s = 0; s < 3; ++s) {
            const BranchEntry& e = t.entry(r, s);
            CHECK(e.r == r);
            CHECK(e.s == s);
            const cplx split = t.a[r].phase.value + t.b[s].phase.value + e.cross.omega2_cross;
            CHECK(std::abs(e.joint.phase.value - split) < 1e-12 * std::abs(e.joint.phase.value));
        }
}

TEST_CASE("parallel assembly matches serial", "[branches]") {
    const Scenario sc = pair_scenario(0.5);
    const BranchTable s = assemble(sc, false), p = assemble(sc, true);
    for (std::size_t i = 0; i < s.entries.size(); ++i) CHECK(s.entries[i].cross.total == p.entries[i].cross.total);
}

TEST_CASE("spacelike branches are two-local", "[branches]") {
    const Scenario sc = pair_scenario(2.0);
    const BranchTable t = assemble(sc);
    const LocalityVerdict v = locality_verdict(t, sc);
    CHECK(v.geometric);
    CHECK(v.analytic);
    CHECK(v.agree);
    CHECK(v.max_cross < 1e-9 * v.max_omega2);

    const TwoLocalDecomposition dec = two_local_decomposition(t);
    for (double r : reconstruction_residuals(t, dec)) CHECK(r < 1e-6);
}

TEST_CASE("causal contact is flagged", "[branches]") {
    const Scenario sc = pair_scenario(0.3);
    const BranchTable t = assemble(sc);
    const LocalityVerdict v = locality_verdict(t, sc);
    CHECK_FALSE(v.geometric);
    CHECK_FALSE(v.analytic);
    CHECK(v.agree);  // nothing is claimed without separation
    CHECK(v.max_cross > 1e-4);
    CHECK_THROWS_AS(two_local_decomposition(t), NotTwoLocal);
    try {
        two_local_decomposition(t);
    } catch (const NotTwoLocal& e) {
        CHECK(e.magnitude() > e.tolerance());
        CHECK(e.magnitude() <= v.max_cross);
    }
}

TEST_CASE("one branch on a side makes the cross phase local", "[branches]") {
    // d_a = 1: Omega^{0s} depends only on s, so it is absorbed into U_B^s
    const Scenario sc = pair_scenario(0.3, 1, 2);
    const BranchTable t = assemble(sc);
    CHECK(t.max_cross() > 1e-4);
    const TwoLocalDecomposition dec = two_local_decomposition(t);
    for (double r : reconstruction_residuals(t, dec)) CHECK(r < 1e-6);

    // without absorbing it, the factorized form is off by the cross phase
    TwoLocalDecomposition raw = dec;
    raw.controlled_b = t.b;
    const auto bad = reconstruction_residuals(t, raw);
    CHECK(*std::max_element(bad.begin(), bad.end()) > 1e-5);
}

TEST_CASE("mirrored configuration gives the same cross phase", "[branches]") {
    Scenario sc = pair_scenario(0.4);
    Scenario mirror = sc;
    mirror.sources_a = {blob(0.5, 0), blob(0.3, 1)};
    mirror.sources_b = {blob(-0.3, 0), blob(-0.5, 1)};
    const BranchTable t = assemble(sc), m = assemble(mirror);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t s = 0; s < 2; ++s)
            CHECK(std::abs(t.entry(r, s).cross.total - m.entry(r, s).cross.total) < 1e-12);
}

TEST_CASE("a chargeless branch has no cross phase", "[branches]") {
    Scenario sc = pair_scenario(0.3);
    sc.sources_a[1] = blob(-0.2, 1, 0.0);
    const BranchTable t = assemble(sc);
    for (std::size_t s = 0; s < 2; ++s) {
        CHECK(t.entry(1, s).cross.total == cplx{});
        CHECK(std::abs(t.entry(0, s).cross.total) > 1e-5);
    }
}

TEST_CASE("subdivided propagators compose to the direct one", "[branches][group]") {
    for (double center : {2.0, 0.3}) {
        const Scenario sc = pair_scenario(center);
        for (std::size_t n_sub : {1u, 2u, 4u, 8u}) {
            const Subdivision sub = subdivide(sc, n_sub);
            CHECK(sub.tables.size() == n_sub);
            CHECK(sub.error.amplitude < 1e-8);
            CHECK(sub.error.phase < 1e-8);
        }
    }
}

TEST_CASE("moving branches over uneven breakpoints", "[branches][group]") {
    Scenario sc;
    sc.grid = make_grid(1.0, 16.0, 256);
    sc.t_initial = 0.0;
    sc.t_final = 2.0;
    sc.time_steps = 400;
    sc.sources_a = {blob(-1.3, 0, 0.1, -0.1, 0.0, 2.0), blob(-1.5, 1, 0.1, -0.05, 0.0, 2.0)};
    sc.sources_b = {blob(1.3, 0, 0.1, 0.1, 0.0, 2.0), blob(1.1, 1, 0.1, 0.2, 0.0, 2.0)};
    sc.breakpoints = {0.3, 1.1, 1.25};
    const Subdivision sub = subdivide(sc, compute_spectra(sc));
    REQUIRE(sub.tables.size() == 4);
    CHECK(sub.error.amplitude < 1e-8);
    CHECK(sub.error.phase < 1e-8);

    sc.breakpoints = {0.3333};
    CHECK_THROWS_AS(subdivide(sc, compute_spectra(sc)), InsufficientCoverage);
}

namespace {

QuditState two_qubits(std::vector<cplx> pref) {
    // same field state on every branch
    return qudit_state(2, 2, pref, Eigen::MatrixXcd::Ones(4, 4));
}

} // namespace

TEST_CASE("negativity of reference states", "[branches][entanglement]") {
    const double h = 0.5;
    SECTION("product state") {
        const QuditState st = two_qubits({2 * h, 2 * h, 2 * h, 2 * h});
        CHECK(negativity(st) < 1e-14);
        CHECK(check_state(st).ok());
    }
    SECTION("controlled-Z on |++>") {
        const QuditState st = two_qubits({1.0, 1.0, 1.0, -1.0});
        CHECK(negativity(st) == Catch::Approx(0.5).epsilon(1e-12));
        CHECK(negativity(st) == Catch::Approx(oracle::negativity_2x2(st.rho)).epsilon(1e-10));
    }
    SECTION("orthogonal field states") {
        // perfectly which-path marked: rho = I / 4
        const QuditState mixed = qudit_state(2, 2, std::vector<cplx>(4, 1.0), Eigen::MatrixXcd::Identity(4, 4));
        CHECK(negativity(mixed) < 1e-14);
        CHECK(check_state(mixed).min_eigenvalue == Catch::Approx(0.25));
    }
    SECTION("local phases do not change it") {
        const std::vector<cplx> base{1.0, std::polar(1.0, 0.3), std::polar(1.0, -0.2), std::polar(1.0, 1.1)};
        const double n0 = negativity(two_qubits(base));
        const double pa[2] = {0.0, 0.7}, pb[2] = {0.4, -1.3};
        std::vector<cplx> rot(4);
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t s = 0; s < 2; ++s) rot[r * 2 + s] = base[r * 2 + s] * std::polar(1.0, pa[r] + pb[s]);
        CHECK(negativity(two_qubits(rot)) == Catch::Approx(n0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(qudit_state(2, 2, std::vector<cplx>(3, 1.0), Eigen::MatrixXcd::Identity(4, 4)), DimensionMismatch);
}

TEST_CASE("reduced qudit states from the field", "[branches][entanglement]") {
    const BranchTable near = assemble(pair_scenario(0.3));
    const BranchTable far = assemble(pair_scenario(2.0));
    for (const BranchTable* t : {&near, &far}) {
        const QuditState st = reduced_qudit_state(*t);
        CHECK(check_state(st).ok());
        CHECK(negativity(st) == Catch::Approx(oracle::negativity_2x2(st.rho)).margin(1e-12));
    }
    // here the which-path information in the field outweighs the cross phase
    CHECK(negativity(reduced_qudit_state(near)) >= 0.0);

    // with the field traced as if it carried no record, only the phases act:
    // N = |sin(theta / 2)| / 2, theta the alternating sum of cross phases
    std::vector<cplx> pref;
    for (const auto& e : near.entries) pref.push_back(std::exp(e.joint.phase.value));
    const double theta = (near.entry(0, 0).cross.omega2_cross - near.entry(0, 1).cross.omega2_cross -
                          near.entry(1, 0).cross.omega2_cross + near.entry(1, 1).cross.omega2_cross).imag();
    CHECK(std::abs(theta) > 1e-5);
    CHECK(negativity(two_qubits(pref)) == Catch::Approx(0.5 * std::abs(std::sin(0.5 * theta))).epsilon(1e-8));
}
