#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sublocal/kgoracle.hpp"

using namespace sublocal;

namespace {

BranchSource gaussian_at(double q, double w, double c) {
    return {ChargeDistribution::gaussian(q, w), PointerTrajectory::stationary(c, 0.0, Shape::point), 0};
}

BranchPropagator mode_solution(const BranchSource& src, double T, double K = 30.0, std::size_t n = 2048,
                               std::size_t nt = 1024) {
    auto grid = make_grid(1.0, K, n);
    return propagate(transform_source(grid, src, uniform_times(0.0, T, nt)), 0.0, T, nt);
}

} // namespace

TEST_CASE("lattice configuration", "[kgoracle]") {
    LatticeConfig cfg = LatticeConfig::centered(8.0, 0.01, 0.5, 1.0);
    CHECK(cfg.n_x == 1601);
    CHECK(cfg.dx() == Catch::Approx(0.01));
    CHECK(cfg.dt_step == Catch::Approx(0.005));
    CHECK_NOTHROW(cfg.validate());
    cfg.dt_step = 0.011;
    CHECK_THROWS_AS(cfg.validate(), CflViolation);
    CHECK_THROWS_AS(LatticeConfig::centered(8.0, 0.01, 1.2, 1.0).validate(), CflViolation);
    CHECK_THROWS_AS(LatticeConfig::centered(8.0, 0.01, 0.5, 0.0).validate(), InvalidParameter);
}

TEST_CASE("zero source leaves the field at zero", "[kgoracle]") {
    const auto cfg = LatticeConfig::centered(6.0, 0.02, 0.5, 1.0);
    const auto snap = solve_retarded(cfg, gaussian_at(0.0, 0.3, 0.0), 0.0, 1.0);
    CHECK(std::all_of(snap.values.begin(), snap.values.end(), [](double v) { return v == 0.0; }));
    CHECK(compare_with_alpha(snap, mode_solution(gaussian_at(0.0, 0.3, 0.0), 1.0, 10.0, 64, 64)) == 0.0);
}

TEST_CASE("steps land on the final time", "[kgoracle]") {
    const auto cfg = LatticeConfig::centered(6.0, 0.02, 0.5, 1.0);
    const auto snap = solve_retarded(cfg, gaussian_at(0.1, 0.3, 0.0), 0.0, 1.003);
    CHECK(snap.steps == 101);
    CHECK(snap.time == 1.003);
    CHECK(solve_retarded(cfg, gaussian_at(0.1, 0.3, 0.0), 0.5, 0.5).steps == 0);
}

TEST_CASE("field is retarded", "[kgoracle]") {
    // support [-0.9, 0.9]; the scheme's numerical cone is x +- (dx/dt) t
    const auto cfg = LatticeConfig::centered(8.0, 0.01, 0.5, 1.0);
    const BranchSource src = gaussian_at(0.5, 0.18, 0.0);
    const double T = 1.5;
    const auto snap = solve_retarded(cfg, src, 0.0, T);
    double inside = 0.0, physical_out = 0.0, numerical_out = 0.0;
    for (std::size_t i = 0; i < snap.x.size(); ++i) {
        const double ax = std::abs(snap.x[i]), v = std::abs(snap.values[i]);
        if (ax < 0.9 + T) inside = std::max(inside, v);
        if (ax > 0.9 + T + 0.3) physical_out = std::max(physical_out, v);
        if (ax > 0.9 + 2.0 * T + 0.02) numerical_out = std::max(numerical_out, v);
    }
    CHECK(inside > 0.01);
    CHECK(numerical_out == 0.0);
    CHECK(physical_out < 1e-3 * inside);
}

TEST_CASE("lattice field agrees with the displacement amplitudes", "[kgoracle][oracle]") {
    const BranchSource src = gaussian_at(0.5, 0.3, 0.0);
    const double T = 2.0;
    const BranchPropagator prop = mode_solution(src, T);
    const auto cfg = LatticeConfig::centered(8.0, 0.01, 0.5, 1.0);
    const auto snap = solve_retarded(cfg, src, 0.0, T, true);
    CHECK(snap.margin_ok);
    const double err = compare_with_alpha(snap, prop);
    CHECK(err < 1e-2);

    SECTION("flipping the sign is caught") {
        FieldSnapshot flipped = snap;
        for (double& v : flipped.values) v = -v;
        CHECK(compare_with_alpha(flipped, prop) == Catch::Approx(2.0).margin(1e-3));
    }
    SECTION("error falls as the lattice is refined") {
        const auto coarse = solve_retarded(LatticeConfig::centered(8.0, 0.02, 0.5, 1.0), src, 0.0, T);
        const double ratio = compare_with_alpha(coarse, prop) / err;
        CHECK(ratio > 3.0);
        CHECK(ratio < 5.0);
    }
}

TEST_CASE("moving source against the lattice", "[kgoracle][oracle]") {
    const BranchSource src{ChargeDistribution::gaussian(0.3, 0.25),
                           PointerTrajectory::linear(-0.5, 0.4, 0.0, 1.5, 0.0, Shape::point), 0};
    const BranchPropagator prop = mode_solution(src, 1.5);
    const auto cfg = LatticeConfig::centered(8.0, 0.01, 0.5, 1.0);
    CHECK(compare_with_alpha(cfg, std::span<const BranchSource>(&src, 1), prop) < 1e-2);
}

TEST_CASE("boundary margin", "[kgoracle]") {
    const auto cfg = LatticeConfig::centered(2.0, 0.02, 0.5, 1.0);
    const BranchSource src = gaussian_at(0.5, 0.1, 0.0);
    CHECK_FALSE(solve_retarded(cfg, src, 0.0, 2.0).margin_ok);
    CHECK_THROWS_AS(solve_retarded(cfg, src, 0.0, 2.0, true), MarginViolation);
    CHECK(solve_retarded(cfg, src, 0.0, 1.0, true).margin_ok);
}

TEST_CASE("comparison edge cases", "[kgoracle]") {
    FieldSnapshot snap;
    snap.x = {0.0};
    snap.values = {0.0};
    const BranchPropagator prop = mode_solution(gaussian_at(0.1, 0.3, 0.0), 0.5, 10.0, 64, 64);
    CHECK(std::isinf(compare_with_alpha(snap, prop)));

    std::ostringstream os;
    snap.write_csv(os);
    CHECK(os.str() == "x,value\n0,0\n");
}
