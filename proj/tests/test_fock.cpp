#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "sublocal/fock.hpp"
#include "sublocal/sources.hpp"

using namespace sublocal;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

ModeRestriction restriction(std::vector<cplx> beta, cplx phase, double T) { return {std::move(beta), phase, T}; }

} // namespace

TEST_CASE("ladder operators", "[fock]") {
    const FockSpace qubit({1.0}, 1);
    const OperatorMatrix a = annihilation_matrix(qubit, 0);
    CHECK(a(0, 1) == cplx(1.0));
    CHECK(a(0, 0) == cplx{});
    CHECK(a(1, 0) == cplx{});
    CHECK(a(1, 1) == cplx{});

    const FockSpace s({1.0, 2.0}, 6);
    for (std::size_t m = 0; m < 2; ++m) {
        const OperatorMatrix am = annihilation_matrix(s, m);
        const OperatorMatrix n = am.adjoint() * am;
        CHECK((n - number_matrix(s, m)).norm() < 1e-12);
        const OperatorMatrix comm = am * am.adjoint() - am.adjoint() * am;
        for (std::size_t i = 0; i < s.dimension(); ++i) {
            if (s.occupation(i, m) < s.cutoff())
                CHECK(std::abs(comm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) - 1.0) < 1e-12);
        }
    }
    // different modes commute
    const OperatorMatrix a0 = annihilation_matrix(s, 0), a1 = annihilation_matrix(s, 1);
    CHECK((a0 * a1.adjoint() - a1.adjoint() * a0).norm() < 1e-12);
    CHECK_THROWS_AS(annihilation_matrix(s, 2), DimensionMismatch);
}

TEST_CASE("space limits", "[fock]") {
    CHECK_THROWS_AS(FockSpace({1.0, 1.0, 1.0, 1.0, 1.0}, 2), InvalidParameter);
    CHECK_THROWS_AS(FockSpace({1.0, 1.0, 1.0, 1.0}, 12), InvalidParameter);  // 13^4 > 20736
    CHECK_NOTHROW(FockSpace({1.0, 1.0, 1.0, 1.0}, 11));                      // 12^4 = 20736
    CHECK_THROWS_AS(FockSpace({0.0}, 4), InvalidParameter);
    const FockSpace s({1.0, 1.5}, 8);
    CHECK(s.window() == 2);
    CHECK(s.window_states().size() == 9);
}

TEST_CASE("displacement matrix", "[fock]") {
    SECTION("zero amplitude is the identity") {
        const FockSpace s({1.0, 1.3}, 6);
        const OperatorMatrix d = displacement_matrix(s, std::vector<cplx>{0.0, 0.0});
        CHECK((d - OperatorMatrix::Identity(49, 49)).norm() < 1e-14);
    }
    SECTION("vacuum column is the coherent state") {
        const FockSpace s({1.0}, 12);
        const cplx alpha = 0.3;
        const OperatorMatrix d = displacement_matrix(s, std::vector<cplx>{alpha});
        for (int n = 0; n <= 8; ++n) {
            const cplx ref = std::exp(-0.5 * std::norm(alpha)) * std::pow(alpha, n) / std::sqrt(factorial(n));
            CHECK(std::abs(d(n, 0) - ref) < 1e-8);
        }
    }
    SECTION("inverse displacement") {
        const FockSpace s({1.0}, 24);
        const OperatorMatrix d = displacement_matrix(s, std::vector<cplx>{cplx(0.3, -0.4)});
        const OperatorMatrix di = displacement_matrix(s, std::vector<cplx>{cplx(-0.3, 0.4)});
        CHECK(window_norm(s, di * d - OperatorMatrix::Identity(25, 25)) < 1e-8);
        CHECK(unitarity_defect(s, d) < 1e-8);
    }
    SECTION("cutoff rule is enforced") {
        const FockSpace s({1.0}, 7);
        CHECK_THROWS_AS(displacement_matrix(s, std::vector<cplx>{0.5}), CutoffTooSmall);  // needs 8
        CHECK_NOTHROW(displacement_matrix(FockSpace({1.0}, 8), std::vector<cplx>{0.5}));
        CHECK_THROWS_AS(displacement_matrix(s, std::vector<cplx>{0.1, 0.1}), DimensionMismatch);
    }
}

TEST_CASE("branch unitary", "[fock]") {
    const FockSpace s({1.0, 1.7}, 24);
    SECTION("zero source is free evolution") {
        const OperatorMatrix u = branch_unitary_matrix(s, restriction({0.0, 0.0}, cplx{}, 0.8));
        CHECK((u - free_evolution_matrix(s, 0.8)).norm() < 1e-13);
    }
    SECTION("degenerate interval is a phased displacement") {
        const std::vector<cplx> beta{0.2, cplx(0.0, -0.3)};
        const OperatorMatrix u = branch_unitary_matrix(s, restriction(beta, cplx(0.0, 0.4), 0.0));
        CHECK((u - std::polar(1.0, 0.4) * displacement_matrix(s, beta)).norm() < 1e-13);
    }
    SECTION("unitary on the window") {
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> u(-0.35, 0.35);
        for (int i = 0; i < 5; ++i) {
            const ModeRestriction r = restriction({cplx(u(rng), u(rng)), cplx(u(rng), u(rng))}, cplx(0.0, u(rng)), 1.3);
            CHECK(unitarity_defect(s, branch_unitary_matrix(s, r)) < 1e-8);
        }
    }
}

TEST_CASE("factorization with the cross phase", "[fock]") {
    // single mode: D(a + b) = e^{i Im(a conj b)} D(b) D(a)
    const cplx a = 0.3, b = cplx(0.0, 0.2);
    const std::size_t n = 3 * cutoff_rule(std::abs(a + b));
    const FockSpace s({1.0}, n);
    const cplx omega1(0.0, std::imag(a * std::conj(b)));
    const ModeRestriction ab = restriction({a + b}, cplx(0.0, 0.05), 1.0);
    const ModeRestriction pa = restriction({a}, cplx(0.0, 0.02), 1.0);
    const ModeRestriction pb = restriction({b}, cplx(0.0, 0.03), 1.0);
    CHECK(factorization_residual(s, ab, pa, pb, omega1) < 1e-8);
    const double control = factorization_residual(s, ab, pa, pb, cplx{});
    CHECK(control > 1e-4);
    CHECK(control == Catch::Approx(std::abs(std::exp(omega1) - 1.0)).epsilon(1e-6));

    // rho_B = 0
    const ModeRestriction zero = restriction({0.0}, cplx{}, 1.0);
    const ModeRestriction only_a = restriction({a}, cplx(0.0, 0.02), 1.0);
    CHECK(factorization_residual(s, only_a, only_a, zero, cplx{}) < 1e-10);
}

TEST_CASE("Heisenberg action of the propagator", "[fock]") {
    SECTION("free rotation") {
        const FockSpace s({1.0}, 14);
        CHECK(heisenberg_residual(s, restriction({0.0}, cplx{}, 1.0)) < 1e-10);
    }
    SECTION("displaced") {
        const FockSpace s({1.0}, 14);
        CHECK(heisenberg_residual(s, restriction({0.3}, cplx(0.0, 0.1), 1.0)) < 1e-7);
        const FockSpace s2({1.0, 2.2}, 14);
        CHECK(heisenberg_residual(s2, restriction({0.3, cplx(-0.1, 0.2)}, cplx{}, 0.7)) < 1e-7);
    }
    SECTION("residual grows when the cutoff is cut") {
        double prev = 0.0;
        for (std::size_t n : {28u, 20u, 16u, 12u}) {
            const FockSpace s({1.0}, n, 3);
            const double r = heisenberg_residual(s, restriction({0.9}, cplx{}, 1.0));
            CHECK(r >= prev);
            prev = r;
        }
    }
}

TEST_CASE("Trotter splitting", "[fock]") {
    const FockSpace s({1.0, 1.3}, 6);
    SECTION("commuting halves are exact") {
        const OperatorMatrix h_a = number_matrix(s, 0), h_b = 1.3 * number_matrix(s, 1);
        CHECK(trotter_residual(h_a, h_b, 1.0, 1) < 1e-10);
    }
    SECTION("first-order convergence") {
        const auto [h_a, h_b] = toy_trotter_hamiltonians(s, 0.1);
        const auto seq = trotter_sequence(h_a, h_b, 1.0, 64);
        REQUIRE(seq.size() == 7);
        for (std::size_t i = 1; i < seq.size(); ++i) CHECK(seq[i].residual < seq[i - 1].residual);
        const double tail = seq[6].residual / seq[5].residual;
        CHECK(tail == Catch::Approx(0.5).margin(0.02));
        CHECK(loglog_slope(seq) == Catch::Approx(-1.0).margin(0.1));
    }
}

TEST_CASE("coherent overlaps", "[fock]") {
    const std::vector<cplx> a{0.3}, b{cplx(0.0, 0.2)}, z{0.0};
    CHECK(std::abs(coherent_overlap(a, a) - 1.0) < 1e-15);
    CHECK(std::abs(coherent_overlap(z, z) - 1.0) < 1e-15);
    const cplx ref = std::exp(-0.5 * 0.09 - 0.5 * 0.04 + std::conj(a[0]) * b[0]);
    CHECK(std::abs(coherent_overlap(a, b) - ref) < 1e-15);

    // against truncated Fock vectors
    const FockSpace s({1.0, 1.0}, 24);
    const std::vector<cplx> x{0.3, cplx(-0.2, 0.1)}, y{cplx(0.0, 0.2), 0.15};
    const Eigen::VectorXcd vx = displacement_matrix(s, x).col(0), vy = displacement_matrix(s, y).col(0);
    CHECK(std::abs(vx.dot(vy) - coherent_overlap(x, y)) < 1e-8);  // dot conjugates the first argument
    CHECK_THROWS_AS(coherent_overlap(a, x), DimensionMismatch);
}

TEST_CASE("strongest modes", "[fock]") {
    const std::vector<cplx> amp{0.1, cplx(0.0, -0.5), 0.3, 0.5};
    const ModeProjection p = strongest_modes(amp, 2);
    REQUIRE(p.modes.size() == 2);
    CHECK(p.modes[0] == 1);
    CHECK(p.modes[1] == 3);
}
