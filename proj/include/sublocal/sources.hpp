#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sublocal/errors.hpp"
#include "sublocal/modegrid.hpp"
#include "sublocal/quadrature.hpp"

namespace sublocal {

enum class Shape { gaussian, point };

inline std::string to_string(Shape s) { return s == Shape::gaussian ? "gaussian" : "point"; }

/**
 * A Gaussian of given width, hard-truncated at `truncation_multiplier * width`
 * and renormalized so it integrates to `total`. `point` is the zero-width limit.
 */
struct TruncatedProfile {
    Shape shape = Shape::gaussian;
    double total = 1.0;
    double width = 1.0;
    double truncation_multiplier = 5.0;

    void validate(const char* what) const {
        if (shape == Shape::gaussian && !(width > 0.0))
            throw InvalidParameter(std::string(what) + ": width must be positive");
        if (!(truncation_multiplier > 0.0))
            throw InvalidParameter(std::string(what) + ": truncation multiplier must be positive");
    }

    double radius() const noexcept { return shape == Shape::point ? 0.0 : truncation_multiplier * width; }

    /// Value at displacement u; exactly zero beyond the truncation radius.
    double operator()(double u) const {
        if (shape == Shape::point) return 0.0;
        if (std::abs(u) > radius()) return 0.0;
        return total * normalization() * std::exp(-0.5 * u * u / (width * width));
    }

    /// \int profile(u) e^{-iku} du; real and even because the profile is even.
    double transform(double k) const {
        if (shape == Shape::point || total == 0.0) return total;
        const double r = radius();
        const std::size_t n = 32 + static_cast<std::size_t>(std::ceil(1.5 * std::abs(k) * r));
        const double c = total * normalization();
        const double inv2w2 = 0.5 / (width * width);
        return 2.0 * quad::integrate_gl([&](double u) { return c * std::exp(-u * u * inv2w2) * std::cos(k * u); },
                                        0.0, r, n);
    }

    double normalization() const {
        const double m = truncation_multiplier;
        return 1.0 / (width * std::sqrt(2.0 * std::numbers::pi) * std::erf(m / std::numbers::sqrt2));
    }
};

/// sigma(x): the charge distribution of a particle about its centre.
struct ChargeDistribution {
    TruncatedProfile profile;

    static ChargeDistribution gaussian(double charge, double width, double truncation_multiplier = 5.0) {
        ChargeDistribution d{{Shape::gaussian, charge, width, truncation_multiplier}};
        d.profile.validate("ChargeDistribution");
        return d;
    }
    static ChargeDistribution point(double charge) { return {{Shape::point, charge, 0.0, 1.0}}; }

    double charge() const noexcept { return profile.total; }
    double radius() const noexcept { return profile.radius(); }
};

/**
 * Prescribed centre-of-mass density |psi(t, x)|^2 of a pointer state: a
 * truncated Gaussian of width `spread(t)` centred on a piecewise-linear path.
 * With a single knot the trajectory is stationary and defined for all times.
 */
class PointerTrajectory {
public:
    static PointerTrajectory stationary(double center, double spread, Shape shape = Shape::gaussian,
                                        double truncation_multiplier = 5.0) {
        return PointerTrajectory({0.0}, {center}, spread, 0.0, shape, truncation_multiplier);
    }

    static PointerTrajectory linear(double center_at_begin, double velocity, double t_begin, double t_end,
                                    double spread, Shape shape = Shape::gaussian,
                                    double truncation_multiplier = 5.0) {
        return PointerTrajectory({t_begin, t_end},
                                 {center_at_begin, center_at_begin + velocity * (t_end - t_begin)}, spread, 0.0,
                                 shape, truncation_multiplier);
    }

    static PointerTrajectory piecewise(std::vector<double> times, std::vector<double> centers, double spread,
                                       Shape shape = Shape::gaussian, double truncation_multiplier = 5.0) {
        return PointerTrajectory(std::move(times), std::move(centers), spread, 0.0, shape, truncation_multiplier);
    }

    /// Linear growth of the spread, s(t) = s0 + rate * (t - first knot).
    PointerTrajectory& with_spread_rate(double rate) {
        spread_rate_ = rate;
        return *this;
    }

    bool stationary_path() const noexcept { return knot_times_.size() == 1; }
    double t_begin() const noexcept {
        return stationary_path() ? -std::numeric_limits<double>::infinity() : knot_times_.front();
    }
    double t_end() const noexcept {
        return stationary_path() ? std::numeric_limits<double>::infinity() : knot_times_.back();
    }
    bool defined_at(double t) const noexcept {
        const double tol = 1e-12 * std::max(1.0, std::abs(t));
        return t >= t_begin() - tol && t <= t_end() + tol;
    }
    std::span<const double> knot_times() const noexcept { return knot_times_; }

    double center(double t) const {
        require(t);
        if (stationary_path()) return knot_centers_.front();
        if (t <= knot_times_.front()) return knot_centers_.front();
        if (t >= knot_times_.back()) return knot_centers_.back();
        const auto it = std::upper_bound(knot_times_.begin(), knot_times_.end(), t);
        const std::size_t i = static_cast<std::size_t>(it - knot_times_.begin()) - 1;
        const double f = (t - knot_times_[i]) / (knot_times_[i + 1] - knot_times_[i]);
        return knot_centers_[i] + f * (knot_centers_[i + 1] - knot_centers_[i]);
    }

    double spread(double t) const {
        require(t);
        const double t0 = stationary_path() ? 0.0 : knot_times_.front();
        const double s = spread0_ + spread_rate_ * (t - t0);
        if (shape_ == Shape::gaussian && !(s > 0.0)) throw InvalidParameter("PointerTrajectory: spread became non-positive");
        return s;
    }

    /// |psi(t, .)|^2 as a unit-mass truncated profile.
    TruncatedProfile density_profile(double t) const {
        return {shape_, 1.0, shape_ == Shape::point ? 0.0 : spread(t), truncation_multiplier_};
    }

    double radius(double t) const { return density_profile(t).radius(); }
    Shape shape() const noexcept { return shape_; }

private:
    PointerTrajectory(std::vector<double> times, std::vector<double> centers, double spread, double rate, Shape shape,
                      double truncation_multiplier)
        : knot_times_(std::move(times)), knot_centers_(std::move(centers)), spread0_(spread), spread_rate_(rate),
          shape_(shape), truncation_multiplier_(truncation_multiplier) {
        if (knot_times_.empty() || knot_times_.size() != knot_centers_.size())
            throw InvalidParameter("PointerTrajectory: knot times and centers must be non-empty and equal length");
        for (std::size_t i = 1; i < knot_times_.size(); ++i)
            if (!(knot_times_[i] > knot_times_[i - 1]))
                throw InvalidParameter("PointerTrajectory: knot times must be strictly increasing");
        if (shape_ == Shape::gaussian && !(spread0_ > 0.0))
            throw InvalidParameter("PointerTrajectory: spread must be positive");
        if (!(truncation_multiplier_ > 0.0))
            throw InvalidParameter("PointerTrajectory: truncation multiplier must be positive");
    }

    void require(double t) const {
        if (!defined_at(t))
            throw UndefinedTime("trajectory is not defined at t = " + std::to_string(t));
    }

    std::vector<double> knot_times_;
    std::vector<double> knot_centers_;
    double spread0_;
    double spread_rate_;
    Shape shape_;
    double truncation_multiplier_;
};

struct SupportInterval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const noexcept { return hi - lo; }
};

/// Gap between two intervals, zero when they overlap.
inline double gap(const SupportInterval& a, const SupportInterval& b) noexcept {
    return std::max({0.0, b.lo - a.hi, a.lo - b.hi});
}

/// rho^r(t, x) = \int dy sigma(x - y) |psi^r(t, y)|^2 for one branch.
struct BranchSource {
    ChargeDistribution charge;
    PointerTrajectory trajectory;
    int label = 0;

    bool has_charge() const noexcept { return charge.charge() != 0.0; }
    double total_radius(double t) const { return charge.radius() + trajectory.radius(t); }
};

inline SupportInterval support_at(const BranchSource& source, double t) {
    const double c = source.trajectory.center(t);
    if (!source.has_charge()) return {c, c};
    const double r = source.total_radius(t);
    return {c - r, c + r};
}

/// Branch density by quadrature of the convolution; exactly zero outside support_at(t).
inline double branch_density(const BranchSource& source, double t, double x) {
    const SupportInterval sup = support_at(source, t);
    if (!source.has_charge()) return 0.0;
    if (x < sup.lo || x > sup.hi) return 0.0;
    const double c = source.trajectory.center(t);
    const TruncatedProfile& sigma = source.charge.profile;
    const TruncatedProfile psi2 = source.trajectory.density_profile(t);
    if (sigma.shape == Shape::point && psi2.shape == Shape::point)
        throw InvalidParameter("branch_density: point charge on a point pointer state has no density");
    if (sigma.shape == Shape::point) return sigma.total * psi2(x - c);
    if (psi2.shape == Shape::point) return sigma(x - c);

    // integrate over y in supp(psi2) intersected with supp(sigma(x - .))
    const double lo = std::max(c - psi2.radius(), x - sigma.radius());
    const double hi = std::min(c + psi2.radius(), x + sigma.radius());
    if (!(hi > lo)) return 0.0;
    return quad::integrate_gl([&](double y) { return sigma(x - y) * psi2(y - c); }, lo, hi, 64);
}

/**
 * rho~(t, k) for every grid mode on the given (strictly increasing) times.
 * The convolution becomes a product of the two profile transforms times the
 * translation phase e^{-ikc(t)}; each transform is a Gauss-Legendre quadrature
 * over the profile's compact support.
 */
inline SourceSpectrum transform_source(const GridPtr& grid, const BranchSource& source, std::span<const double> times) {
    SourceSpectrum spectrum(grid, std::vector<double>(times.begin(), times.end()));
    if (!source.has_charge()) {
        for (double t : times) (void)source.trajectory.center(t); // still validates the time range
        return spectrum;
    }
    const std::size_t n = grid->n_modes();
    std::vector<double> shape_factor(n);
    double cached_spread = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const double t = times[ti];
        const double c = source.trajectory.center(t);
        const TruncatedProfile psi2 = source.trajectory.density_profile(t);
        if (!(psi2.width == cached_spread)) {
            cached_spread = psi2.width;
            for (std::size_t j = 0; j < n / 2; ++j) {
                const double k = grid->k(n - 1 - j);
                const double f = source.charge.profile.transform(k) * psi2.transform(k);
                shape_factor[j] = shape_factor[n - 1 - j] = f;
            }
        }
        auto row = spectrum.row(ti);
        for (std::size_t j = 0; j < n; ++j) row[j] = shape_factor[j] * std::polar(1.0, -grid->k(j) * c);
    }
    return spectrum;
}

struct BranchDistance {
    double distance = std::numeric_limits<double>::infinity();
    std::size_t r = 0;
    std::size_t s = 0;
    double time = 0.0;
};

namespace detail {

// Uniform samples on [t1, t2] merged with trajectory knots inside the interval.
inline std::vector<double> sample_times(std::span<const BranchSource> a, std::span<const BranchSource> b, double t1,
                                        double t2, std::size_t n) {
    std::vector<double> t = uniform_times(t1, t2, std::max<std::size_t>(n, 2) - 1);
    for (auto group : {a, b})
        for (const auto& src : group)
            for (double k : src.trajectory.knot_times())
                if (!src.trajectory.stationary_path() && k > t1 && k < t2) t.push_back(k);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

} // namespace detail

/// Sampled d_min = min over time and branch pairs of the gap between supports.
inline BranchDistance min_branch_distance(std::span<const BranchSource> sources_a,
                                          std::span<const BranchSource> sources_b, double t1, double t2,
                                          std::size_t n_time_samples = 65) {
    BranchDistance best;
    if (sources_a.empty() || sources_b.empty()) return best;
    for (double t : detail::sample_times(sources_a, sources_b, t1, t2, n_time_samples)) {
        for (std::size_t r = 0; r < sources_a.size(); ++r) {
            const SupportInterval ia = support_at(sources_a[r], t);
            for (std::size_t s = 0; s < sources_b.size(); ++s) {
                const double d = gap(ia, support_at(sources_b[s], t));
                if (d < best.distance) best = {d, r, s, t};
            }
        }
    }
    return best;
}

struct SpacelikeCertificate {
    bool separated = false;
    /// min over pairs and sampled (t, t') of gap(A(t), B(t')) - |t - t'|
    double margin = std::numeric_limits<double>::infinity();
    std::size_t r = 0;
    std::size_t s = 0;
    double d_min = std::numeric_limits<double>::infinity();
};

/**
 * Sufficient test that every A-support event is spacelike to every B-support
 * event in [t1, t2]: gap(A(t), B(t')) > |t - t'| + safety_margin for all
 * sampled t, t', with the two supports never swapping sides. For stationary
 * sources this reduces to d_min > t2 - t1.
 */
inline SpacelikeCertificate spacelike_separated(std::span<const BranchSource> sources_a,
                                                std::span<const BranchSource> sources_b, double t1, double t2,
                                                std::size_t n_time_samples = 65, double safety_margin = 0.0) {
    SpacelikeCertificate cert;
    const BranchDistance dm = min_branch_distance(sources_a, sources_b, t1, t2, n_time_samples);
    cert.d_min = dm.distance;
    if (sources_a.empty() || sources_b.empty()) {
        cert.separated = true;
        return cert;
    }
    const std::vector<double> ts = detail::sample_times(sources_a, sources_b, t1, t2, n_time_samples);
    bool crossed = false;
    for (std::size_t r = 0; r < sources_a.size(); ++r) {
        std::vector<SupportInterval> ia;
        for (double t : ts) ia.push_back(support_at(sources_a[r], t));
        for (std::size_t s = 0; s < sources_b.size(); ++s) {
            std::vector<SupportInterval> ib;
            for (double t : ts) ib.push_back(support_at(sources_b[s], t));
            const bool b_right = ib.front().lo >= ia.front().hi;
            for (std::size_t i = 0; i < ts.size(); ++i) {
                // equal-time ordering must not flip
                if ((ib[i].lo >= ia[i].hi) != b_right) crossed = true;
                for (std::size_t k = 0; k < ts.size(); ++k) {
                    const double m = gap(ia[i], ib[k]) - std::abs(ts[i] - ts[k]);
                    if (m < cert.margin) {
                        cert.margin = m;
                        cert.r = r;
                        cert.s = s;
                    }
                }
            }
        }
    }
    cert.separated = !crossed && cert.margin > safety_margin;
    return cert;
}

} // namespace sublocal
