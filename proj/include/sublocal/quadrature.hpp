#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <utility>
#include <numbers>
#include <vector>

#include "sublocal/errors.hpp"

namespace sublocal::quad {

struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

// P_n(x) and P_n'(x) by the three-term recurrence.
inline std::pair<double, double> legendre(std::size_t n, double x) {
    double p0 = 1.0, p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
    }
    const double dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
    return {p1, dp};
}

} // namespace detail

/// Gauss-Legendre rule on [-1, 1]. Nodes and weights are exactly mirror
/// symmetric: only the non-negative half is computed.
inline Rule gauss_legendre_unit(std::size_t n) {
    if (n == 0) throw InvalidParameter("gauss_legendre: n must be positive");
    Rule rule{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    if (n == 1) {
        rule.weights[0] = 2.0;
        return rule;
    }
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        if (n % 2 == 1 && i == half - 1) {
            x = 0.0;
        } else {
            for (int iter = 0; iter < 100; ++iter) {
                const auto [p, dp] = detail::legendre(n, x);
                const double step = p / dp;
                x -= step;
                if (std::abs(step) < 1e-16) break;
            }
        }
        const double dp = detail::legendre(n, x).second;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

/// Cached unit rule; safe to call concurrently.
inline const Rule& cached_gauss_legendre(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, Rule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, gauss_legendre_unit(n)).first;
    return it->second;
}

/// Integrate f over [a, b] with an n-point Gauss-Legendre rule.
template <typename F>
auto integrate_gl(F&& f, double a, double b, std::size_t n) {
    const Rule& rule = cached_gauss_legendre(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (b + a);
    using R = decltype(f(a));
    R acc{};
    for (std::size_t i = 0; i < n; ++i) acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return acc * half;
}

/// Composite trapezoid weights for n uniform panels of width h.
inline std::vector<double> trapezoid_weights(std::size_t panels, double h) {
    std::vector<double> w(panels + 1, h);
    w.front() = 0.5 * h;
    w.back() = 0.5 * h;
    if (panels == 0) w.front() = 0.0;
    return w;
}

} // namespace sublocal::quad
