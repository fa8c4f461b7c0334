#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "sublocal/errors.hpp"
#include "sublocal/modegrid.hpp"

namespace sublocal {

/**
 * [phi_I(t, x), phi_I(t', x')] for dt = t - t', dx = x - x', as the direct mode sum
 *
 *   sum_k measure(k) / (2 w_k) (e^{-i w_k dt + i k dx} - c.c.).
 *
 * Mirror pairs (k, -k) are folded first, giving -2i sum_{k>0} measure/(2w) *
 * 2 cos(k dx) sin(w dt) with a fixed summation order. The result is purely
 * imaginary, odd under (dt, dx) -> (-dt, -dx) and even in dx, all exactly.
 */
inline cplx pauli_jordan(const ModeGrid& grid, double dt, double dx) {
    const std::size_t n = grid.n_modes();
    double acc = 0.0;
    for (std::size_t j = n / 2; j < n; ++j) {
        const double w = grid.omega(j);
        acc += grid.measure(j) / w * std::cos(grid.k(j) * dx) * std::sin(w * dt);
    }
    return {0.0, -2.0 * acc};
}

/// Memoizing wrapper around pauli_jordan; concurrent lookups are serialized.
class CommutatorKernel {
public:
    explicit CommutatorKernel(GridPtr grid) : grid_(std::move(grid)) {}

    cplx operator()(double dt, double dx) const {
        const std::pair key{dt, dx};
        {
            std::lock_guard lock(mutex_);
            if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        }
        const cplx v = pauli_jordan(*grid_, dt, dx);
        std::lock_guard lock(mutex_);
        cache_.emplace(key, v);
        return v;
    }

    std::size_t cached() const {
        std::lock_guard lock(mutex_);
        return cache_.size();
    }
    const GridPtr& grid() const noexcept { return grid_; }

private:
    GridPtr grid_;
    mutable std::mutex mutex_;
    mutable std::map<std::pair<double, double>, cplx> cache_;
};

struct SpacetimePoint {
    double dt = 0.0;
    double dx = 0.0;
};

struct MicrocausalityResult {
    double residual = 0.0;        ///< max spacelike |PJ| / max reference |PJ|
    double max_spacelike = 0.0;
    double max_reference = 0.0;
    SpacetimePoint worst{};
};

/// Default timelike normalization set: dx = 0, dt in {0.25, 0.5, 1, 2, 4}.
inline std::vector<SpacetimePoint> default_reference_points() {
    return {{0.25, 0.0}, {0.5, 0.0}, {1.0, 0.0}, {2.0, 0.0}, {4.0, 0.0}};
}

/// n_dt x n_extra points with dt uniform in [-dt_max, dt_max] and
/// |dx| = |dt| + gap + extra, extra uniform in [0, extra_max]; signs alternate.
inline std::vector<SpacetimePoint> spacelike_sample_grid(std::size_t n_dt = 20, std::size_t n_extra = 10, double gap = 0.5,
                                                         double dt_max = 4.0, double extra_max = 4.0) {
    std::vector<SpacetimePoint> pts;
    pts.reserve(n_dt * n_extra);
    for (std::size_t i = 0; i < n_dt; ++i) {
        const double dt = n_dt > 1 ? -dt_max + 2.0 * dt_max * static_cast<double>(i) / static_cast<double>(n_dt - 1) : 0.0;
        for (std::size_t k = 0; k < n_extra; ++k) {
            const double extra = n_extra > 1 ? extra_max * static_cast<double>(k) / static_cast<double>(n_extra - 1) : 0.0;
            const double dx = std::abs(dt) + gap + extra;
            pts.push_back({dt, (i + k) % 2 ? -dx : dx});
        }
    }
    return pts;
}

/// Light-cone leakage of the discretized kernel over strictly spacelike samples.
inline MicrocausalityResult microcausality_residual(const ModeGrid& grid, std::span<const SpacetimePoint> samples,
                                                    std::span<const SpacetimePoint> reference) {
    MicrocausalityResult out;
    if (samples.empty()) return out;
    for (const auto& p : samples)
        if (!(std::abs(p.dx) > std::abs(p.dt)))
            throw InvalidParameter("microcausality_residual: sample (" + std::to_string(p.dt) + ", " +
                                   std::to_string(p.dx) + ") is not spacelike");
    for (const auto& p : reference)
        out.max_reference = std::max(out.max_reference, std::abs(pauli_jordan(grid, p.dt, p.dx)));
    if (!(out.max_reference > 0.0)) throw InvalidParameter("microcausality_residual: reference set has zero kernel");
    for (const auto& p : samples) {
        const double v = std::abs(pauli_jordan(grid, p.dt, p.dx));
        if (v > out.max_spacelike) {
            out.max_spacelike = v;
            out.worst = p;
        }
    }
    out.residual = out.max_spacelike / out.max_reference;
    return out;
}

inline MicrocausalityResult microcausality_residual(const ModeGrid& grid, std::span<const SpacetimePoint> samples) {
    const auto ref = default_reference_points();
    return microcausality_residual(grid, samples, ref);
}

} // namespace sublocal
