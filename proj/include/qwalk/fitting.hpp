#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "qwalk/errors.hpp"

namespace qwalk {

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double residual_rms = 0.0;
};

inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ConfigError("fit_line: need >= 2 points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw ConfigError("fit_line: degenerate abscissa");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.residual_rms = std::sqrt(ss / n);
    return f;
}

template <std::size_t N>
struct GaussNewtonResult {
    std::array<double, N> params{};
    double residual_rms = 0.0;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

// Solve A x = b for small N by Gaussian elimination with partial pivoting.
// Returns false when A is numerically singular.
template <std::size_t N>
inline bool solve_dense(std::array<std::array<double, N>, N> a, std::array<double, N> b,
                        std::array<double, N>& x) {
    for (std::size_t col = 0; col < N; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < N; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-300) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < N; ++r) {
            const double m = a[r][col] / a[col][col];
            for (std::size_t c = col; c < N; ++c) a[r][c] -= m * a[col][c];
            b[r] -= m * b[col];
        }
    }
    for (std::size_t ri = N; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t c = ri + 1; c < N; ++c) s -= a[ri][c] * x[c];
        x[ri] = s / a[ri][ri];
    }
    return true;
}

}  // namespace detail

// Damped Gauss-Newton (Levenberg-style diagonal damping) for small
// least-squares problems. `eval(params, i, grad)` returns the residual of
// point i and fills grad with d(residual)/d(params); a NaN residual marks the
// parameter vector as infeasible and the step is rejected.
template <std::size_t N, class Eval>
inline GaussNewtonResult<N> damped_gauss_newton(std::size_t n_points,
                                                std::array<double, N> init, Eval&& eval,
                                                int max_iter = 200, double tol = 1e-8) {
    auto cost_of = [&](const std::array<double, N>& p) {
        double c = 0.0;
        std::array<double, N> g;
        for (std::size_t i = 0; i < n_points; ++i) {
            const double r = eval(p, i, g);
            if (!std::isfinite(r)) return std::numeric_limits<double>::infinity();
            c += r * r;
        }
        return c;
    };

    GaussNewtonResult<N> out;
    out.params = init;
    double cost = cost_of(out.params);
    double lambda = 1e-3;

    for (int iter = 0; iter < max_iter; ++iter) {
        out.iterations = iter + 1;
        std::array<std::array<double, N>, N> jtj{};
        std::array<double, N> jtr{};
        for (std::size_t i = 0; i < n_points; ++i) {
            std::array<double, N> g;
            const double r = eval(out.params, i, g);
            if (!std::isfinite(r)) {
                out.converged = false;
                out.residual_rms = std::sqrt(cost / static_cast<double>(n_points));
                return out;
            }
            for (std::size_t a = 0; a < N; ++a) {
                jtr[a] += g[a] * r;
                for (std::size_t b = 0; b < N; ++b) jtj[a][b] += g[a] * g[b];
            }
        }

        bool accepted = false;
        std::array<double, N> step{};
        while (lambda < 1e14) {
            auto damped = jtj;
            for (std::size_t a = 0; a < N; ++a)
                damped[a][a] += lambda * std::max(jtj[a][a], 1e-12);
            std::array<double, N> rhs;
            for (std::size_t a = 0; a < N; ++a) rhs[a] = -jtr[a];
            if (detail::solve_dense(damped, rhs, step)) {
                std::array<double, N> trial = out.params;
                for (std::size_t a = 0; a < N; ++a) trial[a] += step[a];
                const double trial_cost = cost_of(trial);
                if (trial_cost <= cost) {
                    out.params = trial;
                    cost = trial_cost;
                    lambda = std::max(lambda / 3.0, 1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if (!accepted) break;

        double max_rel = 0.0;
        for (std::size_t a = 0; a < N; ++a)
            max_rel = std::max(max_rel,
                               std::abs(step[a]) / std::max(std::abs(out.params[a]), 1e-12));
        if (max_rel < tol) {
            out.converged = true;
            break;
        }
    }
    out.residual_rms = std::sqrt(cost / static_cast<double>(n_points));
    return out;
}

}  // namespace qwalk
