#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "qwalk/errors.hpp"
#include "qwalk/walker.hpp"

namespace qwalk {

inline constexpr double kRangeThreshold = 1e-12;

// Position distribution f(x) at a fixed time, single-realization or
// disorder-averaged. stderr_f is empty unless ensemble-averaged.
struct ProbabilityProfile {
    int t = 0;
    std::vector<int> xs;
    std::vector<double> f;
    std::size_t n_realizations = 1;
    std::vector<double> stderr_f;
};

// Reduced coin-space density matrix, rows/cols indexed (L, R).
struct CoinDensityMatrix {
    std::complex<double> ll, lr, rl, rr;

    double trace() const { return ll.real() + rr.real(); }
    double det() const { return (ll * rr - lr * rl).real(); }
};

// Per-time-step observables; stderr vectors are filled only for
// ensemble-averaged series.
struct ObservableSeries {
    std::vector<int> ts;
    std::vector<double> mean_x;
    std::vector<double> mean_x2;
    std::vector<double> range;
    std::vector<double> entropy;
    std::vector<double> stderr_x;
    std::vector<double> stderr_x2;
    std::vector<double> stderr_range;
    std::vector<double> stderr_entropy;
};

inline ProbabilityProfile probability_profile(const WalkerState& state) {
    ProbabilityProfile p;
    p.t = state.t();
    const int lo = state.lo(), hi = state.hi();
    p.xs.reserve(hi - lo + 1);
    p.f.reserve(hi - lo + 1);
    for (int x = lo; x <= hi; ++x) {
        p.xs.push_back(x);
        p.f.push_back(std::norm(state.psi_l(x)) + std::norm(state.psi_r(x)));
    }
    return p;
}

// First two moments of a normalized profile.
inline std::pair<double, double> moments(const ProbabilityProfile& p) {
    double total = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < p.f.size(); ++i) {
        const double x = static_cast<double>(p.xs[i]);
        total += p.f[i];
        m1 += x * p.f[i];
        m2 += x * x * p.f[i];
    }
    if (std::abs(total - 1.0) > 1e-6)
        throw NumericError("moments: profile not normalized, sum = " + std::to_string(total));
    return {m1, m2};
}

// Width of the numerically nonzero support, x_max - x_min over
// {x : f(x) > threshold}; 0 when nothing exceeds the threshold.
inline double range(const ProbabilityProfile& p, double threshold = kRangeThreshold) {
    int xmin = 0, xmax = 0;
    bool any = false;
    for (std::size_t i = 0; i < p.f.size(); ++i) {
        if (p.f[i] > threshold) {
            if (!any) xmin = p.xs[i];
            xmax = p.xs[i];
            any = true;
        }
    }
    return any ? static_cast<double>(xmax - xmin) : 0.0;
}

// rho_c = Tr_x |psi><psi|.
inline CoinDensityMatrix reduced_coin_density(const WalkerState& state) {
    double ll = 0.0, rr = 0.0;
    std::complex<double> lr = 0.0;
    for (int x = state.lo(); x <= state.hi(); ++x) {
        const auto l = state.psi_l(x);
        const auto r = state.psi_r(x);
        ll += std::norm(l);
        rr += std::norm(r);
        lr += l * std::conj(r);
    }
    return CoinDensityMatrix{ll, lr, std::conj(lr), rr};
}

// Von Neumann entropy in bits from the closed-form 2x2 eigenvalues.
inline double von_neumann_entropy(const CoinDensityMatrix& rho) {
    const double tr = rho.trace();
    const double disc = tr * tr - 4.0 * rho.det();
    const double root = std::sqrt(std::max(disc, 0.0));
    double lambda[2] = {(tr + root) / 2.0, (tr - root) / 2.0};
    double s = 0.0;
    for (double& lam : lambda) {
        if (lam < -1e-10 || lam > 1.0 + 1e-10)
            throw NumericError("von_neumann_entropy: eigenvalue " + std::to_string(lam) +
                               " outside [0, 1]");
        lam = std::min(std::max(lam, 0.0), 1.0);
        if (lam > 0.0) s -= lam * std::log2(lam);
    }
    return std::max(s, 0.0);
}

// One fused pass over the occupied window: everything the per-step ensemble
// recording needs from a state.
struct StepScan {
    double norm = 0.0;
    double mean_x = 0.0;
    double mean_x2 = 0.0;
    double range = 0.0;
    CoinDensityMatrix rho{};
};

inline StepScan scan_state(const WalkerState& state, double threshold = kRangeThreshold) {
    StepScan s;
    double ll = 0.0, rr = 0.0;
    std::complex<double> lr = 0.0;
    int xmin = 0, xmax = 0;
    bool any = false;
    const auto left = state.left();
    const auto right = state.right();
    const int off = state.offset();
    const std::size_t ilo = static_cast<std::size_t>(state.lo() - off);
    const std::size_t ihi = static_cast<std::size_t>(state.hi() - off);
    for (std::size_t i = ilo; i <= ihi; ++i) {
        const std::complex<double> l = left[i];
        const std::complex<double> r = right[i];
        const double f = std::norm(l) + std::norm(r);
        const double x = static_cast<double>(static_cast<int>(i) + off);
        s.norm += f;
        s.mean_x += x * f;
        s.mean_x2 += x * x * f;
        ll += std::norm(l);
        rr += std::norm(r);
        lr += l * std::conj(r);
        if (f > threshold) {
            if (!any) xmin = static_cast<int>(i) + off;
            xmax = static_cast<int>(i) + off;
            any = true;
        }
    }
    s.range = any ? static_cast<double>(xmax - xmin) : 0.0;
    s.rho = CoinDensityMatrix{ll, lr, std::conj(lr), rr};
    return s;
}

}  // namespace qwalk
