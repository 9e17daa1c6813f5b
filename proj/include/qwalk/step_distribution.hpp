#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qwalk/errors.hpp"
#include "qwalk/numeric.hpp"
#include "qwalk/rng.hpp"

namespace qwalk {

// Truncated power-law step-length distribution
//   P(l) = A * l^(-1-delta),  l = 1..lmax,
// with A fixed by normalization. Immutable after construction and safe to
// share across threads.
struct StepLengthDistribution {
    double delta = 0.0;
    int lmax = 1;
    double norm_A = 1.0;
    std::vector<double> pmf;  // pmf[i] = P(l = i+1)
    std::vector<double> cdf;  // cdf[i] = P(l <= i+1)
};

inline StepLengthDistribution build_distribution(double delta, int lmax) {
    if (lmax < 1) throw ConfigError("build_distribution: lmax must be >= 1");
    if (!(delta >= 0.0)) throw ConfigError("build_distribution: delta must be >= 0");

    StepLengthDistribution d;
    d.delta = delta;
    d.lmax = lmax;
    d.pmf.resize(lmax);
    d.cdf.resize(lmax);

    // Tail weights underflow to zero for large delta*log(lmax); the entries
    // then clamp to 0, which is the documented behavior.
    KahanSum total;
    for (int l = 1; l <= lmax; ++l) {
        const double w = std::exp(-(1.0 + delta) * std::log(static_cast<double>(l)));
        d.pmf[l - 1] = w;
        total.add(w);
    }
    d.norm_A = 1.0 / total.value();

    KahanSum running;
    for (int i = 0; i < lmax; ++i) {
        d.pmf[i] *= d.norm_A;
        running.add(d.pmf[i]);
        d.cdf[i] = running.value();
    }
    return d;
}

inline double pmf_at(const StepLengthDistribution& d, int ell) {
    if (ell < 1 || ell > d.lmax)
        throw ConfigError("pmf_at: step length " + std::to_string(ell) + " out of [1, " +
                          std::to_string(d.lmax) + "]");
    return d.pmf[ell - 1];
}

// Inverse-CDF sample consuming exactly one uniform variate. The fixed
// one-draw-per-step budget keeps ensemble streams aligned and reproducible.
template <class URBG>
inline int sample_step(const StepLengthDistribution& d, URBG& gen) {
    const double u = uniform_unit(gen);
    const auto it = std::lower_bound(d.cdf.begin(), d.cdf.end(), u);
    if (it == d.cdf.end()) return d.lmax;  // u above cdf.back() by rounding
    return static_cast<int>(it - d.cdf.begin()) + 1;
}

}  // namespace qwalk
