#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "qwalk/errors.hpp"

namespace qwalk {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

// Coin convention used throughout, recorded in run metadata. The Hadamard
// acts as (psi_L, psi_R) -> ((psi_L + psi_R)/sqrt2, (psi_L - psi_R)/sqrt2);
// psi_L then translates by +l and psi_R by -l. With this orientation the
// initial coin (sqrt(1/3), sqrt(2/3)) drifts toward positive x. The mirror
// orientation is equivalent up to x -> -x.
inline constexpr const char* kCoinConvention =
    "hadamard(plus->L,minus->R); shift L:+l R:-l";

// Real nonnegative coin amplitudes: a0 on the right component, b0 on the
// left, with a0^2 + b0^2 = 1.
class CoinAmplitudes {
public:
    // Validates within `tol` and renormalizes the stored pair exactly.
    static CoinAmplitudes normalized(double a0, double b0, double tol = 1e-12) {
        if (a0 < 0.0 || b0 < 0.0 || !std::isfinite(a0) || !std::isfinite(b0))
            throw ConfigError("coin amplitudes must be finite and nonnegative");
        const double n2 = a0 * a0 + b0 * b0;
        if (std::abs(n2 - 1.0) > tol)
            throw ConfigError("coin amplitudes not normalized: a0^2+b0^2 = " +
                              std::to_string(n2));
        const double inv = 1.0 / std::sqrt(n2);
        return CoinAmplitudes(a0 * inv, b0 * inv);
    }

    double a0() const { return a0_; }
    double b0() const { return b0_; }

private:
    CoinAmplitudes(double a0, double b0) : a0_(a0), b0_(b0) {}
    double a0_;
    double b0_;
};

// Coined walker state on the integer line. Amplitudes live in two flat
// arrays spanning [-radius, radius]; [lo, hi] tracks the occupied window so
// early steps stay cheap. The radius must cover the whole run,
// radius >= lmax * t_max.
class WalkerState {
public:
    WalkerState(const CoinAmplitudes& coin, int radius)
        : radius_(radius),
          psi_l_(2 * static_cast<std::size_t>(radius) + 1),
          psi_r_(2 * static_cast<std::size_t>(radius) + 1) {
        if (radius < 0) throw ConfigError("WalkerState: negative radius");
        psi_l_[idx(0)] = coin.b0();
        psi_r_[idx(0)] = coin.a0();
    }

    int t() const { return t_; }
    int lo() const { return lo_; }
    int hi() const { return hi_; }
    int radius() const { return radius_; }
    // Lattice position of array index 0.
    int offset() const { return -radius_; }

    std::complex<double> psi_l(int x) const { return in_window(x) ? psi_l_[idx(x)] : 0.0; }
    std::complex<double> psi_r(int x) const { return in_window(x) ? psi_r_[idx(x)] : 0.0; }

    std::span<const std::complex<double>> left() const { return psi_l_; }
    std::span<const std::complex<double>> right() const { return psi_r_; }

    void apply_coin() {
        std::complex<double>* l = &psi_l_[idx(lo_)];
        std::complex<double>* r = &psi_r_[idx(lo_)];
        const std::size_t n = static_cast<std::size_t>(hi_ - lo_) + 1;
        for (std::size_t i = 0; i < n; ++i) {
            const std::complex<double> lv = l[i];
            const std::complex<double> rv = r[i];
            l[i] = (lv + rv) * kInvSqrt2;
            r[i] = (lv - rv) * kInvSqrt2;
        }
    }

    // Translate psi_L by +l and psi_R by -l. Pure index permutation, so the
    // norm is exactly preserved.
    void apply_shift(int ell) {
        if (ell < 1) throw ConfigError("apply_shift: step length must be >= 1");
        if (hi_ + ell > radius_ || lo_ - ell < -radius_)
            throw CapacityError("apply_shift: window [" + std::to_string(lo_ - ell) + ", " +
                                std::to_string(hi_ + ell) + "] exceeds radius " +
                                std::to_string(radius_));
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(hi_ - lo_) + 1;
        const std::ptrdiff_t vacated = std::min<std::ptrdiff_t>(n, ell);
        std::complex<double>* lsrc = &psi_l_[idx(lo_)];
        std::complex<double>* rsrc = &psi_r_[idx(lo_)];
        std::copy_backward(lsrc, lsrc + n, lsrc + n + ell);       // L rightward
        std::fill(lsrc, lsrc + vacated, std::complex<double>(0.0));
        std::copy(rsrc, rsrc + n, rsrc - ell);                    // R leftward
        std::fill(rsrc + n - vacated, rsrc + n, std::complex<double>(0.0));
        lo_ -= ell;
        hi_ += ell;
    }

    void step(int ell) {
        apply_coin();
        apply_shift(ell);
        ++t_;
    }

    double total_norm() const {
        double s = 0.0;
        for (int x = lo_; x <= hi_; ++x)
            s += std::norm(psi_l_[idx(x)]) + std::norm(psi_r_[idx(x)]);
        return s;
    }

private:
    std::size_t idx(int x) const { return static_cast<std::size_t>(x + radius_); }
    bool in_window(int x) const { return x >= -radius_ && x <= radius_; }

    int radius_;
    int t_ = 0;
    int lo_ = 0;
    int hi_ = 0;
    std::vector<std::complex<double>> psi_l_;
    std::vector<std::complex<double>> psi_r_;
};

// The walk starts at the origin: psi_R(0) = a0, psi_L(0) = b0, zero elsewhere.
inline WalkerState init_state(const CoinAmplitudes& coin, int radius) {
    return WalkerState(coin, radius);
}

}  // namespace qwalk
