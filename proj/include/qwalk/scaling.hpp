#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qwalk/errors.hpp"
#include "qwalk/fitting.hpp"
#include "qwalk/observables.hpp"

namespace qwalk {

// f(x,t) rescaled as g(z) = f * t^gamma against z = x / t^gamma.
struct CollapsedProfile {
    int t = 0;
    double gamma = 0.5;
    std::vector<double> zs;
    std::vector<double> gs;
    std::vector<double> gs_err;  // empty unless the source profile carried stderr
    double z_max_fit = 0.0;      // universal-region cutoff, set by cutoff detection
};

// Parameters of g(z) = a * exp(-b z^c) on z < z_star.
struct StretchedExpFit {
    double a = 0.0, b = 0.0, c = 0.0;
    double z_star = 0.0;
    double residual_rms = 0.0;  // rms of log-space residuals
    bool converged = false;
};

struct PowerTailCheck {
    double slope = 0.0;
    bool tail_present = false;
    double z_span = 0.0;
    std::size_t n_points = 0;
};

// Linearized fits of <x> = t/(b1 + b2 sqrt(t)) and <x^2> = t^2/(b3 + b4 sqrt(t)).
struct MomentFit {
    double b1 = 0.0, b2 = 0.0;
    double b3 = 0.0, b4 = 0.0;
    double residual_rms_mean = 0.0;
    double residual_rms_second = 0.0;
    bool mean_fit_available = false;
    bool physical = false;  // b3 > 0
};

// <x>/sqrt(t) = beta0 + beta * delta^kappa over a delta scan.
struct MeanScalingFit {
    double beta0 = 0.0, beta = 0.0, kappa = 0.0;
    double residual_rms = 0.0;
    bool converged = false;
    double delta_lo = 0.0, delta_hi = 0.0;
};

// R/t = s + q * exp(-r * delta) over a delta scan.
struct RangeScalingFit {
    double s = 0.0, q = 0.0, r = 0.0;
    double residual_rms = 0.0;
    bool converged = false;
    double delta_lo = 0.0, delta_hi = 0.0;
};

struct CrossoverReport {
    double delta_star = 0.0;
    bool above_grid = false;
    std::vector<double> grid_deltas;
    std::vector<bool> tail_present;       // any lmax shows a tail at this delta
    std::vector<double> max_param_spread; // max over (a,b,c) of relative spread across lmax
};

inline CollapsedProfile collapse_profile(const ProbabilityProfile& p, double gamma) {
    if (p.t < 1) throw ConfigError("collapse_profile: profile time must be >= 1");
    if (!(gamma > 0.0)) throw ConfigError("collapse_profile: gamma must be > 0");
    CollapsedProfile c;
    c.t = p.t;
    c.gamma = gamma;
    const double scale = std::pow(static_cast<double>(p.t), gamma);
    c.zs.resize(p.xs.size());
    c.gs.resize(p.f.size());
    for (std::size_t i = 0; i < p.xs.size(); ++i) {
        c.zs[i] = static_cast<double>(p.xs[i]) / scale;
        c.gs[i] = p.f[i] * scale;
    }
    if (!p.stderr_f.empty()) {
        c.gs_err.resize(p.stderr_f.size());
        for (std::size_t i = 0; i < p.stderr_f.size(); ++i) c.gs_err[i] = p.stderr_f[i] * scale;
    }
    c.z_max_fit = c.zs.empty() ? 0.0 : c.zs.back();
    return c;
}

namespace detail {

inline std::vector<std::size_t> window_indices(const CollapsedProfile& c, double z_lo,
                                               double z_hi) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < c.zs.size(); ++i)
        if (c.zs[i] >= z_lo && c.zs[i] <= z_hi) idx.push_back(i);
    return idx;
}

}  // namespace detail

// Fit log g = log a - b z^c on [z_lo, z_hi] by damped Gauss-Newton over
// (log a, log b, c).
inline StretchedExpFit fit_stretched_exponential(const CollapsedProfile& c, double z_lo,
                                                 double z_hi) {
    const auto idx = detail::window_indices(c, z_lo, z_hi);
    if (idx.size() < 10)
        throw ConfigError("fit_stretched_exponential: need >= 10 points in window, have " +
                          std::to_string(idx.size()));
    std::vector<double> z, logg;
    z.reserve(idx.size());
    logg.reserve(idx.size());
    for (auto i : idx) {
        if (!(c.gs[i] > 0.0))
            throw ConfigError("fit_stretched_exponential: nonpositive g in window");
        z.push_back(c.zs[i]);
        logg.push_back(std::log(c.gs[i]));
    }

    const double u0 = logg.front();
    double b0 = 1.0;
    if (z.back() > 0.0) b0 = std::max((u0 - logg.back()) / z.back(), 1e-3);
    const std::array<double, 3> init{u0, std::log(b0), 1.0};

    auto eval = [&](const std::array<double, 3>& p, std::size_t i,
                    std::array<double, 3>& grad) {
        const double u = p[0], v = p[1], cc = p[2];
        const double zc = z[i] > 0.0 ? std::pow(z[i], cc) : 0.0;
        const double model = u - std::exp(v) * zc;
        grad[0] = -1.0;
        grad[1] = std::exp(v) * zc;
        grad[2] = z[i] > 0.0 ? std::exp(v) * zc * std::log(z[i]) : 0.0;
        return logg[i] - model;
    };
    const auto gn = damped_gauss_newton<3>(z.size(), init, eval);

    StretchedExpFit fit;
    fit.a = std::exp(gn.params[0]);
    fit.b = std::exp(gn.params[1]);
    fit.c = gn.params[2];
    fit.z_star = z_hi;
    fit.residual_rms = gn.residual_rms;
    fit.converged = gn.converged && fit.c > 0.0;
    return fit;
}

// Log-log slope over [z_lo, z_hi]; a z^-2 tail is reported when the slope is
// within 0.3 of -2 over a window spanning at least a factor 2 in z.
inline PowerTailCheck check_power_tail(const CollapsedProfile& c, double z_lo, double z_hi) {
    std::vector<double> lz, lg;
    for (std::size_t i = 0; i < c.zs.size(); ++i) {
        if (c.zs[i] >= z_lo && c.zs[i] <= z_hi && c.zs[i] > 0.0 && c.gs[i] > 0.0) {
            lz.push_back(std::log(c.zs[i]));
            lg.push_back(std::log(c.gs[i]));
        }
    }
    if (lz.size() < 8)
        throw ConfigError("check_power_tail: need >= 8 positive points in window, have " +
                          std::to_string(lz.size()));
    PowerTailCheck out;
    out.n_points = lz.size();
    out.z_span = std::exp(lz.back() - lz.front());
    out.slope = fit_line(lz, lg).slope;
    out.tail_present = std::abs(out.slope + 2.0) <= 0.3 && out.z_span >= 2.0;
    return out;
}

inline MomentFit fit_moment_closed_forms(const ObservableSeries& s, int t_lo) {
    if (t_lo < 1) throw ConfigError("fit_moment_closed_forms: t_lo must be >= 1");
    std::vector<double> sqrt_t, y1, y2;
    bool mean_ok = true;
    for (std::size_t i = 0; i < s.ts.size(); ++i) {
        if (s.ts[i] < t_lo) continue;
        const double t = static_cast<double>(s.ts[i]);
        sqrt_t.push_back(std::sqrt(t));
        if (s.mean_x[i] <= 0.0)
            mean_ok = false;
        else
            y1.push_back(t / s.mean_x[i]);
        if (s.mean_x2[i] <= 0.0)
            throw ConfigError("fit_moment_closed_forms: nonpositive <x^2> in window");
        y2.push_back(t * t / s.mean_x2[i]);
    }
    if (sqrt_t.size() < 2) throw ConfigError("fit_moment_closed_forms: window too small");

    MomentFit fit;
    const LinearFit second = fit_line(sqrt_t, y2);
    fit.b3 = second.intercept;
    fit.b4 = second.slope;
    fit.residual_rms_second = second.residual_rms;
    fit.physical = fit.b3 > 0.0;
    if (mean_ok) {
        const LinearFit first = fit_line(sqrt_t, y1);
        fit.b1 = first.intercept;
        fit.b2 = first.slope;
        fit.residual_rms_mean = first.residual_rms;
        fit.mean_fit_available = true;
    }
    return fit;
}

enum class MomentKind { first, second };

// Log-log slope of a moment over [t_lo, t_hi]; the window must span at least
// a factor 4 in t.
inline double fit_growth_exponent(const ObservableSeries& s, MomentKind which, int t_lo,
                                  int t_hi) {
    if (t_lo < 1 || t_hi < 4 * t_lo)
        throw ConfigError("fit_growth_exponent: window must span a factor >= 4 in t");
    std::vector<double> lt, lm;
    for (std::size_t i = 0; i < s.ts.size(); ++i) {
        if (s.ts[i] < t_lo || s.ts[i] > t_hi) continue;
        const double m = which == MomentKind::first ? s.mean_x[i] : s.mean_x2[i];
        if (m <= 0.0)
            throw ConfigError("fit_growth_exponent: nonpositive moment at t = " +
                              std::to_string(s.ts[i]));
        lt.push_back(std::log(static_cast<double>(s.ts[i])));
        lm.push_back(std::log(m));
    }
    if (lt.size() < 2) throw ConfigError("fit_growth_exponent: window too small");
    return fit_line(lt, lm).slope;
}

// Fit y = beta0 + beta * delta^kappa to (delta, <x>/sqrt(t)) points with
// delta >= 0.5. Gauss-Newton on (beta0, beta, log kappa) with log-space
// residuals.
inline MeanScalingFit fit_mean_scaling(std::vector<std::pair<double, double>> points) {
    std::erase_if(points, [](const auto& p) { return p.first < 0.5; });
    if (points.size() < 5)
        throw ConfigError("fit_mean_scaling: need >= 5 points with delta >= 0.5");
    std::sort(points.begin(), points.end());
    for (const auto& [d, y] : points)
        if (!(y > 0.0)) throw ConfigError("fit_mean_scaling: nonpositive <x>/sqrt(t) value");

    const std::size_t nn = points.size();
    double beta0 = points.front().second;
    for (const auto& [d, y] : points) beta0 = std::min(beta0, y);
    beta0 *= 0.9;
    const auto [d_mid, y_mid] = points[nn / 2];
    const auto [d_hi, y_hi] = points.back();
    double kappa = 2.0;
    if (y_hi > beta0 && y_mid > beta0 && d_hi > d_mid)
        kappa = std::clamp(std::log((y_hi - beta0) / (y_mid - beta0)) / std::log(d_hi / d_mid),
                           0.3, 8.0);
    const double beta = std::max((y_hi - beta0) / std::pow(d_hi, kappa), 1e-9);

    auto eval = [&](const std::array<double, 3>& p, std::size_t i,
                    std::array<double, 3>& grad) {
        const double k = std::exp(p[2]);
        const double dk = std::pow(points[i].first, k);
        const double model = p[0] + p[1] * dk;
        if (!(model > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        grad[0] = -1.0 / model;
        grad[1] = -dk / model;
        grad[2] = -p[1] * dk * std::log(points[i].first) * k / model;
        return std::log(points[i].second) - std::log(model);
    };
    const auto gn = damped_gauss_newton<3>(nn, {beta0, beta, std::log(kappa)}, eval);

    MeanScalingFit fit;
    fit.beta0 = gn.params[0];
    fit.beta = gn.params[1];
    fit.kappa = std::exp(gn.params[2]);
    fit.residual_rms = gn.residual_rms;
    fit.converged = gn.converged;
    fit.delta_lo = points.front().first;
    fit.delta_hi = points.back().first;
    return fit;
}

// Fit y = s + q * exp(-r * delta) to (delta, R/t) points. Initialized from
// endpoint heuristics: s from the largest delta, q from the delta -> 0 end.
inline RangeScalingFit fit_range_scaling(std::vector<std::pair<double, double>> points) {
    if (points.size() < 5) throw ConfigError("fit_range_scaling: need >= 5 points");
    std::sort(points.begin(), points.end());
    for (const auto& [d, y] : points)
        if (!(y > 0.0)) throw ConfigError("fit_range_scaling: nonpositive R/t value");

    const std::size_t nn = points.size();
    const double s0 = points.back().second;
    const double q0 = std::max(points.front().second - s0, 1e-3);
    const auto [d_mid, y_mid] = points[nn / 2];
    double r0 = 1.0;
    if (y_mid > s0 && d_mid > 0.0)
        r0 = std::clamp(-std::log((y_mid - s0) / q0) / d_mid, 0.05, 20.0);

    auto eval = [&](const std::array<double, 3>& p, std::size_t i,
                    std::array<double, 3>& grad) {
        const double r = std::exp(p[2]);
        const double e = std::exp(-r * points[i].first);
        const double model = p[0] + p[1] * e;
        if (!(model > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        grad[0] = -1.0 / model;
        grad[1] = -e / model;
        grad[2] = p[1] * e * points[i].first * r / model;
        return std::log(points[i].second) - std::log(model);
    };
    const auto gn = damped_gauss_newton<3>(nn, {s0, q0, std::log(r0)}, eval);

    RangeScalingFit fit;
    fit.s = gn.params[0];
    fit.q = gn.params[1];
    fit.r = std::exp(gn.params[2]);
    fit.residual_rms = gn.residual_rms;
    fit.converged = gn.converged;
    fit.delta_lo = points.front().first;
    fit.delta_hi = points.back().first;
    return fit;
}

// Two-piece decomposition of g(z): stretched exponential below z*, const *
// z^-2 above. z* is chosen by scanning candidate split points and minimizing
// the combined log-space residual of that two-piece model against the single
// stretched exponential over the whole window; when the single fit wins, z*
// coincides with the window end and no tail region is reported. The tail
// field holds a free-slope regression of the region above the chosen z*,
// which decides whether a z^-2 tail is actually present.
//
// Fit windows keep only statistically significant points (g > 2 stderr,
// when the profile carries standard errors).
struct TwoPieceFit {
    StretchedExpFit stretched;
    PowerTailCheck tail{};
    bool has_tail_region = false;
    double combined_rms = 0.0;
};

inline TwoPieceFit choose_two_piece(const CollapsedProfile& c, double z_lo, double z_hi) {
    CollapsedProfile w;
    w.t = c.t;
    w.gamma = c.gamma;
    w.z_max_fit = z_hi;
    const bool have_err = c.gs_err.size() == c.gs.size();
    for (std::size_t i = 0; i < c.zs.size(); ++i) {
        if (c.zs[i] < z_lo || c.zs[i] > z_hi || !(c.gs[i] > 0.0)) continue;
        if (have_err && c.gs[i] <= 2.0 * c.gs_err[i]) continue;
        w.zs.push_back(c.zs[i]);
        w.gs.push_back(c.gs[i]);
    }
    if (w.zs.size() < 10)
        throw ConfigError("choose_two_piece: fewer than 10 usable points in window");

    const std::size_t n = w.zs.size();
    std::vector<double> logz(n), logg(n);
    for (std::size_t i = 0; i < n; ++i) {
        logz[i] = w.zs[i] > 0.0 ? std::log(w.zs[i]) : 0.0;
        logg[i] = std::log(w.gs[i]);
    }

    const StretchedExpFit pure = fit_stretched_exponential(w, w.zs.front(), w.zs.back());
    const std::array<double, 3> warm{std::log(pure.a), std::log(pure.b), pure.c};

    TwoPieceFit best;
    bool have_candidate = false;
    std::size_t best_cut = 0;

    const std::size_t max_candidates = 200;
    const std::size_t stride = std::max<std::size_t>(1, n / max_candidates);

    for (std::size_t cut = 9; cut + 8 < n; cut += stride) {
        // tail piece: log g = log C - 2 log z, C by least squares
        std::size_t m = 0;
        double c_sum = 0.0;
        double z_first = 0.0, z_last = 0.0;
        for (std::size_t i = cut + 1; i < n; ++i) {
            if (!(w.zs[i] > 0.0)) continue;
            if (m == 0) z_first = w.zs[i];
            z_last = w.zs[i];
            c_sum += logg[i] + 2.0 * logz[i];
            ++m;
        }
        if (m < 8 || z_last < 2.0 * z_first) continue;
        const double log_const = c_sum / static_cast<double>(m);
        double ss_tail = 0.0;
        for (std::size_t i = cut + 1; i < n; ++i) {
            if (!(w.zs[i] > 0.0)) continue;
            const double r = logg[i] - (log_const - 2.0 * logz[i]);
            ss_tail += r * r;
        }

        // stretched piece, warm started from the whole-window fit
        auto eval = [&](const std::array<double, 3>& p, std::size_t i,
                        std::array<double, 3>& grad) {
            const double zc = w.zs[i] > 0.0 ? std::pow(w.zs[i], p[2]) : 0.0;
            grad[0] = -1.0;
            grad[1] = std::exp(p[1]) * zc;
            grad[2] = w.zs[i] > 0.0 ? std::exp(p[1]) * zc * logz[i] : 0.0;
            return logg[i] - (p[0] - std::exp(p[1]) * zc);
        };
        const auto gn = damped_gauss_newton<3>(cut + 1, warm, eval);
        const double ss =
            gn.residual_rms * gn.residual_rms * static_cast<double>(cut + 1) + ss_tail;
        const double rms = std::sqrt(ss / static_cast<double>(cut + 1 + m));
        if (!have_candidate || rms < best.combined_rms) {
            best.combined_rms = rms;
            best_cut = cut;
            have_candidate = true;
        }
    }

    if (have_candidate && best.combined_rms < pure.residual_rms) {
        best.stretched = fit_stretched_exponential(w, w.zs.front(), w.zs[best_cut]);
        best.tail = check_power_tail(w, std::nextafter(w.zs[best_cut], z_hi), w.zs.back());
        best.has_tail_region = true;
    } else {
        best.stretched = pure;
        best.tail = PowerTailCheck{};
        best.has_tail_region = false;
        best.combined_rms = pure.residual_rms;
    }
    return best;
}

// Largest z >= 0 below which two collapsed profiles (typically the two
// largest snapshot times) agree within n_sigma combined standard errors.
// The scan runs on the finer grid (larger t) up to the end of the common
// positive support.
inline double detect_collapse_cutoff(const CollapsedProfile& p1, const CollapsedProfile& p2,
                                     double n_sigma = 3.0) {
    const CollapsedProfile& fine = p1.t >= p2.t ? p1 : p2;
    const CollapsedProfile& coarse = p1.t >= p2.t ? p2 : p1;
    if (fine.gs_err.empty() || coarse.gs_err.empty())
        throw ConfigError("detect_collapse_cutoff: profiles need standard errors");

    auto support_end = [](const CollapsedProfile& c) {
        double end = 0.0;
        for (std::size_t i = 0; i < c.zs.size(); ++i)
            if (c.zs[i] >= 0.0 && c.gs[i] > 0.0) end = c.zs[i];
        return end;
    };
    const double z_end = std::min(support_end(fine), support_end(coarse));

    // linear interpolation on the coarse grid
    auto interp = [&](double z, double& g, double& err) {
        const auto it = std::lower_bound(coarse.zs.begin(), coarse.zs.end(), z);
        if (it == coarse.zs.begin() || it == coarse.zs.end()) return false;
        const std::size_t j = static_cast<std::size_t>(it - coarse.zs.begin());
        const double w = (z - coarse.zs[j - 1]) / (coarse.zs[j] - coarse.zs[j - 1]);
        g = (1.0 - w) * coarse.gs[j - 1] + w * coarse.gs[j];
        err = (1.0 - w) * coarse.gs_err[j - 1] + w * coarse.gs_err[j];
        return true;
    };

    double alpha = 0.0;
    for (std::size_t i = 0; i < fine.zs.size(); ++i) {
        const double z = fine.zs[i];
        if (z < 0.0) continue;
        if (z > z_end) break;
        double g2, e2;
        if (!interp(z, g2, e2)) continue;
        const double sigma = std::hypot(fine.gs_err[i], e2);
        if (std::abs(fine.gs[i] - g2) > n_sigma * sigma) break;
        alpha = z;
    }
    return alpha;
}

// Max |g1 - g2| over the common grid below z_cut (collapse quality metric).
inline double collapse_max_deviation(const CollapsedProfile& p1, const CollapsedProfile& p2,
                                     double z_cut) {
    const CollapsedProfile& fine = p1.t >= p2.t ? p1 : p2;
    const CollapsedProfile& coarse = p1.t >= p2.t ? p2 : p1;
    double worst = 0.0;
    for (std::size_t i = 0; i < fine.zs.size(); ++i) {
        const double z = fine.zs[i];
        if (z < 0.0 || z > z_cut) continue;
        const auto it = std::lower_bound(coarse.zs.begin(), coarse.zs.end(), z);
        if (it == coarse.zs.begin() || it == coarse.zs.end()) continue;
        const std::size_t j = static_cast<std::size_t>(it - coarse.zs.begin());
        const double w = (z - coarse.zs[j - 1]) / (coarse.zs[j] - coarse.zs[j - 1]);
        const double g2 = (1.0 - w) * coarse.gs[j - 1] + w * coarse.gs[j];
        worst = std::max(worst, std::abs(fine.gs[i] - g2));
    }
    return worst;
}

// Crossover estimate over a (delta, lmax) grid: the smallest grid delta at
// which no lmax shows a z^-2 tail AND the relative spread of each of a, b, c
// across lmax drops below 10%.
inline CrossoverReport crossover_report(
    const std::map<std::pair<double, int>, StretchedExpFit>& fits,
    const std::map<std::pair<double, int>, bool>& tails) {
    std::set<double> delta_set;
    std::set<int> lmax_set;
    for (const auto& [key, fit] : fits) {
        delta_set.insert(key.first);
        lmax_set.insert(key.second);
    }
    if (lmax_set.size() < 2)
        throw ConfigError("crossover_report: need fits for >= 2 lmax values");
    for (double d : delta_set)
        for (int l : lmax_set)
            if (!fits.count({d, l}) || !tails.count({d, l}))
                throw ConfigError("crossover_report: delta grid not shared across lmax");

    CrossoverReport rep;
    rep.above_grid = true;
    for (double d : delta_set) {
        bool tail_any = false;
        double a_min = 0, a_max = 0, b_min = 0, b_max = 0, c_min = 0, c_max = 0;
        double a_sum = 0, b_sum = 0, c_sum = 0;
        bool first = true;
        for (int l : lmax_set) {
            tail_any = tail_any || tails.at({d, l});
            const auto& f = fits.at({d, l});
            if (first) {
                a_min = a_max = f.a;
                b_min = b_max = f.b;
                c_min = c_max = f.c;
                first = false;
            } else {
                a_min = std::min(a_min, f.a);
                a_max = std::max(a_max, f.a);
                b_min = std::min(b_min, f.b);
                b_max = std::max(b_max, f.b);
                c_min = std::min(c_min, f.c);
                c_max = std::max(c_max, f.c);
            }
            a_sum += f.a;
            b_sum += f.b;
            c_sum += f.c;
        }
        const double k = static_cast<double>(lmax_set.size());
        auto spread = [&](double mn, double mx, double sum) {
            const double mean = std::abs(sum / k);
            return mean > 0.0 ? (mx - mn) / mean : 0.0;
        };
        const double sp = std::max({spread(a_min, a_max, a_sum), spread(b_min, b_max, b_sum),
                                    spread(c_min, c_max, c_sum)});
        rep.grid_deltas.push_back(d);
        rep.tail_present.push_back(tail_any);
        rep.max_param_spread.push_back(sp);
        if (rep.above_grid && !tail_any && sp < 0.10) {
            rep.delta_star = d;
            rep.above_grid = false;
        }
    }
    return rep;
}

}  // namespace qwalk
