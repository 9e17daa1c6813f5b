#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "qwalk/ensemble.hpp"
#include "qwalk/rng.hpp"
#include "qwalk/scaling.hpp"

using namespace qwalk;

namespace {

CollapsedProfile synthetic_collapsed(double a, double b, double c, int n_points, double z_hi,
                                     double noise = 0.0, std::uint64_t seed = 0) {
    CollapsedProfile cp;
    cp.t = 1000;
    cp.gamma = 0.5;
    SplitMix64 g(seed);
    for (int i = 0; i < n_points; ++i) {
        const double z = z_hi * i / (n_points - 1);
        double gg = a * std::exp(-b * std::pow(z, c));
        if (noise > 0.0) {
            // approximate unit normal from 12 uniforms
            double u = 0.0;
            for (int k = 0; k < 12; ++k) u += uniform_unit(g);
            gg *= 1.0 + noise * (u - 6.0);
        }
        cp.zs.push_back(z);
        cp.gs.push_back(gg);
    }
    cp.z_max_fit = z_hi;
    return cp;
}

}  // namespace

TEST_CASE("collapse_profile rescales positions and weights") {
    ProbabilityProfile p;
    p.t = 100;
    p.xs = {0};
    p.f = {0.05};
    const auto c = collapse_profile(p, 0.5);
    CHECK(c.zs[0] == 0.0);
    CHECK(c.gs[0] == Catch::Approx(0.5).epsilon(1e-14));

    ProbabilityProfile q;
    q.t = 1;
    q.xs = {-1, 0, 1};
    q.f = {0.25, 0.5, 0.25};
    const auto ci = collapse_profile(q, 1.0);
    CHECK(ci.zs[0] == -1.0);
    CHECK(ci.gs[1] == 0.5);

    q.t = 0;
    CHECK_THROWS_AS(collapse_profile(q, 0.5), ConfigError);
    q.t = 1;
    CHECK_THROWS_AS(collapse_profile(q, 0.0), ConfigError);
}

TEST_CASE("collapse conserves total probability as a Riemann sum") {
    RunConfig c;
    c.delta = 1.0;
    c.lmax = 2;
    c.t_max = 100;
    c.n_config = 30;
    c.coin_a0 = 0.5773502691896257;
    c.coin_b0 = 0.816496580927726;
    c.snapshot_times = {100};
    const auto e = run_ensemble(c, 2);
    const auto cp = collapse_profile(e.snapshots[0], 0.5);
    double riemann = 0.0;
    for (std::size_t i = 0; i + 1 < cp.zs.size(); ++i)
        riemann += cp.gs[i] * (cp.zs[i + 1] - cp.zs[i]);
    CHECK(std::abs(riemann - 1.0) < 0.02);
}

TEST_CASE("stretched-exponential fit recovers noiseless truth") {
    const auto cp = synthetic_collapsed(0.4, 1.2, 0.8, 50, 3.0);
    const auto fit = fit_stretched_exponential(cp, 0.0, 3.0);
    CHECK(fit.converged);
    CHECK(fit.a == Catch::Approx(0.4).epsilon(1e-6));
    CHECK(fit.b == Catch::Approx(1.2).epsilon(1e-6));
    CHECK(fit.c == Catch::Approx(0.8).epsilon(1e-6));
    CHECK(fit.z_star == 3.0);

    const auto pure = synthetic_collapsed(0.7, 0.9, 1.0, 50, 3.0);
    const auto fit1 = fit_stretched_exponential(pure, 0.0, 3.0);
    CHECK(std::abs(fit1.c - 1.0) < 0.02);
}

TEST_CASE("stretched-exponential fit stays within 5% under 1% noise") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto cp = synthetic_collapsed(0.4, 1.2, 0.8, 200, 3.0, 0.01, seed);
        const auto fit = fit_stretched_exponential(cp, 0.0, 3.0);
        CHECK(fit.converged);
        CHECK(std::abs(fit.a / 0.4 - 1.0) < 0.05);
        CHECK(std::abs(fit.b / 1.2 - 1.0) < 0.05);
        CHECK(std::abs(fit.c / 0.8 - 1.0) < 0.05);
    }
}

TEST_CASE("stretched-exponential fit rejects bad windows") {
    auto cp = synthetic_collapsed(0.4, 1.2, 0.8, 50, 3.0);
    CHECK_THROWS_AS(fit_stretched_exponential(cp, 0.0, 0.2), ConfigError);  // < 10 points
    cp.gs[10] = 0.0;
    CHECK_THROWS_AS(fit_stretched_exponential(cp, 0.0, 3.0), ConfigError);
}

TEST_CASE("power tail detection") {
    CollapsedProfile cp;
    cp.t = 1000;
    for (int i = 0; i < 30; ++i) {
        const double z = 1.0 + 0.1 * i;
        cp.zs.push_back(z);
        cp.gs.push_back(std::pow(z, -2.0));
    }
    const auto tail = check_power_tail(cp, 1.0, 4.0);
    CHECK(tail.slope == Catch::Approx(-2.0).margin(1e-10));
    CHECK(tail.tail_present);

    CollapsedProfile ce;
    ce.t = 1000;
    for (int i = 0; i < 30; ++i) {
        const double z = 2.0 + (2.0 * i) / 29.0;
        ce.zs.push_back(z);
        ce.gs.push_back(std::exp(-z));
    }
    const auto tail2 = check_power_tail(ce, 2.0, 4.0);
    CHECK(tail2.slope < -2.3);
    CHECK_FALSE(tail2.tail_present);

    // window narrower than a factor 2 in z never reports a tail
    const auto tail3 = check_power_tail(cp, 2.0, 3.0);
    CHECK(std::abs(tail3.slope + 2.0) < 0.1);
    CHECK_FALSE(tail3.tail_present);

    CHECK_THROWS_AS(check_power_tail(cp, 3.9, 4.0), ConfigError);
}

TEST_CASE("moment closed-form fits recover synthetic parameters") {
    ObservableSeries s;
    for (int t = 10; t <= 500; ++t) {
        s.ts.push_back(t);
        const double rt = std::sqrt(static_cast<double>(t));
        s.mean_x.push_back(t / (2.0 + 0.5 * rt));
        s.mean_x2.push_back(t * t / (1.0 + 3.0 * rt));
    }
    const auto fit = fit_moment_closed_forms(s, 10);
    CHECK(fit.mean_fit_available);
    CHECK(fit.b1 == Catch::Approx(2.0).epsilon(1e-8));
    CHECK(fit.b2 == Catch::Approx(0.5).epsilon(1e-8));
    CHECK(fit.b3 == Catch::Approx(1.0).epsilon(1e-8));
    CHECK(fit.b4 == Catch::Approx(3.0).epsilon(1e-8));
    CHECK(fit.physical);

    // negative first moments disable the mean fit but keep the second
    ObservableSeries neg = s;
    for (auto& v : neg.mean_x) v = -v;
    const auto fit2 = fit_moment_closed_forms(neg, 10);
    CHECK_FALSE(fit2.mean_fit_available);
    CHECK(fit2.b3 == Catch::Approx(1.0).epsilon(1e-8));

    // an unphysical b3 < 0 is reported, not hidden
    ObservableSeries unphys;
    for (int t = 10; t <= 500; ++t) {
        unphys.ts.push_back(t);
        const double rt = std::sqrt(static_cast<double>(t));
        unphys.mean_x.push_back(t / (2.0 + 0.5 * rt));
        unphys.mean_x2.push_back(t * t / (-0.5 + 2.0 * rt));
    }
    const auto fit3 = fit_moment_closed_forms(unphys, 10);
    CHECK(fit3.b3 < 0.0);
    CHECK_FALSE(fit3.physical);
}

TEST_CASE("growth exponent of exact power laws") {
    ObservableSeries s;
    for (int t = 1; t <= 1000; ++t) {
        s.ts.push_back(t);
        s.mean_x.push_back(std::pow(static_cast<double>(t), 0.5));
        s.mean_x2.push_back(std::pow(static_cast<double>(t), 1.5));
    }
    CHECK(fit_growth_exponent(s, MomentKind::second, 10, 1000) ==
          Catch::Approx(1.5).margin(1e-12));
    CHECK(fit_growth_exponent(s, MomentKind::first, 10, 1000) ==
          Catch::Approx(0.5).margin(1e-12));
    CHECK_THROWS_AS(fit_growth_exponent(s, MomentKind::first, 300, 1000), ConfigError);
    s.mean_x[500] = 0.0;
    CHECK_THROWS_AS(fit_growth_exponent(s, MomentKind::first, 100, 1000), ConfigError);
}

TEST_CASE("mean-scaling fit recovers (beta0, beta, kappa)") {
    std::vector<std::pair<double, double>> pts;
    for (double d : {0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0})
        pts.emplace_back(d, 0.3 + 0.01 * std::pow(d, 2.6));
    const auto fit = fit_mean_scaling(pts);
    CHECK(fit.converged);
    CHECK(fit.beta0 == Catch::Approx(0.3).epsilon(1e-6));
    CHECK(fit.beta == Catch::Approx(0.01).epsilon(1e-6));
    CHECK(fit.kappa == Catch::Approx(2.6).epsilon(1e-6));
    CHECK(fit.delta_lo == 0.5);

    // points below delta = 0.5 are excluded per the fit contract
    auto with_low = pts;
    with_low.emplace_back(0.0, 99.0);
    const auto fit2 = fit_mean_scaling(with_low);
    CHECK(fit2.kappa == Catch::Approx(2.6).epsilon(1e-6));

    CHECK_THROWS_AS(fit_mean_scaling({{1.0, 0.4}, {2.0, 0.5}, {3.0, 0.7}, {4.0, 1.0}}),
                    ConfigError);
}

TEST_CASE("range-scaling fit recovers (s, q, r)") {
    std::vector<std::pair<double, double>> pts;
    for (double d : {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0})
        pts.emplace_back(d, std::sqrt(2.0) + 1.5 * std::exp(-0.8 * d));
    const auto fit = fit_range_scaling(pts);
    CHECK(fit.converged);
    CHECK(fit.s == Catch::Approx(std::sqrt(2.0)).epsilon(1e-6));
    CHECK(fit.q == Catch::Approx(1.5).epsilon(1e-6));
    CHECK(fit.r == Catch::Approx(0.8).epsilon(1e-6));

    CHECK_THROWS_AS(fit_range_scaling({{0.0, 2.0}, {1.0, 1.8}}), ConfigError);
}

TEST_CASE("collapse cutoff detection on synthetic profiles") {
    // two profiles agreeing up to z = 2 and diverging beyond
    CollapsedProfile p1, p2;
    p1.t = 1000;
    p2.t = 2000;
    auto g0 = [](double z) { return 0.5 * std::exp(-z); };
    for (int i = 0; i <= 400; ++i) {
        const double z = -1.0 + 4.0 * i / 400.0;
        p2.zs.push_back(z);
        p2.gs.push_back(g0(z) * (z > 2.0 ? 1.5 : 1.0));
        p2.gs_err.push_back(0.001);
    }
    for (int i = 0; i <= 280; ++i) {
        const double z = -1.0 + 4.0 * i / 280.0;
        p1.zs.push_back(z);
        p1.gs.push_back(g0(z));
        p1.gs_err.push_back(0.001);
    }
    const double alpha = detect_collapse_cutoff(p1, p2);
    CHECK(alpha > 1.8);
    CHECK(alpha < 2.2);

    CHECK(collapse_max_deviation(p1, p2, alpha) < 0.01);

    CollapsedProfile no_err = p1;
    no_err.gs_err.clear();
    CHECK_THROWS_AS(detect_collapse_cutoff(no_err, p2), ConfigError);
}

TEST_CASE("crossover report finds the smallest qualifying delta") {
    std::map<std::pair<double, int>, StretchedExpFit> fits;
    std::map<std::pair<double, int>, bool> tails;
    for (double d : {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0}) {
        for (int l : {4, 6, 12}) {
            StretchedExpFit f;
            // spreads shrink only from delta >= 4
            const double wobble = d >= 4.0 ? 0.01 : 0.5;
            f.a = 0.4 * (1.0 + wobble * (l - 6) / 12.0);
            f.b = 1.1 * (1.0 - wobble * (l - 6) / 12.0);
            f.c = 0.9;
            f.converged = true;
            fits[{d, l}] = f;
            tails[{d, l}] = d < 4.0;
        }
    }
    const auto rep = crossover_report(fits, tails);
    CHECK_FALSE(rep.above_grid);
    CHECK(rep.delta_star == 4.0);
    CHECK(rep.grid_deltas.size() == 7);

    for (auto& [k, v] : tails) v = true;
    const auto rep2 = crossover_report(fits, tails);
    CHECK(rep2.above_grid);

    std::map<std::pair<double, int>, StretchedExpFit> single;
    std::map<std::pair<double, int>, bool> single_t;
    for (double d : {0.0, 1.0}) {
        single[{d, 4}] = StretchedExpFit{};
        single_t[{d, 4}] = false;
    }
    CHECK_THROWS_AS(crossover_report(single, single_t), ConfigError);
}
