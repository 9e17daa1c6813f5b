#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "qwalk/fitting.hpp"
#include "qwalk/rng.hpp"

using namespace qwalk;

TEST_CASE("fit_line recovers an exact line") {
    std::vector<double> x, y;
    for (int i = 0; i < 20; ++i) {
        x.push_back(0.5 * i);
        y.push_back(3.25 - 1.75 * x.back());
    }
    const auto f = fit_line(x, y);
    CHECK(f.intercept == Catch::Approx(3.25).epsilon(1e-13));
    CHECK(f.slope == Catch::Approx(-1.75).epsilon(1e-13));
    CHECK(f.residual_rms < 1e-12);

    CHECK_THROWS_AS(fit_line(std::vector<double>{1.0}, std::vector<double>{2.0}),
                    ConfigError);
    const std::vector<double> flat(5, 2.0), any(5, 1.0);
    CHECK_THROWS_AS(fit_line(flat, any), ConfigError);
}

TEST_CASE("damped Gauss-Newton solves a nonlinear least-squares problem") {
    // y = p0 * exp(-p1 * x) sampled exactly
    const std::array<double, 2> truth{2.5, 0.7};
    std::vector<double> x, y;
    for (int i = 0; i < 40; ++i) {
        x.push_back(0.1 * i);
        y.push_back(truth[0] * std::exp(-truth[1] * x.back()));
    }
    auto eval = [&](const std::array<double, 2>& p, std::size_t i,
                    std::array<double, 2>& g) {
        const double e = std::exp(-p[1] * x[i]);
        g[0] = -e;
        g[1] = p[0] * x[i] * e;
        return y[i] - p[0] * e;
    };
    const auto r = damped_gauss_newton<2>(x.size(), {1.0, 0.1}, eval);
    CHECK(r.converged);
    CHECK(r.params[0] == Catch::Approx(truth[0]).epsilon(1e-8));
    CHECK(r.params[1] == Catch::Approx(truth[1]).epsilon(1e-8));
    CHECK(r.residual_rms < 1e-10);
}

TEST_CASE("infeasible parameter regions reject the step instead of diverging") {
    // residual NaN whenever p0 <= 0; the fit must stay in p0 > 0
    std::vector<double> x{1, 2, 3, 4, 5}, y{0.9, 0.5, 0.3, 0.2, 0.1};
    auto eval = [&](const std::array<double, 1>& p, std::size_t i,
                    std::array<double, 1>& g) -> double {
        if (p[0] <= 0.0) return std::numeric_limits<double>::quiet_NaN();
        g[0] = -1.0 / p[0];
        return std::log(y[i]) - std::log(p[0]) + x[i];
    };
    const auto r = damped_gauss_newton<1>(x.size(), {1.0}, eval);
    CHECK(r.params[0] > 0.0);
}
