#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "qwalk/ensemble.hpp"

using namespace qwalk;

namespace {
RunConfig small_config() {
    RunConfig c;
    c.delta = 0.8;
    c.lmax = 3;
    c.t_max = 60;
    c.n_config = 40;
    c.coin_a0 = 0.5773502691896257;
    c.coin_b0 = 0.816496580927726;
    c.master_seed = 12345;
    c.snapshot_times = {30, 60};
    return c;
}
}  // namespace

TEST_CASE("realization_seed is deterministic and collision free") {
    CHECK(realization_seed(42, 7) == realization_seed(42, 7));
    CHECK(realization_seed(42, 7) != realization_seed(42, 8));
    CHECK(realization_seed(42, 7) != realization_seed(43, 7));

    std::vector<std::uint64_t> seeds;
    seeds.reserve(1'000'001);
    for (std::uint64_t i = 0; i <= 1'000'000; ++i) seeds.push_back(realization_seed(42, i));
    std::sort(seeds.begin(), seeds.end());
    CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
}

TEST_CASE("seed derivation avalanches on master-seed bit flips") {
    double bits_flipped = 0.0;
    int samples = 0;
    for (int bit = 0; bit < 64; bit += 7) {
        const std::uint64_t m1 = 0x0123456789abcdefULL;
        const std::uint64_t m2 = m1 ^ (1ULL << bit);
        for (std::uint64_t i = 0; i < 200; ++i) {
            bits_flipped += std::popcount(realization_seed(m1, i) ^ realization_seed(m2, i));
            ++samples;
        }
    }
    CHECK(bits_flipped / (64.0 * samples) >= 0.49);
}

TEST_CASE("run_realization is deterministic and window bounded") {
    const RunConfig c = small_config();
    const auto r1 = run_realization(c, 3);
    const auto r2 = run_realization(c, 3);
    CHECK(r1.series.mean_x == r2.series.mean_x);  // bitwise
    CHECK(r1.series.entropy == r2.series.entropy);
    CHECK(r1.snapshots[0].f == r2.snapshots[0].f);

    RunConfig c2;
    c2.delta = 0.0;
    c2.lmax = 4;
    c2.t_max = 2;
    c2.n_config = 5;
    c2.coin_a0 = 1.0;
    c2.coin_b0 = 0.0;
    c2.snapshot_times = {2};
    for (int i = 0; i < 5; ++i) {
        const auto r = run_realization(c2, i);
        for (std::size_t k = 0; k < r.snapshots[0].xs.size(); ++k)
            if (r.snapshots[0].f[k] > 0.0) {
                CHECK(r.snapshots[0].xs[k] >= -8);
                CHECK(r.snapshots[0].xs[k] <= 8);
            }
    }

    CHECK_THROWS_AS(run_realization(c, -1), ConfigError);
    CHECK_THROWS_AS(run_realization(c, c.n_config), ConfigError);
}

TEST_CASE("unit step length gives the deterministic no-disorder walk") {
    RunConfig c;
    c.delta = 2.0;  // irrelevant at lmax = 1
    c.lmax = 1;
    c.t_max = 50;
    c.n_config = 20;
    c.coin_a0 = 0.5773502691896257;
    c.coin_b0 = 0.816496580927726;
    c.snapshot_times = {50};

    const auto single = run_realization(c, 0);
    const auto ens = run_ensemble(c, 2);
    for (std::size_t i = 0; i < ens.series.ts.size(); ++i) {
        CHECK(ens.series.mean_x[i] == Catch::Approx(single.series.mean_x[i]).epsilon(1e-13));
        CHECK(ens.series.stderr_x[i] == 0.0);
        CHECK(ens.series.stderr_entropy[i] == 0.0);
    }
}

TEST_CASE("n_config = 1 reproduces the single realization with zero stderr") {
    RunConfig c = small_config();
    c.n_config = 1;
    const auto r = run_realization(c, 0);
    const auto e = run_ensemble(c);
    for (std::size_t i = 0; i < e.series.ts.size(); ++i) {
        CHECK(e.series.mean_x[i] == Catch::Approx(r.series.mean_x[i]).epsilon(1e-14));
        CHECK(e.series.stderr_x[i] == 0.0);
    }
}

TEST_CASE("ensemble reduction is reproducible across worker counts") {
    const RunConfig c = small_config();
    const auto e1 = run_ensemble(c, 1);
    const auto e1b = run_ensemble(c, 1);
    CHECK(e1.series.mean_x == e1b.series.mean_x);  // bit-exact serially
    CHECK(e1.snapshots[1].f == e1b.snapshots[1].f);

    auto close = [](double a, double b) {
        return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
    };
    for (int workers : {2, 4, 8}) {
        const auto ew = run_ensemble(c, workers);
        for (std::size_t i = 0; i < e1.series.ts.size(); ++i) {
            CHECK(close(e1.series.mean_x[i], ew.series.mean_x[i]));
            CHECK(close(e1.series.mean_x2[i], ew.series.mean_x2[i]));
            CHECK(close(e1.series.entropy[i], ew.series.entropy[i]));
            CHECK(close(e1.series.stderr_x[i], ew.series.stderr_x[i]));
        }
        for (std::size_t k = 0; k < e1.snapshots.size(); ++k)
            for (std::size_t i = 0; i < e1.snapshots[k].f.size(); ++i)
                CHECK(close(e1.snapshots[k].f[i], ew.snapshots[k].f[i]));
    }
}

TEST_CASE("snapshots stay normalized and step pmf converges") {
    const RunConfig c = small_config();
    const auto e = run_ensemble(c, 2);
    for (const auto& snap : e.snapshots) {
        double sum = 0.0;
        for (double f : snap.f) sum += f;
        CHECK(std::abs(sum - 1.0) < 1e-10);
    }
    double pmf_sum = 0.0;
    for (double p : e.empirical_step_pmf) pmf_sum += p;
    CHECK(pmf_sum == Catch::Approx(1.0).margin(1e-12));
    const double bound =
        3.0 * std::sqrt(static_cast<double>(c.lmax) / (c.n_config * c.t_max));
    CHECK(e.empirical_pmf_tv_distance < bound);
}

TEST_CASE("growing n_config preserves the earlier realizations") {
    RunConfig c = small_config();
    RunConfig big = c;
    big.n_config = 2 * c.n_config;
    for (int i : {0, 5, c.n_config - 1}) {
        const auto a = run_realization(c, i);
        const auto b = run_realization(big, i);
        CHECK(a.series.mean_x == b.series.mean_x);  // bitwise
    }
}

TEST_CASE("averaged-profile moments equal averaged per-realization moments") {
    RunConfig c = small_config();
    c.t_max = 40;
    c.snapshot_times = {40};
    const auto e = run_ensemble(c, 2);
    double m1 = 0.0;
    for (int i = 0; i < c.n_config; ++i) {
        const auto r = run_realization(c, i);
        m1 += r.series.mean_x.back();
    }
    m1 /= c.n_config;
    const auto [pm1, pm2] = moments(e.snapshots[0]);
    CHECK(std::abs(pm1 - m1) < 1e-12 * std::max(1.0, std::abs(m1)));
    CHECK(pm2 >= pm1 * pm1);
}

TEST_CASE("config validation rejects bad inputs") {
    RunConfig c = small_config();
    c.snapshot_times = {60, 30};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = small_config();
    c.snapshot_times = {0};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = small_config();
    c.t_max = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = small_config();
    c.n_config = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = small_config();
    c.delta = -1.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = small_config();
    c.coin_a0 = 0.9;
    c.coin_b0 = 0.9;
    CHECK_THROWS_AS(validate(c), ConfigError);
}
