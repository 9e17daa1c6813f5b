#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "qwalk/errors.hpp"
#include "qwalk/numeric.hpp"
#include "qwalk/observables.hpp"
#include "qwalk/rng.hpp"
#include "qwalk/step_distribution.hpp"
#include "qwalk/walker.hpp"

namespace qwalk {

struct RunConfig {
    double delta = 0.0;
    int lmax = 1;
    int t_max = 1;
    int n_config = 1;
    double coin_a0 = 1.0;
    double coin_b0 = 0.0;
    std::uint64_t master_seed = 0;
    std::vector<int> snapshot_times;  // sorted, within [1, t_max]
    double range_threshold = kRangeThreshold;
};

inline void validate(const RunConfig& c) {
    if (!(c.delta >= 0.0)) throw ConfigError("RunConfig: delta must be >= 0");
    if (c.lmax < 1) throw ConfigError("RunConfig: lmax must be >= 1");
    if (c.t_max < 1) throw ConfigError("RunConfig: t_max must be >= 1");
    if (c.n_config < 1) throw ConfigError("RunConfig: n_config must be >= 1");
    if (!std::is_sorted(c.snapshot_times.begin(), c.snapshot_times.end()))
        throw ConfigError("RunConfig: snapshot_times must be sorted");
    for (int t : c.snapshot_times)
        if (t < 1 || t > c.t_max)
            throw ConfigError("RunConfig: snapshot time " + std::to_string(t) +
                              " outside [1, t_max]");
    CoinAmplitudes::normalized(c.coin_a0, c.coin_b0);  // throws if invalid
}

// Derived stream seed for one realization. Index-keyed mixing makes the
// realizations independent of scheduling order and gives the prefix
// property: growing n_config never changes earlier realizations.
inline std::uint64_t realization_seed(std::uint64_t master_seed, std::uint64_t index) {
    return mix64(master_seed ^ index);
}

struct RealizationResult {
    ObservableSeries series;  // ts = 1..t_max, stderr fields empty
    std::vector<ProbabilityProfile> snapshots;
    // Reduced coin density per step, kept so the ensemble can also report
    // the entropy of the realization-averaged density matrix.
    std::vector<double> rho_ll, rho_rr;
    std::vector<std::complex<double>> rho_lr;
    std::vector<std::uint64_t> ell_counts;  // ell_counts[i] counts l = i+1
};

namespace detail {

inline RealizationResult run_realization_impl(const RunConfig& c, int index,
                                              const StepLengthDistribution& dist) {
    SplitMix64 rng(realization_seed(c.master_seed, static_cast<std::uint64_t>(index)));
    WalkerState state = init_state(CoinAmplitudes::normalized(c.coin_a0, c.coin_b0),
                                   c.lmax * c.t_max);
    RealizationResult out;
    out.series.ts.reserve(c.t_max);
    out.series.mean_x.reserve(c.t_max);
    out.series.mean_x2.reserve(c.t_max);
    out.series.range.reserve(c.t_max);
    out.series.entropy.reserve(c.t_max);
    out.rho_ll.reserve(c.t_max);
    out.rho_rr.reserve(c.t_max);
    out.rho_lr.reserve(c.t_max);
    out.ell_counts.assign(c.lmax, 0);

    std::size_t next_snap = 0;
    for (int t = 1; t <= c.t_max; ++t) {
        const int ell = sample_step(dist, rng);
        ++out.ell_counts[ell - 1];
        state.step(ell);

        const StepScan scan = scan_state(state, c.range_threshold);
        if (std::abs(scan.norm - 1.0) > 1e-10)
            throw NumericError("unitarity lost at t = " + std::to_string(t) +
                               ": norm = " + std::to_string(scan.norm));
        out.series.ts.push_back(t);
        out.series.mean_x.push_back(scan.mean_x);
        out.series.mean_x2.push_back(scan.mean_x2);
        out.series.range.push_back(scan.range);
        out.series.entropy.push_back(von_neumann_entropy(scan.rho));
        out.rho_ll.push_back(scan.rho.ll.real());
        out.rho_rr.push_back(scan.rho.rr.real());
        out.rho_lr.push_back(scan.rho.lr);

        if (next_snap < c.snapshot_times.size() && c.snapshot_times[next_snap] == t) {
            out.snapshots.push_back(probability_profile(state));
            ++next_snap;
        }
    }
    return out;
}

// Streaming sums for one block of realizations. Merge order is fixed by
// realization index, which keeps the reduction reproducible for any worker
// count and bit-exact when run serially.
struct Accumulator {
    std::size_t n = 0;
    std::vector<KahanSum> sum_x, sumsq_x, sum_x2, sumsq_x2;
    std::vector<KahanSum> sum_r, sumsq_r, sum_s, sumsq_s;
    std::vector<KahanSum> rho_ll, rho_rr, rho_lr_re, rho_lr_im;
    std::vector<std::vector<KahanSum>> snap_sum, snap_sumsq;
    std::vector<std::uint64_t> ell_counts;

    Accumulator(const RunConfig& c) {
        const std::size_t T = static_cast<std::size_t>(c.t_max);
        for (auto* v : {&sum_x, &sumsq_x, &sum_x2, &sumsq_x2, &sum_r, &sumsq_r, &sum_s,
                        &sumsq_s, &rho_ll, &rho_rr, &rho_lr_re, &rho_lr_im})
            v->assign(T, KahanSum{});
        snap_sum.resize(c.snapshot_times.size());
        snap_sumsq.resize(c.snapshot_times.size());
        for (std::size_t s = 0; s < c.snapshot_times.size(); ++s) {
            const std::size_t w = 2 * static_cast<std::size_t>(c.lmax) *
                                      static_cast<std::size_t>(c.snapshot_times[s]) + 1;
            snap_sum[s].assign(w, KahanSum{});
            snap_sumsq[s].assign(w, KahanSum{});
        }
        ell_counts.assign(c.lmax, 0);
    }

    void add(const RunConfig& c, const RealizationResult& r) {
        ++n;
        for (std::size_t i = 0; i < r.series.ts.size(); ++i) {
            const double x = r.series.mean_x[i], x2 = r.series.mean_x2[i];
            const double rg = r.series.range[i], s = r.series.entropy[i];
            sum_x[i].add(x);
            sumsq_x[i].add(x * x);
            sum_x2[i].add(x2);
            sumsq_x2[i].add(x2 * x2);
            sum_r[i].add(rg);
            sumsq_r[i].add(rg * rg);
            sum_s[i].add(s);
            sumsq_s[i].add(s * s);
            rho_ll[i].add(r.rho_ll[i]);
            rho_rr[i].add(r.rho_rr[i]);
            rho_lr_re[i].add(r.rho_lr[i].real());
            rho_lr_im[i].add(r.rho_lr[i].imag());
        }
        for (std::size_t s = 0; s < r.snapshots.size(); ++s) {
            const auto& p = r.snapshots[s];
            const int half = c.lmax * c.snapshot_times[s];
            for (std::size_t i = 0; i < p.xs.size(); ++i) {
                const std::size_t k = static_cast<std::size_t>(p.xs[i] + half);
                snap_sum[s][k].add(p.f[i]);
                snap_sumsq[s][k].add(p.f[i] * p.f[i]);
            }
        }
        for (std::size_t i = 0; i < r.ell_counts.size(); ++i) ell_counts[i] += r.ell_counts[i];
    }

    void merge(const Accumulator& o) {
        n += o.n;
        auto merge_vec = [](std::vector<KahanSum>& a, const std::vector<KahanSum>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i].merge(b[i]);
        };
        merge_vec(sum_x, o.sum_x);
        merge_vec(sumsq_x, o.sumsq_x);
        merge_vec(sum_x2, o.sum_x2);
        merge_vec(sumsq_x2, o.sumsq_x2);
        merge_vec(sum_r, o.sum_r);
        merge_vec(sumsq_r, o.sumsq_r);
        merge_vec(sum_s, o.sum_s);
        merge_vec(sumsq_s, o.sumsq_s);
        merge_vec(rho_ll, o.rho_ll);
        merge_vec(rho_rr, o.rho_rr);
        merge_vec(rho_lr_re, o.rho_lr_re);
        merge_vec(rho_lr_im, o.rho_lr_im);
        for (std::size_t s = 0; s < snap_sum.size(); ++s) {
            merge_vec(snap_sum[s], o.snap_sum[s]);
            merge_vec(snap_sumsq[s], o.snap_sumsq[s]);
        }
        for (std::size_t i = 0; i < ell_counts.size(); ++i) ell_counts[i] += o.ell_counts[i];
    }
};

}  // namespace detail

// Evolves one disorder realization, recording <x>, <x^2>, R, S at every step
// and f(x) at the configured snapshot times. Deterministic in (config, index).
inline RealizationResult run_realization(const RunConfig& config, int index) {
    validate(config);
    if (index < 0 || index >= config.n_config)
        throw ConfigError("run_realization: index out of [0, n_config)");
    const StepLengthDistribution dist = build_distribution(config.delta, config.lmax);
    return detail::run_realization_impl(config, index, dist);
}

struct EnsembleResult {
    RunConfig config;
    ObservableSeries series;                  // ensemble means + standard errors
    std::vector<double> entropy_of_mean_rho;  // S of the realization-averaged rho, per t
    std::vector<ProbabilityProfile> snapshots;
    std::vector<double> empirical_step_pmf;
    double empirical_pmf_tv_distance = 0.0;
};

inline EnsembleResult run_ensemble(const RunConfig& config, int n_workers = 1) {
    validate(config);
    const StepLengthDistribution dist = build_distribution(config.delta, config.lmax);
    const int n = config.n_config;
    const int workers = std::clamp(n_workers, 1, n);

    std::vector<detail::Accumulator> acc(workers, detail::Accumulator(config));
    std::vector<int> failed_index(workers, -1);
    std::vector<std::exception_ptr> failure(workers);

    auto work = [&](int w) {
        const int begin = static_cast<int>(static_cast<long long>(n) * w / workers);
        const int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
        for (int i = begin; i < end; ++i) {
            try {
                acc[w].add(config, detail::run_realization_impl(config, i, dist));
            } catch (...) {
                failed_index[w] = i;
                failure[w] = std::current_exception();
                return;
            }
        }
    };

    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }

    for (int w = 0; w < workers; ++w) {
        if (failure[w]) {
            const std::string where = "realization " + std::to_string(failed_index[w]) + ": ";
            try {
                std::rethrow_exception(failure[w]);
            } catch (const NumericError& e) {
                throw NumericError(where + e.what());
            } catch (const ConfigError& e) {
                throw ConfigError(where + e.what());
            } catch (const std::exception& e) {
                throw std::runtime_error(where + e.what());
            }
        }
    }

    detail::Accumulator total = std::move(acc[0]);
    for (int w = 1; w < workers; ++w) total.merge(acc[w]);

    EnsembleResult out;
    out.config = config;
    const std::size_t T = static_cast<std::size_t>(config.t_max);
    auto& s = out.series;
    s.ts.resize(T);
    for (std::size_t i = 0; i < T; ++i) s.ts[i] = static_cast<int>(i) + 1;
    auto fill = [&](const std::vector<KahanSum>& sum, const std::vector<KahanSum>& sumsq,
                    std::vector<double>& mean, std::vector<double>& err) {
        mean.resize(T);
        err.resize(T);
        for (std::size_t i = 0; i < T; ++i) {
            const MeanStderr m = mean_stderr(sum[i], sumsq[i], total.n);
            mean[i] = m.mean;
            err[i] = m.stderr_;
        }
    };
    fill(total.sum_x, total.sumsq_x, s.mean_x, s.stderr_x);
    fill(total.sum_x2, total.sumsq_x2, s.mean_x2, s.stderr_x2);
    fill(total.sum_r, total.sumsq_r, s.range, s.stderr_range);
    fill(total.sum_s, total.sumsq_s, s.entropy, s.stderr_entropy);

    out.entropy_of_mean_rho.resize(T);
    const double inv_n = 1.0 / static_cast<double>(total.n);
    for (std::size_t i = 0; i < T; ++i) {
        const std::complex<double> lr(total.rho_lr_re[i].value() * inv_n,
                                      total.rho_lr_im[i].value() * inv_n);
        const CoinDensityMatrix rho{total.rho_ll[i].value() * inv_n, lr, std::conj(lr),
                                    total.rho_rr[i].value() * inv_n};
        out.entropy_of_mean_rho[i] = von_neumann_entropy(rho);
    }

    out.snapshots.resize(config.snapshot_times.size());
    for (std::size_t k = 0; k < config.snapshot_times.size(); ++k) {
        const int t = config.snapshot_times[k];
        const int half = config.lmax * t;
        auto& p = out.snapshots[k];
        p.t = t;
        p.n_realizations = total.n;
        const std::size_t w = 2 * static_cast<std::size_t>(half) + 1;
        p.xs.resize(w);
        p.f.resize(w);
        p.stderr_f.resize(w);
        for (std::size_t i = 0; i < w; ++i) {
            p.xs[i] = static_cast<int>(i) - half;
            const MeanStderr m = mean_stderr(total.snap_sum[k][i], total.snap_sumsq[k][i],
                                             total.n);
            p.f[i] = m.mean;
            p.stderr_f[i] = m.stderr_;
        }
    }

    out.empirical_step_pmf.resize(config.lmax);
    std::uint64_t draws = 0;
    for (auto c : total.ell_counts) draws += c;
    double tv = 0.0;
    for (int i = 0; i < config.lmax; ++i) {
        out.empirical_step_pmf[i] =
            static_cast<double>(total.ell_counts[i]) / static_cast<double>(draws);
        tv += std::abs(out.empirical_step_pmf[i] - dist.pmf[i]);
    }
    out.empirical_pmf_tv_distance = 0.5 * tv;
    return out;
}

}  // namespace qwalk
