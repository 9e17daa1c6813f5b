#pragma once

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "qwalk/csv.hpp"
#include "qwalk/ensemble.hpp"
#include "qwalk/errors.hpp"
#include "qwalk/scaling.hpp"
#include "qwalk/version.hpp"

namespace qwalk {

using ordered_json = nlohmann::ordered_json;

struct AnalysisParams {
    double gamma = 0.5;
    int t_lo = 0;          // moment closed-form fit start; 0 means t_max / 4
    int growth_t_lo = 0;   // growth-exponent window; 0 means t_max / 4
    int growth_t_hi = 0;   // 0 means t_max
    double cutoff_n_sigma = 3.0;
};

// Full experiment description: a RunConfig template plus sweep axes over
// delta and lmax, output location, and analysis parameters.
struct ExperimentManifest {
    std::vector<double> deltas{0.0};
    std::vector<int> lmaxes{1};
    int t_max = 2000;
    int n_config = 500;
    std::uint64_t master_seed = 1;
    double coin_a0 = 0.5773502691896257;  // sqrt(1/3)
    double coin_b0 = 0.816496580927726;   // sqrt(2/3)
    std::vector<int> snapshot_times;      // empty selects t/8, t/4, t/2, t
    double range_threshold = kRangeThreshold;
    std::string out_dir = "runs";
    int threads = 0;  // 0 selects hardware concurrency
    AnalysisParams analysis;
};

inline std::pair<double, double> coin_preset(const std::string& name) {
    if (name == "paper-asymmetric") return {0.5773502691896257, 0.816496580927726};
    if (name == "right-only") return {1.0, 0.0};
    if (name == "left-only") return {0.0, 1.0};
    throw ConfigError("unknown coin preset '" + name +
                      "' (expected paper-asymmetric, right-only, or left-only)");
}

inline void normalize_manifest(ExperimentManifest& m) {
    if (m.deltas.empty()) throw ConfigError("manifest: sweep over delta is empty");
    if (m.lmaxes.empty()) throw ConfigError("manifest: sweep over lmax is empty");
    if (m.t_max < 1) throw ConfigError("manifest: t_max must be >= 1");
    if (m.n_config < 1) throw ConfigError("manifest: n_config must be >= 1");
    for (double d : m.deltas)
        if (!(d >= 0.0)) throw ConfigError("manifest: delta must be >= 0");
    for (int l : m.lmaxes)
        if (l < 1) throw ConfigError("manifest: lmax must be >= 1");
    if (m.snapshot_times.empty()) {
        for (int div : {8, 4, 2, 1}) {
            const int t = std::max(1, m.t_max / div);
            if (m.snapshot_times.empty() || m.snapshot_times.back() != t)
                m.snapshot_times.push_back(t);
        }
    }
    if (!std::is_sorted(m.snapshot_times.begin(), m.snapshot_times.end()))
        throw ConfigError("manifest: snapshot_times must be sorted");
    for (int t : m.snapshot_times)
        if (t < 1 || t > m.t_max)
            throw ConfigError("manifest: snapshot time " + std::to_string(t) +
                              " outside [1, t_max]");
    // CLI-facing tolerance is looser than the walker invariant; rescale
    // exactly after the check.
    const double n2 = m.coin_a0 * m.coin_a0 + m.coin_b0 * m.coin_b0;
    if (std::abs(n2 - 1.0) > 1e-9)
        throw ConfigError("manifest: coin amplitudes must satisfy a0^2 + b0^2 = 1");
    const double inv = 1.0 / std::sqrt(n2);
    m.coin_a0 *= inv;
    m.coin_b0 *= inv;
    if (m.threads < 0) throw ConfigError("manifest: threads must be >= 0");
    if (m.analysis.t_lo == 0) m.analysis.t_lo = std::max(1, m.t_max / 4);
    if (m.analysis.growth_t_lo == 0) m.analysis.growth_t_lo = std::max(1, m.t_max / 4);
    if (m.analysis.growth_t_hi == 0) m.analysis.growth_t_hi = m.t_max;
    if (!(m.analysis.gamma > 0.0)) throw ConfigError("manifest: gamma must be > 0");
}

inline ExperimentManifest manifest_from_json(const ordered_json& j) {
    ExperimentManifest m;
    static const std::set<std::string> known{
        "deltas", "lmaxes", "t_max", "n_config", "master_seed", "coin",
        "snapshot_times", "range_threshold", "out_dir", "threads", "analysis"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("manifest: unknown key '" + it.key() + "'");
    try {
        if (j.contains("deltas")) m.deltas = j.at("deltas").get<std::vector<double>>();
        if (j.contains("lmaxes")) m.lmaxes = j.at("lmaxes").get<std::vector<int>>();
        if (j.contains("t_max")) m.t_max = j.at("t_max").get<int>();
        if (j.contains("n_config")) m.n_config = j.at("n_config").get<int>();
        if (j.contains("master_seed")) m.master_seed = j.at("master_seed").get<std::uint64_t>();
        if (j.contains("coin")) {
            const auto& c = j.at("coin");
            if (c.contains("preset")) {
                std::tie(m.coin_a0, m.coin_b0) = coin_preset(c.at("preset").get<std::string>());
            } else {
                m.coin_a0 = c.at("a0").get<double>();
                m.coin_b0 = c.at("b0").get<double>();
            }
        }
        if (j.contains("snapshot_times"))
            m.snapshot_times = j.at("snapshot_times").get<std::vector<int>>();
        if (j.contains("range_threshold"))
            m.range_threshold = j.at("range_threshold").get<double>();
        if (j.contains("out_dir")) m.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("threads")) m.threads = j.at("threads").get<int>();
        if (j.contains("analysis")) {
            const auto& a = j.at("analysis");
            if (a.contains("gamma")) m.analysis.gamma = a.at("gamma").get<double>();
            if (a.contains("t_lo")) m.analysis.t_lo = a.at("t_lo").get<int>();
            if (a.contains("growth_t_lo"))
                m.analysis.growth_t_lo = a.at("growth_t_lo").get<int>();
            if (a.contains("growth_t_hi"))
                m.analysis.growth_t_hi = a.at("growth_t_hi").get<int>();
            if (a.contains("cutoff_n_sigma"))
                m.analysis.cutoff_n_sigma = a.at("cutoff_n_sigma").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
    return m;
}

inline ordered_json manifest_to_json(const ExperimentManifest& m) {
    ordered_json j;
    j["deltas"] = m.deltas;
    j["lmaxes"] = m.lmaxes;
    j["t_max"] = m.t_max;
    j["n_config"] = m.n_config;
    j["master_seed"] = m.master_seed;
    j["coin"] = {{"a0", m.coin_a0}, {"b0", m.coin_b0}};
    j["snapshot_times"] = m.snapshot_times;
    j["range_threshold"] = m.range_threshold;
    j["out_dir"] = m.out_dir;
    j["threads"] = m.threads;
    j["analysis"] = {{"gamma", m.analysis.gamma},
                     {"t_lo", m.analysis.t_lo},
                     {"growth_t_lo", m.analysis.growth_t_lo},
                     {"growth_t_hi", m.analysis.growth_t_hi},
                     {"cutoff_n_sigma", m.analysis.cutoff_n_sigma}};
    return j;
}

inline ExperimentManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open manifest: " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("manifest " + path.string() + ": " + e.what());
    }
    return manifest_from_json(j);
}

inline std::string grid_dir_name(double delta, int lmax) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "delta%g_lmax%d", delta, lmax);
    return buf;
}

inline std::uint64_t grid_seed(std::uint64_t master_seed, double delta, int lmax) {
    return mix64(mix64(master_seed ^ std::bit_cast<std::uint64_t>(delta)) ^
                 static_cast<std::uint64_t>(lmax));
}

// Output root: $QWALK_OUT_ROOT prefixes relative out_dir paths.
inline std::filesystem::path output_root(const ExperimentManifest& m) {
    std::filesystem::path p(m.out_dir);
    if (p.is_relative()) {
        if (const char* env = std::getenv("QWALK_OUT_ROOT")) p = std::filesystem::path(env) / p;
    }
    return p;
}

inline int resolve_threads(const ExperimentManifest& m) {
    if (m.threads > 0) return m.threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace detail {

inline void write_json_file(const std::filesystem::path& path, const ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw ConfigError("write failed: " + path.string());
}

inline RunConfig grid_run_config(const ExperimentManifest& m, double delta, int lmax) {
    RunConfig rc;
    rc.delta = delta;
    rc.lmax = lmax;
    rc.t_max = m.t_max;
    rc.n_config = m.n_config;
    rc.coin_a0 = m.coin_a0;
    rc.coin_b0 = m.coin_b0;
    rc.master_seed = grid_seed(m.master_seed, delta, lmax);
    rc.snapshot_times = m.snapshot_times;
    rc.range_threshold = m.range_threshold;
    return rc;
}

}  // namespace detail

// Runs the whole (delta, lmax) grid, writing per-grid-point meta.json,
// moments.csv and profile_t{T}.csv files under <out>/delta{d}_lmax{l}/.
// A failing grid point removes its partial output directory.
inline void run_command(ExperimentManifest manifest) {
    normalize_manifest(manifest);
    const std::filesystem::path root = output_root(manifest);
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (ec) throw ConfigError("cannot create output directory " + root.string() + ": " +
                              ec.message());
    const int workers = resolve_threads(manifest);

    for (int lmax : manifest.lmaxes) {
        for (double delta : manifest.deltas) {
            const std::filesystem::path dir = root / grid_dir_name(delta, lmax);
            try {
                std::filesystem::create_directories(dir, ec);
                if (ec || !std::filesystem::is_directory(dir))
                    throw ConfigError("cannot create grid directory " + dir.string());
                const RunConfig rc = detail::grid_run_config(manifest, delta, lmax);
                const auto t0 = std::chrono::steady_clock::now();
                const EnsembleResult res = run_ensemble(rc, workers);
                const double wall =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();

                std::vector<std::vector<double>> rows;
                rows.reserve(res.series.ts.size());
                for (std::size_t i = 0; i < res.series.ts.size(); ++i)
                    rows.push_back({static_cast<double>(res.series.ts[i]),
                                    res.series.mean_x[i], res.series.stderr_x[i],
                                    res.series.mean_x2[i], res.series.stderr_x2[i],
                                    res.series.range[i], res.series.stderr_range[i],
                                    res.series.entropy[i], res.entropy_of_mean_rho[i]});
                write_csv(dir / "moments.csv",
                          {"t", "mean_x", "stderr_x", "mean_x2", "stderr_x2", "range",
                           "stderr_range", "entropy_mean_of_S", "entropy_of_mean_rho"},
                          rows);

                for (const auto& snap : res.snapshots) {
                    std::vector<std::vector<double>> prow;
                    prow.reserve(snap.xs.size());
                    for (std::size_t i = 0; i < snap.xs.size(); ++i)
                        prow.push_back({static_cast<double>(snap.xs[i]), snap.f[i],
                                        snap.stderr_f[i]});
                    write_csv(dir / ("profile_t" + std::to_string(snap.t) + ".csv"),
                              {"x", "f", "stderr"}, prow);
                }

                const StepLengthDistribution dist = build_distribution(delta, lmax);
                ordered_json meta;
                meta["schema_version"] = kSchemaVersion;
                meta["toolkit_version"] = kToolkitVersion;
                meta["coin_convention"] = kCoinConvention;
                meta["grid_point"] = {{"delta", delta},
                                      {"lmax", lmax},
                                      {"grid_seed", rc.master_seed}};
                meta["step_distribution"] = {{"delta", delta},
                                             {"lmax", lmax},
                                             {"norm_A", dist.norm_A}};
                meta["empirical_step_pmf"] = res.empirical_step_pmf;
                meta["empirical_pmf_tv_distance"] = res.empirical_pmf_tv_distance;
                meta["n_workers"] = workers;
                meta["wall_time_seconds"] = wall;
                meta["manifest"] = manifest_to_json(manifest);
                detail::write_json_file(dir / "meta.json", meta);

                std::cout << "[run] " << grid_dir_name(delta, lmax) << " wall=" << wall
                          << "s\n";
            } catch (...) {
                std::filesystem::remove_all(dir, ec);
                throw;
            }
        }
    }
}

namespace detail {

inline ObservableSeries series_from_csv(const CsvTable& t) {
    ObservableSeries s;
    const auto ts = t.col("t");
    s.ts.reserve(ts.size());
    for (double v : ts) s.ts.push_back(static_cast<int>(v));
    s.mean_x = t.col("mean_x");
    s.stderr_x = t.col("stderr_x");
    s.mean_x2 = t.col("mean_x2");
    s.stderr_x2 = t.col("stderr_x2");
    s.range = t.col("range");
    s.stderr_range = t.col("stderr_range");
    s.entropy = t.col("entropy_mean_of_S");
    return s;
}

inline ProbabilityProfile profile_from_csv(const CsvTable& t, int time) {
    ProbabilityProfile p;
    p.t = time;
    const auto xs = t.col("x");
    p.xs.reserve(xs.size());
    for (double v : xs) p.xs.push_back(static_cast<int>(v));
    p.f = t.col("f");
    p.stderr_f = t.col("stderr");
    return p;
}

inline ordered_json stretched_to_json(const StretchedExpFit& f) {
    return ordered_json{{"a", f.a},
                        {"b", f.b},
                        {"c", f.c},
                        {"z_star", f.z_star},
                        {"residual_rms", f.residual_rms},
                        {"converged", f.converged}};
}

}  // namespace detail

// Reads the files run_command wrote and writes analysis.json plus
// collapse_t{T}.csv per grid point. Missing inputs name the grid point.
inline void analyze_command(ExperimentManifest manifest) {
    normalize_manifest(manifest);
    const std::filesystem::path root = output_root(manifest);

    std::map<std::pair<double, int>, StretchedExpFit> fit_map;
    std::map<std::pair<double, int>, bool> tail_map;
    std::map<int, std::vector<std::pair<double, double>>> mean_points, range_points;
    ordered_json grid_entries = ordered_json::array();

    for (int lmax : manifest.lmaxes) {
        for (double delta : manifest.deltas) {
            const std::string name = grid_dir_name(delta, lmax);
            const std::filesystem::path dir = root / name;
            if (!std::filesystem::exists(dir / "meta.json") ||
                !std::filesystem::exists(dir / "moments.csv"))
                throw ConfigError("analyze: missing run output for grid point " + name +
                                  " under " + root.string());

            ordered_json meta;
            {
                std::ifstream in(dir / "meta.json");
                try {
                    in >> meta;
                } catch (const nlohmann::json::exception& e) {
                    throw ConfigError("analyze: bad meta.json for " + name + ": " + e.what());
                }
            }
            if (!meta.contains("schema_version") ||
                meta["schema_version"].get<int>() != kSchemaVersion)
                throw ConfigError("analyze: schema version mismatch for " + name);

            const ObservableSeries series =
                detail::series_from_csv(read_csv(dir / "moments.csv"));

            ordered_json entry;
            entry["delta"] = delta;
            entry["lmax"] = lmax;

            // growth exponents
            const auto& ap = manifest.analysis;
            entry["growth_window"] = {ap.growth_t_lo, ap.growth_t_hi};
            entry["growth_exponent_x2"] =
                fit_growth_exponent(series, MomentKind::second, ap.growth_t_lo,
                                    ap.growth_t_hi);
            try {
                entry["growth_exponent_x"] = fit_growth_exponent(
                    series, MomentKind::first, ap.growth_t_lo, ap.growth_t_hi);
            } catch (const ConfigError&) {
                entry["growth_exponent_x"] = nullptr;  // nonpositive <x> in window
            }

            const MomentFit mf = fit_moment_closed_forms(series, ap.t_lo);
            entry["moment_fit"] = {{"t_lo", ap.t_lo},
                                   {"b1", mf.mean_fit_available ? ordered_json(mf.b1)
                                                                : ordered_json(nullptr)},
                                   {"b2", mf.mean_fit_available ? ordered_json(mf.b2)
                                                                : ordered_json(nullptr)},
                                   {"b3", mf.b3},
                                   {"b4", mf.b4},
                                   {"residual_rms_mean", mf.residual_rms_mean},
                                   {"residual_rms_second", mf.residual_rms_second},
                                   {"physical", mf.physical}};

            // collapse and the two-piece scaling fit
            std::vector<ProbabilityProfile> profiles;
            for (int t : manifest.snapshot_times) {
                const auto path = dir / ("profile_t" + std::to_string(t) + ".csv");
                if (!std::filesystem::exists(path))
                    throw ConfigError("analyze: missing " + path.string());
                profiles.push_back(detail::profile_from_csv(read_csv(path), t));
            }
            std::vector<CollapsedProfile> collapsed;
            for (const auto& p : profiles) {
                collapsed.push_back(collapse_profile(p, ap.gamma));
                std::vector<std::vector<double>> rows;
                for (std::size_t i = 0; i < collapsed.back().zs.size(); ++i)
                    rows.push_back({collapsed.back().zs[i], collapsed.back().gs[i]});
                write_csv(dir / ("collapse_t" + std::to_string(p.t) + ".csv"), {"z", "g"},
                          rows);
            }

            double alpha = 0.0;
            bool have_fit = false;
            TwoPieceFit two_piece;
            if (collapsed.size() >= 2) {
                auto& late = collapsed.back();
                auto& mid = collapsed[collapsed.size() - 2];
                alpha = detect_collapse_cutoff(mid, late, ap.cutoff_n_sigma);
                late.z_max_fit = alpha;
                entry["collapse_max_deviation"] = collapse_max_deviation(mid, late, alpha);
                try {
                    two_piece = choose_two_piece(late, 0.0, alpha);
                    have_fit = true;
                } catch (const ConfigError&) {
                    have_fit = false;  // too few usable points below the cutoff
                }
            }
            entry["alpha_cutoff"] = alpha;
            if (have_fit) {
                entry["stretched"] = detail::stretched_to_json(two_piece.stretched);
                if (two_piece.has_tail_region)
                    entry["tail"] = {{"slope", two_piece.tail.slope},
                                     {"present", two_piece.tail.tail_present},
                                     {"z_span", two_piece.tail.z_span}};
                else
                    entry["tail"] = {{"slope", nullptr}, {"present", false}, {"z_span", 0.0}};
                fit_map[{delta, lmax}] = two_piece.stretched;
                tail_map[{delta, lmax}] =
                    two_piece.has_tail_region && two_piece.tail.tail_present;
            } else {
                entry["stretched"] = nullptr;
                entry["tail"] = nullptr;
            }

            const double mean_scaled =
                series.mean_x.back() / std::sqrt(static_cast<double>(manifest.t_max));
            const double range_scaled =
                series.range.back() / static_cast<double>(manifest.t_max);
            entry["mean_x_over_sqrt_t"] = mean_scaled;
            entry["range_over_t"] = range_scaled;
            mean_points[lmax].emplace_back(delta, mean_scaled);
            range_points[lmax].emplace_back(delta, range_scaled);

            grid_entries.push_back(std::move(entry));
        }
    }

    ordered_json out;
    out["schema_version"] = kSchemaVersion;
    out["toolkit_version"] = kToolkitVersion;
    out["gamma"] = manifest.analysis.gamma;
    out["grid"] = std::move(grid_entries);

    ordered_json mean_fits = ordered_json::object();
    ordered_json range_fits = ordered_json::object();
    for (int lmax : manifest.lmaxes) {
        const std::string key = "lmax" + std::to_string(lmax);
        try {
            const MeanScalingFit f = fit_mean_scaling(mean_points[lmax]);
            mean_fits[key] = {{"beta0", f.beta0},   {"beta", f.beta},
                              {"kappa", f.kappa},   {"residual_rms", f.residual_rms},
                              {"converged", f.converged},
                              {"delta_window", {f.delta_lo, f.delta_hi}}};
        } catch (const ConfigError&) {
            mean_fits[key] = nullptr;  // fewer than 5 usable delta points
        }
        try {
            const RangeScalingFit f = fit_range_scaling(range_points[lmax]);
            range_fits[key] = {{"s", f.s},           {"q", f.q},
                               {"r", f.r},           {"residual_rms", f.residual_rms},
                               {"converged", f.converged},
                               {"delta_window", {f.delta_lo, f.delta_hi}}};
        } catch (const ConfigError&) {
            range_fits[key] = nullptr;
        }
    }
    out["mean_scaling"] = std::move(mean_fits);
    out["range_scaling"] = std::move(range_fits);

    if (!fit_map.empty() && manifest.lmaxes.size() >= 2) {
        try {
            const CrossoverReport rep = crossover_report(fit_map, tail_map);
            ordered_json diag = ordered_json::array();
            for (std::size_t i = 0; i < rep.grid_deltas.size(); ++i)
                diag.push_back({{"delta", rep.grid_deltas[i]},
                                {"tail_present", static_cast<bool>(rep.tail_present[i])},
                                {"max_param_spread", rep.max_param_spread[i]}});
            out["crossover"] = {
                {"delta_star",
                 rep.above_grid ? ordered_json(nullptr) : ordered_json(rep.delta_star)},
                {"above_grid_maximum", rep.above_grid},
                {"per_delta", std::move(diag)}};
        } catch (const ConfigError& e) {
            out["crossover"] = {{"error", e.what()}};
        }
    } else {
        out["crossover"] = nullptr;  // needs >= 2 lmax values
    }

    detail::write_json_file(root / "analysis.json", out);
    std::cout << "[analyze] wrote " << (root / "analysis.json").string() << "\n";
}

}  // namespace qwalk
