// qwalk: simulate and analyze 1D discrete-time quantum walks with
// power-law-distributed step lengths.
//
//   qwalk run     --manifest exp.json [overrides...]
//   qwalk analyze --manifest exp.json [overrides...]
//
// Exit codes: 0 success, 2 configuration error, 3 numerical-consistency error.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qwalk/experiment.hpp"

namespace {

struct Overrides {
    std::string manifest_path;
    std::vector<double> deltas;
    std::vector<int> lmaxes;
    std::optional<int> t_max;
    std::optional<int> n_config;
    std::optional<std::uint64_t> seed;
    std::optional<double> a0, b0;
    std::string coin_preset;
    std::vector<int> snapshots;
    std::string out_dir;
    std::optional<int> threads;
    std::optional<double> gamma;
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--manifest", o.manifest_path, "JSON manifest file");
    cmd->add_option("--delta", o.deltas, "step-length exponent(s) delta >= 0");
    cmd->add_option("--lmax", o.lmaxes, "maximum step length(s)");
    cmd->add_option("--tmax", o.t_max, "number of time steps");
    cmd->add_option("--configs", o.n_config, "number of disorder realizations");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--a0", o.a0, "initial right-coin amplitude");
    cmd->add_option("--b0", o.b0, "initial left-coin amplitude");
    cmd->add_option("--coin", o.coin_preset,
                    "coin preset: paper-asymmetric, right-only, left-only");
    cmd->add_option("--snapshots", o.snapshots, "snapshot times (sorted)");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--threads", o.threads, "worker threads (0 = hardware)");
    cmd->add_option("--gamma", o.gamma, "collapse exponent");
}

qwalk::ExperimentManifest build_manifest(const Overrides& o) {
    qwalk::ExperimentManifest m;
    if (!o.manifest_path.empty()) m = qwalk::load_manifest(o.manifest_path);
    if (!o.deltas.empty()) m.deltas = o.deltas;
    if (!o.lmaxes.empty()) m.lmaxes = o.lmaxes;
    if (o.t_max) m.t_max = *o.t_max;
    if (o.n_config) m.n_config = *o.n_config;
    if (o.seed) m.master_seed = *o.seed;
    if (!o.coin_preset.empty())
        std::tie(m.coin_a0, m.coin_b0) = qwalk::coin_preset(o.coin_preset);
    if (o.a0) m.coin_a0 = *o.a0;
    if (o.b0) m.coin_b0 = *o.b0;
    if (!o.snapshots.empty()) m.snapshot_times = o.snapshots;
    if (!o.out_dir.empty()) m.out_dir = o.out_dir;
    if (o.threads) m.threads = *o.threads;
    if (o.gamma) m.analysis.gamma = *o.gamma;
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"discrete-time quantum walk with truncated power-law step lengths"};
    app.require_subcommand(1);

    Overrides run_opts, analyze_opts;
    CLI::App* run = app.add_subcommand("run", "run the (delta, lmax) sweep");
    add_common_flags(run, run_opts);
    CLI::App* analyze = app.add_subcommand("analyze", "analyze a completed sweep");
    add_common_flags(analyze, analyze_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) qwalk::run_command(build_manifest(run_opts));
        if (analyze->parsed()) qwalk::analyze_command(build_manifest(analyze_opts));
    } catch (const qwalk::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const qwalk::NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
