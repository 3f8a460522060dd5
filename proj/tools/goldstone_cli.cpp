// Command-line harness: spring-chain spectra, synthetic benchmark bundles,
// alignment reports, the brute-force oracle suite, and a small
// nearest-neighbor demo. Exit codes: 0 success, 2 config error, 3 run error.

#include "goldstone/goldstone.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace goldstone;
namespace fs = std::filesystem;

namespace {

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw bench::ConfigError("cannot open config file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw bench::ConfigError("config parse error in " + path + ": " + e.what());
    }
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << text;
}

int cmd_spectrum(Index T, double lambda, const std::string& format,
                 const std::string& out_path) {
    SpectrumReport analytic = regularizer_hessian_spectrum_analytic(T, lambda);
    SpectrumReport numeric = regularizer_hessian_spectrum_numeric(T, lambda);
    double deviation = 0.0;
    for (std::size_t nu = 0; nu < analytic.eigenvalues.size(); ++nu)
        deviation = std::max(deviation,
                             std::abs(analytic.eigenvalues[nu] - numeric.eigenvalues[nu]));
    if (format == "csv") {
        std::ostringstream csv;
        csv << "nu,wavevector,analytic,numeric\n";
        for (std::size_t nu = 0; nu < analytic.eigenvalues.size(); ++nu)
            csv << nu << ',' << format_double(analytic.wavevectors[nu]) << ','
                << format_double(analytic.eigenvalues[nu]) << ','
                << format_double(numeric.eigenvalues[nu]) << '\n';
        emit(csv.str(), out_path);
    } else {
        nlohmann::json j{{"analytic", analytic},
                         {"numeric", numeric},
                         {"max_abs_deviation", deviation}};
        emit(j.dump(2) + "\n", out_path);
    }
    std::cerr << "max |analytic - numeric| = " << deviation << "\n";
    return 0;
}

int cmd_bench(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override) {
    bench::ExperimentSpec spec = bench::parse_experiment_spec(load_json(config_path));
    if (seed_override) spec.seed = *seed_override;
    return bench::run_experiment(spec, out_dir, std::cerr);
}

int cmd_align(const std::string& config_path, const std::string& format,
              const std::string& out_path, std::optional<std::uint64_t> seed_override) {
    bench::ExperimentSpec spec = bench::parse_experiment_spec(load_json(config_path));
    if (seed_override) spec.seed = *seed_override;
    auto [problem, z0] = bench::build_problem(spec);

    nlohmann::json results = nlohmann::json::array();
    std::ostringstream csv;
    csv << "run,mean,median,flagged_degenerate\n";
    for (const auto& run : spec.runs) {
        TrainConfig cfg = run.config;
        if (cfg.step_size <= 0.0)
            cfg.step_size = suggest_step_size(problem, z0, cfg.seed != 0 ? cfg.seed : spec.seed);
        auto [z, trace] = run.optimizer == OptimizerKind::goldstone_gd
                              ? run_goldstone_gd(problem, z0, cfg)
                              : run_plain_gd(problem, z0, cfg);
        bench::AlignmentReport rep = bench::alignment_report(z);
        nlohmann::json entry = rep;
        entry["run"] = run.name;
        entry["status"] = to_string(trace.status);
        results.push_back(entry);
        csv << run.name << ',' << format_double(rep.mean) << ',' << format_double(rep.median)
            << ',' << rep.flagged_degenerate << '\n';
        std::cerr << "run " << run.name << ": mean cosine " << rep.mean << "\n";
    }
    emit(format == "csv" ? csv.str() : results.dump(2) + "\n", out_path);
    return 0;
}

int cmd_oracle(int instances, std::uint64_t seed, double amplitude, double drift, double tol) {
    std::printf("instance,loss_direct,loss_brute,rel_gap\n");
    double worst = 0.0;
    for (int inst = 0; inst < instances; ++inst) {
        GroundTruth gt = generate_ground_truth_sequence(ModelKind::gram, 2, 4, 3, drift,
                                                        seed + static_cast<std::uint64_t>(inst));
        ChainProblem problem{gt.data, 1.0, 2, 4};
        EmbeddingSequence z0 = inject_goldstone_mode(gt.frames, amplitude, 1);
        auto [field, rep] = solve_gauge_direct(precompute_couplings(z0));
        const double loss_direct = total_loss(problem, apply_gauge(z0, field));
        auto brute = oracle::minimize_rotated_loss_d2(problem, z0);
        const double rel = std::abs(loss_direct - brute.loss) /
                           std::max({std::abs(loss_direct), std::abs(brute.loss), 1e-300});
        worst = std::max(worst, rel);
        std::printf("%d,%s,%s,%s\n", inst, format_double(loss_direct).c_str(),
                    format_double(brute.loss).c_str(), format_double(rel).c_str());
    }
    std::fprintf(stderr, "worst relative gap %g (tolerance %g)\n", worst, tol);
    return worst <= tol ? 0 : 3;
}

// Unasserted demo: nearest columns (by cosine) of the first frame to a query
// column of the last frame, before and after goldstone-gd.
int cmd_neighbors(Index d, Index n, Index T, double amplitude, std::uint64_t seed,
                  Index query, int top) {
    GroundTruth gt = generate_ground_truth_sequence(ModelKind::gram, d, n, T, 0.0, seed);
    ChainProblem problem{gt.data, 1.0, d, n};
    EmbeddingSequence z0 = inject_goldstone_mode(gt.frames, amplitude, 1);
    if (query < 0 || query >= n) throw bench::ConfigError("query column out of range");

    TrainConfig cfg;
    cfg.step_size = suggest_step_size(problem, z0, seed);
    cfg.gd_steps_per_cycle = 50;
    cfg.max_cycles = 100;
    cfg.grad_tol = 1e-8;

    auto neighbors_of = [&](const EmbeddingSequence& z) {
        std::vector<std::pair<double, Index>> scored;
        const auto q = z.back().col(query);
        for (Index i = 0; i < n; ++i) {
            const auto c = z.front().col(i);
            const double denom = q.norm() * c.norm();
            scored.emplace_back(denom > 0 ? q.dot(c) / denom : 0.0, i);
        }
        std::sort(scored.begin(), scored.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });
        scored.resize(static_cast<std::size_t>(std::min<Index>(top, n)));
        return scored;
    };

    std::printf("query: column %lld of frame T (before optimization)\n",
                static_cast<long long>(query));
    for (const auto& [sim, idx] : neighbors_of(z0))
        std::printf("  col %lld  cos %.4f\n", static_cast<long long>(idx), sim);
    auto [z, trace] = run_goldstone_gd(problem, z0, cfg);
    std::printf("after goldstone-gd (%s):\n", to_string(trace.status));
    for (const auto& [sim, idx] : neighbors_of(z))
        std::printf("  col %lld  cos %.4f\n", static_cast<long long>(idx), sim);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Goldstone-mode elimination benchmark harness"};
    app.require_subcommand(1);

    auto* spectrum = app.add_subcommand("spectrum", "spring-chain Hessian spectrum");
    Index spec_T = 32;
    double spec_lambda = 1.0;
    std::string spec_format = "json", spec_out;
    spectrum->add_option("--T", spec_T, "number of timesteps")->required();
    spectrum->add_option("--lambda", spec_lambda, "coupling strength");
    spectrum->add_option("--format", spec_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    spectrum->add_option("--out", spec_out, "output file (stdout if omitted)");

    auto* benchcmd = app.add_subcommand("bench", "run an experiment bundle from a JSON spec");
    std::string bench_config, bench_out;
    std::uint64_t seed_val = 0;
    bool seed_set = false;
    benchcmd->add_option("--config", bench_config, "experiment spec (JSON)")->required();
    benchcmd->add_option("--out", bench_out, "output directory")->required();
    benchcmd->add_option("--seed", seed_val, "override the problem seed")
        ->each([&](const std::string&) { seed_set = true; });

    auto* aligncmd = app.add_subcommand("align", "alignment reports for the configured runs");
    std::string align_config, align_format = "json", align_out;
    aligncmd->add_option("--config", align_config, "experiment spec (JSON)")->required();
    aligncmd->add_option("--format", align_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    aligncmd->add_option("--out", align_out, "output file (stdout if omitted)");
    aligncmd->add_option("--seed", seed_val, "override the problem seed")
        ->each([&](const std::string&) { seed_set = true; });

    auto* oraclecmd =
        app.add_subcommand("oracle", "small-instance brute-force suite (T=3, d=2, n=4)");
    int oracle_instances = 10;
    std::uint64_t oracle_seed = 700;
    double oracle_amplitude = 0.1, oracle_drift = 0.05, oracle_tol = 1e-4;
    oraclecmd->add_option("--instances", oracle_instances, "number of random instances");
    oraclecmd->add_option("--seed", oracle_seed, "base seed");
    oraclecmd->add_option("--amplitude", oracle_amplitude, "Goldstone amplitude (radians)");
    oraclecmd->add_option("--drift", oracle_drift, "ground-truth drift");
    oraclecmd->add_option("--tol", oracle_tol, "relative gap tolerance");

    auto* neighborscmd = app.add_subcommand("neighbors", "nearest-neighbor demo (unasserted)");
    Index nb_d = 8, nb_n = 16, nb_T = 16, nb_query = 0;
    double nb_amplitude = 0.5;
    std::uint64_t nb_seed = 1;
    int nb_top = 5;
    neighborscmd->add_option("--d", nb_d, "embedding dimension");
    neighborscmd->add_option("--n", nb_n, "embeddings per frame");
    neighborscmd->add_option("--T", nb_T, "timesteps");
    neighborscmd->add_option("--amplitude", nb_amplitude, "Goldstone amplitude");
    neighborscmd->add_option("--seed", nb_seed, "seed");
    neighborscmd->add_option("--query", nb_query, "query column index");
    neighborscmd->add_option("--top", nb_top, "neighbors to print");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad flags are config errors
    }

    try {
        if (*spectrum) return cmd_spectrum(spec_T, spec_lambda, spec_format, spec_out);
        if (*benchcmd)
            return cmd_bench(bench_config, bench_out,
                             seed_set ? std::optional<std::uint64_t>(seed_val) : std::nullopt);
        if (*aligncmd)
            return cmd_align(align_config, align_format, align_out,
                             seed_set ? std::optional<std::uint64_t>(seed_val) : std::nullopt);
        if (*oraclecmd)
            return cmd_oracle(oracle_instances, oracle_seed, oracle_amplitude, oracle_drift,
                              oracle_tol);
        if (*neighborscmd)
            return cmd_neighbors(nb_d, nb_n, nb_T, nb_amplitude, nb_seed, nb_query, nb_top);
    } catch (const bench::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "run error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
