#pragma once

// Experiment harness behind the CLI: JSON experiment specs, the alignment
// report (first-vs-last cosine similarity per embedding column), SVG loss
// charts, and the bundle writer (traces, reports, manifest with digests).

#include "goldstone/brute_force.hpp"
#include "goldstone/trace_io.hpp"
#include "goldstone/version.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace goldstone::bench {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PerturbationSpec {
    int wavevector_index = 1;
    double amplitude = 0.0;  // radians; 0 disables the injection
};

enum class InitKind { ground_truth, shared_random, per_frame_random };

inline const char* to_string(InitKind k) {
    switch (k) {
        case InitKind::ground_truth: return "ground_truth";
        case InitKind::shared_random: return "shared_random";
        case InitKind::per_frame_random: return "per_frame_random";
    }
    return "?";
}

struct RunSpec {
    std::string name;
    OptimizerKind optimizer = OptimizerKind::plain_gd;
    TrainConfig config;   // config.step_size <= 0 requests the automatic rule
};

struct ExperimentSpec {
    ModelKind model = ModelKind::gram;
    Index d = 8;
    Index n = 16;
    Index T = 32;
    double lambda = 1.0;
    double drift = 0.0;
    std::uint64_t seed = 0;
    InitKind init = InitKind::ground_truth;
    double init_noise = 0.0;
    PerturbationSpec perturbation;
    std::vector<RunSpec> runs;
};

// ---------------------------------------------------------------------------
// Spec parsing

namespace detail {

template <typename T>
T require(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("missing config field: " + key);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config field has wrong type: " + key);
    }
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config field has wrong type: " + key);
    }
}

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "gram") return ModelKind::gram;
    if (s == "factorization") return ModelKind::factorization;
    if (s == "zero") return ModelKind::zero;
    throw ConfigError("unknown model kind: " + s);
}

inline InitKind parse_init_kind(const std::string& s) {
    if (s == "ground_truth") return InitKind::ground_truth;
    if (s == "shared_random") return InitKind::shared_random;
    if (s == "per_frame_random") return InitKind::per_frame_random;
    throw ConfigError("unknown init kind: " + s);
}

inline OptimizerKind parse_optimizer_kind(const std::string& s) {
    if (s == "plain_gd") return OptimizerKind::plain_gd;
    if (s == "goldstone_gd") return OptimizerKind::goldstone_gd;
    throw ConfigError("unknown optimizer kind: " + s);
}

inline GaugeSolver parse_gauge_solver(const std::string& s) {
    if (s == "direct") return GaugeSolver::direct;
    if (s == "preconditioned_descent") return GaugeSolver::preconditioned_descent;
    throw ConfigError("unknown gauge solver: " + s);
}

inline TrainConfig parse_train_config(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.step_size = get_or<double>(j, "step_size", 0.0);  // 0 = automatic
    cfg.gd_steps_per_cycle = get_or<int>(j, "gd_steps_per_cycle", cfg.gd_steps_per_cycle);
    cfg.gauge_every = get_or<int>(j, "gauge_every", cfg.gauge_every);
    cfg.max_cycles = get_or<int>(j, "max_cycles", cfg.max_cycles);
    cfg.grad_tol = get_or<double>(j, "grad_tol", cfg.grad_tol);
    cfg.gauge_solver = parse_gauge_solver(get_or<std::string>(j, "gauge_solver", "direct"));
    const std::string apply = get_or<std::string>(j, "apply_mode", "exact");
    if (apply == "exact") {
        cfg.apply_mode = ExpmMode::exact();
    } else if (apply == "truncated") {
        cfg.apply_mode = ExpmMode::truncated(get_or<int>(j, "truncation_order", 2));
    } else {
        throw ConfigError("unknown apply mode: " + apply);
    }
    cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
    return cfg;
}

}  // namespace detail

inline ExperimentSpec parse_experiment_spec(const nlohmann::json& j) {
    ExperimentSpec spec;
    const auto problem = detail::require<nlohmann::json>(j, "problem");
    spec.model = detail::parse_model_kind(detail::get_or<std::string>(problem, "model", "gram"));
    spec.d = detail::require<Index>(problem, "d");
    spec.n = detail::require<Index>(problem, "n");
    spec.T = detail::require<Index>(problem, "T");
    spec.lambda = detail::get_or<double>(problem, "lambda", 1.0);
    spec.drift = detail::get_or<double>(problem, "drift", 0.0);
    spec.seed = detail::get_or<std::uint64_t>(problem, "seed", 0);
    if (spec.d < 2 || spec.n < spec.d || spec.T < 2)
        throw ConfigError("problem requires d >= 2, n >= d, T >= 2");
    if (!(spec.lambda > 0.0)) throw ConfigError("problem requires lambda > 0");
    if (spec.drift < 0.0) throw ConfigError("problem requires drift >= 0");

    if (j.contains("init")) {
        const auto& init = j.at("init");
        spec.init = detail::parse_init_kind(
            detail::get_or<std::string>(init, "kind", "ground_truth"));
        spec.init_noise = detail::get_or<double>(init, "noise", 0.0);
    }
    if (j.contains("perturbation")) {
        const auto& pert = j.at("perturbation");
        spec.perturbation.wavevector_index =
            detail::get_or<int>(pert, "wavevector_index", 1);
        spec.perturbation.amplitude = detail::get_or<double>(pert, "amplitude", 0.0);
        if (spec.perturbation.amplitude != 0.0 &&
            (spec.perturbation.wavevector_index < 1 ||
             spec.perturbation.wavevector_index >= spec.T))
            throw ConfigError("perturbation requires 1 <= wavevector_index <= T-1");
    }

    const auto runs = detail::require<nlohmann::json>(j, "runs");
    if (!runs.is_array() || runs.empty()) throw ConfigError("runs must be a non-empty array");
    for (const auto& r : runs) {
        RunSpec rs;
        rs.name = detail::require<std::string>(r, "name");
        rs.optimizer =
            detail::parse_optimizer_kind(detail::require<std::string>(r, "optimizer"));
        rs.config = r.contains("config") ? detail::parse_train_config(r.at("config"))
                                         : TrainConfig{};
        spec.runs.push_back(std::move(rs));
    }
    return spec;
}

inline void to_json(nlohmann::json& j, const ExperimentSpec& spec) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : spec.runs) {
        runs.push_back({{"name", r.name},
                        {"optimizer", to_string(r.optimizer)},
                        {"config",
                         {{"step_size", r.config.step_size},
                          {"gd_steps_per_cycle", r.config.gd_steps_per_cycle},
                          {"gauge_every", r.config.gauge_every},
                          {"max_cycles", r.config.max_cycles},
                          {"grad_tol", r.config.grad_tol},
                          {"gauge_solver", to_string(r.config.gauge_solver)},
                          {"apply_mode", r.config.apply_mode.is_exact ? "exact" : "truncated"},
                          {"truncation_order", r.config.apply_mode.order},
                          {"seed", r.config.seed}}}});
    }
    j = nlohmann::json{
        {"problem",
         {{"model", to_string(spec.model)},
          {"d", spec.d},
          {"n", spec.n},
          {"T", spec.T},
          {"lambda", spec.lambda},
          {"drift", spec.drift},
          {"seed", spec.seed}}},
        {"init", {{"kind", to_string(spec.init)}, {"noise", spec.init_noise}}},
        {"perturbation",
         {{"wavevector_index", spec.perturbation.wavevector_index},
          {"amplitude", spec.perturbation.amplitude}}},
        {"runs", runs}};
}

// ---------------------------------------------------------------------------
// Alignment report

struct AlignmentReport {
    std::vector<double> similarities;  // one per column, in [-1, 1]
    std::vector<long> histogram;       // fixed bins over [-1, 1]
    int bins = 20;
    double mean = 0.0;
    double median = 0.0;
    long flagged_degenerate = 0;  // zero-norm columns, scored as 0
};

/// Cosine similarity between matching columns of the first and last frames.
inline AlignmentReport alignment_report(const EmbeddingSequence& z, int bins = 20) {
    if (z.size() < 2) throw std::invalid_argument("alignment_report: need T >= 2");
    if (bins < 1) throw std::invalid_argument("alignment_report: need bins >= 1");
    const EmbeddingMatrix& first = z.front();
    const EmbeddingMatrix& last = z.back();
    if (first.cols() != last.cols() || first.cols() < 1)
        throw std::invalid_argument("alignment_report: need matching n >= 1");

    AlignmentReport rep;
    rep.bins = bins;
    rep.histogram.assign(static_cast<std::size_t>(bins), 0);
    for (Index i = 0; i < first.cols(); ++i) {
        const double na = first.col(i).norm();
        const double nb = last.col(i).norm();
        double sim = 0.0;
        if (na == 0.0 || nb == 0.0) {
            ++rep.flagged_degenerate;
        } else {
            sim = first.col(i).dot(last.col(i)) / (na * nb);
            sim = std::clamp(sim, -1.0, 1.0);
        }
        rep.similarities.push_back(sim);
        auto bin = static_cast<long>((sim + 1.0) / 2.0 * bins);
        bin = std::clamp<long>(bin, 0, bins - 1);
        ++rep.histogram[static_cast<std::size_t>(bin)];
    }
    const std::size_t n = rep.similarities.size();
    double sum = 0.0;
    for (double s : rep.similarities) sum += s;
    rep.mean = sum / static_cast<double>(n);
    std::vector<double> sorted = rep.similarities;
    std::sort(sorted.begin(), sorted.end());
    rep.median = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return rep;
}

inline void to_json(nlohmann::json& j, const AlignmentReport& rep) {
    j = nlohmann::json{{"similarities", rep.similarities}, {"histogram", rep.histogram},
                       {"bins", rep.bins},                 {"mean", rep.mean},
                       {"median", rep.median},             {"flagged_degenerate", rep.flagged_degenerate}};
}

// ---------------------------------------------------------------------------
// Digests and charts

inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

inline std::string fnv1a64_hex(std::string_view data) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

struct ChartSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;  // (step, total_loss)
};

/// Minimal deterministic SVG line chart, log10 on the y axis. Presentation
/// only; nothing asserts its contents.
inline std::string loss_chart_svg(const std::vector<ChartSeries>& series,
                                  const std::string& title) {
    constexpr double width = 860.0, height = 520.0;
    constexpr double ml = 70.0, mr = 20.0, mt = 40.0, mb = 50.0;
    double xmin = 0.0, xmax = 1.0, ymin = 1e300, ymax = -1e300;
    bool any = false;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (!(y > 0.0)) continue;
            const double ly = std::log10(y);
            if (!any) { xmin = xmax = x; ymin = ymax = ly; any = true; }
            xmin = std::min(xmin, x); xmax = std::max(xmax, x);
            ymin = std::min(ymin, ly); ymax = std::max(ymax, ly);
        }
    }
    if (!any) { ymin = -1.0; ymax = 1.0; }
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= ymin) ymax = ymin + 1.0;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
    auto py = [&](double ly) { return height - mb - (ly - ymin) / (ymax - ymin) * (height - mt - mb); };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return std::string(buf);
    };

    static constexpr const char* palette[] = {"#4363d8", "#e6194b", "#3cb44b",
                                              "#f58231", "#911eb4", "#469990"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
        << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << num(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
    svg << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(width - ml - mr)
        << "\" height=\"" << num(height - mt - mb)
        << "\" fill=\"none\" stroke=\"#888\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << num(width / 2) << "\" y=\"" << num(height - 12)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">GD step</text>\n";
    svg << "<text x=\"18\" y=\"" << num(height / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "transform=\"rotate(-90 18 " << num(height / 2) << ")\">log10 total loss</text>\n";
    for (int g = 0; g <= 4; ++g) {
        const double ly = ymin + (ymax - ymin) * g / 4.0;
        svg << "<line x1=\"" << num(ml) << "\" y1=\"" << num(py(ly)) << "\" x2=\""
            << num(width - mr) << "\" y2=\"" << num(py(ly))
            << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << num(ml - 6) << "\" y=\"" << num(py(ly) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(ly)
            << "</text>\n";
    }
    std::size_t color = 0;
    double legend_y = mt + 16.0;
    for (const auto& s : series) {
        const char* stroke = palette[color % (sizeof palette / sizeof palette[0])];
        svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
        bool started = false;
        for (const auto& [x, y] : s.points) {
            if (!(y > 0.0)) continue;
            if (started) svg << ' ';
            svg << num(px(x)) << ',' << num(py(std::log10(y)));
            started = true;
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << num(width - mr - 8) << "\" y=\"" << num(legend_y)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
            << stroke << "\">" << s.name << "</text>\n";
        legend_y += 16.0;
        ++color;
    }
    svg << "</svg>\n";
    return svg.str();
}

// ---------------------------------------------------------------------------
// Experiment runner

struct RunOutcome {
    std::string name;
    bool ok = false;
    std::string status;  // converged / max_cycles / error text
    long gd_steps = 0;
    double step_size = 0.0;
    double final_total_loss = 0.0;
    double final_local_loss_sum = 0.0;
    double final_regularizer = 0.0;
    double final_grad_norm = 0.0;
    double alignment_mean = 0.0;
    std::string error;
};

inline void to_json(nlohmann::json& j, const RunOutcome& o) {
    j = nlohmann::json{{"name", o.name},
                       {"ok", o.ok},
                       {"status", o.status},
                       {"gd_steps", o.gd_steps},
                       {"step_size", o.step_size},
                       {"final_total_loss", o.final_total_loss},
                       {"final_local_loss_sum", o.final_local_loss_sum},
                       {"final_regularizer", o.final_regularizer},
                       {"final_grad_norm", o.final_grad_norm},
                       {"alignment_mean", o.alignment_mean}};
    if (!o.error.empty()) j["error"] = o.error;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace detail

/// Builds the problem and the initial sequence an experiment runs from.
inline std::pair<ChainProblem, EmbeddingSequence> build_problem(const ExperimentSpec& spec) {
    GroundTruth gt = generate_ground_truth_sequence(spec.model, spec.d, spec.n, spec.T,
                                                    spec.drift, spec.seed);
    ChainProblem problem{gt.data, spec.lambda, spec.d, spec.n};

    std::mt19937_64 rng(spec.seed + 0x9e3779b97f4a7c15ull);
    EmbeddingSequence z0;
    switch (spec.init) {
        case InitKind::ground_truth:
            z0 = gt.frames;
            break;
        case InitKind::shared_random: {
            Matrix shared = goldstone::detail::gaussian_matrix(rng, spec.d, spec.n);
            z0.assign(static_cast<std::size_t>(spec.T), shared);
            break;
        }
        case InitKind::per_frame_random:
            for (Index t = 0; t < spec.T; ++t)
                z0.push_back(goldstone::detail::gaussian_matrix(rng, spec.d, spec.n));
            break;
    }
    if (spec.init_noise > 0.0)
        for (auto& frame : z0)
            frame += spec.init_noise * goldstone::detail::gaussian_matrix(rng, spec.d, spec.n);
    if (spec.perturbation.amplitude != 0.0)
        z0 = inject_goldstone_mode(z0, spec.perturbation.amplitude,
                                   spec.perturbation.wavevector_index);
    return {std::move(problem), std::move(z0)};
}

/// Runs every configured optimizer, writes the experiment bundle (per-run
/// trace CSV/JSON + alignment JSON, spectrum JSON, SVG chart, manifest with
/// content digests), and returns the process exit code: 0, or 3 if any run
/// failed (the failure is recorded in the manifest).
inline int run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                          std::ostream& log) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw std::runtime_error("cannot create output directory " + out_dir.string());

    auto [problem, z0] = build_problem(spec);

    std::vector<std::pair<std::string, std::string>> files;  // relative path -> content
    auto add_file = [&](const std::string& rel, const std::string& content) {
        files.emplace_back(rel, content);
    };

    {
        SpectrumReport analytic = regularizer_hessian_spectrum_analytic(spec.T, spec.lambda);
        SpectrumReport numeric = regularizer_hessian_spectrum_numeric(spec.T, spec.lambda);
        double deviation = 0.0;
        for (Index nu = 0; nu < spec.T; ++nu)
            deviation = std::max(deviation,
                                 std::abs(analytic.eigenvalues[static_cast<std::size_t>(nu)] -
                                          numeric.eigenvalues[static_cast<std::size_t>(nu)]));
        nlohmann::json sj{{"analytic", analytic},
                          {"numeric", numeric},
                          {"max_abs_deviation", deviation}};
        add_file("spectrum.json", sj.dump(2) + "\n");
    }

    std::vector<RunOutcome> outcomes;
    std::vector<ChartSeries> chart;
    bool all_ok = true;
    for (const auto& run : spec.runs) {
        RunOutcome outcome;
        outcome.name = run.name;
        TrainConfig cfg = run.config;
        try {
            if (cfg.step_size <= 0.0)
                cfg.step_size = suggest_step_size(problem, z0, cfg.seed != 0 ? cfg.seed : spec.seed);
            outcome.step_size = cfg.step_size;
            auto [z_final, trace] = run.optimizer == OptimizerKind::goldstone_gd
                                        ? run_goldstone_gd(problem, z0, cfg)
                                        : run_plain_gd(problem, z0, cfg);
            const TraceRecord& last = trace.records.back();
            outcome.ok = true;
            outcome.status = to_string(trace.status);
            outcome.gd_steps = last.step;
            outcome.final_total_loss = last.total_loss;
            outcome.final_local_loss_sum = last.local_loss_sum;
            outcome.final_regularizer = last.regularizer;
            outcome.final_grad_norm = last.grad_norm;

            AlignmentReport alignment = alignment_report(z_final);
            outcome.alignment_mean = alignment.mean;

            add_file(run.name + "/trace.csv", trace_csv(trace));
            nlohmann::json tj{{"run", run.name},
                              {"optimizer", to_string(run.optimizer)},
                              {"step_size", cfg.step_size},
                              {"seed", cfg.seed != 0 ? cfg.seed : spec.seed},
                              {"trace", trace}};
            add_file(run.name + "/trace.json", tj.dump(2) + "\n");
            add_file(run.name + "/alignment.json", nlohmann::json(alignment).dump(2) + "\n");

            ChartSeries series{run.name, {}};
            for (const auto& r : trace.records)
                series.points.emplace_back(static_cast<double>(r.step), r.total_loss);
            chart.push_back(std::move(series));
            log << "run " << run.name << ": " << outcome.status << " after " << outcome.gd_steps
                << " GD steps, total_loss " << outcome.final_total_loss << "\n";
        } catch (const std::exception& e) {
            outcome.ok = false;
            outcome.status = "error";
            outcome.error = e.what();
            all_ok = false;
            log << "run " << run.name << ": ERROR " << e.what() << "\n";
        }
        outcomes.push_back(std::move(outcome));
    }

    add_file("charts/loss_vs_iteration.svg", loss_chart_svg(chart, "total loss vs GD step"));

    for (const auto& [rel, content] : files) {
        const fs::path path = out_dir / rel;
        fs::create_directories(path.parent_path(), ec);
        detail::write_file(path, content);
    }

    nlohmann::json manifest{{"library_version", GOLDSTONE_VERSION_STRING},
                            {"spec", spec},
                            {"seed", spec.seed},
                            {"runs", outcomes}};
    nlohmann::json file_list = nlohmann::json::array();
    for (const auto& [rel, content] : files)
        file_list.push_back({{"path", rel},
                             {"bytes", content.size()},
                             {"fnv1a64", fnv1a64_hex(content)}});
    manifest["files"] = file_list;
    detail::write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

    return all_ok ? 0 : 3;
}

}  // namespace goldstone::bench
