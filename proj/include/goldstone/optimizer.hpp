#pragma once

// The alternating training loop: phases of plain gradient descent on the
// chain objective interleaved with gauge phases (precompute couplings, solve
// the quadratic gauge problem, rotate the frames). Plain GD is the same
// engine with gauge phases disabled, so baseline comparisons are exact.

#include "goldstone/gauge.hpp"

#include <chrono>
#include <cstdint>
#include <numbers>
#include <random>

namespace goldstone {

enum class Phase { gd, gauge };
enum class RunStatus { converged, max_cycles };
enum class OptimizerKind { plain_gd, goldstone_gd };

inline const char* to_string(Phase p) { return p == Phase::gd ? "gd" : "gauge"; }
inline const char* to_string(RunStatus s) {
    return s == RunStatus::converged ? "converged" : "max_cycles";
}
inline const char* to_string(OptimizerKind k) {
    return k == OptimizerKind::plain_gd ? "plain_gd" : "goldstone_gd";
}

struct TrainConfig {
    double step_size = 0.0;       // eta; must be > 0 (see suggest_step_size)
    int gd_steps_per_cycle = 50;  // k
    int gauge_every = 1;          // cycles between gauge phases
    int max_cycles = 100;
    double grad_tol = 1e-6;
    GaugeSolver gauge_solver = GaugeSolver::direct;
    ExpmMode apply_mode = ExpmMode::exact();
    std::uint64_t seed = 0;

    void validate() const {
        if (!(step_size > 0.0)) throw std::invalid_argument("TrainConfig: step_size must be > 0");
        if (gd_steps_per_cycle < 1)
            throw std::invalid_argument("TrainConfig: gd_steps_per_cycle must be >= 1");
        if (gauge_every < 1) throw std::invalid_argument("TrainConfig: gauge_every must be >= 1");
        if (max_cycles < 1) throw std::invalid_argument("TrainConfig: max_cycles must be >= 1");
        if (!(grad_tol > 0.0)) throw std::invalid_argument("TrainConfig: grad_tol must be > 0");
    }
};

struct TraceRecord {
    int cycle = 0;
    Phase phase = Phase::gd;
    long step = 0;  // completed GD steps when the record was taken
    double total_loss = 0.0;
    double local_loss_sum = 0.0;
    double regularizer = 0.0;
    double grad_norm = 0.0;
    double wall_time_s = 0.0;
};

struct ConvergenceTrace {
    std::vector<TraceRecord> records;
    RunStatus status = RunStatus::max_cycles;
};

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Step size 0.5 / h_max, where h_max bounds the Hessian by the largest
/// spring eigenvalue (2 - 2 cos(pi (T-1)/T)) lambda plus a local-loss
/// curvature estimate from a few power-iteration steps at Z0 (central-
/// difference Hessian-vector products). Deterministic for a fixed seed.
inline double suggest_step_size(const ChainProblem& p, const EmbeddingSequence& z0,
                                std::uint64_t seed, int power_iters = 20) {
    p.validate();
    check_shapes(p, z0);
    const Index T = p.timesteps();
    const double h_spring =
        (2.0 - 2.0 * std::cos(std::numbers::pi * static_cast<double>(T - 1) /
                              static_cast<double>(T))) *
        p.lambda;

    auto local_grads = [&](const EmbeddingSequence& z) {
        EmbeddingSequence g(z.size());
        for (std::size_t t = 0; t < z.size(); ++t) g[t] = local_loss_grad(p.data[t], z[t]);
        return g;
    };

    std::mt19937_64 rng(seed);
    EmbeddingSequence dir(z0.size());
    for (auto& m : dir) m = detail::gaussian_matrix(rng, p.dim, p.count);
    double dn = sequence_norm(dir);
    if (dn == 0.0) return 0.5 / h_spring;
    for (auto& m : dir) m /= dn;

    double scale = 1.0;
    for (const auto& m : z0) scale = std::max(scale, m.cwiseAbs().maxCoeff());
    const double fd_step = 1e-5 * scale;

    double curvature = 0.0;
    for (int it = 0; it < power_iters; ++it) {
        EmbeddingSequence zp = z0, zm = z0;
        for (std::size_t t = 0; t < z0.size(); ++t) {
            zp[t] += fd_step * dir[t];
            zm[t] -= fd_step * dir[t];
        }
        EmbeddingSequence gp = local_grads(zp), gm = local_grads(zm);
        EmbeddingSequence hv(z0.size());
        for (std::size_t t = 0; t < z0.size(); ++t) hv[t] = (gp[t] - gm[t]) / (2.0 * fd_step);
        curvature = sequence_norm(hv);
        if (curvature <= 1e-14) break;
        for (std::size_t t = 0; t < z0.size(); ++t) dir[t] = hv[t] / curvature;
    }
    return 0.5 / (h_spring + curvature);
}

namespace detail {

inline std::pair<EmbeddingSequence, ConvergenceTrace> run_gd_engine(const ChainProblem& p,
                                                                    EmbeddingSequence z,
                                                                    const TrainConfig& cfg,
                                                                    bool with_gauge) {
    p.validate();
    cfg.validate();
    check_shapes(p, z);

    ConvergenceTrace trace;
    const long budget = static_cast<long>(cfg.max_cycles) * cfg.gd_steps_per_cycle;
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    const double initial_total = total_loss(p, z);
    const double divergence_cap = 10.0 * std::max(initial_total, 1e-12);
    const bool gauge_active = with_gauge && skew_dim(p.dim) > 0;

    long step = 0;
    auto record = [&](int cycle, Phase phase, double ll, double reg, double gn) {
        trace.records.push_back({cycle, phase, step, ll + reg, ll, reg, gn, elapsed()});
    };

    auto gauge_phase = [&](int cycle) {
        const double before_total = total_loss(p, z);
        CouplingSet mats = precompute_couplings(z);
        SkewField field;
        try {
            if (cfg.gauge_solver == GaugeSolver::direct) {
                try {
                    field = solve_gauge_direct(mats).first;
                } catch (const SingularSystemError&) {
                    field = solve_gauge_descent(mats).first;
                }
            } else {
                field = solve_gauge_descent(mats).first;
            }
        } catch (const NonConvergenceError& e) {
            throw NonConvergenceError(
                "gauge phase failed at cycle " + std::to_string(cycle) + ": " + e.what(),
                e.residual, e.iterations);
        }
        EmbeddingSequence cand = apply_gauge(z, field, cfg.apply_mode);
        // The quadratic model is only trusted when it actually helps; far
        // from alignment a step that would raise the loss is discarded,
        // which keeps total_loss non-increasing across phase boundaries.
        if (total_loss(p, cand) <= before_total * (1.0 + 1e-9)) z = std::move(cand);
    };

    // Records are taken after each state change, so consecutive rows bracket
    // every GD step and every gauge phase.
    auto cycle_of = [&](long s) {
        return s == 0 ? 1 : static_cast<int>((s - 1) / cfg.gd_steps_per_cycle + 1);
    };

    trace.status = RunStatus::max_cycles;
    EmbeddingSequence g = total_loss_grad(p, z);
    double gn = sequence_norm(g);
    record(cycle_of(step), Phase::gd, local_loss_sum(p, z), regularizer_value(p, z), gn);
    for (;;) {
        if (gn <= cfg.grad_tol) {
            trace.status = RunStatus::converged;
            break;
        }
        if (step >= budget) break;

        for (std::size_t t = 0; t < z.size(); ++t) z[t] -= cfg.step_size * g[t];
        ++step;
        const double tl = total_loss(p, z);
        if (!std::isfinite(tl) || tl > divergence_cap)
            throw DivergenceError("gradient descent diverged at step " + std::to_string(step) +
                                  " (total_loss " + std::to_string(tl) + ")");
        g = total_loss_grad(p, z);
        gn = sequence_norm(g);
        record(cycle_of(step), Phase::gd, local_loss_sum(p, z), regularizer_value(p, z), gn);

        if (gauge_active && step % cfg.gd_steps_per_cycle == 0) {
            const int done = static_cast<int>(step / cfg.gd_steps_per_cycle);
            if (done % cfg.gauge_every == 0) {
                gauge_phase(done);
                g = total_loss_grad(p, z);
                gn = sequence_norm(g);
                record(done, Phase::gauge, local_loss_sum(p, z), regularizer_value(p, z), gn);
            }
        }
    }
    return {std::move(z), std::move(trace)};
}

}  // namespace detail

/// Fixed-step gradient descent on the chain objective. Stops when the
/// gradient norm reaches grad_tol or the step budget max_cycles * k runs out;
/// throws DivergenceError if the loss grows past 10x its initial value or
/// turns non-finite.
inline std::pair<EmbeddingSequence, ConvergenceTrace> run_plain_gd(const ChainProblem& p,
                                                                   EmbeddingSequence z0,
                                                                   const TrainConfig& cfg) {
    return detail::run_gd_engine(p, std::move(z0), cfg, false);
}

/// Alternating optimization: cycles of k GD steps, followed (every
/// gauge_every cycles) by a gauge phase. Gauge phases preserve the local
/// losses in exact apply mode and never increase the total loss. For d = 1
/// the skew space is empty and the run matches run_plain_gd record for
/// record.
inline std::pair<EmbeddingSequence, ConvergenceTrace> run_goldstone_gd(const ChainProblem& p,
                                                                       EmbeddingSequence z0,
                                                                       const TrainConfig& cfg) {
    return detail::run_gd_engine(p, std::move(z0), cfg, true);
}

/// Rotates frame t by exp(a cos(q_nu (t - 1/2)) B), q_nu = pi nu / T, with B
/// a fixed unit-Frobenius-norm generator: the eigenmode-shaped perturbation
/// that excites a single Goldstone mode without touching any local loss.
inline EmbeddingSequence inject_goldstone_mode(const EmbeddingSequence& z, double amplitude,
                                               int wavevector_index) {
    if (z.empty()) throw std::invalid_argument("inject_goldstone_mode: empty sequence");
    const Index d = z.front().rows();
    const Index T = static_cast<Index>(z.size());
    if (d < 2) throw std::invalid_argument("inject_goldstone_mode: need d >= 2");
    if (wavevector_index < 1 || wavevector_index >= T)
        throw std::invalid_argument("inject_goldstone_mode: need 1 <= nu <= T-1");
    const SkewMatrix generator = (1.0 / std::sqrt(2.0)) * skew_basis(d).front();
    const double q = std::numbers::pi * static_cast<double>(wavevector_index) /
                     static_cast<double>(T);
    EmbeddingSequence out;
    out.reserve(z.size());
    for (Index t = 1; t <= T; ++t) {
        const double theta = amplitude * std::cos(q * (static_cast<double>(t) - 0.5));
        out.push_back(expm_skew(theta * generator) * z[static_cast<std::size_t>(t - 1)]);
    }
    return out;
}

}  // namespace goldstone
