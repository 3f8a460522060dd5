#pragma once

// The time-series objective
//
//     L(Z) = sum_t l(X_t; Z_t) + (lambda/2) sum_{t=2..T} ||Z_t - Z_{t-1}||_F^2
//
// with its gradient, and the spectrum of the Markov regularizer's Hessian.
// The regularizer is a free-end chain of T springs; per scalar coordinate its
// Hessian is tridiagonal with eigenvalues h_nu = (2 - 2 cos(pi nu / T)) lambda,
// nu = 0..T-1. The full regularizer Hessian is this spectrum with multiplicity
// d*n; the zero mode h_0 = 0 is the global rotation/translation direction and
// the condition number h_{T-1}/h_1 grows like T^2.

#include "goldstone/models.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>
#include <vector>

namespace goldstone {

using EmbeddingSequence = std::vector<EmbeddingMatrix>;

/// Dataset + model kind + coupling strength: the object both optimizers
/// minimize over an EmbeddingSequence of shape (d, n, T).
struct ChainProblem {
    std::vector<LocalData> data;  // one entry per timestep
    double lambda = 1.0;
    Index dim = 0;    // d
    Index count = 0;  // n

    Index timesteps() const { return static_cast<Index>(data.size()); }

    void validate() const {
        if (timesteps() < 2) throw std::invalid_argument("ChainProblem: need T >= 2");
        if (!(lambda > 0.0)) throw std::invalid_argument("ChainProblem: lambda must be > 0");
        if (dim < 1 || count < 1)
            throw std::invalid_argument("ChainProblem: invalid embedding shape");
    }
};

inline void check_shapes(const ChainProblem& p, const EmbeddingSequence& z) {
    if (static_cast<Index>(z.size()) != p.timesteps())
        throw std::invalid_argument("chain: sequence length does not match problem T");
    for (const auto& frame : z) {
        if (frame.rows() != p.dim || frame.cols() != p.count)
            throw std::invalid_argument("chain: frame shape does not match problem (d, n)");
        if (!frame.allFinite())
            throw std::invalid_argument("chain: frame has non-finite entries");
    }
}

inline double local_loss_sum(const ChainProblem& p, const EmbeddingSequence& z) {
    check_shapes(p, z);
    double sum = 0.0;
    for (std::size_t t = 0; t < z.size(); ++t) sum += local_loss(p.data[t], z[t]);
    return sum;
}

/// (lambda/2) sum_{t=2..T} ||Z_t - Z_{t-1}||_F^2
inline double regularizer_value(const ChainProblem& p, const EmbeddingSequence& z) {
    check_shapes(p, z);
    double sum = 0.0;
    for (std::size_t t = 1; t < z.size(); ++t) sum += (z[t] - z[t - 1]).squaredNorm();
    return 0.5 * p.lambda * sum;
}

inline double total_loss(const ChainProblem& p, const EmbeddingSequence& z) {
    return local_loss_sum(p, z) + regularizer_value(p, z);
}

/// Local gradients plus the discrete Laplacian of the spring term,
/// lambda (2 Z_t - Z_{t-1} - Z_{t+1}) with one-sided ends.
inline EmbeddingSequence total_loss_grad(const ChainProblem& p, const EmbeddingSequence& z) {
    check_shapes(p, z);
    const Index T = p.timesteps();
    EmbeddingSequence g(z.size());
    for (Index t = 0; t < T; ++t) g[t] = local_loss_grad(p.data[t], z[t]);
    for (Index t = 0; t < T; ++t) {
        if (t > 0) g[t] += p.lambda * (z[t] - z[t - 1]);
        if (t + 1 < T) g[t] += p.lambda * (z[t] - z[t + 1]);
    }
    return g;
}

inline double sequence_norm(const EmbeddingSequence& g) {
    double sq = 0.0;
    for (const auto& m : g) sq += m.squaredNorm();
    return std::sqrt(sq);
}

struct SpectrumReport {
    std::vector<double> eigenvalues;  // ascending; h_0 = 0 is the zero mode
    std::vector<double> wavevectors;  // q_nu = pi nu / T
    double condition_number = 0.0;    // h_{T-1} / h_1, excluding the zero mode
};

inline void to_json(nlohmann::json& j, const SpectrumReport& rep) {
    j = nlohmann::json{{"eigenvalues", rep.eigenvalues},
                       {"wavevectors", rep.wavevectors},
                       {"condition_number", rep.condition_number}};
}

namespace detail {

inline void check_spectrum_args(Index T, double lambda) {
    if (T < 2) throw std::invalid_argument("spectrum: need T >= 2");
    if (!(lambda > 0.0)) throw std::invalid_argument("spectrum: lambda must be > 0");
}

}  // namespace detail

/// h_nu = (2 - 2 cos(pi nu / T)) lambda for nu = 0..T-1.
inline SpectrumReport regularizer_hessian_spectrum_analytic(Index T, double lambda) {
    detail::check_spectrum_args(T, lambda);
    SpectrumReport rep;
    rep.eigenvalues.reserve(static_cast<std::size_t>(T));
    rep.wavevectors.reserve(static_cast<std::size_t>(T));
    for (Index nu = 0; nu < T; ++nu) {
        const double q = std::numbers::pi * static_cast<double>(nu) / static_cast<double>(T);
        rep.wavevectors.push_back(q);
        rep.eigenvalues.push_back((2.0 - 2.0 * std::cos(q)) * lambda);
    }
    rep.condition_number = rep.eigenvalues.back() / rep.eigenvalues[1];
    return rep;
}

/// The free-end spring chain matrix: diagonal (1, 2, ..., 2, 1), off-diagonal
/// -1, everything scaled by lambda.
inline Matrix spring_chain_matrix(Index T, double lambda) {
    detail::check_spectrum_args(T, lambda);
    Matrix h = Matrix::Zero(T, T);
    for (Index t = 0; t < T; ++t) {
        h(t, t) = (t == 0 || t == T - 1) ? lambda : 2.0 * lambda;
        if (t + 1 < T) {
            h(t, t + 1) = -lambda;
            h(t + 1, t) = -lambda;
        }
    }
    return h;
}

inline SpectrumReport regularizer_hessian_spectrum_numeric(Index T, double lambda) {
    detail::check_spectrum_args(T, lambda);
    Eigen::SelfAdjointEigenSolver<Matrix> es(spring_chain_matrix(T, lambda));
    if (es.info() != Eigen::Success)
        throw std::runtime_error("spectrum: eigensolver failed");
    SpectrumReport rep;
    rep.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + T);
    rep.wavevectors.reserve(static_cast<std::size_t>(T));
    for (Index nu = 0; nu < T; ++nu)
        rep.wavevectors.push_back(std::numbers::pi * static_cast<double>(nu) /
                                  static_cast<double>(T));
    rep.condition_number = rep.eigenvalues.back() / rep.eigenvalues[1];
    return rep;
}

}  // namespace goldstone
