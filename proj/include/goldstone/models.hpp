#pragma once

// Rotation-invariant local loss models with analytic gradients, plus the
// synthetic ground-truth generator used by the benchmark harness.
//
// Every model satisfies l(X; R Z) = l(X; Z) for all R in SO(d); the gradient
// is therefore equivariant, grad l(R Z) = R grad l(Z).

#include "goldstone/so_algebra.hpp"

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

namespace goldstone {

/// d x n matrix whose columns are embedding vectors.
using EmbeddingMatrix = Matrix;

/// Target for the Gram-matching loss l(G; Z) = 1/4 ||Z^T Z - G||_F^2.
/// The target must be n x n symmetric.
struct GramTargetData {
    Matrix target;
};

/// Target for the factorization loss l(X; Z) = 1/2 ||X - U^T V||_F^2 where
/// U is the first n_u columns of Z and V the remaining n_v columns.
struct FactorizationData {
    Matrix target;  // n_u x n_v
    Index n_u = 0;
    Index n_v = 0;
};

/// Identically-zero local loss; leaves only the chain regularizer. Used for
/// pure spring-chain experiments.
struct ZeroLossData {};

using LocalData = std::variant<GramTargetData, FactorizationData, ZeroLossData>;

inline double gram_loss(const GramTargetData& data, const EmbeddingMatrix& z) {
    if (data.target.rows() != z.cols() || data.target.cols() != z.cols())
        throw std::invalid_argument("gram_loss: target must be n x n for a d x n embedding");
    return 0.25 * (z.transpose() * z - data.target).squaredNorm();
}

inline EmbeddingMatrix gram_loss_grad(const GramTargetData& data, const EmbeddingMatrix& z) {
    if (data.target.rows() != z.cols() || data.target.cols() != z.cols())
        throw std::invalid_argument("gram_loss_grad: target must be n x n for a d x n embedding");
    return z * (z.transpose() * z - data.target);
}

namespace detail {

inline void check_split(const FactorizationData& data, const EmbeddingMatrix& z) {
    if (data.n_u < 0 || data.n_v < 0 || data.n_u + data.n_v != z.cols())
        throw std::invalid_argument("factorization: column split does not match embedding count");
    if (data.target.rows() != data.n_u || data.target.cols() != data.n_v)
        throw std::invalid_argument("factorization: target shape does not match split");
}

}  // namespace detail

inline double factorization_loss(const FactorizationData& data, const EmbeddingMatrix& z) {
    detail::check_split(data, z);
    auto u = z.leftCols(data.n_u);
    auto v = z.rightCols(data.n_v);
    return 0.5 * (data.target - u.transpose() * v).squaredNorm();
}

inline EmbeddingMatrix factorization_loss_grad(const FactorizationData& data,
                                               const EmbeddingMatrix& z) {
    detail::check_split(data, z);
    auto u = z.leftCols(data.n_u);
    auto v = z.rightCols(data.n_v);
    Matrix e = u.transpose() * v - data.target;  // n_u x n_v
    EmbeddingMatrix g(z.rows(), z.cols());
    g.leftCols(data.n_u) = v * e.transpose();
    g.rightCols(data.n_v) = u * e;
    return g;
}

inline double local_loss(const LocalData& data, const EmbeddingMatrix& z) {
    return std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, GramTargetData>) return gram_loss(d, z);
            else if constexpr (std::is_same_v<T, FactorizationData>) return factorization_loss(d, z);
            else return 0.0;
        },
        data);
}

inline EmbeddingMatrix local_loss_grad(const LocalData& data, const EmbeddingMatrix& z) {
    return std::visit(
        [&](const auto& d) -> EmbeddingMatrix {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, GramTargetData>) return gram_loss_grad(d, z);
            else if constexpr (std::is_same_v<T, FactorizationData>) return factorization_loss_grad(d, z);
            else return EmbeddingMatrix::Zero(z.rows(), z.cols());
        },
        data);
}

enum class ModelKind { gram, factorization, zero };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::gram: return "gram";
        case ModelKind::factorization: return "factorization";
        case ModelKind::zero: return "zero";
    }
    return "?";
}

namespace detail {

inline Matrix gaussian_matrix(std::mt19937_64& rng, Index rows, Index cols) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = gauss(rng);
    return m;
}

}  // namespace detail

struct GroundTruth {
    std::vector<EmbeddingMatrix> frames;  // Z*_t, each d x n
    std::vector<LocalData> data;          // matching per-timestep targets
};

/// Smooth Gaussian random walk Z*_t = Z*_{t-1} + drift * noise, with targets
/// generated from the walk so every frame is an exact minimizer of its local
/// loss. Deterministic for a fixed seed.
inline GroundTruth generate_ground_truth_sequence(ModelKind kind, Index d, Index n, Index T,
                                                  double drift, std::uint64_t seed) {
    if (d < 2 || n < d || T < 2 || drift < 0.0)
        throw std::invalid_argument(
            "generate_ground_truth_sequence: need d >= 2, n >= d, T >= 2, drift >= 0");
    std::mt19937_64 rng(seed);
    GroundTruth gt;
    gt.frames.reserve(static_cast<std::size_t>(T));
    gt.frames.push_back(detail::gaussian_matrix(rng, d, n));
    for (Index t = 1; t < T; ++t)
        gt.frames.push_back(gt.frames.back() + drift * detail::gaussian_matrix(rng, d, n));
    gt.data.reserve(gt.frames.size());
    const Index n_u = n / 2;
    const Index n_v = n - n_u;
    for (const auto& z : gt.frames) {
        switch (kind) {
            case ModelKind::gram: {
                Matrix w = z.transpose() * z;
                gt.data.push_back(GramTargetData{0.5 * (w + w.transpose())});
                break;
            }
            case ModelKind::factorization:
                gt.data.push_back(FactorizationData{
                    z.leftCols(n_u).transpose() * z.rightCols(n_v), n_u, n_v});
                break;
            case ModelKind::zero:
                gt.data.push_back(ZeroLossData{});
                break;
        }
    }
    return gt;
}

}  // namespace goldstone
