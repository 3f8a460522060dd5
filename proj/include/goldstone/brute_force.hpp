#pragma once

// Brute-force reference for the gauge solver on d = 2 instances: minimize the
// exact rotated chain objective over one angle per frame (frame 1 pinned),
// using closed-form 2x2 rotations and numerical derivatives. This path shares
// nothing with the quadratic gauge machinery, so it serves as an independent
// check that the truncated objective lands on the true optimum.

#include "goldstone/chain.hpp"

#include <cmath>
#include <vector>

namespace goldstone::oracle {

inline Matrix rotation2(double theta) {
    Matrix r(2, 2);
    const double c = std::cos(theta), s = std::sin(theta);
    r << c, -s, s, c;
    return r;
}

/// Chain objective after rotating frame t+1 by angle thetas[t], t = 0..T-2.
inline double rotated_loss_d2(const ChainProblem& p, const EmbeddingSequence& z,
                              const std::vector<double>& thetas) {
    if (p.dim != 2) throw std::invalid_argument("oracle: d = 2 only");
    if (thetas.size() + 1 != z.size())
        throw std::invalid_argument("oracle: need T-1 angles");
    EmbeddingSequence rotated;
    rotated.reserve(z.size());
    rotated.push_back(z.front());
    for (std::size_t t = 1; t < z.size(); ++t)
        rotated.push_back(rotation2(thetas[t - 1]) * z[t]);
    return total_loss(p, rotated);
}

struct BruteForceResult {
    std::vector<double> thetas;
    double loss = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
};

/// Damped Newton on the exact rotated objective with central-difference
/// gradient and Hessian. The instances this serves are tiny (a handful of
/// angles), smooth, and started inside the right basin, so plain Newton with
/// an Armijo backoff is enough to reach the finite-difference noise floor.
inline BruteForceResult minimize_rotated_loss_d2(const ChainProblem& p,
                                                 const EmbeddingSequence& z,
                                                 int max_iter = 200, double tol = 1e-9) {
    const std::size_t n = z.size() - 1;
    std::vector<double> th(n, 0.0);
    const double h = 1e-6;

    auto eval = [&](const std::vector<double>& t) { return rotated_loss_d2(p, z, t); };
    auto grad = [&](const std::vector<double>& t) {
        Vector g(static_cast<Index>(n));
        std::vector<double> w = t;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = t[i] + h;
            const double fp = eval(w);
            w[i] = t[i] - h;
            const double fm = eval(w);
            w[i] = t[i];
            g(static_cast<Index>(i)) = (fp - fm) / (2.0 * h);
        }
        return g;
    };

    BruteForceResult result;
    double f = eval(th);
    for (int it = 0; it < max_iter; ++it) {
        Vector g = grad(th);
        result.grad_norm = g.norm();
        result.iterations = it;
        if (result.grad_norm <= tol) break;

        // Hessian columns from gradient differences.
        Matrix hess(static_cast<Index>(n), static_cast<Index>(n));
        std::vector<double> w = th;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = th[i] + h;
            Vector gp = grad(w);
            w[i] = th[i] - h;
            Vector gm = grad(w);
            w[i] = th[i];
            hess.col(static_cast<Index>(i)) = (gp - gm) / (2.0 * h);
        }
        hess = 0.5 * (hess + hess.transpose());

        Vector dir;
        Eigen::LDLT<Matrix> ldlt(hess);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            dir = ldlt.solve(g);
        } else {
            Eigen::LDLT<Matrix> damped(hess + (1.0 + hess.cwiseAbs().maxCoeff()) *
                                                  Matrix::Identity(hess.rows(), hess.cols()));
            dir = damped.solve(g);
        }

        double scale = 1.0;
        bool moved = false;
        for (int back = 0; back < 50; ++back) {
            std::vector<double> cand = th;
            for (std::size_t i = 0; i < n; ++i) cand[i] -= scale * dir(static_cast<Index>(i));
            const double fc = eval(cand);
            if (fc < f) {
                th = std::move(cand);
                f = fc;
                moved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!moved) break;  // at the FD noise floor
    }
    result.thetas = th;
    result.loss = f;
    return result;
}

}  // namespace goldstone::oracle
