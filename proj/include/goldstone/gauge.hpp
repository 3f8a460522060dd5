#pragma once

// Gauge-field optimization: the low-dimensional quadratic problem whose
// solution rotates embedding frames into mutual alignment.
//
// For a sequence Z the couplings M_t = Z_{t-1} Z_t^T are precomputed once.
// The objective over a field of skew generators Gamma = {Gamma_t} is
//
//     F(Gamma) = sum_{t=2..T} Tr[(D_t - 1/2 D_t^2) M_t],   D_t = Gamma_t - Gamma_{t-1},
//
// which is the quadratic truncation of the change of the chain regularizer
// under the frame rotations Z_t <- e^{Gamma_t} Z_t:
//
//     L(e^{Gamma} Z) - L(Z) = lambda * F(Gamma) + O(||Gamma||^2 commutators, ||Gamma||^3).
//
// F depends on Gamma only through the differences D_t, so constant fields are
// an exact zero mode; the solvers pin Gamma_1 = 0 to remove it. Minimization
// runs either as a block-tridiagonal direct solve of the stationarity system
// or as descent preconditioned with the inverse of the assembled quadratic
// form ("natural gradients").

#include "goldstone/chain.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace goldstone {

/// Per-timestep gauge generators, length T. Solver outputs have gammas[0] = 0.
using SkewField = std::vector<SkewMatrix>;

/// M_t = Z_{t-1} Z_t^T for t = 2..T; length T-1, each d x d.
using CouplingSet = std::vector<Matrix>;

/// The assembled stationarity system is rank-deficient beyond the pinned
/// gauge direction (degenerate couplings, e.g. a vanishing frame).
struct SingularSystemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonConvergenceError : std::runtime_error {
    NonConvergenceError(const std::string& msg, double resid, int iters)
        : std::runtime_error(msg), residual(resid), iterations(iters) {}
    double residual;
    int iterations;
};

enum class GaugeSolver { direct, preconditioned_descent };

inline const char* to_string(GaugeSolver s) {
    return s == GaugeSolver::direct ? "direct" : "preconditioned_descent";
}

struct GaugeSolveReport {
    double objective_initial = 0.0;
    double objective_final = 0.0;
    GaugeSolver solver = GaugeSolver::direct;
    int iterations = 0;
    double residual = 0.0;
};

inline void to_json(nlohmann::json& j, const GaugeSolveReport& rep) {
    j = nlohmann::json{{"objective_initial", rep.objective_initial},
                       {"objective_final", rep.objective_final},
                       {"solver", to_string(rep.solver)},
                       {"iterations", rep.iterations},
                       {"residual", rep.residual}};
}

inline CouplingSet precompute_couplings(const EmbeddingSequence& z) {
    if (z.size() < 2) throw std::invalid_argument("precompute_couplings: need T >= 2");
    for (const auto& frame : z)
        if (frame.rows() != z.front().rows() || frame.cols() != z.front().cols())
            throw std::invalid_argument("precompute_couplings: non-uniform frame shapes");
    CouplingSet mats;
    mats.reserve(z.size() - 1);
    for (std::size_t t = 1; t < z.size(); ++t) mats.push_back(z[t - 1] * z[t].transpose());
    return mats;
}

namespace detail {

inline Index gauge_check_dims(const SkewField& gammas, const CouplingSet& mats) {
    if (mats.empty()) throw std::invalid_argument("gauge: empty coupling set");
    if (gammas.size() != mats.size() + 1)
        throw std::invalid_argument("gauge: field length must be couplings + 1");
    const Index d = mats.front().rows();
    for (const auto& m : mats)
        if (m.rows() != d || m.cols() != d)
            throw std::invalid_argument("gauge: coupling dimension mismatch");
    for (const auto& g : gammas)
        if (g.dim() != d) throw std::invalid_argument("gauge: field dimension mismatch");
    return d;
}

}  // namespace detail

inline double gauge_objective(const SkewField& gammas, const CouplingSet& mats) {
    detail::gauge_check_dims(gammas, mats);
    double f = 0.0;
    for (std::size_t i = 0; i < mats.size(); ++i) {
        Matrix delta = gammas[i + 1].matrix() - gammas[i].matrix();
        f += ((delta - 0.5 * delta * delta) * mats[i]).trace();
    }
    return f;
}

/// Frobenius-metric gradient within the skew subspace: the directional
/// derivative of the objective along any skew H_t equals <H_t, grad_t>_F.
inline SkewField gauge_objective_grad(const SkewField& gammas, const CouplingSet& mats) {
    const Index d = detail::gauge_check_dims(gammas, mats);
    // dF/dD_i projected onto skew: P_skew(M^T + 1/2 (M^T D + D M^T))
    std::vector<Matrix> gdelta(mats.size());
    for (std::size_t i = 0; i < mats.size(); ++i) {
        Matrix delta = gammas[i + 1].matrix() - gammas[i].matrix();
        Matrix mt = mats[i].transpose();
        gdelta[i] = project_skew(mt + 0.5 * (mt * delta + delta * mt)).matrix();
    }
    // Gamma_t enters D_{t-1} with +1 and D_t with -1.
    SkewField grad(gammas.size(), SkewMatrix(d));
    for (std::size_t t = 0; t < gammas.size(); ++t) {
        Matrix acc = Matrix::Zero(d, d);
        if (t >= 1) acc += gdelta[t - 1];
        if (t < mats.size()) acc -= gdelta[t];
        grad[t] = SkewMatrix::from_lower_triangle(acc);
    }
    return grad;
}

namespace detail {

// Basis trace identities, with (a, b) and (c, d) the strictly-lower positions
// of B_k and B_l:
//   Tr[B_k M]     = M(b, a) - M(a, b)
//   Tr[B_k B_l M] = [b==c] M(d, a) - [b==d] M(c, a) - [a==c] M(d, b) + [a==d] M(c, b)
inline double trace_b_m(const std::pair<Index, Index>& k, const Matrix& m) {
    return m(k.second, k.first) - m(k.first, k.second);
}

inline double trace_bb_m(const std::pair<Index, Index>& k, const std::pair<Index, Index>& l,
                         const Matrix& m) {
    const Index a = k.first, b = k.second, c = l.first, d = l.second;
    double v = 0.0;
    if (b == c) v += m(d, a);
    if (b == d) v -= m(c, a);
    if (a == c) v -= m(d, b);
    if (a == d) v += m(c, b);
    return v;
}

// Quadratic model of the objective over the stacked so(d) coordinates
// x = [vec(Gamma_2); ...; vec(Gamma_T)] with Gamma_1 pinned to zero:
//
//     F(x) = c^T x + 1/2 x^T P x,
//
// P block tridiagonal with K = T-1 diagonal blocks of size m = d(d-1)/2.
struct GaugeQuadraticForm {
    Index d = 0;
    Index block = 0;           // m
    std::vector<Matrix> diag;  // K blocks
    std::vector<Matrix> sub;   // K-1 blocks, sub[j] = P(j+1, j)
    Vector linear;             // c

    Index unknowns() const { return static_cast<Index>(diag.size()) * block; }
};

inline GaugeQuadraticForm assemble_gauge_form(const CouplingSet& mats, Index d) {
    const auto pos = skew_positions(d);
    const Index m = skew_dim(d);
    const Index k_count = static_cast<Index>(mats.size());
    GaugeQuadraticForm form;
    form.d = d;
    form.block = m;
    form.diag.assign(static_cast<std::size_t>(k_count), Matrix::Zero(m, m));
    if (k_count > 1) form.sub.assign(static_cast<std::size_t>(k_count - 1), Matrix::Zero(m, m));
    form.linear = Vector::Zero(k_count * m);
    for (Index i = 0; i < k_count; ++i) {
        const Matrix& cm = mats[static_cast<std::size_t>(i)];
        Vector b(m);
        Matrix neg_curv(m, m);  // -C_i, C_i[k,l] = 1/2 Tr[(B_k B_l + B_l B_k) M_i]
        for (Index k = 0; k < m; ++k) {
            b(k) = trace_b_m(pos[static_cast<std::size_t>(k)], cm);
            for (Index l = 0; l <= k; ++l) {
                const double c_kl = 0.5 * (trace_bb_m(pos[static_cast<std::size_t>(k)],
                                                      pos[static_cast<std::size_t>(l)], cm) +
                                           trace_bb_m(pos[static_cast<std::size_t>(l)],
                                                      pos[static_cast<std::size_t>(k)], cm));
                neg_curv(k, l) = -c_kl;
                neg_curv(l, k) = -c_kl;
            }
        }
        // D_i = u_i - u_{i-1} with u_{-1} = 0
        form.diag[static_cast<std::size_t>(i)] += neg_curv;
        form.linear.segment(i * m, m) += b;
        if (i >= 1) {
            form.diag[static_cast<std::size_t>(i - 1)] += neg_curv;
            form.sub[static_cast<std::size_t>(i - 1)] -= neg_curv;
            form.linear.segment((i - 1) * m, m) -= b;
        }
    }
    return form;
}

inline Vector block_tridiag_apply(const std::vector<Matrix>& diag, const std::vector<Matrix>& sub,
                                  const Vector& x) {
    const Index nb = static_cast<Index>(diag.size());
    const Index m = diag.empty() ? 0 : diag.front().rows();
    Vector y = Vector::Zero(nb * m);
    for (Index i = 0; i < nb; ++i) {
        y.segment(i * m, m) += diag[static_cast<std::size_t>(i)] * x.segment(i * m, m);
        if (i + 1 < nb) {
            const Matrix& s = sub[static_cast<std::size_t>(i)];
            y.segment((i + 1) * m, m) += s * x.segment(i * m, m);
            y.segment(i * m, m) += s.transpose() * x.segment((i + 1) * m, m);
        }
    }
    return y;
}

// Symmetric block-tridiagonal LDL^T (block Thomas). Pivot blocks are factored
// with dense LDLT; fine for the small so(d) blocks this solver sees.
class BlockTridiagonalLDLT {
public:
    void compute(const std::vector<Matrix>& diag, const std::vector<Matrix>& sub) {
        const std::size_t nb = diag.size();
        block_ = diag.empty() ? 0 : diag.front().rows();
        dfac_.resize(nb);
        lfac_.resize(nb > 0 ? nb - 1 : 0);
        Matrix pivot = diag[0];
        dfac_[0].compute(pivot);
        for (std::size_t i = 1; i < nb; ++i) {
            lfac_[i - 1] = dfac_[i - 1].solve(sub[i - 1].transpose()).transpose();
            pivot = diag[i] - lfac_[i - 1] * sub[i - 1].transpose();
            dfac_[i].compute(pivot);
        }
    }

    Vector solve(const Vector& rhs) const {
        const Index nb = static_cast<Index>(dfac_.size());
        const Index m = block_;
        Vector work(rhs.size());
        for (Index i = 0; i < nb; ++i) {
            Vector y = rhs.segment(i * m, m);
            if (i >= 1) y -= lfac_[static_cast<std::size_t>(i - 1)] * work.segment((i - 1) * m, m);
            work.segment(i * m, m) = y;
        }
        for (Index i = 0; i < nb; ++i)
            work.segment(i * m, m) =
                dfac_[static_cast<std::size_t>(i)].solve(work.segment(i * m, m));
        for (Index i = nb - 2; i >= 0; --i)
            work.segment(i * m, m) -= lfac_[static_cast<std::size_t>(i)].transpose() *
                                      work.segment((i + 1) * m, m);
        return work;
    }

private:
    Index block_ = 0;
    std::vector<Eigen::LDLT<Matrix>> dfac_;
    std::vector<Matrix> lfac_;
};

inline SkewField unstack_field(const Vector& x, Index d, Index timesteps) {
    const Index m = skew_dim(d);
    SkewField field;
    field.reserve(static_cast<std::size_t>(timesteps));
    field.emplace_back(d);  // pinned Gamma_1 = 0
    for (Index t = 1; t < timesteps; ++t)
        field.push_back(unvec_skew(x.segment((t - 1) * m, m), d));
    return field;
}

inline SkewField zero_field(Index d, Index timesteps) {
    return SkewField(static_cast<std::size_t>(timesteps), SkewMatrix(d));
}

// Coordinate gradient of the objective: entry k of block t is the derivative
// along basis direction B_k of Gamma_{t+1}, i.e. <B_k, grad_t>_F = 2 grad_t(i, j).
inline Vector coordinate_gradient(const SkewField& gammas, const CouplingSet& mats) {
    const Index d = gammas.front().dim();
    const Index m = skew_dim(d);
    SkewField grad = gauge_objective_grad(gammas, mats);
    Vector g(static_cast<Index>(mats.size()) * m);
    for (std::size_t t = 1; t < gammas.size(); ++t)
        g.segment(static_cast<Index>(t - 1) * m, m) = 2.0 * vec_skew(grad[t]);
    return g;
}

}  // namespace detail

inline constexpr double kGaugeRidge = 1e-10;

/// Assembles the quadratic form over the coordinates of Gamma_2..Gamma_T and
/// solves the stationarity system with a block-tridiagonal direct solve (a
/// ridge of kGaugeRidge stabilizes degenerate couplings). Throws
/// SingularSystemError when the unridged residual exceeds 1e-8 * (1 + ||rhs||);
/// callers fall back to solve_gauge_descent.
inline std::pair<SkewField, GaugeSolveReport> solve_gauge_direct(const CouplingSet& mats,
                                                                 double ridge = kGaugeRidge) {
    if (mats.empty()) throw std::invalid_argument("solve_gauge_direct: need T >= 2");
    const Index d = mats.front().rows();
    const Index T = static_cast<Index>(mats.size()) + 1;
    GaugeSolveReport rep;
    rep.solver = GaugeSolver::direct;
    rep.iterations = 1;
    if (skew_dim(d) == 0) return {detail::zero_field(d, T), rep};

    auto form = detail::assemble_gauge_form(mats, d);
    auto ridged = form.diag;
    for (auto& blockm : ridged) blockm.diagonal().array() += ridge;
    detail::BlockTridiagonalLDLT fac;
    fac.compute(ridged, form.sub);
    Vector x = fac.solve(-form.linear);

    const double rhs_norm = form.linear.norm();
    rep.residual = (detail::block_tridiag_apply(form.diag, form.sub, x) + form.linear).norm();
    if (!(rep.residual <= 1e-8 * (1.0 + rhs_norm)))
        throw SingularSystemError("gauge system rank-deficient beyond the fixed gauge (residual " +
                                  std::to_string(rep.residual) + ")");

    SkewField field = detail::unstack_field(x, d, T);
    rep.objective_initial = 0.0;
    rep.objective_final = gauge_objective(field, mats);
    return {field, rep};
}

struct GaugeDescentOptions {
    int max_iter = 100;
    double tol = 0.0;  // <= 0: use 1e-10 * (1 + ||rhs||)
    double ridge = kGaugeRidge;
};

/// Gradient descent on the gauge objective preconditioned with the inverse of
/// the ridge-stabilized quadratic form, i.e. natural-gradient steps. The
/// objective value is non-increasing iteration over iteration (steps are
/// halved on the rare increase). Throws NonConvergenceError if the gradient
/// norm stays above tol at max_iter.
inline std::pair<SkewField, GaugeSolveReport> solve_gauge_descent(
    const CouplingSet& mats, const GaugeDescentOptions& opt = {}) {
    if (mats.empty()) throw std::invalid_argument("solve_gauge_descent: need T >= 2");
    const Index d = mats.front().rows();
    const Index T = static_cast<Index>(mats.size()) + 1;
    const Index m = skew_dim(d);
    GaugeSolveReport rep;
    rep.solver = GaugeSolver::preconditioned_descent;
    if (m == 0) return {detail::zero_field(d, T), rep};

    auto form = detail::assemble_gauge_form(mats, d);
    auto ridged = form.diag;
    for (auto& blockm : ridged) blockm.diagonal().array() += opt.ridge;
    detail::BlockTridiagonalLDLT precond;
    precond.compute(ridged, form.sub);

    const double tol = opt.tol > 0.0 ? opt.tol : 1e-10 * (1.0 + form.linear.norm());
    SkewField gammas = detail::zero_field(d, T);
    double f = 0.0;  // objective at the zero field
    int it = 0;
    for (;;) {
        Vector g = detail::coordinate_gradient(gammas, mats);
        rep.residual = g.norm();
        if (rep.residual <= tol) break;
        if (it >= opt.max_iter)
            throw NonConvergenceError("gauge descent did not converge (gradient norm " +
                                          std::to_string(rep.residual) + ")",
                                      rep.residual, it);
        Vector step = precond.solve(g);
        double scale = 1.0;
        for (int halvings = 0; halvings < 60; ++halvings) {
            SkewField cand = gammas;
            for (std::size_t t = 1; t < cand.size(); ++t)
                cand[t] -= scale * unvec_skew(step.segment(static_cast<Index>(t - 1) * m, m), d);
            const double fc = gauge_objective(cand, mats);
            if (fc <= f + 1e-15 * (1.0 + std::abs(f))) {
                gammas = std::move(cand);
                f = fc;
                break;
            }
            scale *= 0.5;
        }
        ++it;
    }
    rep.iterations = it;
    rep.objective_initial = 0.0;
    rep.objective_final = f;
    return {gammas, rep};
}

/// Z_t <- expm(Gamma_t) Z_t. In exact mode every local loss value is
/// preserved (the transformation is a per-frame rotation).
inline EmbeddingSequence apply_gauge(const EmbeddingSequence& z, const SkewField& gammas,
                                     const ExpmMode& mode = ExpmMode::exact()) {
    if (gammas.size() != z.size())
        throw std::invalid_argument("apply_gauge: field length must match sequence length");
    EmbeddingSequence out;
    out.reserve(z.size());
    for (std::size_t t = 0; t < z.size(); ++t) {
        if (gammas[t].dim() != z[t].rows())
            throw std::invalid_argument("apply_gauge: generator dimension mismatch");
        out.push_back(expm_skew(gammas[t], mode) * z[t]);
    }
    return out;
}

}  // namespace goldstone
