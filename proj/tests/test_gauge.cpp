#include "goldstone/gauge.hpp"

#include "goldstone/optimizer.hpp"
#include "support/test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace goldstone;
using namespace goldstone::testing;

namespace {

EmbeddingSequence random_sequence(std::mt19937_64& rng, Index d, Index n, Index T,
                                  double drift = 0.1) {
    EmbeddingSequence z{random_matrix(rng, d, n)};
    for (Index t = 1; t < T; ++t) z.push_back(z.back() + drift * random_matrix(rng, d, n));
    return z;
}

SkewField random_field(std::mt19937_64& rng, Index d, Index T, double scale) {
    SkewField field;
    for (Index t = 0; t < T; ++t) field.push_back(random_skew(rng, d, scale));
    return field;
}

}  // namespace

TEST_CASE("precompute_couplings", "[gauge]") {
    SECTION("equal frames give the symmetric PSD Gram coupling") {
        std::mt19937_64 rng(1);
        Matrix z = random_matrix(rng, 3, 5);
        EmbeddingSequence seq(4, z);
        CouplingSet mats = precompute_couplings(seq);
        REQUIRE(mats.size() == 3);
        for (const auto& m : mats) {
            CHECK((m - z * z.transpose()).norm() <= 1e-14 * (1.0 + m.norm()));
            Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(0.5 * (m + m.transpose())));
            CHECK(es.eigenvalues().minCoeff() >= -1e-12);
        }
    }
    SECTION("d=1 couplings are consecutive dot products") {
        EmbeddingSequence seq{Matrix::Constant(1, 2, 1.0), Matrix::Constant(1, 2, 2.0),
                              Matrix::Constant(1, 2, 3.0)};
        CouplingSet mats = precompute_couplings(seq);
        REQUIRE(mats.size() == 2);
        CHECK(mats[0](0, 0) == Catch::Approx(4.0));
        CHECK(mats[1](0, 0) == Catch::Approx(12.0));
    }
    SECTION("random sequence matches an independent loop computation") {
        std::mt19937_64 rng(2);
        EmbeddingSequence seq = random_sequence(rng, 3, 4, 3);
        CouplingSet mats = precompute_couplings(seq);
        for (std::size_t i = 0; i < mats.size(); ++i) {
            Matrix expected = Matrix::Zero(3, 3);
            for (Index a = 0; a < 3; ++a)
                for (Index b = 0; b < 3; ++b)
                    for (Index c = 0; c < 4; ++c) expected(a, b) += seq[i](a, c) * seq[i + 1](b, c);
            CHECK((mats[i] - expected).norm() <= 1e-12 * (1.0 + expected.norm()));
        }
    }
    SECTION("too-short sequence throws") {
        CHECK_THROWS_AS(precompute_couplings(EmbeddingSequence{Matrix::Zero(2, 2)}),
                        std::invalid_argument);
    }
}

TEST_CASE("gauge objective values", "[gauge]") {
    std::mt19937_64 rng(3);
    EmbeddingSequence seq = random_sequence(rng, 3, 5, 4);
    CouplingSet mats = precompute_couplings(seq);

    SECTION("zero field gives zero") {
        SkewField zero(4, SkewMatrix(3));
        CHECK(gauge_objective(zero, mats) == 0.0);
    }
    SECTION("constant field is the exact zero mode") {
        SkewMatrix s = random_skew(rng, 3);
        SkewField constant(4, s);
        CHECK(gauge_objective(constant, mats) == 0.0);
    }
    SECTION("zero-mode invariance: shifting by a constant changes nothing") {
        for (int rep = 0; rep < 20; ++rep) {
            SkewField field = random_field(rng, 3, 4, 0.3);
            SkewMatrix shift = random_skew(rng, 3);
            SkewField shifted = field;
            for (auto& g : shifted) g += shift;
            const double a = gauge_objective(field, mats);
            const double b = gauge_objective(shifted, mats);
            CHECK(std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a)));
        }
    }
    SECTION("T=2 d=2 single-step closed form") {
        std::mt19937_64 rng2(4);
        EmbeddingSequence two = random_sequence(rng2, 2, 3, 2);
        CouplingSet m2 = precompute_couplings(two);
        const Matrix b = skew_basis(2).front().matrix();
        const double theta = 0.37;
        Vector coords(1);
        coords << theta;
        SkewField field{SkewMatrix(2), unvec_skew(coords, 2)};
        const double expected = theta * (b * m2[0]).trace() -
                                0.5 * theta * theta * (b * b * m2[0]).trace();
        CHECK(gauge_objective(field, m2) == Catch::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("gauge objective gradient", "[gauge]") {
    std::mt19937_64 rng(5);

    SECTION("zero at the zero field when every coupling is symmetric") {
        Matrix z = random_matrix(rng, 3, 5);
        EmbeddingSequence seq(3, z);
        CouplingSet mats = precompute_couplings(seq);
        SkewField zero(3, SkewMatrix(3));
        SkewField grad = gauge_objective_grad(zero, mats);
        for (const auto& g : grad) CHECK(g.norm() <= 1e-12);
    }
    SECTION("directional derivative along the constant direction vanishes") {
        EmbeddingSequence seq = random_sequence(rng, 3, 5, 4);
        CouplingSet mats = precompute_couplings(seq);
        SkewField field = random_field(rng, 3, 4, 0.2);
        SkewField grad = gauge_objective_grad(field, mats);
        SkewMatrix shift = random_skew(rng, 3);
        double dd = 0.0;
        for (const auto& g : grad) dd += (shift.matrix().transpose() * g.matrix()).trace();
        CHECK(std::abs(dd) <= 1e-12 * (1.0 + shift.norm()));
    }
    SECTION("matches central finite differences along every basis direction") {
        for (int rep = 0; rep < 20; ++rep) {
            const Index d = 2 + (rep % 3);
            EmbeddingSequence seq = random_sequence(rng, d, d + 2, 4);
            CouplingSet mats = precompute_couplings(seq);
            SkewField field = random_field(rng, d, 4, 0.3);
            SkewField grad = gauge_objective_grad(field, mats);
            auto fd = fd_gauge_gradient(field, mats);
            const auto basis = skew_basis(d);
            for (std::size_t t = 0; t < field.size(); ++t) {
                for (std::size_t k = 0; k < basis.size(); ++k) {
                    const double analytic =
                        (basis[k].matrix().transpose() * grad[t].matrix()).trace();
                    const double numeric = fd[t](static_cast<Index>(k));
                    CHECK(std::abs(analytic - numeric) <= 1e-6 * (1.0 + std::abs(analytic)));
                }
            }
        }
    }
}

TEST_CASE("quadratic form assembly matches dense basis products", "[gauge]") {
    std::mt19937_64 rng(6);
    const Index d = 4;
    const auto pos = skew_positions(d);
    const auto basis = skew_basis(d);
    Matrix m = random_matrix(rng, d, d);
    for (std::size_t k = 0; k < pos.size(); ++k) {
        CHECK(detail::trace_b_m(pos[k], m) ==
              Catch::Approx((basis[k].matrix() * m).trace()).epsilon(1e-13).margin(1e-13));
        for (std::size_t l = 0; l < pos.size(); ++l)
            CHECK(detail::trace_bb_m(pos[k], pos[l], m) ==
                  Catch::Approx((basis[k].matrix() * basis[l].matrix() * m).trace())
                      .epsilon(1e-13)
                      .margin(1e-13));
    }
}

TEST_CASE("direct gauge solve", "[gauge]") {
    std::mt19937_64 rng(7);

    SECTION("symmetric couplings give the zero field") {
        Matrix z = random_matrix(rng, 3, 5);
        EmbeddingSequence seq(4, z);
        auto [field, rep] = solve_gauge_direct(precompute_couplings(seq));
        for (const auto& g : field) CHECK(g.norm() <= 1e-10);
        CHECK(rep.objective_final <= rep.objective_initial + 1e-12);
    }
    SECTION("d=2 T=2 closed form theta* = Tr[B M]/Tr[B^2 M]") {
        EmbeddingSequence two = random_sequence(rng, 2, 4, 2, 0.05);
        two = inject_goldstone_mode(two, 0.1, 1);
        CouplingSet mats = precompute_couplings(two);
        const Matrix b = skew_basis(2).front().matrix();
        const double denom = (b * b * mats[0]).trace();
        REQUIRE(denom < 0.0);
        const double expected = (b * mats[0]).trace() / denom;
        auto [field, rep] = solve_gauge_direct(mats);
        CHECK(field[0].norm() == 0.0);
        CHECK(vec_skew(field[1])(0) == Catch::Approx(expected).epsilon(1e-10));
    }
    SECTION("solution is stationary: gradient norm at the solver residual scale") {
        for (int rep_i = 0; rep_i < 5; ++rep_i) {
            EmbeddingSequence seq = random_sequence(rng, 3, 6, 5, 0.05);
            seq = inject_goldstone_mode(seq, 0.2, 1);
            CouplingSet mats = precompute_couplings(seq);
            auto [field, rep] = solve_gauge_direct(mats);
            const Vector grad = detail::coordinate_gradient(field, mats);
            const double rhs_scale = detail::assemble_gauge_form(mats, 3).linear.norm();
            CHECK(grad.norm() <= 1e-8 * (1.0 + rhs_scale));
            CHECK(field[0].norm() == 0.0);
            CHECK(rep.objective_final <= rep.objective_initial + 1e-12);
        }
    }
    SECTION("rank-deficient couplings raise SingularSystemError") {
        // A purely skew coupling has a nonzero linear term but no curvature
        // (Tr[(B_k B_l + B_l B_k) M] = 0 for skew M), so the stationarity
        // system is inconsistent beyond the pinned gauge.
        CouplingSet mats{random_skew(rng, 3).matrix(), Matrix::Zero(3, 3)};
        CHECK_THROWS_AS(solve_gauge_direct(mats), SingularSystemError);
    }
}

TEST_CASE("preconditioned descent agrees with the direct solver", "[gauge]") {
    std::mt19937_64 rng(8);

    SECTION("field agreement on well-conditioned instances") {
        for (int rep_i = 0; rep_i < 5; ++rep_i) {
            EmbeddingSequence seq = random_sequence(rng, 3, 6, 4, 0.05);
            seq = inject_goldstone_mode(seq, 0.15, 1);
            CouplingSet mats = precompute_couplings(seq);
            auto [fd_field, rd] = solve_gauge_direct(mats);
            auto [fg_field, rg] = solve_gauge_descent(mats);
            for (std::size_t t = 0; t < fd_field.size(); ++t)
                CHECK((fd_field[t].matrix() - fg_field[t].matrix()).norm() <= 1e-6);
            CHECK(rg.objective_final <= rg.objective_initial + 1e-12);
        }
    }
    SECTION("symmetric couplings converge in at most one iteration") {
        Matrix z = random_matrix(rng, 3, 5);
        EmbeddingSequence seq(3, z);
        auto [field, rep] = solve_gauge_descent(precompute_couplings(seq));
        CHECK(rep.iterations <= 1);
        for (const auto& g : field) CHECK(g.norm() <= 1e-10);
    }
    SECTION("tiny iteration cap raises NonConvergenceError") {
        EmbeddingSequence seq = random_sequence(rng, 3, 6, 4, 0.05);
        seq = inject_goldstone_mode(seq, 0.3, 1);
        GaugeDescentOptions opt;
        opt.max_iter = 0;
        CHECK_THROWS_AS(solve_gauge_descent(precompute_couplings(seq), opt),
                        NonConvergenceError);
    }
}

TEST_CASE("apply_gauge", "[gauge]") {
    std::mt19937_64 rng(9);
    EmbeddingSequence seq = random_sequence(rng, 3, 5, 4);

    SECTION("zero field leaves the sequence untouched") {
        SkewField zero(4, SkewMatrix(3));
        EmbeddingSequence out = apply_gauge(seq, zero);
        for (std::size_t t = 0; t < seq.size(); ++t) CHECK((out[t] - seq[t]).norm() == 0.0);
    }
    SECTION("constant field is a global rotation: regularizer preserved") {
        ChainProblem p{std::vector<LocalData>(4, ZeroLossData{}), 1.0, 3, 5};
        SkewField constant(4, random_skew(rng, 3));
        EmbeddingSequence out = apply_gauge(seq, constant);
        const double before = regularizer_value(p, seq);
        const double after = regularizer_value(p, out);
        CHECK(std::abs(after - before) <= 1e-9 * (1.0 + before));
    }
    SECTION("exact mode preserves every local loss under arbitrary fields") {
        for (int rep_i = 0; rep_i < 20; ++rep_i) {
            GroundTruth gt = generate_ground_truth_sequence(
                rep_i % 2 == 0 ? ModelKind::gram : ModelKind::factorization, 3, 6, 4, 0.2,
                300 + static_cast<std::uint64_t>(rep_i));
            ChainProblem p{gt.data, 1.0, 3, 6};
            EmbeddingSequence z;
            for (Index t = 0; t < 4; ++t) z.push_back(random_matrix(rng, 3, 6));
            SkewField field = random_field(rng, 3, 4, 0.5);
            EmbeddingSequence out = apply_gauge(z, field, ExpmMode::exact());
            const double before = local_loss_sum(p, z);
            const double after = local_loss_sum(p, out);
            CHECK(std::abs(after - before) <= 1e-9 * (1.0 + before));
        }
    }
    SECTION("exact mode preserves local losses through a solver field") {
        GroundTruth gt = generate_ground_truth_sequence(ModelKind::gram, 3, 6, 5, 0.1, 99);
        ChainProblem p{gt.data, 1.0, 3, 6};
        EmbeddingSequence z = inject_goldstone_mode(gt.frames, 0.3, 2);
        auto [field, rep] = solve_gauge_direct(precompute_couplings(z));
        EmbeddingSequence out = apply_gauge(z, field, ExpmMode::exact());
        const double before = local_loss_sum(p, z);
        CHECK(std::abs(local_loss_sum(p, out) - before) <= 1e-9 * (1.0 + before));
    }
    SECTION("solver field strictly decreases the loss on a perturbed sequence") {
        GroundTruth gt = generate_ground_truth_sequence(ModelKind::gram, 3, 6, 6, 0.0, 17);
        ChainProblem p{gt.data, 1.0, 3, 6};
        EmbeddingSequence z0 = inject_goldstone_mode(gt.frames, 0.3, 1);
        const double before = total_loss(p, z0);
        auto [field, rep] = solve_gauge_direct(precompute_couplings(z0));
        EmbeddingSequence out = apply_gauge(z0, field);
        CHECK(total_loss(p, out) < before);
    }
    SECTION("length mismatch throws") {
        SkewField shortfield(3, SkewMatrix(3));
        CHECK_THROWS_AS(apply_gauge(seq, shortfield), std::invalid_argument);
    }
}

TEST_CASE("quadratic truncation is cubically exact on commuting fields", "[gauge]") {
    // Slope test: for fields Gamma = eps * (coeff_t * B) with a shared
    // generator B, |F(Gamma) - (L(e^Gamma Z) - L(Z))/lambda| = O(eps^3).
    // A shared generator keeps the commutator terms (which the truncated
    // objective drops at second order) identically zero.
    std::mt19937_64 rng(10);
    const Index d = 3, n = 6, T = 6;
    const double lambda = 1.0;
    GroundTruth gt = generate_ground_truth_sequence(ModelKind::gram, d, n, T, 0.05, 21);
    ChainProblem p{gt.data, lambda, d, n};
    const EmbeddingSequence& z = gt.frames;
    CouplingSet mats = precompute_couplings(z);
    const double base = total_loss(p, z);

    SkewMatrix generator = random_skew(rng, d);
    generator *= 1.0 / generator.norm();
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> coeff;
    for (Index t = 0; t < T; ++t) coeff.push_back(gauss(rng));

    std::vector<double> log_eps, log_err;
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
        SkewField field;
        for (Index t = 0; t < T; ++t)
            field.push_back((eps * coeff[static_cast<std::size_t>(t)]) * generator);
        const double objective = gauge_objective(field, mats);
        const double exact_delta = (total_loss(p, apply_gauge(z, field)) - base) / lambda;
        const double err = std::abs(objective - exact_delta);
        REQUIRE(err > 0.0);
        log_eps.push_back(std::log(eps));
        log_err.push_back(std::log(err));
    }
    // least-squares slope of log err vs log eps
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < log_eps.size(); ++i) {
        mx += log_eps[i];
        my += log_err[i];
    }
    mx /= static_cast<double>(log_eps.size());
    my /= static_cast<double>(log_eps.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < log_eps.size(); ++i) {
        num += (log_eps[i] - mx) * (log_err[i] - my);
        den += (log_eps[i] - mx) * (log_eps[i] - mx);
    }
    CHECK(num / den >= 2.9);
}

TEST_CASE("gauge solve report serializes to JSON", "[gauge]") {
    std::mt19937_64 rng(11);
    EmbeddingSequence seq = random_sequence(rng, 3, 5, 3, 0.05);
    auto [field, rep] = solve_gauge_direct(precompute_couplings(seq));
    nlohmann::json j = rep;
    CHECK(j.at("solver").get<std::string>() == "direct");
    CHECK(j.contains("objective_initial"));
    CHECK(j.contains("objective_final"));
    CHECK(j.contains("iterations"));
    CHECK(j.contains("residual"));
}
