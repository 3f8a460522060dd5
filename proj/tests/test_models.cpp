#include "goldstone/models.hpp"

#include "support/test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace goldstone;
using namespace goldstone::testing;

TEST_CASE("gram loss: hand values and exact fit", "[models]") {
    SECTION("d=1 n=1 hand evaluation") {
        GramTargetData data{Matrix::Constant(1, 1, 1.0)};
        Matrix z = Matrix::Constant(1, 1, 2.0);
        CHECK(gram_loss(data, z) == Catch::Approx(2.25).epsilon(1e-15));
        CHECK(gram_loss_grad(data, z)(0, 0) == Catch::Approx(6.0).epsilon(1e-15));
    }
    SECTION("exact fit gives zero loss and zero gradient") {
        std::mt19937_64 rng(1);
        Matrix z = random_matrix(rng, 3, 5);
        GramTargetData data{z.transpose() * z};
        CHECK(gram_loss(data, z) == 0.0);
        CHECK(gram_loss_grad(data, z).norm() == 0.0);
    }
    SECTION("dimension mismatch throws") {
        GramTargetData data{Matrix::Zero(4, 4)};
        CHECK_THROWS_AS(gram_loss(data, Matrix::Zero(3, 5)), std::invalid_argument);
    }
}

TEST_CASE("factorization loss: hand values and exact fit", "[models]") {
    SECTION("d=1 hand evaluation") {
        Matrix z(1, 2);
        z << 1.0, 2.0;  // U = (1), V = (2)
        FactorizationData data{Matrix::Zero(1, 1), 1, 1};
        CHECK(factorization_loss(data, z) == Catch::Approx(2.0).epsilon(1e-15));
    }
    SECTION("exact fit gives zero loss and zero gradient") {
        std::mt19937_64 rng(2);
        Matrix z = random_matrix(rng, 3, 7);
        FactorizationData data{z.leftCols(3).transpose() * z.rightCols(4), 3, 4};
        CHECK(factorization_loss(data, z) == 0.0);
        CHECK(factorization_loss_grad(data, z).norm() == 0.0);
    }
    SECTION("inconsistent split throws") {
        FactorizationData data{Matrix::Zero(2, 2), 2, 2};
        CHECK_THROWS_AS(factorization_loss(data, Matrix::Zero(3, 5)), std::invalid_argument);
    }
}

TEST_CASE("rotational invariance of every model", "[models]") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const Index d = 2 + (rep % 3);
        const Index n = d + 2 + (rep % 4);
        Matrix z = random_matrix(rng, d, n);
        RotationMatrix r = random_rotation(rng, d);

        GramTargetData gram{random_matrix(rng, n, n)};
        gram.target = Matrix(0.5 * (gram.target + gram.target.transpose()));
        const double gl = gram_loss(gram, z);
        CHECK(std::abs(gram_loss(gram, Matrix(r * z)) - gl) <= 1e-9 * (1.0 + std::abs(gl)));

        const Index n_u = n / 2;
        FactorizationData fact{random_matrix(rng, n_u, n - n_u), n_u, n - n_u};
        const double fl = factorization_loss(fact, z);
        CHECK(std::abs(factorization_loss(fact, Matrix(r * z)) - fl) <=
              1e-9 * (1.0 + std::abs(fl)));
    }
}

TEST_CASE("gradient equivariance: grad l(RZ) = R grad l(Z)", "[models]") {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 10; ++rep) {
        const Index d = 3, n = 6;
        Matrix z = random_matrix(rng, d, n);
        RotationMatrix r = random_rotation(rng, d);
        GramTargetData gram{random_matrix(rng, n, n)};
        gram.target = Matrix(0.5 * (gram.target + gram.target.transpose()));
        Matrix lhs = gram_loss_grad(gram, Matrix(r * z));
        Matrix rhs = r * gram_loss_grad(gram, z);
        CHECK((lhs - rhs).norm() <= 1e-8 * (1.0 + rhs.norm()));
    }
}

TEST_CASE("analytic gradients match central finite differences", "[models]") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const Index d = 2 + (rep % 3);
        const Index n = d + 1 + (rep % 3);
        Matrix z = random_matrix(rng, d, n);

        GramTargetData gram{random_matrix(rng, n, n)};
        gram.target = Matrix(0.5 * (gram.target + gram.target.transpose()));
        Matrix ga = gram_loss_grad(gram, z);
        Matrix gf = fd_gradient([&](const Matrix& w) { return gram_loss(gram, w); }, z);
        CHECK((ga - gf).norm() <= 1e-5 * (1.0 + ga.norm()));

        const Index n_u = n / 2;
        FactorizationData fact{random_matrix(rng, n_u, n - n_u), n_u, n - n_u};
        Matrix fa = factorization_loss_grad(fact, z);
        Matrix ff = fd_gradient([&](const Matrix& w) { return factorization_loss(fact, w); }, z);
        CHECK((fa - ff).norm() <= 1e-5 * (1.0 + fa.norm()));
    }
}

TEST_CASE("ground-truth generator", "[models]") {
    SECTION("zero drift keeps every frame identical") {
        GroundTruth gt = generate_ground_truth_sequence(ModelKind::gram, 3, 5, 6, 0.0, 7);
        REQUIRE(gt.frames.size() == 6);
        for (const auto& frame : gt.frames) CHECK((frame - gt.frames.front()).norm() == 0.0);
    }
    SECTION("generated data is exactly fit by the walk") {
        GroundTruth gt = generate_ground_truth_sequence(ModelKind::gram, 3, 5, 4, 0.1, 8);
        for (std::size_t t = 0; t < gt.frames.size(); ++t)
            CHECK(local_loss(gt.data[t], gt.frames[t]) <= 1e-20);
        GroundTruth fact = generate_ground_truth_sequence(ModelKind::factorization, 3, 5, 4, 0.1, 8);
        for (std::size_t t = 0; t < fact.frames.size(); ++t)
            CHECK(local_loss(fact.data[t], fact.frames[t]) <= 1e-20);
    }
    SECTION("gram targets are symmetric") {
        GroundTruth gt = generate_ground_truth_sequence(ModelKind::gram, 3, 6, 3, 0.05, 9);
        for (const auto& data : gt.data) {
            const auto& g = std::get<GramTargetData>(data).target;
            CHECK((g - g.transpose()).norm() <= 1e-12);
        }
    }
    SECTION("equal seeds reproduce the sequence, different seeds do not") {
        GroundTruth a = generate_ground_truth_sequence(ModelKind::gram, 3, 5, 4, 0.1, 10);
        GroundTruth b = generate_ground_truth_sequence(ModelKind::gram, 3, 5, 4, 0.1, 10);
        GroundTruth c = generate_ground_truth_sequence(ModelKind::gram, 3, 5, 4, 0.1, 11);
        for (std::size_t t = 0; t < a.frames.size(); ++t)
            CHECK((a.frames[t] - b.frames[t]).norm() == 0.0);
        CHECK((a.frames[0] - c.frames[0]).norm() != 0.0);
    }
    SECTION("invalid sizes throw") {
        CHECK_THROWS_AS(generate_ground_truth_sequence(ModelKind::gram, 1, 5, 4, 0.1, 0),
                        std::invalid_argument);
        CHECK_THROWS_AS(generate_ground_truth_sequence(ModelKind::gram, 3, 2, 4, 0.1, 0),
                        std::invalid_argument);
        CHECK_THROWS_AS(generate_ground_truth_sequence(ModelKind::gram, 3, 5, 1, 0.1, 0),
                        std::invalid_argument);
        CHECK_THROWS_AS(generate_ground_truth_sequence(ModelKind::gram, 3, 5, 4, -0.1, 0),
                        std::invalid_argument);
    }
}
