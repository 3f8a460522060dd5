#include "goldstone/so_algebra.hpp"

#include "support/test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace goldstone;
using goldstone::testing::random_skew;

TEST_CASE("skew basis has d(d-1)/2 elements with the fixed sign convention", "[so_algebra]") {
    CHECK(skew_basis(1).empty());

    auto b2 = skew_basis(2);
    REQUIRE(b2.size() == 1);
    Matrix expected(2, 2);
    expected << 0, -1, 1, 0;
    CHECK((b2[0].matrix() - expected).norm() == 0.0);

    CHECK(skew_basis(3).size() == 3);
    CHECK(skew_basis(5).size() == 10);

    auto pos = skew_positions(3);
    REQUIRE(pos.size() == 3);
    CHECK(pos[0] == std::make_pair(Index{1}, Index{0}));
    CHECK(pos[1] == std::make_pair(Index{2}, Index{0}));
    CHECK(pos[2] == std::make_pair(Index{2}, Index{1}));
}

TEST_CASE("vec/unvec are exact inverses", "[so_algebra]") {
    SECTION("zero matrix") {
        SkewMatrix zero(3);
        CHECK(vec_skew(zero).norm() == 0.0);
    }
    SECTION("d=2 single coordinate") {
        Vector theta(1);
        theta << 0.7;
        Matrix expected(2, 2);
        expected << 0, -0.7, 0.7, 0;
        CHECK((unvec_skew(theta, 2).matrix() - expected).norm() == 0.0);
    }
    SECTION("random d=4 round trip is bitwise exact") {
        std::mt19937_64 rng(11);
        SkewMatrix s = random_skew(rng, 4);
        SkewMatrix back = unvec_skew(vec_skew(s), 4);
        CHECK((back.matrix() - s.matrix()).norm() == 0.0);
    }
    SECTION("length mismatch throws") {
        Vector wrong(2);
        wrong << 1, 2;
        CHECK_THROWS_AS(unvec_skew(wrong, 3), std::invalid_argument);
    }
}

TEST_CASE("skew matrices are structurally antisymmetric", "[so_algebra]") {
    std::mt19937_64 rng(5);
    SkewMatrix s = random_skew(rng, 5);
    SkewMatrix sum = s + 0.37 * random_skew(rng, 5);
    const Matrix& m = sum.matrix();
    for (Index i = 0; i < 5; ++i)
        for (Index j = 0; j < 5; ++j) CHECK(m(i, j) == -m(j, i));
}

TEST_CASE("project_skew is the symmetric-part annihilator", "[so_algebra]") {
    SECTION("symmetric input maps to zero") {
        Matrix sym(2, 2);
        sym << 1, 3, 3, 2;
        CHECK(project_skew(sym).norm() == 0.0);
    }
    SECTION("skew input is fixed") {
        std::mt19937_64 rng(3);
        SkewMatrix s = random_skew(rng, 4);
        CHECK((project_skew(s.matrix()).matrix() - s.matrix()).norm() == 0.0);
    }
    SECTION("hand example") {
        Matrix m(2, 2);
        m << 1, 2, 0, 1;
        Matrix expected(2, 2);
        expected << 0, 1, -1, 0;
        CHECK((project_skew(m).matrix() - expected).norm() == 0.0);
    }
    SECTION("idempotent and linear") {
        std::mt19937_64 rng(9);
        Matrix a = goldstone::testing::random_matrix(rng, 4, 4);
        Matrix b = goldstone::testing::random_matrix(rng, 4, 4);
        Matrix once = project_skew(a).matrix();
        CHECK((project_skew(once).matrix() - once).norm() == 0.0);
        Matrix lhs = project_skew(2.0 * a + 3.0 * b).matrix();
        Matrix rhs = 2.0 * project_skew(a).matrix() + 3.0 * project_skew(b).matrix();
        CHECK((lhs - rhs).norm() < 1e-14 * (1.0 + rhs.norm()));
    }
    SECTION("non-square throws") {
        CHECK_THROWS_AS(project_skew(Matrix::Zero(2, 3)), std::invalid_argument);
    }
}

TEST_CASE("expm_skew exact mode lands on SO(d)", "[so_algebra]") {
    SECTION("exp(0) = I") {
        SkewMatrix zero(4);
        CHECK((expm_skew(zero) - Matrix::Identity(4, 4)).norm() == 0.0);
    }
    SECTION("d=2 closed form") {
        const double theta = 1.234;
        Vector coords(1);
        coords << theta;
        RotationMatrix r = expm_skew(unvec_skew(coords, 2));
        Matrix expected(2, 2);
        expected << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
        CHECK((r - expected).norm() < 1e-14);
    }
    SECTION("orthogonality and determinant for random generators") {
        std::mt19937_64 rng(17);
        for (int rep = 0; rep < 25; ++rep) {
            const Index d = 2 + static_cast<Index>(rep % 5);
            RotationMatrix r = expm_skew(random_skew(rng, d));
            CHECK(rotation_defect(r) < 1e-12);
        }
    }
    SECTION("exp(-S) is the transpose of exp(S)") {
        std::mt19937_64 rng(23);
        for (int rep = 0; rep < 10; ++rep) {
            SkewMatrix s = random_skew(rng, 4);
            CHECK((expm_skew(-s) - expm_skew(s).transpose()).norm() < 1e-12);
        }
    }
}

TEST_CASE("expm_skew truncated mode matches the series remainder bound", "[so_algebra]") {
    std::mt19937_64 rng(31);
    SkewMatrix s = random_skew(rng, 3);
    s *= 1e-4 / s.norm();
    RotationMatrix exact = expm_skew(s);
    RotationMatrix trunc = expm_skew(s, ExpmMode::truncated(2));
    CHECK((exact - trunc).norm() <= 1e-11);

    // order 1 on a moderate generator is visibly non-orthogonal
    SkewMatrix big = random_skew(rng, 3);
    big *= 0.8 / big.norm();
    CHECK(rotation_defect(expm_skew(big, ExpmMode::truncated(1))) > 1e-3);

    CHECK_THROWS_AS(ExpmMode::truncated(0), std::invalid_argument);
}

TEST_CASE("SO(d) is non-abelian: exp(A)exp(B) != exp(A+B)", "[so_algebra]") {
    std::mt19937_64 rng(42);
    SkewMatrix a = random_skew(rng, 3);
    SkewMatrix b = random_skew(rng, 3);
    Matrix lhs = expm_skew(a) * expm_skew(b);
    Matrix rhs = expm_skew(a + b);
    CHECK((lhs - rhs).norm() > 1e-3);
}
