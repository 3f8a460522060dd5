#pragma once

// Linear algebra over skew-symmetric matrices and SO(d): canonical basis,
// vectorization into so(d) coordinates, projection onto the skew subspace,
// and the matrix exponential (exact and series-truncated).

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace goldstone {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// d x d skew-symmetric matrix. Skewness is maintained structurally: values
/// enter only through the strictly-lower triangle and are mirrored with
/// negated sign, so entries(i,j) == -entries(j,i) holds exactly rather than
/// to a tolerance.
class SkewMatrix {
public:
    SkewMatrix() = default;
    explicit SkewMatrix(Index dim) : m_(Matrix::Zero(dim, dim)) {
        if (dim < 1) throw std::invalid_argument("SkewMatrix: dim must be >= 1");
    }

    /// Builds the skew matrix whose strictly-lower triangle equals src's;
    /// the upper triangle and diagonal of src are ignored.
    static SkewMatrix from_lower_triangle(const Matrix& src) {
        if (src.rows() != src.cols())
            throw std::invalid_argument("SkewMatrix: source must be square");
        SkewMatrix s(src.rows());
        for (Index i = 0; i < src.rows(); ++i) {
            for (Index j = 0; j < i; ++j) {
                s.m_(i, j) = src(i, j);
                s.m_(j, i) = -src(i, j);
            }
        }
        return s;
    }

    const Matrix& matrix() const { return m_; }
    Index dim() const { return m_.rows(); }
    double norm() const { return m_.norm(); }

    SkewMatrix& operator+=(const SkewMatrix& o) {
        m_ += o.m_;
        return *this;
    }
    SkewMatrix& operator-=(const SkewMatrix& o) {
        m_ -= o.m_;
        return *this;
    }
    SkewMatrix& operator*=(double a) {
        m_ *= a;
        return *this;
    }
    friend SkewMatrix operator+(SkewMatrix a, const SkewMatrix& b) { return a += b; }
    friend SkewMatrix operator-(SkewMatrix a, const SkewMatrix& b) { return a -= b; }
    friend SkewMatrix operator*(double a, SkewMatrix s) { return s *= a; }
    friend SkewMatrix operator*(SkewMatrix s, double a) { return s *= a; }
    SkewMatrix operator-() const {
        SkewMatrix s = *this;
        s.m_ = -s.m_;
        return s;
    }

private:
    Matrix m_;
};

/// Dimension of so(d): d(d-1)/2.
inline Index skew_dim(Index d) {
    return d * (d - 1) / 2;
}

/// Strictly-lower positions (i, j), i > j, in row-major scan order. This is
/// the coordinate ordering shared by every module.
inline std::vector<std::pair<Index, Index>> skew_positions(Index d) {
    std::vector<std::pair<Index, Index>> pos;
    pos.reserve(static_cast<std::size_t>(skew_dim(d)));
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < i; ++j) pos.emplace_back(i, j);
    return pos;
}

/// Canonical basis of so(d): B_k has +1 at the k-th strictly-lower position
/// (i, j) and -1 at (j, i). Empty for d = 1.
inline std::vector<SkewMatrix> skew_basis(Index d) {
    if (d < 1) throw std::invalid_argument("skew_basis: d must be >= 1");
    std::vector<SkewMatrix> basis;
    basis.reserve(static_cast<std::size_t>(skew_dim(d)));
    for (const auto& [i, j] : skew_positions(d)) {
        Matrix lower = Matrix::Zero(d, d);
        lower(i, j) = 1.0;
        basis.push_back(SkewMatrix::from_lower_triangle(lower));
    }
    return basis;
}

/// Reads the strictly-lower entries in basis order.
inline Vector vec_skew(const SkewMatrix& s) {
    const Matrix& m = s.matrix();
    Vector coords(skew_dim(s.dim()));
    Index k = 0;
    for (Index i = 0; i < s.dim(); ++i)
        for (Index j = 0; j < i; ++j) coords(k++) = m(i, j);
    return coords;
}

inline SkewMatrix unvec_skew(const Vector& coords, Index d) {
    if (coords.size() != skew_dim(d))
        throw std::invalid_argument("unvec_skew: coords length does not match d(d-1)/2");
    Matrix lower = Matrix::Zero(d, d);
    Index k = 0;
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < i; ++j) lower(i, j) = coords(k++);
    return SkewMatrix::from_lower_triangle(lower);
}

/// Orthogonal projection onto the skew subspace: (M - M^T)/2.
inline SkewMatrix project_skew(const Matrix& m) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("project_skew: matrix must be square");
    Matrix half = 0.5 * (m - m.transpose());
    return SkewMatrix::from_lower_triangle(half);
}

using RotationMatrix = Matrix;

/// How to evaluate e^S when rotating embeddings: the exact exponential, or
/// the power series cut after a finite order. The truncated form is not
/// orthogonal in general; it approaches the exact exponential as S -> 0.
struct ExpmMode {
    static ExpmMode exact() { return {true, 0}; }
    static ExpmMode truncated(int order) {
        if (order < 1) throw std::invalid_argument("ExpmMode: truncation order must be >= 1");
        return {false, order};
    }
    bool is_exact = true;
    int order = 0;
};

namespace detail {

// Scaling-and-squaring with a Taylor core. The scaled block has induced
// inf-norm <= 0.5, so the series reaches double precision within ~20 terms.
inline Matrix expm_dense(const Matrix& a0) {
    const Index d = a0.rows();
    Matrix a = a0;
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
        a /= std::ldexp(1.0, squarings);
    }
    Matrix result = Matrix::Identity(d, d) + a;
    Matrix term = a;
    for (int k = 2; k <= 40; ++k) {
        term = (term * a) / static_cast<double>(k);
        result += term;
        if (term.norm() <= std::numeric_limits<double>::epsilon() * result.norm()) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

}  // namespace detail

/// Matrix exponential of a skew generator. Exact mode returns a rotation
/// (orthogonal to ~1e-14); truncated mode returns I + S + ... + S^order/order!.
inline RotationMatrix expm_skew(const SkewMatrix& s, const ExpmMode& mode = ExpmMode::exact()) {
    const Matrix& g = s.matrix();
    if (mode.is_exact) return detail::expm_dense(g);
    const Index d = g.rows();
    Matrix result = Matrix::Identity(d, d);
    Matrix term = Matrix::Identity(d, d);
    for (int k = 1; k <= mode.order; ++k) {
        term = (term * g) / static_cast<double>(k);
        result += term;
    }
    return result;
}

/// Deviation of R from SO(d): max of ||R^T R - I||_F and |det(R) - 1|.
inline double rotation_defect(const Matrix& r) {
    if (r.rows() != r.cols())
        throw std::invalid_argument("rotation_defect: matrix must be square");
    const Index d = r.rows();
    const double orth = (r.transpose() * r - Matrix::Identity(d, d)).norm();
    const double det = std::abs(r.determinant() - 1.0);
    return std::max(orth, det);
}

}  // namespace goldstone
