#include "bzsl/numkernel.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace bzsl {

SymMatrix SymMatrix::identity(std::size_t dim) {
    SymMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m.set(i, i, 1.0);
    return m;
}

SymMatrix SymMatrix::from_dense(const Matrix& a, double tol) {
    if (a.rows() != a.cols()) throw DimensionMismatch("from_dense: matrix is not square");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    SymMatrix m(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            if (std::abs(a(i, j) - a(j, i)) > tol * scale) {
                throw DimensionMismatch("from_dense: matrix is not symmetric");
            }
            m.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j), a(i, j));
        }
    }
    return m;
}

void SymMatrix::add_outer(const Vector& v, double w) {
    if (static_cast<std::size_t>(v.size()) != dim_) {
        throw DimensionMismatch("add_outer: vector length does not match matrix dim");
    }
    for (std::size_t i = 0; i < dim_; ++i) {
        const double vi = w * v[static_cast<Eigen::Index>(i)];
        double* row = data_.data() + i * (i + 1) / 2;
        for (std::size_t j = 0; j <= i; ++j) {
            row[j] += vi * v[static_cast<Eigen::Index>(j)];
        }
    }
}

void SymMatrix::add_scaled(const SymMatrix& other, double c) {
    if (other.dim_ != dim_) throw DimensionMismatch("add_scaled: dimension mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += c * other.data_[k];
}

void SymMatrix::scale(double c) {
    for (double& v : data_) v *= c;
}

void SymMatrix::add_diagonal(double c) {
    for (std::size_t i = 0; i < dim_; ++i) data_[i * (i + 1) / 2 + i] += c;
}

double SymMatrix::trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += data_[i * (i + 1) / 2 + i];
    return t;
}

Matrix SymMatrix::to_dense() const {
    Matrix a(dim_, dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(i, j);
            a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = (*this)(i, j);
        }
    }
    return a;
}

namespace {

bool try_factor(const Matrix& a, CholeskyFactor& out) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) return false;
    Matrix lower = llt.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < lower.rows(); ++i) {
        const double d = lower(i, i);
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        log_det += std::log(d);
    }
    out.lower = std::move(lower);
    out.log_det = 2.0 * log_det;
    return true;
}

} // namespace

CholeskyFactor cholesky(const SymMatrix& s, JitterPolicy jitter) {
    if (s.dim() == 0) throw DimensionMismatch("cholesky: empty matrix");
    const Matrix dense = s.to_dense();
    CholeskyFactor out;
    if (try_factor(dense, out)) return out;
    if (jitter == JitterPolicy::none) {
        throw NotPositiveDefinite("cholesky: matrix is not positive-definite");
    }
    const double d = static_cast<double>(s.dim());
    double eps = 1e-8 * std::max(1.0, s.trace() / d);
    for (int attempt = 0; attempt <= 8; ++attempt) {
        Matrix jittered = dense;
        jittered.diagonal().array() += eps;
        if (try_factor(jittered, out)) return out;
        eps *= 2.0;
    }
    throw NotPositiveDefinite("cholesky: matrix is not positive-definite after jitter escalation");
}

double mahalanobis_sq(const Vector& x, const Vector& mean, const CholeskyFactor& chol) {
    if (x.size() != mean.size() || static_cast<std::size_t>(x.size()) != chol.dim()) {
        throw DimensionMismatch("mahalanobis_sq: dimension mismatch");
    }
    const Vector y = chol.lower.triangularView<Eigen::Lower>().solve(x - mean);
    return y.squaredNorm();
}

StudentTParams make_student_t(const Vector& mean, const SymMatrix& scale, double dof,
                              JitterPolicy jitter) {
    if (static_cast<std::size_t>(mean.size()) != scale.dim()) {
        throw DimensionMismatch("make_student_t: mean/scale dimension mismatch");
    }
    if (!(dof > 0.0)) throw NonPositiveDof("make_student_t: dof must be positive");
    StudentTParams p;
    p.mean = mean;
    p.scale_chol = cholesky(scale, jitter);
    p.dof = dof;
    const double d = static_cast<double>(mean.size());
    p.log_norm_const = log_gamma((dof + d) / 2.0) - log_gamma(dof / 2.0)
                       - 0.5 * d * std::log(dof * M_PI) - 0.5 * p.scale_chol.log_det;
    return p;
}

double student_t_logpdf(const Vector& x, const StudentTParams& p) {
    const double m = mahalanobis_sq(x, p.mean, p.scale_chol);
    const double d = static_cast<double>(p.dim());
    return p.log_norm_const - 0.5 * (p.dof + d) * std::log1p(m / p.dof);
}

double log_gamma(double z) {
    if (!(z > 0.0)) throw DomainError("log_gamma: argument must be positive");
    // Reflection keeps the Lanczos series on z >= 0.5.
    if (z < 0.5) {
        return std::log(M_PI / std::sin(M_PI * z)) - log_gamma(1.0 - z);
    }
    static constexpr double coeff[9] = {
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    };
    const double zm1 = z - 1.0;
    double x = coeff[0];
    for (int i = 1; i < 9; ++i) x += coeff[i] / (zm1 + static_cast<double>(i));
    const double t = zm1 + 7.5;
    return 0.5 * std::log(2.0 * M_PI) + (zm1 + 0.5) * std::log(t) - t + std::log(x);
}

} // namespace bzsl
