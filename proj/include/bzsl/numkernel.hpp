#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "bzsl/errors.hpp"

namespace bzsl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Dense symmetric matrix with packed lower-triangular storage, so the
// symmetry invariant holds by construction. Indices are (row, col).
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(std::size_t dim) : dim_(dim), data_(dim * (dim + 1) / 2, 0.0) {}

    static SymMatrix identity(std::size_t dim);
    // Requires max |A - A^T| <= tol * max|A|; throws DimensionMismatch otherwise.
    static SymMatrix from_dense(const Matrix& a, double tol = 1e-9);

    std::size_t dim() const { return dim_; }

    double operator()(std::size_t i, std::size_t j) const {
        return data_[index(i, j)];
    }
    void set(std::size_t i, std::size_t j, double v) { data_[index(i, j)] = v; }

    // this += w * v v^T
    void add_outer(const Vector& v, double w = 1.0);
    // this += c * other
    void add_scaled(const SymMatrix& other, double c = 1.0);
    void scale(double c);
    void add_diagonal(double c);

    double trace() const;
    Matrix to_dense() const;

    const std::vector<double>& packed() const { return data_; }
    std::vector<double>& packed() { return data_; }

private:
    std::size_t index(std::size_t i, std::size_t j) const {
        if (j > i) std::swap(i, j);
        return i * (i + 1) / 2 + j;
    }

    std::size_t dim_ = 0;
    std::vector<double> data_;
};

// Lower-triangular Cholesky factor with the log-determinant of the factored
// matrix cached; PPD parameters are factored once and reused per sample.
struct CholeskyFactor {
    Matrix lower;
    double log_det = 0.0;

    std::size_t dim() const { return static_cast<std::size_t>(lower.rows()); }
};

enum class JitterPolicy { none, escalate };

// Factors S (or S + eps*I under the escalating jitter schedule) as L L^T.
// eps starts at 1e-8 * max(1, trace(S)/D) and doubles up to 8 times before
// NotPositiveDefinite is thrown.
CholeskyFactor cholesky(const SymMatrix& s, JitterPolicy jitter = JitterPolicy::none);

// (x - mean)^T S^{-1} (x - mean) through triangular solves on the factor.
double mahalanobis_sq(const Vector& x, const Vector& mean, const CholeskyFactor& chol);

// Multivariate Student-t parameters with precomputed normalizer.
struct StudentTParams {
    Vector mean;
    CholeskyFactor scale_chol;
    double dof = 0.0;
    double log_norm_const = 0.0;

    std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

// Builds StudentTParams from a scale matrix, factoring it and computing the
// log normalizer lnG((v+D)/2) - lnG(v/2) - (D/2) ln(v pi) - log_det/2.
StudentTParams make_student_t(const Vector& mean, const SymMatrix& scale, double dof,
                              JitterPolicy jitter = JitterPolicy::escalate);

double student_t_logpdf(const Vector& x, const StudentTParams& p);

// ln Gamma(z) for z > 0 (Lanczos approximation, g = 7).
double log_gamma(double z);

} // namespace bzsl
