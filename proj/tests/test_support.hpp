#pragma once

// Test-side oracles. These deliberately avoid the library's linear algebra
// (and Eigen) so that oracle-vs-implementation comparisons exercise two
// independent computational routes.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

// Scratch directory removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 gen(std::random_device{}());
        path = std::filesystem::temp_directory_path() /
               (tag + "_" + std::to_string(gen()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    std::string file(const std::string& name) const { return (path / name).string(); }

    void write(const std::string& name, const std::string& content) const {
        std::ofstream os(file(name), std::ios::binary);
        os << content;
    }
};

namespace oracle {

using Mat = std::vector<std::vector<double>>;
using Vec = std::vector<double>;

inline Mat zeros(std::size_t n) { return Mat(n, Vec(n, 0.0)); }

inline Mat identity(std::size_t n) {
    Mat m = zeros(n);
    for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
    return m;
}

// Gauss-Jordan inverse with partial pivoting.
inline Mat invert(Mat a) {
    const std::size_t n = a.size();
    Mat inv = identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        }
        if (a[pivot][col] == 0.0) throw std::runtime_error("singular matrix in oracle invert");
        std::swap(a[col], a[pivot]);
        std::swap(inv[col], inv[pivot]);
        const double p = a[col][col];
        for (std::size_t j = 0; j < n; ++j) {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a[r][j] -= f * a[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    return inv;
}

// log |det| via Gaussian elimination; throws if det <= 0.
inline double log_det_pd(Mat a) {
    const std::size_t n = a.size();
    double log_det = 0.0;
    double sign = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        }
        if (a[pivot][col] == 0.0) throw std::runtime_error("singular matrix in oracle det");
        if (pivot != col) {
            std::swap(a[col], a[pivot]);
            sign = -sign;
        }
        const double p = a[col][col];
        if (p < 0.0) sign = -sign;
        log_det += std::log(std::fabs(p));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / p;
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a[r][j] -= f * a[col][j];
        }
    }
    if (sign <= 0.0) throw std::runtime_error("non-positive determinant in oracle det");
    return log_det;
}

inline double quad_form(const Mat& a_inv, const Vec& d) {
    const std::size_t n = d.size();
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += a_inv[i][j] * d[j];
        q += d[i] * row;
    }
    return q;
}

// Multivariate Student-t log density through the explicit-inverse route,
// normalized with std::lgamma.
inline double student_t_logpdf(const Vec& x, const Vec& mean, const Mat& scale, double dof) {
    const std::size_t n = x.size();
    Vec d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - mean[i];
    const Mat inv = invert(scale);
    const double maha = quad_form(inv, d);
    const double dd = static_cast<double>(n);
    const double log_norm = std::lgamma((dof + dd) / 2.0) - std::lgamma(dof / 2.0) -
                            0.5 * dd * std::log(dof * M_PI) - 0.5 * log_det_pd(scale);
    return log_norm - 0.5 * (dof + dd) * std::log1p(maha / dof);
}

// Cyclic Jacobi eigenvalues of a symmetric matrix, descending order.
inline Vec jacobi_eigenvalues(Mat a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
        }
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    Vec eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
    std::sort(eig.begin(), eig.end(), std::greater<double>());
    return eig;
}

// Random SPD matrix B^T B + I.
inline Mat random_spd(std::size_t n, std::mt19937_64& gen) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat b(n, Vec(n));
    for (auto& row : b) {
        for (double& v : row) v = normal(gen);
    }
    Mat s = zeros(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += b[k][i] * b[k][j];
            s[i][j] = acc + (i == j ? 1.0 : 0.0);
        }
    }
    return s;
}

} // namespace oracle
