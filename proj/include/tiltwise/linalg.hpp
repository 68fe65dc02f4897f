#ifndef TILTWISE_LINALG_HPP
#define TILTWISE_LINALG_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace tiltwise {

// Row-major dense matrix, just enough for design matrices and small
// normal-equation systems.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {v.data() + r * cols, cols}; }
};

// Solves A x = b for symmetric positive definite A (p x p, row-major) via
// Cholesky. Returns false when A is not numerically SPD; A and b are
// clobbered either way. x is written into b on success.
bool cholesky_solve(std::vector<double>& a, std::vector<double>& b, std::size_t p);

double dot(std::span<const double> u, std::span<const double> v);

inline double expit(double u) {
    if (u >= 0) {
        const double e = std::exp(-u);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(u);
    return e / (1.0 + e);
}

double logit(double p);

}  // namespace tiltwise

#endif
