#include "tiltwise/linalg.hpp"

#include <cmath>

#include "tiltwise/errors.hpp"

namespace tiltwise {

bool cholesky_solve(std::vector<double>& a, std::vector<double>& b, std::size_t p) {
    // In-place lower Cholesky, then forward/back substitution.
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i * p + j];
            for (std::size_t k = 0; k < j; ++k) sum -= a[i * p + k] * a[j * p + k];
            if (i == j) {
                if (!(sum > 0.0) || !std::isfinite(sum)) return false;
                a[i * p + i] = std::sqrt(sum);
            } else {
                a[i * p + j] = sum / a[j * p + j];
            }
        }
    }
    for (std::size_t i = 0; i < p; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) sum -= a[i * p + k] * b[k];
        b[i] = sum / a[i * p + i];
    }
    for (std::size_t ii = p; ii-- > 0;) {
        double sum = b[ii];
        for (std::size_t k = ii + 1; k < p; ++k) sum -= a[k * p + ii] * b[k];
        b[ii] = sum / a[ii * p + ii];
    }
    return true;
}

double dot(std::span<const double> u, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw ValidationError("logit requires an argument strictly inside (0,1)");
    }
    return std::log(p / (1.0 - p));
}

}  // namespace tiltwise
