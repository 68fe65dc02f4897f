#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tiltwise/errors.hpp"
#include "tiltwise/linalg.hpp"
#include "tiltwise/models.hpp"

namespace tiltwise {

namespace {

// Linear predictors beyond this magnitude with ridge = 0 are treated as
// evidence of separation: the fitted probabilities are numerically 0/1 and
// the unpenalized MLE is diverging. The bound must stay below the log-odds a
// degenerate stratum needs before the gradient drops under tol_grad
// (ln(m/tol) is about 19 for a 2-row stratum at tol 1e-8).
constexpr double kSeparationLpBound = 15.0;

double penalized_loglik(std::span<const double> eta_lin, std::span<const std::int8_t> labels,
                        std::span<const double> weights, std::span<const double> beta,
                        double ridge) {
    double ll = 0.0;
    for (std::size_t i = 0; i < eta_lin.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        const double u = eta_lin[i];
        // log sigma(u) and log(1-sigma(u)) without overflow
        const double log1pexp = u > 35.0 ? u : std::log1p(std::exp(std::min(u, 35.0)));
        ll += w * (labels[i] == 1 ? u - log1pexp : -log1pexp);
    }
    double pen = 0.0;
    for (double b : beta) pen += b * b;
    return ll - 0.5 * ridge * pen;
}

}  // namespace

LogisticFit fit_logistic(const Matrix& features, std::span<const std::int8_t> labels,
                         const LogisticOptions& opt, std::span<const double> weights) {
    const std::size_t n = features.rows;
    const std::size_t p = features.cols + 1;  // + intercept
    if (n == 0) throw FitError("fit_logistic: no rows");
    if (labels.size() != n) throw FitError("fit_logistic: label length mismatch");
    if (!weights.empty() && weights.size() != n)
        throw FitError("fit_logistic: weight length mismatch");

    bool any0 = false, any1 = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw FitError("fit_logistic: labels must be 0/1");
        (labels[i] == 1 ? any1 : any0) = true;
    }
    if (opt.ridge == 0.0 && (!any0 || !any1)) {
        throw SeparationError(
            "all labels identical: the unpenalized likelihood has no maximum; "
            "retry with ridge > 0 (e.g. 1e-6)");
    }
    if (opt.ridge < 0.0) throw ConfigError("fit_logistic: ridge must be >= 0");

    std::vector<double> beta(p, 0.0);
    if (!opt.init.empty()) {
        if (opt.init.size() != p)
            throw ConfigError("fit_logistic: init length does not match coefficient count");
        beta = opt.init;
    }

    std::vector<double> eta_lin(n), prob(n);
    std::vector<double> grad(p), hess(p * p), step(p);
    auto compute_lp = [&](std::span<const double> b) {
        for (std::size_t i = 0; i < n; ++i) {
            auto xi = features.row(i);
            double u = b[0];
            for (std::size_t j = 0; j + 1 < p; ++j) u += b[j + 1] * xi[j];
            eta_lin[i] = u;
            prob[i] = expit(u);
        }
    };

    auto compute_grad_hess = [&]() {
        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(hess.begin(), hess.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = weights.empty() ? 1.0 : weights[i];
            auto xi = features.row(i);
            const double r = w * (static_cast<double>(labels[i]) - prob[i]);
            const double v = w * prob[i] * (1.0 - prob[i]);
            grad[0] += r;
            hess[0] += v;
            for (std::size_t j = 0; j + 1 < p; ++j) {
                grad[j + 1] += r * xi[j];
                const double vx = v * xi[j];
                hess[(j + 1) * p] += vx;  // column 0 of row j+1
                for (std::size_t k = 0; k <= j; ++k) {
                    hess[(j + 1) * p + (k + 1)] += vx * xi[k];
                }
            }
        }
        for (std::size_t j = 0; j < p; ++j) {
            grad[j] -= opt.ridge * beta[j];
            hess[j * p + j] += opt.ridge;
            for (std::size_t k = j + 1; k < p; ++k) hess[j * p + k] = hess[k * p + j];
        }
    };

    auto grad_norm = [&]() {
        double s2 = 0.0;
        for (double g : grad) s2 += g * g;
        return std::sqrt(s2);
    };

    compute_lp(beta);
    double ll = penalized_loglik(eta_lin, labels, weights, beta, opt.ridge);

    LogisticFit fit;
    fit.ridge_used = opt.ridge;
    int iter = 0;
    for (; iter < opt.max_iter; ++iter) {
        compute_grad_hess();
        const double gn = grad_norm();
        if (gn <= opt.tol_grad) {
            fit.converged = true;
            fit.final_gradient_norm = gn;
            break;
        }

        step = grad;
        std::vector<double> hcopy = hess;
        if (!cholesky_solve(hcopy, step, p)) {
            if (opt.ridge == 0.0) {
                throw SeparationError(
                    "singular Hessian in logistic fit (complete or quasi-separation); "
                    "retry with ridge > 0 (e.g. 1e-6)");
            }
            throw FitError("fit_logistic: Hessian not positive definite despite ridge");
        }

        // Inside the quadratic basin the step's predicted gain drops below
        // the log-likelihood's floating-point resolution; a likelihood-based
        // line search would then be steered by rounding noise, so take the
        // full Newton step and let the gradient test decide.
        double predicted_gain = 0.0;
        for (std::size_t j = 0; j < p; ++j) predicted_gain += grad[j] * step[j];
        predicted_gain *= 0.5;
        const double ll_noise =
            64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(ll));
        std::vector<double> trial(p);
        if (predicted_gain <= ll_noise) {
            for (std::size_t j = 0; j < p; ++j) trial[j] = beta[j] + step[j];
            compute_lp(trial);
            beta = trial;
            ll = penalized_loglik(eta_lin, labels, weights, beta, opt.ridge);
        } else {
            // Damped Newton: halve until the penalized log-likelihood improves.
            double scale = 1.0;
            bool improved = false;
            for (int h = 0; h < 40; ++h) {
                for (std::size_t j = 0; j < p; ++j) trial[j] = beta[j] + scale * step[j];
                compute_lp(trial);
                const double ll_trial =
                    penalized_loglik(eta_lin, labels, weights, trial, opt.ridge);
                if (ll_trial >= ll - ll_noise) {
                    beta = trial;
                    ll = ll_trial;
                    improved = true;
                    break;
                }
                scale *= 0.5;
            }
            if (!improved) {
                // Stalled line search: gradient cannot be reduced further.
                compute_lp(beta);
                break;
            }
        }

        if (opt.ridge == 0.0) {
            double max_lp = 0.0;
            for (double u : eta_lin) max_lp = std::max(max_lp, std::abs(u));
            if (max_lp > kSeparationLpBound) {
                throw SeparationError(
                    "fitted log-odds exceed " + std::to_string(kSeparationLpBound) +
                    " (complete or quasi-separation); retry with ridge > 0 (e.g. 1e-6)");
            }
        }
    }

    if (!fit.converged) {
        compute_grad_hess();
        fit.final_gradient_norm = grad_norm();
        if (fit.final_gradient_norm <= opt.tol_grad) {
            fit.converged = true;
        } else if (opt.ridge == 0.0) {
            throw SeparationError(
                "logistic fit did not converge at ridge = 0 (gradient norm " +
                std::to_string(fit.final_gradient_norm) +
                "); retry with ridge > 0 (e.g. 1e-6)");
        } else if (!opt.best_effort) {
            throw FitError("fit_logistic: no convergence after " +
                           std::to_string(opt.max_iter) + " iterations (gradient norm " +
                           std::to_string(fit.final_gradient_norm) + ")");
        }
    }
    fit.iterations = iter;
    fit.coefficients = std::move(beta);
    return fit;
}

double LogisticModel::predict(std::span<const double> x) const {
    if (x.size() != dim_)
        throw ValidationError("logistic predict: covariate length mismatch");
    double u = fit_.coefficients[0];
    for (std::size_t j = 0; j < dim_; ++j) u += fit_.coefficients[j + 1] * x[j];
    return std::clamp(expit(u), kEpsClip, 1.0 - kEpsClip);
}

}  // namespace tiltwise
