#include "tiltwise/selection.hpp"

#include <algorithm>
#include <cmath>

#include "tiltwise/errors.hpp"
#include "tiltwise/linalg.hpp"

namespace tiltwise {

namespace {

std::vector<std::size_t> resolve_features(const ObservedDataset& d,
                                          const std::optional<std::vector<std::size_t>>& subset) {
    if (!subset.has_value()) {
        std::vector<std::size_t> all(d.n_cov);
        for (std::size_t j = 0; j < d.n_cov; ++j) all[j] = j;
        return all;
    }
    for (std::size_t j : *subset) {
        if (j >= d.n_cov) throw ConfigError("feature subset index out of range");
    }
    return *subset;
}

double linear_m(std::span<const double> gamma, std::span<const std::size_t> features,
                std::span<const double> x) {
    double u = gamma[0];
    for (std::size_t k = 0; k < features.size(); ++k) u += gamma[k + 1] * x[features[k]];
    return u;
}

}  // namespace

double SelectionModel::m(std::span<const double> x) const {
    return linear_m(gamma, features, x);
}

namespace {

// Normalized estimating-equation value G(gamma) = (1/n) sum_i z_i (1 - I_i w_i)
// with w_i = 1 / ((1 - expit(m(x_i) + eta y_i)) e_a(x_i)). The target-minus-
// moment form means a zero of G makes the weighted trial-arm moment match the
// sample average of the regressors. Active rows are grouped by (regressor
// vector, y) — e_a(x) is a function of x — so each Newton evaluation costs
// O(#groups) instead of O(n).
struct SelectionProblem {
    std::vector<std::size_t> features;
    double eta;
    std::size_t dim;
    std::size_t n;

    std::vector<double> target;  // (1/n) sum_i z_i
    // Active terms, either merged by identical (z, y) — the discrete-support
    // fast path — or one per row. count carries the multiplicity.
    std::vector<double> z_flat;  // terms x dim
    std::vector<double> e_term;
    std::vector<double> y_term;
    std::vector<double> count_term;

    static constexpr std::size_t kMaxGroups = 512;

    SelectionProblem(const ObservedDataset& d, const ProbabilityModel& e_a, int arm,
                     double eta_, const std::optional<std::vector<std::size_t>>& subset)
        : features(resolve_features(d, subset)), eta(eta_) {
        dim = features.size() + 1;
        n = d.n;
        target.assign(dim, 0.0);
        std::vector<double> z(dim);
        bool merge = true;
        for (std::size_t i = 0; i < d.n; ++i) {
            auto xi = d.x(i);
            z[0] = 1.0;
            for (std::size_t k = 0; k < features.size(); ++k) z[k + 1] = xi[features[k]];
            for (std::size_t k = 0; k < dim; ++k) target[k] += z[k];
            if (d.s[i] != 1 || d.a[i] != arm) continue;
            const double y = static_cast<double>(d.y[i]);
            if (merge) {
                std::size_t g = 0;
                const std::size_t n_terms = y_term.size();
                for (; g < n_terms; ++g) {
                    if (y_term[g] == y &&
                        std::equal(z.begin(), z.end(), z_flat.begin() + g * dim)) {
                        break;
                    }
                }
                if (g < n_terms) {
                    count_term[g] += 1.0;
                    continue;
                }
                if (n_terms >= kMaxGroups) merge = false;  // stop merging, append raw rows
            }
            z_flat.insert(z_flat.end(), z.begin(), z.end());
            e_term.push_back(e_a.predict(xi));
            y_term.push_back(y);
            count_term.push_back(1.0);
        }
        for (double& t : target) t /= static_cast<double>(n);
        if (y_term.empty()) {
            throw FitError("solve_selection: no randomized rows in arm " + std::to_string(arm));
        }
    }

    std::vector<double> residual(std::span<const double> gamma) const {
        std::vector<double> g = target;
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t t = 0; t < y_term.size(); ++t) {
            const double* z = z_flat.data() + t * dim;
            double u = eta * y_term[t];
            for (std::size_t k = 0; k < dim; ++k) u += gamma[k] * z[k];
            const double w = count_term[t] * inv_n / ((1.0 - expit(u)) * e_term[t]);
            for (std::size_t k = 0; k < dim; ++k) g[k] -= w * z[k];
        }
        return g;
    }

    // Negated Jacobian (SPD): (1/n) sum sigma(u) w z z^T.
    void neg_jacobian(std::span<const double> gamma, std::vector<double>& out) const {
        out.assign(dim * dim, 0.0);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t t = 0; t < y_term.size(); ++t) {
            const double* z = z_flat.data() + t * dim;
            double u = eta * y_term[t];
            for (std::size_t k = 0; k < dim; ++k) u += gamma[k] * z[k];
            const double sig = expit(u);
            const double w = count_term[t] * inv_n / ((1.0 - sig) * e_term[t]);
            const double v = sig * w;
            for (std::size_t a = 0; a < dim; ++a) {
                for (std::size_t b = 0; b <= a; ++b) out[a * dim + b] += v * z[a] * z[b];
            }
        }
        for (std::size_t a = 0; a < dim; ++a) {
            for (std::size_t b = a + 1; b < dim; ++b) out[a * dim + b] = out[b * dim + a];
        }
    }
};

double sup_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

SelectionModel solve_selection(const ObservedDataset& d, const ProbabilityModel& e_a,
                               int arm, double eta, const SelectionOptions& opt) {
    if (arm != 0 && arm != 1) throw ConfigError("arm must be 0 or 1");
    SelectionProblem prob(d, e_a, arm, eta, opt.feature_subset);

    std::vector<double> gamma(prob.dim, 0.0);
    if (!opt.init.empty()) {
        if (opt.init.size() != prob.dim)
            throw ConfigError("solve_selection: init length mismatch");
        gamma = opt.init;
    } else {
        // Intercept starts at the (smoothed) marginal log-odds of s=0.
        std::size_t n0 = 0;
        for (std::size_t i = 0; i < d.n; ++i) n0 += d.s[i] == 0;
        const double share = (static_cast<double>(n0) + 0.5) / (static_cast<double>(d.n) + 1.0);
        gamma[0] = std::log(share / (1.0 - share));
    }

    std::vector<double> res = prob.residual(gamma);
    double rnorm = sup_norm(res);

    SelectionModel sm;
    sm.features = prob.features;
    sm.arm = arm;
    sm.eta = eta;

    int iter = 0;
    for (; iter < opt.max_iter && rnorm > opt.tol_ee; ++iter) {
        std::vector<double> jac;
        prob.neg_jacobian(gamma, jac);
        std::vector<double> step = res;
        if (!cholesky_solve(jac, step, prob.dim)) {
            throw SolverError(
                "selection estimating equations: singular Jacobian; "
                "consider fewer covariates in the selection model");
        }
        // gamma_new = gamma + scale * step (step solves -J delta = G).
        double scale = 1.0;
        bool improved = false;
        for (int h = 0; h <= opt.max_halvings; ++h) {
            std::vector<double> trial(prob.dim);
            for (std::size_t j = 0; j < prob.dim; ++j) trial[j] = gamma[j] + scale * step[j];
            std::vector<double> trial_res = prob.residual(trial);
            const double trial_norm = sup_norm(trial_res);
            if (std::isfinite(trial_norm) && trial_norm < rnorm) {
                gamma = std::move(trial);
                res = std::move(trial_res);
                rnorm = trial_norm;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) break;
    }

    sm.gamma = std::move(gamma);
    sm.solve_report.iterations = iter;
    sm.solve_report.residual_norm = rnorm;
    sm.solve_report.converged = rnorm <= opt.tol_ee;
    if (!sm.solve_report.converged) {
        throw SolverError("selection estimating equations did not converge: residual " +
                          std::to_string(rnorm) + " after " + std::to_string(iter) +
                          " iterations");
    }
    return sm;
}

std::vector<double> selection_moment_residual(const ObservedDataset& d,
                                              const ProbabilityModel& e_a,
                                              const SelectionModel& sm) {
    std::optional<std::vector<std::size_t>> subset = sm.features;
    SelectionProblem prob(d, e_a, sm.arm, sm.eta, subset);
    return prob.residual(sm.gamma);
}

std::vector<double> selection_moment_jacobian(const ObservedDataset& d,
                                              const ProbabilityModel& e_a,
                                              const SelectionModel& sm) {
    std::optional<std::vector<std::size_t>> subset = sm.features;
    SelectionProblem prob(d, e_a, sm.arm, sm.eta, subset);
    std::vector<double> neg;
    prob.neg_jacobian(sm.gamma, neg);
    for (double& v : neg) v = -v;
    return neg;
}

// ---------------------------------------------------------------------------

double TiltedMeanModel::predict(std::span<const double> x) const {
    const double u = linear_m(coefficients, features, x);
    return std::clamp(expit(u), kEpsClip, 1.0 - kEpsClip);
}

TiltedMeanModel fit_tilted_mean(const ObservedDataset& d, int arm, double eta,
                                const TiltedMeanOptions& opt) {
    if (arm != 0 && arm != 1) throw ConfigError("arm must be 0 or 1");
    std::vector<std::size_t> features = resolve_features(d, opt.feature_subset);

    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < d.n; ++i) {
        if (d.s[i] == 1 && d.a[i] == arm) rows.push_back(i);
    }
    if (rows.empty()) {
        throw FitError("fit_tilted_mean: no randomized rows in arm " + std::to_string(arm));
    }

    // Row weights e^(eta*y), rescaled so the largest weight is 1. Rows with
    // identical (covariates, y) are merged with multiplicity folded into the
    // weight; the weighted likelihood is unchanged.
    const double w1 = eta > 0.0 ? 1.0 : std::exp(eta);
    const double w0 = eta > 0.0 ? std::exp(-eta) : 1.0;
    constexpr std::size_t kMaxGroups = 512;
    std::vector<std::vector<double>> zkeys;
    std::vector<std::int8_t> labels;
    std::vector<double> weights;
    std::vector<double> zbuf(features.size());
    bool merge = true;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto xi = d.x(rows[r]);
        for (std::size_t k = 0; k < features.size(); ++k) zbuf[k] = xi[features[k]];
        const std::int8_t y = d.y[rows[r]];
        const double w = y == 1 ? w1 : w0;
        if (merge) {
            std::size_t g = 0;
            for (; g < zkeys.size(); ++g) {
                if (labels[g] == y &&
                    std::equal(zkeys[g].begin(), zkeys[g].end(), zbuf.begin())) {
                    break;
                }
            }
            if (g < zkeys.size()) {
                weights[g] += w;
                continue;
            }
            if (zkeys.size() >= kMaxGroups) merge = false;
        }
        zkeys.emplace_back(zbuf.begin(), zbuf.end());
        labels.push_back(y);
        weights.push_back(w);
    }
    Matrix feats(zkeys.size(), features.size());
    for (std::size_t g = 0; g < zkeys.size(); ++g) {
        for (std::size_t k = 0; k < features.size(); ++k) feats.at(g, k) = zkeys[g][k];
    }

    TiltedMeanModel model;
    model.features = std::move(features);
    model.arm = arm;
    model.eta = eta;
    try {
        LogisticFit fit = fit_logistic(feats, labels, opt.logistic, weights);
        model.coefficients = std::move(fit.coefficients);
    } catch (const SeparationError&) {
        LogisticOptions retry = opt.logistic;
        retry.ridge = 1e-6;
        retry.init.clear();
        LogisticFit fit = fit_logistic(feats, labels, retry, weights);
        model.coefficients = std::move(fit.coefficients);
        model.warnings.push_back("tilted mean arm " + std::to_string(arm) +
                                 ": separation at ridge=0, refit with ridge=1e-6");
    }
    return model;
}

double psi_dr(const ObservedDataset& d, const ProbabilityModel& e_a,
              const SelectionModel& sm, const ProbabilityModel& g_a,
              const TiltedMeanModel& b, int arm, double eta) {
    if (arm != 0 && arm != 1) throw ConfigError("arm must be 0 or 1");
    if (sm.arm != arm || b.arm != arm) {
        throw ConfigError("psi_dr: selection and tilted-mean models must match the arm");
    }

    // Memoize the per-pattern quantities (model predictions and the two
    // exp(m + eta y) values) over a small discrete support; per-row fallback
    // beyond the cap.
    constexpr std::size_t kMaxPatterns = 512;
    std::vector<std::span<const double>> patterns;
    std::vector<double> pg, pe, pb, pw1, pw0;
    auto pattern_values = [&](std::span<const double> xi) -> std::size_t {
        std::size_t k = 0;
        for (; k < patterns.size(); ++k) {
            if (std::equal(patterns[k].begin(), patterns[k].end(), xi.begin())) return k;
        }
        patterns.push_back(xi);
        pg.push_back(g_a.predict(xi));
        pe.push_back(e_a.predict(xi));
        pb.push_back(b.predict(xi));
        const double em = std::exp(sm.m(xi));
        pw1.push_back(em * std::exp(eta));
        pw0.push_back(em);
        return k;
    };

    double sum = 0.0;
    std::size_t i = 0;
    for (; i < d.n && patterns.size() < kMaxPatterns; ++i) {
        auto xi = d.x(i);
        const std::size_t k = pattern_values(xi);
        if (d.s[i] == 1) {
            double term = pg[k];
            if (d.a[i] == arm) {
                const double yv = static_cast<double>(d.y[i]);
                term += (yv - pg[k]) / pe[k];
                term += (d.y[i] == 1 ? pw1[k] : pw0[k]) / pe[k] * (yv - pb[k]);
            }
            sum += term;
        } else {
            sum += pb[k];
        }
    }
    for (; i < d.n; ++i) {
        auto xi = d.x(i);
        if (d.s[i] == 1) {
            const double g = g_a.predict(xi);
            double term = g;
            if (d.a[i] == arm) {
                const double e = e_a.predict(xi);
                const double yv = static_cast<double>(d.y[i]);
                term += (yv - g) / e;
                const double w = std::exp(sm.m(xi) + eta * yv) / e;
                term += w * (yv - b.predict(xi));
            }
            sum += term;
        } else {
            sum += b.predict(xi);
        }
    }
    return sum / static_cast<double>(d.n);
}

DrSweepResult append_dr_rows(const ObservedDataset& d, const NuisanceBundle& nb,
                             const SensitivitySpec& spec, SensitivityCurve& curve,
                             const SelectionOptions& opt,
                             std::vector<std::string>* warnings) {
    DrSweepResult result;
    bool need1 = false, need0 = false, need_rd = false, need_rr = false;
    for (Estimand e : spec.estimands) {
        if (e == Estimand::psi1) need1 = true;
        if (e == Estimand::psi0) need0 = true;
        if (e == Estimand::rd_all) need_rd = true;
        if (e == Estimand::rr_all) need_rr = true;
    }
    if (need_rd || need_rr) need1 = need0 = true;
    if (!need1 && !need0) return result;

    SelectionOptions arm_opt[2] = {opt, opt};
    std::vector<double> warm_b[2];
    for (const auto& pair : spec.resolved_pairs()) {
        const double eta_for_arm[2] = {pair[1], pair[0]};
        double psi_by_arm[2] = {std::nan(""), std::nan("")};
        for (int arm : {1, 0}) {
            if ((arm == 1 && !need1) || (arm == 0 && !need0)) continue;
            const double eta = eta_for_arm[arm];
            SelectionModel sm = solve_selection(d, *nb.e[arm], arm, eta, arm_opt[arm]);
            arm_opt[arm].init = sm.gamma;  // warm start for the next grid point
            result.reports.push_back(sm.solve_report);

            TiltedMeanOptions bopt;
            bopt.logistic.init = warm_b[arm];
            TiltedMeanModel b = fit_tilted_mean(d, arm, eta, bopt);
            warm_b[arm] = b.coefficients;
            if (warnings != nullptr) {
                for (const auto& w : b.warnings) warnings->push_back(w);
            }
            psi_by_arm[arm] = psi_dr(d, *nb.e[arm], sm, *nb.g[arm], b, arm, eta);
        }

        auto push = [&](Estimand est, double value) {
            EstimateRow row;
            row.eta1 = pair[0];
            row.eta0 = pair[1];
            row.estimand = est;
            row.estimator = EstimatorKind::dr;
            row.value = value;
            curve.rows.push_back(row);
        };
        for (Estimand est : spec.estimands) {
            switch (est) {
                case Estimand::psi1: push(est, psi_by_arm[1]); break;
                case Estimand::psi0: push(est, psi_by_arm[0]); break;
                case Estimand::rd_all:
                    push(est, effect_measures(psi_by_arm[1], psi_by_arm[0]).rd);
                    break;
                case Estimand::rr_all: {
                    auto rr = effect_measures(psi_by_arm[1], psi_by_arm[0]).rr;
                    push(est, rr ? *rr : std::nan(""));
                    break;
                }
                default: break;  // phi estimands have no dr variant
            }
        }
    }
    return result;
}

}  // namespace tiltwise
