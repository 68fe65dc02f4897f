#ifndef TILTWISE_SELECTION_HPP
#define TILTWISE_SELECTION_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tiltwise/dataset.hpp"
#include "tiltwise/estimators.hpp"
#include "tiltwise/models.hpp"

namespace tiltwise {

// Odds-of-selection route to sensitivity analysis for one arm at a time:
// logit Pr[S=0 | X, Y^a = y] = m_a(X; gamma) + eta * y, with m_a linear in
// (1, X). gamma is identified by moment conditions that the inverse weighted
// trial-arm indicator averages to one against the regressors.

struct SelectionOptions {
    double tol_ee = 1e-9;   // sup-norm tolerance on (sample moment - target)
    int max_iter = 200;
    int max_halvings = 30;
    // Covariate column subset entering m (intercept always included).
    // nullopt = all covariates; an empty vector = intercept-only.
    std::optional<std::vector<std::size_t>> feature_subset;
    std::vector<double> init;  // warm-start gamma, empty = default init
};

struct SolveReport {
    int iterations = 0;
    double residual_norm = 0.0;  // sup-norm of the normalized moment residual
    bool converged = false;
};

struct SelectionModel {
    std::vector<double> gamma;  // intercept first, then the selected covariates
    std::vector<std::size_t> features;  // covariate columns behind gamma[1..]
    int arm = 1;
    double eta = 0.0;
    SolveReport solve_report;

    // Linear predictor m(x; gamma).
    double m(std::span<const double> x) const;
};

// Solves the estimating equations for gamma by damped Newton with an analytic
// Jacobian. Throws SolverError on non-convergence or a singular Jacobian.
SelectionModel solve_selection(const ObservedDataset& d, const ProbabilityModel& e_a,
                               int arm, double eta, const SelectionOptions& opt = {});

// Normalized moment residual (sample moment minus target) at gamma; exposed
// so tests can check the solution independently of the solver's own report.
std::vector<double> selection_moment_residual(const ObservedDataset& d,
                                              const ProbabilityModel& e_a,
                                              const SelectionModel& sm);

// Dense analytic Jacobian of the residual with respect to gamma (row-major,
// dim x dim where dim = 1 + #features); checked against central finite
// differences in the tests.
std::vector<double> selection_moment_jacobian(const ObservedDataset& d,
                                              const ProbabilityModel& e_a,
                                              const SelectionModel& sm);

// Tilted conditional outcome mean b(X) = tilted mean of Y given X among
// trial rows of one arm; fitted as a logistic-link regression with row
// weights e^(eta * y). With a saturated design the stratum prediction equals
// tilted_prob(stratum rate, eta). Separation falls back to ridge = 1e-6 with
// a warning, as in fit_nuisances.
struct TiltedMeanOptions {
    LogisticOptions logistic;
    std::optional<std::vector<std::size_t>> feature_subset;  // as above
};

struct TiltedMeanModel {
    std::vector<double> coefficients;  // intercept first
    std::vector<std::size_t> features;
    int arm = 1;
    double eta = 0.0;
    std::vector<std::string> warnings;

    double predict(std::span<const double> x) const;  // clipped to the clip interval
};

TiltedMeanModel fit_tilted_mean(const ObservedDataset& d, int arm, double eta,
                                const TiltedMeanOptions& opt = {});

// One-step estimator of the target-population mean under the odds-of-selection
// parameterization: trial AIPW term with g, (1-S) b(X), and the exp(m + eta y)
// weighted residual term. Consistent when either b or m is correctly
// specified.
double psi_dr(const ObservedDataset& d, const ProbabilityModel& e_a,
              const SelectionModel& sm, const ProbabilityModel& g_a,
              const TiltedMeanModel& b, int arm, double eta);

// dr-tagged curve rows (psi and target-population effect measures only) for
// every grid point, appended to `curve`. Reuses solutions across grid points
// as warm starts. Collects solver reports so callers can audit residuals.
struct DrSweepResult {
    std::vector<SolveReport> reports;
};

DrSweepResult append_dr_rows(const ObservedDataset& d, const NuisanceBundle& nb,
                             const SensitivitySpec& spec, SensitivityCurve& curve,
                             const SelectionOptions& opt = {},
                             std::vector<std::string>* warnings = nullptr);

}  // namespace tiltwise

#endif
