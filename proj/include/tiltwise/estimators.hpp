#ifndef TILTWISE_ESTIMATORS_HPP
#define TILTWISE_ESTIMATORS_HPP

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tiltwise/dataset.hpp"
#include "tiltwise/models.hpp"

namespace tiltwise {

// Exponentially tilted success probability: e^eta * g / (e^eta * g + 1 - g).
// Equals g at eta = 0, is strictly increasing in eta for 0 < g < 1, and maps
// the degenerate masses g = 0, 1 to themselves. Computed in the overflow-free
// direction for |eta| up to the double range.
double tilted_prob(double g, double eta);

namespace detail {
// Test hook: adds a fixed offset inside tilted_prob (clamped to [0,1]).
// Used by the validate command's negative control; 0 in normal operation.
void set_tilt_test_offset(double offset);
double tilt_test_offset();
}  // namespace detail

// Per-row nuisance predictions cached for bulk evaluation. sweep() and the
// resampling pipelines compute this once per dataset instead of calling
// predict per row per estimator.
struct NuisanceValues {
    std::vector<double> p;   // Pr[S=1|X_i]
    std::vector<double> e1;  // Pr[A=1|X_i,S=1]
    std::vector<double> g1;  // Pr[Y=1|X_i,S=1,A=1]
    std::vector<double> g0;  // Pr[Y=1|X_i,S=1,A=0]

    static NuisanceValues compute(const ObservedDataset& d, const NuisanceBundle& nb);
    double e(int arm, std::size_t i) const { return arm == 1 ? e1[i] : 1.0 - e1[i]; }
    double g(int arm, std::size_t i) const { return arm == 1 ? g1[i] : g0[i]; }
};

// Outcome-model-based estimator of the potential outcome mean in the whole
// target population: (1/n) sum_i [ S_i g_a(X_i) + (1-S_i) tilt(g_a(X_i), eta) ].
double psi_om(const ObservedDataset& d, const NuisanceValues& nv, int arm, double eta);
double psi_om(const ObservedDataset& d, const NuisanceBundle& nb, int arm, double eta);

// Same estimand restricted to the non-randomized subset: the s=0 mean of the
// tilted outcome probability. Throws EstimandUndefinedError without s=0 rows.
double phi_om(const ObservedDataset& d, const NuisanceValues& nv, int arm, double eta);
double phi_om(const ObservedDataset& d, const NuisanceBundle& nb, int arm, double eta);

// Augmented (one-step) estimator of the target-population mean: the trial
// AIPW term, the tilted outcome-model term for s=0 rows, and an inverse
// probability weighted residual term. Reduces to the standard augmented
// estimator at eta = 0. A composite weight above `weight_warn_threshold`
// appends to `warnings` when provided.
double psi_aug(const ObservedDataset& d, const NuisanceValues& nv, int arm, double eta,
               std::vector<std::string>* warnings = nullptr);
double psi_aug(const ObservedDataset& d, const NuisanceBundle& nb, int arm, double eta,
               std::vector<std::string>* warnings = nullptr);

// Augmented inverse odds weighting estimator for the non-randomized subset.
double phi_aug(const ObservedDataset& d, const NuisanceValues& nv, int arm, double eta,
               std::vector<std::string>* warnings = nullptr);
double phi_aug(const ObservedDataset& d, const NuisanceBundle& nb, int arm, double eta,
               std::vector<std::string>* warnings = nullptr);

constexpr double kWeightWarnThreshold = 50.0;
constexpr double kRelativeRiskFloor = 1e-12;

struct EffectMeasures {
    double rd = 0.0;
    std::optional<double> rr;  // absent when the denominator is below the floor
};

EffectMeasures effect_measures(double v1, double v0);

// ---------------------------------------------------------------------------
// Sensitivity sweep over a grid of tilt values.

enum class Estimand {
    psi1, psi0, phi1, phi0, rd_all, rr_all, rd_s0, rr_s0
};

enum class EstimatorKind { om, aug, dr };

std::string_view to_string(Estimand e);
std::string_view to_string(EstimatorKind k);
std::optional<Estimand> estimand_from_string(std::string_view s);
std::optional<EstimatorKind> estimator_from_string(std::string_view s);

inline constexpr std::array<Estimand, 8> kAllEstimands = {
    Estimand::psi1, Estimand::psi0, Estimand::phi1, Estimand::phi0,
    Estimand::rd_all, Estimand::rr_all, Estimand::rd_s0, Estimand::rr_s0};

struct SensitivitySpec {
    enum class Linkage { linked, independent };
    Linkage linkage = Linkage::linked;

    // Linked mode: arm 1 uses +eta and arm 0 uses -eta for each grid value;
    // the grid must be strictly increasing and contain 0 (base case).
    std::vector<double> eta_grid;
    // Independent mode: explicit (eta1, eta0) pairs.
    std::vector<std::array<double, 2>> eta_pairs;

    std::vector<EstimatorKind> estimators = {EstimatorKind::om, EstimatorKind::aug};
    std::vector<Estimand> estimands =
        std::vector<Estimand>(kAllEstimands.begin(), kAllEstimands.end());

    void validate() const;  // throws ConfigError
    // Grid resolved to (eta1, eta0) pairs regardless of linkage mode.
    std::vector<std::array<double, 2>> resolved_pairs() const;

    static std::vector<double> default_grid();  // 21 points evenly spaced on [0,1]
};

struct EstimateRow {
    double eta1 = 0.0;
    double eta0 = 0.0;
    Estimand estimand = Estimand::psi1;
    EstimatorKind estimator = EstimatorKind::om;
    double value = 0.0;  // NaN when undefined (relative risk with ~zero denominator)
};

struct SensitivityCurve {
    std::vector<EstimateRow> rows;
};

// Evaluates the requested om/aug estimands at every grid point (point
// estimates only; intervals are added by the inference module, dr rows by the
// selection module).
SensitivityCurve sweep(const ObservedDataset& d, const NuisanceBundle& nb,
                       const SensitivitySpec& spec,
                       std::vector<std::string>* warnings = nullptr);

}  // namespace tiltwise

#endif
