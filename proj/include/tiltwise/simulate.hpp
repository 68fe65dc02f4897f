#ifndef TILTWISE_SIMULATE_HPP
#define TILTWISE_SIMULATE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tiltwise/dataset.hpp"

namespace tiltwise {

// Discrete-support data-generating process obeying the exponential tilt
// model with known per-arm tilts. Trial rows draw Y from g_a(x); the s=0
// potential-outcome law is tilted_prob(g_a(x), eta_star_a) and governs the
// oracle but generates no observed outcome data.
struct DgpPoint {
    std::vector<double> x;
    double prob = 0.0;  // f_X(x)
    double p = 0.5;     // Pr[S=1|X=x]
    double e1 = 0.5;    // Pr[A=1|X=x,S=1]
    double g1 = 0.5;    // Pr[Y=1|X=x,S=1,A=1]
    double g0 = 0.5;    // Pr[Y=1|X=x,S=1,A=0]
};

struct DgpSpec {
    std::vector<DgpPoint> support;
    std::vector<std::string> covariate_names;  // defaults to x1..xk
    double eta_star1 = 0.0;
    double eta_star0 = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;

    // Throws ConfigError: probabilities must sum to 1 and lie in [0,1],
    // positivity must hold on the support, n >= 1.
    void validate() const;
};

struct OracleTruth {
    double psi1 = 0.0;
    double psi0 = 0.0;
    double phi1 = 0.0;  // NaN when Pr[S=0] = 0
    double phi0 = 0.0;
    double rd_all = 0.0;
    std::optional<double> rr_all;
    double rd_s0 = 0.0;
    std::optional<double> rr_s0;
};

// Draws n rows with per-row substreams of spec.seed: X categorical on the
// support, S ~ Bern(p(x)); trial rows add A ~ Bern(e1(x)) and Y ~ Bern(g_A(x)).
ObservedDataset generate(const DgpSpec& spec);

// Exact estimand values under the tilt:
//   psi(a) = sum_x f(x) [ p(x) g_a(x) + (1-p(x)) tilt(g_a(x), eta*_a) ]
//   phi(a) = sum_x f(x) (1-p(x)) tilt(g_a(x), eta*_a) / sum_x f(x) (1-p(x))
// Throws EstimandUndefinedError for phi when no mass has p(x) < 1.
OracleTruth oracle(const DgpSpec& spec);

// Empirical check that the tilt acts as an odds-of-selection model: using an
// internal augmented generator that also draws latent potential outcomes for
// every row, the per-stratum difference
//   logit Pr[S=0|X=x, Y^a=1] - logit Pr[S=0|X=x, Y^a=0]
// must equal eta*_a within 4 binomial (delta-method) standard errors.
struct EquivalenceStratum {
    std::size_t support_index = 0;
    int arm = 1;
    double logodds_diff = 0.0;
    double se = 0.0;
    double eta_star = 0.0;
    std::size_t n_y1 = 0;
    std::size_t n_y0 = 0;
    bool pass = false;
};

struct EquivalenceReport {
    std::vector<EquivalenceStratum> strata;
    bool pass = false;
};

EquivalenceReport check_selection_equivalence(const DgpSpec& spec, std::size_t n_probe);

}  // namespace tiltwise

#endif
