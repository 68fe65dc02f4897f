#include "tiltwise/validate.hpp"

#include <algorithm>
#include <cmath>

#include "tiltwise/dataset.hpp"
#include "tiltwise/errors.hpp"
#include "tiltwise/estimators.hpp"
#include "tiltwise/models.hpp"
#include "tiltwise/rng.hpp"
#include "tiltwise/selection.hpp"
#include "tiltwise/simulate.hpp"

namespace tiltwise {

namespace {

DgpSpec dgp_a(std::size_t n, std::uint64_t seed) {
    DgpSpec spec;
    spec.support = {
        {{0.0}, 0.5, 0.5, 0.5, 0.5, 0.25},
        {{1.0}, 0.5, 0.5, 0.5, 0.5, 0.25},
    };
    spec.eta_star1 = std::log(2.0);
    spec.eta_star0 = -std::log(2.0);
    spec.n = n;
    spec.seed = seed;
    return spec;
}

NuisanceBundle saturated_bundle(const ObservedDataset& d) {
    NuisanceConfig cfg;
    cfg.p.type = ModelChoice::Type::saturated;
    cfg.e.type = ModelChoice::Type::saturated;
    cfg.g.type = ModelChoice::Type::saturated;
    return fit_nuisances(d, cfg);
}

// Independently coded base-case estimators (direct transcriptions of the
// standard formulas, no shared code with the estimators module).

double gformula_direct(const ObservedDataset& d, const ProbabilityModel& g_a) {
    double sum = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) sum += g_a.predict(d.x(i));
    return sum / static_cast<double>(d.n);
}

double standard_aug_direct(const ObservedDataset& d, const NuisanceBundle& nb, int arm) {
    double sum = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) {
        auto xi = d.x(i);
        const double g = nb.g[arm]->predict(xi);
        if (d.s[i] == 1) {
            double term = g;
            if (d.a[i] == arm) {
                const double e = nb.e[arm]->predict(xi);
                const double p = nb.p->predict(xi);
                const double resid = static_cast<double>(d.y[i]) - g;
                term += resid / e;
                term += (1.0 - p) / (p * e) * resid;
            }
            sum += term;
        } else {
            sum += g;
        }
    }
    return sum / static_cast<double>(d.n);
}

double s0_mean_direct(const ObservedDataset& d, const ProbabilityModel& g_a) {
    double sum = 0.0;
    std::size_t n0 = 0;
    for (std::size_t i = 0; i < d.n; ++i) {
        if (d.s[i] == 0) {
            sum += g_a.predict(d.x(i));
            ++n0;
        }
    }
    return sum / static_cast<double>(n0);
}

CheckResult check_tilt_properties() {
    CheckResult res{"tilt-identity-and-monotonicity", false, 0.0, 0.0, ""};
    SplitMix64 rng(20240601);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double g = 0.001 + 0.998 * rng.next_double();
        const double lo = -6.0 + 12.0 * rng.next_double();
        const double hi = lo + 1e-4 + 6.0 * rng.next_double();
        worst = std::max(worst, std::abs(tilted_prob(g, 0.0) - g));
        const double c_lo = tilted_prob(g, lo);
        const double c_hi = tilted_prob(g, hi);
        if (!(c_lo < c_hi)) worst = std::max(worst, 1.0);  // monotonicity violated
        if (c_lo < 0.0 || c_lo > 1.0 || c_hi < 0.0 || c_hi > 1.0) worst = std::max(worst, 1.0);
    }
    res.measured = worst;
    res.threshold = 0.0;
    res.pass = worst <= res.threshold;
    res.detail = "identity at eta=0, monotone in eta, bounded in [0,1] over 1000 draws";
    return res;
}

CheckResult check_base_case_collapse(std::size_t n) {
    CheckResult res{"eta0-collapse", false, 0.0, 1e-10, ""};
    const ObservedDataset d = generate(dgp_a(n, 7));
    const NuisanceBundle nb = saturated_bundle(d);
    double worst = 0.0;
    for (int arm : {1, 0}) {
        worst = std::max(worst, std::abs(psi_om(d, nb, arm, 0.0) - gformula_direct(d, *nb.g[arm])));
        worst = std::max(worst,
                         std::abs(psi_aug(d, nb, arm, 0.0) - standard_aug_direct(d, nb, arm)));
        worst = std::max(worst, std::abs(phi_om(d, nb, arm, 0.0) - s0_mean_direct(d, *nb.g[arm])));
    }
    res.measured = worst;
    res.pass = worst <= res.threshold;
    res.detail = "psi_om/psi_aug/phi_om at eta=0 vs independently coded base-case estimators, n=" +
                 std::to_string(n);
    return res;
}

CheckResult check_saturated_om_aug(std::size_t n) {
    CheckResult res{"saturated-om-aug", false, 0.0, 1e-10, ""};
    const ObservedDataset d = generate(dgp_a(n, 13));
    const NuisanceBundle nb = saturated_bundle(d);
    const NuisanceValues nv = NuisanceValues::compute(d, nb);
    double worst = 0.0;
    for (int k = 0; k <= 10; ++k) {
        const double eta = 0.1 * k;
        for (int arm : {1, 0}) {
            const double ea = arm == 1 ? eta : -eta;
            worst = std::max(worst, std::abs(psi_om(d, nv, arm, ea) - psi_aug(d, nv, arm, ea)));
            worst = std::max(worst, std::abs(phi_om(d, nv, arm, ea) - phi_aug(d, nv, arm, ea)));
        }
    }
    res.measured = worst;
    res.pass = worst <= res.threshold;
    res.detail = "om vs aug with saturated nuisances over eta in [0,1], n=" + std::to_string(n);
    return res;
}

CheckResult check_selection_moments(std::size_t n) {
    CheckResult res{"selection-moments-and-dr-collapse", false, 0.0, 0.0, ""};
    const ObservedDataset d = generate(dgp_a(n, 11));
    const NuisanceBundle nb = saturated_bundle(d);

    SelectionOptions opt;
    opt.tol_ee = 1e-12;
    double worst_resid = 0.0;
    for (double eta : {0.0, 0.5}) {
        const SelectionModel sm = solve_selection(d, *nb.e[1], 1, eta, opt);
        const auto resid = selection_moment_residual(d, *nb.e[1], sm);
        for (double r : resid) worst_resid = std::max(worst_resid, std::abs(r));
    }

    // dr collapse at eta=0 with mutually consistent saturated inputs.
    const SelectionModel sm0 = solve_selection(d, *nb.e[1], 1, 0.0, opt);
    TiltedMeanOptions bopt;
    bopt.logistic.tol_grad = 1e-12;
    const TiltedMeanModel b0 = fit_tilted_mean(d, 1, 0.0, bopt);
    const double dr0 = psi_dr(d, *nb.e[1], sm0, *nb.g[1], b0, 1, 0.0);
    const double aug0 = psi_aug(d, nb, 1, 0.0);
    const double collapse = std::abs(dr0 - aug0);

    res.measured = std::max(worst_resid / 1e-9, collapse / 1e-10);
    res.threshold = 1.0;
    res.pass = res.measured <= 1.0;
    res.detail = "moment residual " + std::to_string(worst_resid) + " (tol 1e-9), |dr-aug| at eta=0 " +
                 std::to_string(collapse) + " (tol 1e-10), n=" + std::to_string(n);
    return res;
}

CheckResult check_selection_probe(std::size_t n_probe) {
    CheckResult res{"selection-equivalence-probe", false, 0.0, 4.0, ""};
    const EquivalenceReport report = check_selection_equivalence(dgp_a(1000, 5), n_probe);
    double worst = 0.0;
    for (const auto& st : report.strata) {
        if (!std::isfinite(st.logodds_diff)) {
            worst = std::max(worst, 1e9);
            continue;
        }
        worst = std::max(worst, std::abs(st.logodds_diff - st.eta_star) / st.se);
    }
    res.measured = worst;
    res.pass = report.pass;
    res.detail = "per-stratum log-odds difference vs the true tilt, " +
                 std::to_string(report.strata.size()) + " strata, n_probe=" +
                 std::to_string(n_probe);
    return res;
}

CheckResult check_oracle_consistency(std::size_t n) {
    CheckResult res{"oracle-consistency", false, 0.0, 0.0, ""};
    const DgpSpec spec = dgp_a(n, 3);
    const OracleTruth truth = oracle(spec);
    const ObservedDataset d = generate(spec);
    const NuisanceBundle nb = saturated_bundle(d);
    const NuisanceValues nv = NuisanceValues::compute(d, nb);

    const double eta1 = spec.eta_star1;
    double worst = 0.0;
    worst = std::max(worst, std::abs(psi_om(d, nv, 1, eta1) - truth.psi1));
    worst = std::max(worst, std::abs(psi_aug(d, nv, 1, eta1) - truth.psi1));
    worst = std::max(worst, std::abs(phi_om(d, nv, 1, eta1) - truth.phi1));
    worst = std::max(worst, std::abs(phi_aug(d, nv, 1, eta1) - truth.phi1));
    res.measured = worst;
    // 4 conservative sampling SDs for these estimators at this n.
    res.threshold = 4.0 * std::sqrt(1.5 / static_cast<double>(n));
    res.pass = worst <= res.threshold;
    res.detail = "estimators at eta=eta* vs exact oracle, n=" + std::to_string(n);
    return res;
}

}  // namespace

std::vector<CheckResult> run_builtin_checks(bool quick) {
    std::vector<CheckResult> checks;
    checks.push_back(check_tilt_properties());
    checks.push_back(check_base_case_collapse(quick ? 2000 : 10000));
    checks.push_back(check_saturated_om_aug(quick ? 2000 : 10000));
    checks.push_back(check_selection_moments(quick ? 1500 : 4000));
    checks.push_back(check_selection_probe(quick ? 50000 : 200000));
    checks.push_back(check_oracle_consistency(quick ? 4000 : 20000));
    return checks;
}

}  // namespace tiltwise
