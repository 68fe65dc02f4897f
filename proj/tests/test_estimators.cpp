#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tiltwise/errors.hpp"
#include "tiltwise/estimators.hpp"
#include "tiltwise/rng.hpp"
#include "tiltwise/simulate.hpp"
#include "support.hpp"

using namespace tiltwise;
using namespace tiltwise::testsupport;

namespace {
const double kLn2 = std::log(2.0);
}

TEST_CASE("tilted probability: anchor values") {
    CHECK(tilted_prob(0.5, 0.0) == 0.5);  // exact identity at eta = 0
    CHECK(tilted_prob(0.0, 3.7) == 0.0);
    CHECK(tilted_prob(1.0, -2.1) == 1.0);
    CHECK(tilted_prob(0.5, kLn2) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    // Direct arithmetic: e * 0.2 / (e * 0.2 + 0.8).
    const double direct = std::exp(1.0) * 0.2 / (std::exp(1.0) * 0.2 + 0.8);
    CHECK(tilted_prob(0.2, 1.0) == doctest::Approx(direct).epsilon(1e-14));
    CHECK(tilted_prob(0.2, 1.0) == doctest::Approx(0.4046).epsilon(2e-4));
    // Negative direction, same identity through the stable branch.
    CHECK(tilted_prob(0.5, -kLn2) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("tilted probability: identity, monotonicity and bounds over random draws") {
    SplitMix64 rng(314);
    for (int k = 0; k < 1000; ++k) {
        const double g = 0.001 + 0.998 * rng.next_double();
        CHECK(tilted_prob(g, 0.0) == g);
        const double lo = -8.0 + 16.0 * rng.next_double();
        const double hi = lo + 1e-4 + 8.0 * rng.next_double();
        const double c_lo = tilted_prob(g, lo);
        const double c_hi = tilted_prob(g, hi);
        CHECK(c_lo < c_hi);  // strictly increasing in eta for interior g
        CHECK(c_lo >= 0.0);
        CHECK(c_hi <= 1.0);
    }
}

TEST_CASE("outcome-model estimators reproduce the hand-computed fixture values") {
    const ObservedDataset d = make_fixture12();
    const NuisanceBundle nb = fit_nuisances(d, known_e_saturated_config());

    // Strata: g1(0) = 1/2, g1(1) = 1 exactly. Hand sums over the 12 rows:
    //   eta = 0:    psi = (6*(1/2) + 6*1)/12 = 3/4
    //   eta = ln 2: psi = (2 + 4 + 2*(2/3) + 2)/12 = 7/9
    //   phi(0) = (2*(1/2) + 2*1)/4 = 3/4,  phi(ln 2) = (2*(2/3) + 2)/4 = 5/6
    CHECK(psi_om(d, nb, 1, 0.0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(psi_om(d, nb, 1, kLn2) == doctest::Approx(7.0 / 9.0).epsilon(1e-12));
    CHECK(phi_om(d, nb, 1, 0.0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(phi_om(d, nb, 1, kLn2) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("psi_om ignores eta when no rows are non-randomized; phi is undefined") {
    ObservedDataset d;
    d.covariate_names = {"x1"};
    d.n_cov = 1;
    for (int i = 0; i < 8; ++i) {
        // Both arms and both outcomes in each stratum.
        const double x[1] = {i < 4 ? 0.0 : 1.0};
        d.push_row(x, 1, i % 2, (i / 2) % 2);
    }
    const NuisanceBundle nb = fit_nuisances(d, known_e_saturated_config());
    const double base = psi_om(d, nb, 1, 0.0);
    for (double eta : {0.3, 1.0, -2.0}) {
        CHECK(psi_om(d, nb, 1, eta) == base);
    }
    CHECK_THROWS_AS(phi_om(d, nb, 1, 0.0), EstimandUndefinedError);
    CHECK_THROWS_AS(phi_aug(d, nb, 1, 0.0), EstimandUndefinedError);
}

TEST_CASE("phi_om approaches the boundary as the tilt grows without bound") {
    const ObservedDataset d = make_fixture24();
    const NuisanceBundle nb = fit_nuisances(d, known_e_saturated_config());
    CHECK(phi_om(d, nb, 1, 30.0) > 1.0 - 1e-9);
    CHECK(phi_om(d, nb, 1, -30.0) < 1e-9);
}

TEST_CASE("the randomized-row contribution to psi_om does not depend on eta") {
    const ObservedDataset d = make_fixture24();
    const NuisanceBundle nb = fit_nuisances(d, known_e_saturated_config());
    const NuisanceValues nv = NuisanceValues::compute(d, nb);

    for (double eta : {0.2, 0.7, 1.4}) {
        // Direct s=0-only computation of the shift.
        double shift = 0.0;
        for (std::size_t i = 0; i < d.n; ++i) {
            if (d.s[i] == 0) shift += tilted_prob(nv.g1[i], eta) - nv.g1[i];
        }
        shift /= static_cast<double>(d.n);
        CHECK(psi_om(d, nv, 1, eta) - psi_om(d, nv, 1, 0.0) ==
              doctest::Approx(shift).epsilon(1e-13));
    }
}

TEST_CASE("om and aug agree under exactly saturated nuisances") {
    SUBCASE("24-row fixture, no pure strata, every grid point") {
        const ObservedDataset d = make_fixture24();
        const NuisanceBundle nb = fit_nuisances(d, saturated_config());
        const NuisanceValues nv = NuisanceValues::compute(d, nb);
        for (double eta : SensitivitySpec::default_grid()) {
            for (int arm : {1, 0}) {
                const double ea = arm == 1 ? eta : -eta;
                CHECK(std::abs(psi_om(d, nv, arm, ea) - psi_aug(d, nv, arm, ea)) <= 1e-10);
                CHECK(std::abs(phi_om(d, nv, arm, ea) - phi_aug(d, nv, arm, ea)) <= 1e-10);
            }
        }
    }
    SUBCASE("12-row fixture with the pure stratum, exact table nuisances") {
        const ObservedDataset d = make_fixture12();
        const NuisanceBundle nb = fit_nuisances(d, known_e_saturated_config());
        CHECK(std::abs(psi_om(d, nb, 1, 0.0) - psi_aug(d, nb, 1, 0.0)) <= 1e-12);
        CHECK(std::abs(psi_om(d, nb, 1, kLn2) - psi_aug(d, nb, 1, kLn2)) <= 1e-12);
    }
    SUBCASE("simulated data, sample strata") {
        const ObservedDataset d = generate(dgp_a(3000, 21));
        const NuisanceBundle nb = fit_nuisances(d, saturated_config());
        const NuisanceValues nv = NuisanceValues::compute(d, nb);
        for (double eta : {0.0, 0.25, 1.0}) {
            CHECK(std::abs(psi_om(d, nv, 1, eta) - psi_aug(d, nv, 1, eta)) <= 1e-10);
            CHECK(std::abs(phi_om(d, nv, 0, -eta) - phi_aug(d, nv, 0, -eta)) <= 1e-10);
        }
    }
}

TEST_CASE("psi_aug at eta* is consistent for the oracle value") {
    const DgpSpec spec = dgp_a(20000, 99);
    const OracleTruth truth = oracle(spec);
    const ObservedDataset d = generate(spec);
    const NuisanceBundle nb = fit_nuisances(d, known_e_saturated_config());
    const NuisanceValues nv = NuisanceValues::compute(d, nb);

    // 4-sigma binomial-style bound on the estimator's sampling noise.
    const double bound = 4.0 * std::sqrt(1.5 / static_cast<double>(spec.n));
    CHECK(std::abs(psi_aug(d, nv, 1, spec.eta_star1) - truth.psi1) < bound);
    CHECK(std::abs(phi_aug(d, nv, 1, spec.eta_star1) - truth.phi1) < 2.0 * bound);
    CHECK(std::abs(psi_aug(d, nv, 0, spec.eta_star0) - truth.psi0) < bound);
}

TEST_CASE("the augmented residual term is centered at zero under true nuisances") {
    // 500 simulated cohorts; nuisances fixed at their true (not fitted)
    // values, so the weighted residual term has exact mean zero per draw.
    const int reps = 500;
    const std::size_t n = 2000;
    const double eta = kLn2;
    std::vector<double> term_means;
    term_means.reserve(reps);
    for (int r = 0; r < reps; ++r) {
        const ObservedDataset d = generate(dgp_a(n, 1000 + static_cast<std::uint64_t>(r)));
        double sum = 0.0;
        for (std::size_t i = 0; i < d.n; ++i) {
            if (d.s[i] != 1 || d.a[i] != 1) continue;
            const double g = 0.5, p = 0.5, e = 0.5;
            const double yv = static_cast<double>(d.y[i]);
            const double bracket = std::exp(eta) * g + (1.0 - g);
            const double w = (1.0 - p) * std::exp(eta * yv) / (p * e * bracket);
            sum += w * (yv - std::exp(eta) * g / bracket);
        }
        term_means.push_back(sum / static_cast<double>(d.n));
    }
    double mean = 0.0;
    for (double v : term_means) mean += v;
    mean /= reps;
    double var = 0.0;
    for (double v : term_means) var += (v - mean) * (v - mean);
    var /= (reps - 1);
    const double se_of_mean = std::sqrt(var / reps);
    CHECK(std::abs(mean) <= 4.0 * se_of_mean);
}

TEST_CASE("with participation near 1 and no s=0 rows, aug reduces to the trial AIPW mean") {
    ObservedDataset d;
    d.covariate_names = {"x1"};
    d.n_cov = 1;
    SplitMix64 rng(55);
    for (int i = 0; i < 40; ++i) {
        const double x[1] = {double((i / 2) % 2)};
        d.push_row(x, 1, i % 2, rng.bernoulli(0.4) ? 1 : 0);
    }
    NuisanceConfig cfg = known_e_saturated_config();
    cfg.p.type = ModelChoice::Type::known;
    cfg.p.known_value = 1.0 - kEpsClip;
    const NuisanceBundle nb = fit_nuisances(d, cfg);
    const NuisanceValues nv = NuisanceValues::compute(d, nb);

    // Direct trial AIPW mean with the same nuisances.
    double aipw = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) {
        double term = nv.g1[i];
        if (d.a[i] == 1) term += (double(d.y[i]) - nv.g1[i]) / nv.e1[i];
        aipw += term;
    }
    aipw /= static_cast<double>(d.n);
    // The remaining weighted-residual term carries a factor (1-p) <= 1e-6.
    CHECK(std::abs(psi_aug(d, nv, 1, 0.7) - aipw) < 5e-6);
}

TEST_CASE("phi_aug with a single s=0 stratum is the tilted value plus the residual term") {
    ObservedDataset d;
    d.covariate_names = {"x1"};
    d.n_cov = 1;
    auto add = [&](double x, int s, int a, int y) {
        const double xs[1] = {x};
        d.push_row(xs, s, a, y);
    };
    add(0, 1, 1, 1);
    add(0, 1, 1, 0);
    add(0, 1, 0, 1);
    add(0, 1, 0, 0);
    add(1, 1, 1, 1);
    add(1, 1, 1, 0);
    add(1, 1, 0, 0);
    add(1, 1, 0, 1);
    for (int k = 0; k < 3; ++k) add(1, 0, -1, -1);  // all s=0 rows share x = 1

    const NuisanceBundle nb = fit_nuisances(d, known_e_saturated_config());
    const NuisanceValues nv = NuisanceValues::compute(d, nb);
    const double eta = 0.4;

    double residual_term = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) {
        if (d.s[i] != 1 || d.a[i] != 1) continue;
        const double g = nv.g1[i];
        const double bracket = std::exp(eta) * g + (1.0 - g);
        const double c = std::exp(eta) * g / bracket;
        const double w = (1.0 - nv.p[i]) * std::exp(eta * d.y[i]) / (nv.p[i] * nv.e1[i] * bracket);
        residual_term += w * (double(d.y[i]) - c);
    }
    residual_term /= 3.0;  // normalized by the s=0 count

    const double g_star = nb.g[1]->predict(d.x(8));
    CHECK(phi_aug(d, nv, 1, eta) ==
          doctest::Approx(tilted_prob(g_star, eta) + residual_term).epsilon(1e-12));
}

TEST_CASE("augmented weights above the threshold are reported") {
    // A tiny participation probability in one stratum inflates (1-p)/p.
    ObservedDataset d;
    d.covariate_names = {"x1"};
    d.n_cov = 1;
    auto add = [&](double x, int s, int a, int y) {
        const double xs[1] = {x};
        d.push_row(xs, s, a, y);
    };
    for (int i = 0; i < 2; ++i) {
        add(0, 1, 1, 1);
        add(0, 1, 1, 0);
        add(0, 1, 0, 1);
        add(0, 1, 0, 0);
    }
    for (int i = 0; i < 300; ++i) add(0, 0, -1, -1);
    const NuisanceBundle nb = fit_nuisances(d, known_e_saturated_config());
    std::vector<std::string> warnings;
    psi_aug(d, nb, 1, 0.0, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("weight") != std::string::npos);
}

TEST_CASE("effect measures") {
    const EffectMeasures equal = effect_measures(0.75, 0.75);
    CHECK(equal.rd == 0.0);
    REQUIRE(equal.rr.has_value());
    CHECK(*equal.rr == 1.0);

    const EffectMeasures em = effect_measures(7.0 / 9.0, 0.25);
    CHECK(em.rd == doctest::Approx(0.52778).epsilon(1e-4));
    CHECK(*em.rr == doctest::Approx(3.1111).epsilon(1e-4));

    const EffectMeasures zero = effect_measures(0.5, 0.0);
    CHECK(zero.rd == 0.5);
    CHECK(!zero.rr.has_value());

    CHECK_THROWS_AS(effect_measures(std::nan(""), 0.5), ValidationError);
}

TEST_CASE("sensitivity spec validation") {
    SensitivitySpec spec;
    spec.eta_grid = {};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.eta_grid = {0.0, 0.5, 0.5};
    CHECK_THROWS_AS(spec.validate(), ConfigError);  // not strictly increasing
    spec.eta_grid = {0.25, 0.5};
    CHECK_THROWS_AS(spec.validate(), ConfigError);  // linked mode needs the base case
    spec.eta_grid = {0.0, 0.5};
    CHECK_NOTHROW(spec.validate());

    spec.linkage = SensitivitySpec::Linkage::independent;
    spec.eta_pairs = {{0.3, 0.3}};
    CHECK_NOTHROW(spec.validate());
    const auto pairs = spec.resolved_pairs();
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0][0] == 0.3);
    CHECK(pairs[0][1] == 0.3);

    const auto grid = SensitivitySpec::default_grid();
    REQUIRE(grid.size() == 21);
    CHECK(grid.front() == 0.0);
    CHECK(grid.back() == 1.0);
    CHECK(grid[10] == doctest::Approx(0.5));
}

TEST_CASE("sweep evaluates the requested cells in linked and independent modes") {
    const ObservedDataset d = make_fixture12();
    const NuisanceBundle nb = fit_nuisances(d, known_e_saturated_config());

    SUBCASE("linked grid {0, ln 2} matches the hand fixture values") {
        SensitivitySpec spec;
        spec.eta_grid = {0.0, kLn2};
        const SensitivityCurve curve = sweep(d, nb, spec);
        // 2 grid points x 2 estimators x 8 estimands
        REQUIRE(curve.rows.size() == 32);

        auto find = [&](double eta1, Estimand est, EstimatorKind kind) {
            for (const EstimateRow& r : curve.rows) {
                if (r.eta1 == eta1 && r.estimand == est && r.estimator == kind) return r;
            }
            REQUIRE(false);
            return curve.rows[0];
        };
        CHECK(find(0.0, Estimand::psi1, EstimatorKind::om).value ==
              doctest::Approx(0.75).epsilon(1e-12));
        CHECK(find(kLn2, Estimand::psi1, EstimatorKind::om).value ==
              doctest::Approx(7.0 / 9.0).epsilon(1e-12));
        CHECK(find(kLn2, Estimand::phi1, EstimatorKind::om).value ==
              doctest::Approx(5.0 / 6.0).epsilon(1e-12));
        // Linked mode: arm 0 runs at -eta.
        const EstimateRow rd = find(kLn2, Estimand::rd_all, EstimatorKind::om);
        CHECK(rd.eta0 == -kLn2);
        CHECK(rd.value == doctest::Approx(psi_om(d, nb, 1, kLn2) - psi_om(d, nb, 0, -kLn2))
                              .epsilon(1e-12));
        // Base case rows agree across estimator kinds' entry points.
        CHECK(find(0.0, Estimand::psi1, EstimatorKind::aug).value ==
              doctest::Approx(psi_aug(d, nb, 1, 0.0)).epsilon(1e-13));
    }

    SUBCASE("independent mode uses the explicit pair for both arms") {
        SensitivitySpec spec;
        spec.linkage = SensitivitySpec::Linkage::independent;
        spec.eta_pairs = {{0.3, 0.3}};
        spec.estimators = {EstimatorKind::om};
        spec.estimands = {Estimand::rd_all};
        const SensitivityCurve curve = sweep(d, nb, spec);
        REQUIRE(curve.rows.size() == 1);
        CHECK(curve.rows[0].value ==
              doctest::Approx(psi_om(d, nb, 1, 0.3) - psi_om(d, nb, 0, 0.3)).epsilon(1e-13));
    }

    SUBCASE("psi_om is nondecreasing along an increasing linked grid") {
        SensitivitySpec spec;
        spec.eta_grid = SensitivitySpec::default_grid();
        spec.estimators = {EstimatorKind::om};
        spec.estimands = {Estimand::psi1};
        const SensitivityCurve curve = sweep(d, nb, spec);
        for (std::size_t i = 1; i < curve.rows.size(); ++i) {
            CHECK(curve.rows[i].value >= curve.rows[i - 1].value);
        }
    }
}

TEST_CASE("the tilt test hook shifts estimates and resets cleanly") {
    const ObservedDataset d = make_fixture12();
    const NuisanceBundle nb = fit_nuisances(d, known_e_saturated_config());
    const double base = psi_om(d, nb, 1, 0.0);
    detail::set_tilt_test_offset(0.05);
    const double corrupted = psi_om(d, nb, 1, 0.0);
    detail::set_tilt_test_offset(0.0);
    CHECK(corrupted != base);
    CHECK(psi_om(d, nb, 1, 0.0) == base);
}
