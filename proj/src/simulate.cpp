#include "tiltwise/simulate.hpp"

#include <cmath>
#include <string>

#include "tiltwise/errors.hpp"
#include "tiltwise/estimators.hpp"
#include "tiltwise/rng.hpp"

namespace tiltwise {

namespace {

bool is_prob(double v) { return v >= 0.0 && v <= 1.0; }

std::vector<double> cumulative_mass(const DgpSpec& spec) {
    std::vector<double> cum(spec.support.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < spec.support.size(); ++k) {
        acc += spec.support[k].prob;
        cum[k] = acc;
    }
    return cum;
}

}  // namespace

void DgpSpec::validate() const {
    if (support.empty()) throw ConfigError("dgp: support is empty");
    if (n == 0) throw ConfigError("dgp: empty dataset (n = 0)");
    const std::size_t dim = support[0].x.size();
    double mass = 0.0;
    for (const DgpPoint& pt : support) {
        if (pt.x.size() != dim) throw ConfigError("dgp: support points have unequal dimension");
        if (!is_prob(pt.prob) || !is_prob(pt.p) || !is_prob(pt.e1) || !is_prob(pt.g1) ||
            !is_prob(pt.g0)) {
            throw ConfigError("dgp: probabilities must lie in [0,1]");
        }
        if (pt.prob > 0.0) {
            // positivity of participation and treatment on the support
            if (!(pt.p > 0.0)) throw ConfigError("dgp: p(x) must be positive on the support");
            if (!(pt.e1 > 0.0 && pt.e1 < 1.0)) {
                throw ConfigError("dgp: e1(x) must lie strictly inside (0,1) on the support");
            }
        }
        mass += pt.prob;
    }
    if (std::abs(mass - 1.0) > 1e-9) {
        throw ConfigError("dgp: support probabilities sum to " + std::to_string(mass) +
                          ", expected 1");
    }
    if (!covariate_names.empty() && covariate_names.size() != dim) {
        throw ConfigError("dgp: covariate_names length does not match support dimension");
    }
}

ObservedDataset generate(const DgpSpec& spec) {
    spec.validate();
    const std::vector<double> cum = cumulative_mass(spec);
    const std::size_t dim = spec.support[0].x.size();

    ObservedDataset d;
    d.n_cov = dim;
    if (!spec.covariate_names.empty()) {
        d.covariate_names = spec.covariate_names;
    } else {
        for (std::size_t j = 0; j < dim; ++j) d.covariate_names.push_back("x" + std::to_string(j + 1));
    }
    d.x_flat.reserve(spec.n * dim);
    d.s.reserve(spec.n);
    d.a.reserve(spec.n);
    d.y.reserve(spec.n);

    for (std::size_t i = 0; i < spec.n; ++i) {
        SplitMix64 rng = substream(spec.seed, i, rng_purpose::dataset_row);
        const DgpPoint& pt = spec.support[rng.categorical(cum)];
        const bool trial = rng.bernoulli(pt.p);
        int a = -1, y = -1;
        if (trial) {
            a = rng.bernoulli(pt.e1) ? 1 : 0;
            y = rng.bernoulli(a == 1 ? pt.g1 : pt.g0) ? 1 : 0;
        }
        d.push_row(pt.x, trial ? 1 : 0, a, y);
    }
    d.validate();
    return d;
}

OracleTruth oracle(const DgpSpec& spec) {
    spec.validate();
    OracleTruth t;
    double mass_s0 = 0.0;
    double phi1_num = 0.0, phi0_num = 0.0;
    for (const DgpPoint& pt : spec.support) {
        const double tilt1 = tilted_prob(pt.g1, spec.eta_star1);
        const double tilt0 = tilted_prob(pt.g0, spec.eta_star0);
        t.psi1 += pt.prob * (pt.p * pt.g1 + (1.0 - pt.p) * tilt1);
        t.psi0 += pt.prob * (pt.p * pt.g0 + (1.0 - pt.p) * tilt0);
        const double w0 = pt.prob * (1.0 - pt.p);
        mass_s0 += w0;
        phi1_num += w0 * tilt1;
        phi0_num += w0 * tilt0;
    }
    if (mass_s0 <= 0.0) {
        throw EstimandUndefinedError(
            "phi is undefined: the data-generating process has no non-randomized mass");
    }
    t.phi1 = phi1_num / mass_s0;
    t.phi0 = phi0_num / mass_s0;

    const EffectMeasures all = effect_measures(t.psi1, t.psi0);
    t.rd_all = all.rd;
    t.rr_all = all.rr;
    const EffectMeasures s0 = effect_measures(t.phi1, t.phi0);
    t.rd_s0 = s0.rd;
    t.rr_s0 = s0.rr;
    return t;
}

EquivalenceReport check_selection_equivalence(const DgpSpec& spec, std::size_t n_probe) {
    spec.validate();
    if (n_probe == 0) throw ConfigError("check_selection_equivalence: n_probe must be positive");
    const std::vector<double> cum = cumulative_mass(spec);
    const std::size_t n_pts = spec.support.size();

    // counts[point][arm][ya][s]: the probe draws latent potential outcomes for
    // every row from the law matching its realized S, so Pr[S=0 | X, Y^a] is
    // directly estimable. Latent draws never leave this function.
    std::vector<std::size_t> counts(n_pts * 2 * 2 * 2, 0);
    auto idx = [n_pts](std::size_t pt, int arm, int ya, int s) {
        return ((pt * 2 + static_cast<std::size_t>(arm)) * 2 + static_cast<std::size_t>(ya)) * 2 +
               static_cast<std::size_t>(s);
    };

    for (std::size_t i = 0; i < n_probe; ++i) {
        SplitMix64 rng = substream(spec.seed, i, rng_purpose::probe_row);
        const std::size_t k = rng.categorical(cum);
        const DgpPoint& pt = spec.support[k];
        const bool trial = rng.bernoulli(pt.p);
        const double p1 = trial ? pt.g1 : tilted_prob(pt.g1, spec.eta_star1);
        const double p0 = trial ? pt.g0 : tilted_prob(pt.g0, spec.eta_star0);
        const int y1 = rng.bernoulli(p1) ? 1 : 0;
        const int y0 = rng.bernoulli(p0) ? 1 : 0;
        ++counts[idx(k, 1, y1, trial ? 1 : 0)];
        ++counts[idx(k, 0, y0, trial ? 1 : 0)];
    }

    EquivalenceReport report;
    report.pass = true;
    for (std::size_t k = 0; k < n_pts; ++k) {
        const DgpPoint& pt = spec.support[k];
        if (!(pt.prob > 0.0)) continue;
        for (int arm : {1, 0}) {
            // The odds difference is only defined where both outcome levels
            // occur in both selection states.
            const double g = arm == 1 ? pt.g1 : pt.g0;
            if (!(g > 0.0 && g < 1.0) || !(pt.p < 1.0)) continue;

            EquivalenceStratum st;
            st.support_index = k;
            st.arm = arm;
            st.eta_star = arm == 1 ? spec.eta_star1 : spec.eta_star0;

            const std::size_t s0_y1 = counts[idx(k, arm, 1, 0)];
            const std::size_t s1_y1 = counts[idx(k, arm, 1, 1)];
            const std::size_t s0_y0 = counts[idx(k, arm, 0, 0)];
            const std::size_t s1_y0 = counts[idx(k, arm, 0, 1)];
            st.n_y1 = s0_y1 + s1_y1;
            st.n_y0 = s0_y0 + s1_y0;
            if (s0_y1 == 0 || s1_y1 == 0 || s0_y0 == 0 || s1_y0 == 0) {
                // Empty cell despite positive expected mass: the probe is too
                // small to certify this stratum.
                st.logodds_diff = std::nan("");
                st.se = std::nan("");
                st.pass = false;
                report.pass = false;
                report.strata.push_back(st);
                continue;
            }
            const double p_y1 = static_cast<double>(s0_y1) / static_cast<double>(st.n_y1);
            const double p_y0 = static_cast<double>(s0_y0) / static_cast<double>(st.n_y0);
            st.logodds_diff = std::log(p_y1 / (1.0 - p_y1)) - std::log(p_y0 / (1.0 - p_y0));
            // Delta-method SE of a difference of empirical logits.
            st.se = std::sqrt(1.0 / (static_cast<double>(st.n_y1) * p_y1 * (1.0 - p_y1)) +
                              1.0 / (static_cast<double>(st.n_y0) * p_y0 * (1.0 - p_y0)));
            st.pass = std::abs(st.logodds_diff - st.eta_star) <= 4.0 * st.se;
            report.pass = report.pass && st.pass;
            report.strata.push_back(st);
        }
    }
    return report;
}

}  // namespace tiltwise
