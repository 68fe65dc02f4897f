#include "tiltwise/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "tiltwise/errors.hpp"

namespace tiltwise {

namespace detail {
namespace {
double g_tilt_test_offset = 0.0;
}
void set_tilt_test_offset(double offset) { g_tilt_test_offset = offset; }
double tilt_test_offset() { return g_tilt_test_offset; }
}  // namespace detail

namespace {

// Per-row tilt quantities for a fixed eta, computed in the direction that
// avoids overflow: c = tilted probability, r1/r0 = e^(eta*y) divided by the
// tilt normalizer e^eta*g + (1-g), for y = 1/0.
struct TiltTerms {
    double c;
    double r1;
    double r0;
};

struct TiltContext {
    double eta;
    double damp;  // exp(-|eta|)

    explicit TiltContext(double eta_) : eta(eta_), damp(std::exp(-std::abs(eta_))) {}

    TiltTerms terms(double g) const {
        TiltTerms t{};
        if (eta == 0.0) {
            const double denom = g + (1.0 - g);
            t.c = g;
            t.r1 = 1.0 / denom;
            t.r0 = t.r1;
        } else if (eta > 0.0) {
            const double denom = g + damp * (1.0 - g);
            t.c = g / denom;
            t.r1 = 1.0 / denom;
            t.r0 = damp / denom;
        } else {
            const double denom = damp * g + (1.0 - g);
            t.c = damp * g / denom;
            t.r1 = damp / denom;
            t.r0 = 1.0 / denom;
        }
        if (detail::g_tilt_test_offset != 0.0) {
            t.c = std::clamp(t.c + detail::g_tilt_test_offset, 0.0, 1.0);
        }
        return t;
    }
};

void check_arm(int arm) {
    if (arm != 0 && arm != 1) throw ConfigError("arm must be 0 or 1");
}

}  // namespace

double tilted_prob(double g, double eta) {
    double c;
    if (g <= 0.0) {
        c = 0.0;
    } else if (g >= 1.0) {
        c = 1.0;
    } else if (eta == 0.0) {
        c = g;
    } else if (eta > 0.0) {
        c = g / (g + std::exp(-eta) * (1.0 - g));
    } else {
        const double e = std::exp(eta);
        c = e * g / (e * g + (1.0 - g));
    }
    if (detail::g_tilt_test_offset != 0.0) {
        c = std::clamp(c + detail::g_tilt_test_offset, 0.0, 1.0);
    }
    return c;
}

NuisanceValues NuisanceValues::compute(const ObservedDataset& d, const NuisanceBundle& nb) {
    NuisanceValues nv;
    nv.p.resize(d.n);
    nv.e1.resize(d.n);
    nv.g1.resize(d.n);
    nv.g0.resize(d.n);

    // Datasets with a small discrete support dominate the resampling loops;
    // deduplicating covariate patterns makes the predict cost per replicate
    // O(#patterns) instead of O(n). Falls back to per-row predicts once the
    // pattern count stops looking discrete.
    constexpr std::size_t kMaxPatterns = 512;
    std::vector<std::span<const double>> patterns;
    std::vector<std::size_t> pattern_of(d.n);
    bool discrete = true;
    for (std::size_t i = 0; i < d.n && discrete; ++i) {
        auto xi = d.x(i);
        std::size_t k = 0;
        for (; k < patterns.size(); ++k) {
            if (std::equal(patterns[k].begin(), patterns[k].end(), xi.begin())) break;
        }
        if (k == patterns.size()) {
            if (patterns.size() >= kMaxPatterns) {
                discrete = false;
                break;
            }
            patterns.push_back(xi);
        }
        pattern_of[i] = k;
    }

    if (discrete) {
        std::vector<double> pp(patterns.size()), pe(patterns.size()), pg1(patterns.size()),
            pg0(patterns.size());
        for (std::size_t k = 0; k < patterns.size(); ++k) {
            pp[k] = nb.p->predict(patterns[k]);
            pe[k] = nb.e[1]->predict(patterns[k]);
            pg1[k] = nb.g[1]->predict(patterns[k]);
            pg0[k] = nb.g[0]->predict(patterns[k]);
        }
        for (std::size_t i = 0; i < d.n; ++i) {
            const std::size_t k = pattern_of[i];
            nv.p[i] = pp[k];
            nv.e1[i] = pe[k];
            nv.g1[i] = pg1[k];
            nv.g0[i] = pg0[k];
        }
    } else {
        for (std::size_t i = 0; i < d.n; ++i) {
            auto xi = d.x(i);
            nv.p[i] = nb.p->predict(xi);
            nv.e1[i] = nb.e[1]->predict(xi);
            nv.g1[i] = nb.g[1]->predict(xi);
            nv.g0[i] = nb.g[0]->predict(xi);
        }
    }
    return nv;
}

double psi_om(const ObservedDataset& d, const NuisanceValues& nv, int arm, double eta) {
    check_arm(arm);
    const TiltContext tc(eta);
    double sum = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) {
        const double g = nv.g(arm, i);
        sum += d.s[i] == 1 ? g : tc.terms(g).c;
    }
    return sum / static_cast<double>(d.n);
}

double phi_om(const ObservedDataset& d, const NuisanceValues& nv, int arm, double eta) {
    check_arm(arm);
    const TiltContext tc(eta);
    double sum = 0.0;
    std::size_t n0 = 0;
    for (std::size_t i = 0; i < d.n; ++i) {
        if (d.s[i] == 1) continue;
        sum += tc.terms(nv.g(arm, i)).c;
        ++n0;
    }
    if (n0 == 0) {
        throw EstimandUndefinedError("phi is undefined: no non-randomized (s=0) rows");
    }
    return sum / static_cast<double>(n0);
}

namespace {

void warn_large_weight(double w, int arm, double eta, std::vector<std::string>* warnings,
                       bool* warned) {
    if (warnings != nullptr && !*warned && std::abs(w) > kWeightWarnThreshold) {
        warnings->push_back("augmented weight above " + std::to_string(kWeightWarnThreshold) +
                            " for arm " + std::to_string(arm) + " at eta " +
                            std::to_string(eta) + " (possible practical positivity violation)");
        *warned = true;
    }
}

}  // namespace

double psi_aug(const ObservedDataset& d, const NuisanceValues& nv, int arm, double eta,
               std::vector<std::string>* warnings) {
    check_arm(arm);
    const TiltContext tc(eta);
    bool warned = false;
    double sum = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) {
        const double g = nv.g(arm, i);
        if (d.s[i] == 1) {
            double term = g;
            if (d.a[i] == arm) {
                const double e = nv.e(arm, i);
                const double yv = static_cast<double>(d.y[i]);
                term += (yv - g) / e;
                const TiltTerms t = tc.terms(g);
                const double ratio = d.y[i] == 1 ? t.r1 : t.r0;
                const double w = (1.0 - nv.p[i]) * ratio / (nv.p[i] * e);
                warn_large_weight(w, arm, eta, warnings, &warned);
                term += w * (yv - t.c);
            }
            sum += term;
        } else {
            sum += tc.terms(g).c;
        }
    }
    return sum / static_cast<double>(d.n);
}

double phi_aug(const ObservedDataset& d, const NuisanceValues& nv, int arm, double eta,
               std::vector<std::string>* warnings) {
    check_arm(arm);
    const TiltContext tc(eta);
    bool warned = false;
    double sum = 0.0;
    std::size_t n0 = 0;
    for (std::size_t i = 0; i < d.n; ++i) {
        const double g = nv.g(arm, i);
        if (d.s[i] == 1) {
            if (d.a[i] != arm) continue;
            const TiltTerms t = tc.terms(g);
            const double ratio = d.y[i] == 1 ? t.r1 : t.r0;
            const double w = (1.0 - nv.p[i]) * ratio / (nv.p[i] * nv.e(arm, i));
            warn_large_weight(w, arm, eta, warnings, &warned);
            sum += w * (static_cast<double>(d.y[i]) - t.c);
        } else {
            sum += tc.terms(g).c;
            ++n0;
        }
    }
    if (n0 == 0) {
        throw EstimandUndefinedError("phi is undefined: no non-randomized (s=0) rows");
    }
    return sum / static_cast<double>(n0);
}

double psi_om(const ObservedDataset& d, const NuisanceBundle& nb, int arm, double eta) {
    return psi_om(d, NuisanceValues::compute(d, nb), arm, eta);
}
double phi_om(const ObservedDataset& d, const NuisanceBundle& nb, int arm, double eta) {
    return phi_om(d, NuisanceValues::compute(d, nb), arm, eta);
}
double psi_aug(const ObservedDataset& d, const NuisanceBundle& nb, int arm, double eta,
               std::vector<std::string>* warnings) {
    return psi_aug(d, NuisanceValues::compute(d, nb), arm, eta, warnings);
}
double phi_aug(const ObservedDataset& d, const NuisanceBundle& nb, int arm, double eta,
               std::vector<std::string>* warnings) {
    return phi_aug(d, NuisanceValues::compute(d, nb), arm, eta, warnings);
}

namespace {

struct ArmValues {
    double psi1 = 0.0;
    double psi0 = 0.0;
    double phi1 = 0.0;
    double phi0 = 0.0;
};

// One-pass evaluation of (psi1, psi0, phi1, phi0) for sweep: identical
// per-row terms and accumulation order as the single-quantity functions.
ArmValues om_bulk(const ObservedDataset& d, const NuisanceValues& nv, double eta1,
                  double eta0, bool need_psi, bool need_phi) {
    const TiltContext tc1(eta1), tc0(eta0);
    double psi1 = 0, psi0 = 0, phi1 = 0, phi0 = 0;
    std::size_t n0 = 0;
    for (std::size_t i = 0; i < d.n; ++i) {
        if (d.s[i] == 1) {
            psi1 += nv.g1[i];
            psi0 += nv.g0[i];
        } else {
            const double c1 = tc1.terms(nv.g1[i]).c;
            const double c0 = tc0.terms(nv.g0[i]).c;
            psi1 += c1;
            psi0 += c0;
            phi1 += c1;
            phi0 += c0;
            ++n0;
        }
    }
    if (need_phi && n0 == 0) {
        throw EstimandUndefinedError("phi is undefined: no non-randomized (s=0) rows");
    }
    ArmValues out;
    if (need_psi) {
        out.psi1 = psi1 / static_cast<double>(d.n);
        out.psi0 = psi0 / static_cast<double>(d.n);
    }
    if (need_phi) {
        out.phi1 = phi1 / static_cast<double>(n0);
        out.phi0 = phi0 / static_cast<double>(n0);
    }
    return out;
}

ArmValues aug_bulk(const ObservedDataset& d, const NuisanceValues& nv, double eta1,
                   double eta0, bool need_psi, bool need_phi,
                   std::vector<std::string>* warnings) {
    const TiltContext tc1(eta1), tc0(eta0);
    bool warned1 = false, warned0 = false;
    double psi1 = 0, psi0 = 0, phi1 = 0, phi0 = 0;
    std::size_t n0 = 0;
    for (std::size_t i = 0; i < d.n; ++i) {
        if (d.s[i] == 1) {
            const int arm = d.a[i];
            const double yv = static_cast<double>(d.y[i]);
            if (arm == 1) {
                const TiltTerms t = tc1.terms(nv.g1[i]);
                const double e = nv.e1[i];
                const double w = (1.0 - nv.p[i]) * (d.y[i] == 1 ? t.r1 : t.r0) / (nv.p[i] * e);
                warn_large_weight(w, 1, eta1, warnings, &warned1);
                const double corr = w * (yv - t.c);
                psi1 += nv.g1[i] + (yv - nv.g1[i]) / e + corr;
                psi0 += nv.g0[i];
                phi1 += corr;
            } else {
                const TiltTerms t = tc0.terms(nv.g0[i]);
                const double e = 1.0 - nv.e1[i];
                const double w = (1.0 - nv.p[i]) * (d.y[i] == 1 ? t.r1 : t.r0) / (nv.p[i] * e);
                warn_large_weight(w, 0, eta0, warnings, &warned0);
                const double corr = w * (yv - t.c);
                psi0 += nv.g0[i] + (yv - nv.g0[i]) / e + corr;
                psi1 += nv.g1[i];
                phi0 += corr;
            }
        } else {
            const double c1 = tc1.terms(nv.g1[i]).c;
            const double c0 = tc0.terms(nv.g0[i]).c;
            psi1 += c1;
            psi0 += c0;
            phi1 += c1;
            phi0 += c0;
            ++n0;
        }
    }
    if (need_phi && n0 == 0) {
        throw EstimandUndefinedError("phi is undefined: no non-randomized (s=0) rows");
    }
    ArmValues out;
    if (need_psi) {
        out.psi1 = psi1 / static_cast<double>(d.n);
        out.psi0 = psi0 / static_cast<double>(d.n);
    }
    if (need_phi) {
        out.phi1 = phi1 / static_cast<double>(n0);
        out.phi0 = phi0 / static_cast<double>(n0);
    }
    return out;
}

}  // namespace

EffectMeasures effect_measures(double v1, double v0) {
    if (!std::isfinite(v1) || !std::isfinite(v0)) {
        throw ValidationError("effect_measures: inputs must be finite");
    }
    EffectMeasures em;
    em.rd = v1 - v0;
    if (v0 >= kRelativeRiskFloor) em.rr = v1 / v0;
    return em;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Estimand e) {
    switch (e) {
        case Estimand::psi1: return "psi1";
        case Estimand::psi0: return "psi0";
        case Estimand::phi1: return "phi1";
        case Estimand::phi0: return "phi0";
        case Estimand::rd_all: return "rd_all";
        case Estimand::rr_all: return "rr_all";
        case Estimand::rd_s0: return "rd_s0";
        case Estimand::rr_s0: return "rr_s0";
    }
    return "?";
}

std::string_view to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::om: return "om";
        case EstimatorKind::aug: return "aug";
        case EstimatorKind::dr: return "dr";
    }
    return "?";
}

std::optional<Estimand> estimand_from_string(std::string_view s) {
    for (Estimand e : kAllEstimands) {
        if (to_string(e) == s) return e;
    }
    return std::nullopt;
}

std::optional<EstimatorKind> estimator_from_string(std::string_view s) {
    for (EstimatorKind k : {EstimatorKind::om, EstimatorKind::aug, EstimatorKind::dr}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

std::vector<double> SensitivitySpec::default_grid() {
    std::vector<double> g(21);
    for (int i = 0; i <= 20; ++i) g[static_cast<std::size_t>(i)] = i * 0.05;
    g[0] = 0.0;
    g[20] = 1.0;
    return g;
}

void SensitivitySpec::validate() const {
    if (linkage == Linkage::linked) {
        if (eta_grid.empty()) throw ConfigError("sensitivity grid is empty");
        bool has_zero = false;
        for (std::size_t i = 0; i < eta_grid.size(); ++i) {
            if (eta_grid[i] == 0.0) has_zero = true;
            if (i > 0 && !(eta_grid[i] > eta_grid[i - 1])) {
                throw ConfigError("sensitivity grid must be strictly increasing");
            }
        }
        if (!has_zero) {
            throw ConfigError("linked-mode grid must contain 0 for base-case reporting");
        }
    } else {
        if (eta_pairs.empty()) throw ConfigError("sensitivity grid is empty");
    }
    if (estimators.empty()) throw ConfigError("no estimators selected");
    if (estimands.empty()) throw ConfigError("no estimands selected");
    for (EstimatorKind k : estimators) {
        if (k == EstimatorKind::dr) {
            throw ConfigError("dr rows are produced by the selection module, not sweep()");
        }
    }
}

std::vector<std::array<double, 2>> SensitivitySpec::resolved_pairs() const {
    if (linkage == Linkage::independent) return eta_pairs;
    std::vector<std::array<double, 2>> pairs;
    pairs.reserve(eta_grid.size());
    for (double eta : eta_grid) pairs.push_back({eta, -eta});
    return pairs;
}

SensitivityCurve sweep(const ObservedDataset& d, const NuisanceBundle& nb,
                       const SensitivitySpec& spec, std::vector<std::string>* warnings) {
    spec.validate();
    const NuisanceValues nv = NuisanceValues::compute(d, nb);

    bool need_psi = false, need_phi = false;
    for (Estimand e : spec.estimands) {
        switch (e) {
            case Estimand::psi1:
            case Estimand::psi0:
            case Estimand::rd_all:
            case Estimand::rr_all: need_psi = true; break;
            default: need_phi = true; break;
        }
    }

    SensitivityCurve curve;
    for (const auto& pair : spec.resolved_pairs()) {
        const double eta1 = pair[0];
        const double eta0 = pair[1];
        for (EstimatorKind kind : spec.estimators) {
            const ArmValues vals =
                kind == EstimatorKind::om
                    ? om_bulk(d, nv, eta1, eta0, need_psi, need_phi)
                    : aug_bulk(d, nv, eta1, eta0, need_psi, need_phi, warnings);
            const double psi1 = vals.psi1, psi0 = vals.psi0;
            const double phi1 = vals.phi1, phi0 = vals.phi0;
            for (Estimand est : spec.estimands) {
                EstimateRow row;
                row.eta1 = eta1;
                row.eta0 = eta0;
                row.estimand = est;
                row.estimator = kind;
                switch (est) {
                    case Estimand::psi1: row.value = psi1; break;
                    case Estimand::psi0: row.value = psi0; break;
                    case Estimand::phi1: row.value = phi1; break;
                    case Estimand::phi0: row.value = phi0; break;
                    case Estimand::rd_all: row.value = effect_measures(psi1, psi0).rd; break;
                    case Estimand::rr_all: {
                        auto rr = effect_measures(psi1, psi0).rr;
                        row.value = rr ? *rr : std::nan("");
                        break;
                    }
                    case Estimand::rd_s0: row.value = effect_measures(phi1, phi0).rd; break;
                    case Estimand::rr_s0: {
                        auto rr = effect_measures(phi1, phi0).rr;
                        row.value = rr ? *rr : std::nan("");
                        break;
                    }
                }
                curve.rows.push_back(row);
            }
        }
    }
    return curve;
}

}  // namespace tiltwise
