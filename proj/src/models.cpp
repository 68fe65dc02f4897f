#include "tiltwise/models.hpp"

#include <algorithm>
#include <cmath>

#include "tiltwise/errors.hpp"

namespace tiltwise {

KnownConstantModel::KnownConstantModel(double value) : value_(value) {
    if (!(value >= kEpsClip && value <= 1.0 - kEpsClip)) {
        throw ConfigError("known probability must lie inside [" + std::to_string(kEpsClip) +
                          ", 1 - " + std::to_string(kEpsClip) + "]");
    }
}

StratumTableModel::StratumTableModel(const Matrix& features,
                                     std::span<const std::int8_t> labels) {
    if (features.rows == 0) throw FitError("saturated fit: no rows");
    if (labels.size() != features.rows) throw FitError("saturated fit: label length mismatch");
    dim_ = features.cols;

    // Accumulate per-stratum tallies with a linear key scan; saturated models
    // only make sense for a small discrete support, so the scan beats sorting
    // the rows.
    std::vector<std::size_t> counts, ones;
    for (std::size_t i = 0; i < features.rows; ++i) {
        auto xi = features.row(i);
        std::size_t k = 0;
        for (; k < keys_.size(); ++k) {
            if (std::equal(keys_[k].begin(), keys_[k].end(), xi.begin())) break;
        }
        if (k == keys_.size()) {
            keys_.emplace_back(xi.begin(), xi.end());
            counts.push_back(0);
            ones.push_back(0);
        }
        ++counts[k];
        ones[k] += static_cast<std::size_t>(labels[i]);
    }

    std::vector<std::size_t> order(keys_.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(keys_[a].begin(), keys_[a].end(),
                                            keys_[b].begin(), keys_[b].end());
    });
    std::vector<std::vector<double>> sorted_keys;
    sorted_keys.reserve(order.size());
    props_.reserve(order.size());
    for (std::size_t k : order) {
        sorted_keys.push_back(std::move(keys_[k]));
        props_.push_back(static_cast<double>(ones[k]) / static_cast<double>(counts[k]));
    }
    keys_ = std::move(sorted_keys);
}

double StratumTableModel::predict(std::span<const double> x) const {
    if (x.size() != dim_) throw ValidationError("saturated predict: covariate length mismatch");
    auto it = std::lower_bound(keys_.begin(), keys_.end(), x,
                               [](const std::vector<double>& key, std::span<const double> q) {
                                   return std::lexicographical_compare(key.begin(), key.end(),
                                                                       q.begin(), q.end());
                               });
    if (it == keys_.end() || !std::equal(it->begin(), it->end(), x.begin())) {
        throw ValidationError("saturated predict: unseen covariate pattern");
    }
    return props_[static_cast<std::size_t>(it - keys_.begin())];
}

double predict_prob(const ProbabilityModel& m, std::span<const double> x) {
    return m.predict(x);
}

Matrix covariate_matrix(const ObservedDataset& d, std::span<const std::size_t> rows) {
    Matrix m(rows.size(), d.n_cov);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto xs = d.x(rows[r]);
        std::copy(xs.begin(), xs.end(), m.v.begin() + static_cast<std::ptrdiff_t>(r * d.n_cov));
    }
    return m;
}

namespace {

struct FitRequest {
    const char* name;  // for error and warning messages
    Matrix features;
    std::vector<std::int8_t> labels;
};

ModelPtr fit_one(const FitRequest& req, const ModelChoice& choice,
                 const std::vector<double>* warm_coef,
                 std::vector<std::string>& warnings) {
    switch (choice.type) {
        case ModelChoice::Type::known:
            return std::make_shared<KnownConstantModel>(choice.known_value);
        case ModelChoice::Type::saturated:
            return std::make_shared<StratumTableModel>(req.features, req.labels);
        case ModelChoice::Type::forest: {
            ForestFit fit = fit_forest(req.features, req.labels, choice.forest);
            return std::make_shared<ForestModel>(std::move(fit), req.features.cols);
        }
        case ModelChoice::Type::logistic: {
            LogisticOptions opt = choice.logistic;
            if (warm_coef && warm_coef->size() == req.features.cols + 1) opt.init = *warm_coef;
            try {
                LogisticFit fit = fit_logistic(req.features, req.labels, opt);
                return std::make_shared<LogisticModel>(std::move(fit), req.features.cols);
            } catch (const SeparationError&) {
                LogisticOptions retry = opt;
                retry.ridge = 1e-6;
                retry.init.clear();
                LogisticFit fit = fit_logistic(req.features, req.labels, retry);
                warnings.push_back(std::string(req.name) +
                                   ": separation at ridge=0, refit with ridge=1e-6");
                return std::make_shared<LogisticModel>(std::move(fit), req.features.cols);
            }
        }
    }
    throw ConfigError("unknown model type");
}

const std::vector<double>* logistic_coefs(const ModelPtr& m) {
    if (const auto* lm = dynamic_cast<const LogisticModel*>(m.get())) {
        return &lm->fit().coefficients;
    }
    return nullptr;
}

}  // namespace

NuisanceBundle fit_nuisances(const ObservedDataset& d, const NuisanceConfig& config,
                             const NuisanceBundle* warm) {
    d.validate();
    NuisanceBundle nb;

    std::vector<std::size_t> all(d.n), trial, arm_rows[2];
    for (std::size_t i = 0; i < d.n; ++i) {
        all[i] = i;
        if (d.s[i] == 1) {
            trial.push_back(i);
            arm_rows[d.a[i] == 1 ? 1 : 0].push_back(i);
        }
    }
    if (arm_rows[1].empty()) throw FitError("no randomized rows in arm 1");
    if (arm_rows[0].empty()) throw FitError("no randomized rows in arm 0");

    // Participation model on all rows, label s.
    {
        FitRequest req{"p-model", covariate_matrix(d, all), {}};
        req.labels.assign(d.s.begin(), d.s.end());
        nb.p = fit_one(req, config.p, warm ? logistic_coefs(warm->p) : nullptr, nb.warnings);
    }

    // Treatment model: known design probability, or fit on trial rows.
    if (config.e.type == ModelChoice::Type::known) {
        nb.e[1] = std::make_shared<KnownConstantModel>(config.e.known_value);
        nb.e[0] = std::make_shared<KnownConstantModel>(1.0 - config.e.known_value);
    } else {
        FitRequest req{"e-model", covariate_matrix(d, trial), {}};
        req.labels.reserve(trial.size());
        for (std::size_t i : trial) req.labels.push_back(d.a[i]);
        nb.e[1] = fit_one(req, config.e, warm ? logistic_coefs(warm->e[1]) : nullptr, nb.warnings);
        nb.e[0] = std::make_shared<ComplementModel>(nb.e[1]);
    }

    // Outcome models per arm on the matching trial rows, label y.
    for (int arm : {1, 0}) {
        const auto& rows = arm_rows[arm];
        FitRequest req{arm == 1 ? "g-model arm 1" : "g-model arm 0",
                       covariate_matrix(d, rows), {}};
        req.labels.reserve(rows.size());
        for (std::size_t i : rows) req.labels.push_back(d.y[i]);
        nb.g[arm] = fit_one(req, config.g,
                            warm ? logistic_coefs(warm->g[arm]) : nullptr, nb.warnings);
    }
    return nb;
}

}  // namespace tiltwise
