#include "tiltwise/config.hpp"

#include <fstream>

#include <json.hpp>

#include "tiltwise/errors.hpp"

namespace tiltwise {

using nlohmann::json;

namespace {

ModelChoice parse_model_choice(const json& j, const std::string& name) {
    ModelChoice mc;
    if (!j.is_object()) throw ConfigError("models." + name + " must be an object");
    const std::string type = j.value("type", "logistic");
    if (type == "logistic") {
        mc.type = ModelChoice::Type::logistic;
    } else if (type == "forest") {
        mc.type = ModelChoice::Type::forest;
    } else if (type == "known") {
        mc.type = ModelChoice::Type::known;
    } else if (type == "saturated") {
        mc.type = ModelChoice::Type::saturated;
    } else {
        throw ConfigError("models." + name + ".type must be logistic|forest|known|saturated");
    }
    if (mc.type == ModelChoice::Type::known) {
        if (!j.contains("value")) {
            throw ConfigError("models." + name + ": known model needs a 'value'");
        }
        mc.known_value = j.at("value").get<double>();
    }
    mc.logistic.ridge = j.value("ridge", 0.0);
    mc.logistic.tol_grad = j.value("tol_grad", 1e-8);
    mc.logistic.max_iter = j.value("max_iter", 100);
    mc.forest.n_trees = j.value("n_trees", 2000);
    mc.forest.mtry = j.value("mtry", 4);
    mc.forest.min_node = j.value("min_node", 1);
    mc.forest.seed = j.value("seed", std::uint64_t{0});
    return mc;
}

SensitivitySpec parse_sensitivity(const json& j) {
    SensitivitySpec spec;
    spec.eta_grid = SensitivitySpec::default_grid();
    if (j.is_null()) return spec;
    const std::string linkage = j.value("linkage", "linked");
    if (linkage == "linked") {
        spec.linkage = SensitivitySpec::Linkage::linked;
        if (j.contains("eta_grid")) {
            spec.eta_grid = j.at("eta_grid").get<std::vector<double>>();
        }
    } else if (linkage == "independent") {
        spec.linkage = SensitivitySpec::Linkage::independent;
        if (!j.contains("eta_pairs")) {
            throw ConfigError("sensitivity: independent linkage needs 'eta_pairs'");
        }
        for (const auto& pair : j.at("eta_pairs")) {
            if (!pair.is_array() || pair.size() != 2) {
                throw ConfigError("sensitivity.eta_pairs entries must be [eta1, eta0]");
            }
            spec.eta_pairs.push_back({pair[0].get<double>(), pair[1].get<double>()});
        }
    } else {
        throw ConfigError("sensitivity.linkage must be linked|independent");
    }
    if (j.contains("estimators")) {
        spec.estimators.clear();
        for (const auto& s : j.at("estimators")) {
            auto k = estimator_from_string(s.get<std::string>());
            if (!k || *k == EstimatorKind::dr) {
                throw ConfigError("sensitivity.estimators entries must be om|aug "
                                  "(dr is enabled by the top-level 'dr' flag)");
            }
            spec.estimators.push_back(*k);
        }
    }
    if (j.contains("estimands")) {
        spec.estimands.clear();
        for (const auto& s : j.at("estimands")) {
            auto e = estimand_from_string(s.get<std::string>());
            if (!e) throw ConfigError("unknown estimand '" + s.get<std::string>() + "'");
            spec.estimands.push_back(*e);
        }
    }
    return spec;
}

InferencePlan parse_inference(const json& j) {
    InferencePlan plan;
    if (j.is_null()) return plan;
    const std::string ci = j.value("ci", "jackknife");
    if (ci == "none") plan.ci = InferencePlan::Ci::none;
    else if (ci == "jackknife") plan.ci = InferencePlan::Ci::jackknife;
    else if (ci == "bootstrap") plan.ci = InferencePlan::Ci::bootstrap;
    else if (ci == "both") plan.ci = InferencePlan::Ci::both;
    else throw ConfigError("inference.ci must be none|jackknife|bootstrap|both");
    plan.boot_reps = j.value("boot_reps", 1000);
    plan.seed = j.value("seed", std::uint64_t{0});
    plan.level = j.value("level", 0.95);
    plan.stratified_by_s = j.value("stratify_by_s", false);
    if (plan.boot_reps < 2) throw ConfigError("inference.boot_reps must be >= 2");
    if (!(plan.level > 0.0 && plan.level < 1.0)) {
        throw ConfigError("inference.level must lie strictly inside (0,1)");
    }
    return plan;
}

DgpSpec parse_dgp(const json& j) {
    DgpSpec spec;
    if (!j.contains("support") || !j.at("support").is_array()) {
        throw ConfigError("dgp.support must be an array of support points");
    }
    for (const auto& pt : j.at("support")) {
        DgpPoint dp;
        dp.x = pt.at("x").get<std::vector<double>>();
        dp.prob = pt.at("prob").get<double>();
        dp.p = pt.at("p").get<double>();
        dp.e1 = pt.at("e1").get<double>();
        dp.g1 = pt.at("g1").get<double>();
        dp.g0 = pt.at("g0").get<double>();
        spec.support.push_back(std::move(dp));
    }
    if (j.contains("eta_star")) {
        const auto& es = j.at("eta_star");
        if (!es.is_array() || es.size() != 2) {
            throw ConfigError("dgp.eta_star must be [eta1, eta0]");
        }
        spec.eta_star1 = es[0].get<double>();
        spec.eta_star0 = es[1].get<double>();
    }
    spec.n = j.value("n", std::size_t{0});
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("covariate_names")) {
        spec.covariate_names = j.at("covariate_names").get<std::vector<std::string>>();
    }
    spec.validate();
    return spec;
}

}  // namespace

RunConfig default_config() {
    RunConfig cfg;
    cfg.sensitivity.eta_grid = SensitivitySpec::default_grid();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("config '" + path + "': " + e.what());
    }

    RunConfig cfg = default_config();
    cfg.config_path = path;
    cfg.data_path = j.value("data", "");
    cfg.out_dir = j.value("out", ".");

    if (j.contains("schema")) {
        const auto& s = j.at("schema");
        cfg.schema.covariates = s.value("covariates", std::vector<std::string>{});
        cfg.schema.one_hot = s.value("one_hot", std::vector<std::string>{});
        cfg.schema.s = s.value("s", "s");
        cfg.schema.a = s.value("a", "a");
        cfg.schema.y = s.value("y", "y");
    }
    if (j.contains("models")) {
        const auto& m = j.at("models");
        if (m.contains("p")) cfg.models.p = parse_model_choice(m.at("p"), "p");
        if (m.contains("e")) cfg.models.e = parse_model_choice(m.at("e"), "e");
        if (m.contains("g")) cfg.models.g = parse_model_choice(m.at("g"), "g");
    }
    cfg.sensitivity = parse_sensitivity(j.contains("sensitivity") ? j.at("sensitivity") : json());
    cfg.dr = j.value("dr", false);
    cfg.inference = parse_inference(j.contains("inference") ? j.at("inference") : json());
    cfg.plot = j.value("plot", false);
    cfg.threads = j.value("threads", 0u);
    if (j.contains("dgp")) {
        cfg.dgp = parse_dgp(j.at("dgp"));
        cfg.has_dgp = true;
    }
    return cfg;
}

namespace {
const char* type_name(ModelChoice::Type t) {
    switch (t) {
        case ModelChoice::Type::logistic: return "logistic";
        case ModelChoice::Type::forest: return "forest";
        case ModelChoice::Type::known: return "known";
        case ModelChoice::Type::saturated: return "saturated";
    }
    return "?";
}
}  // namespace

std::string describe_models(const NuisanceConfig& config) {
    std::string out = "p=";
    out += type_name(config.p.type);
    out += ", e=";
    out += type_name(config.e.type);
    if (config.e.type == ModelChoice::Type::known) {
        out += "(" + std::to_string(config.e.known_value) + ")";
    }
    out += ", g=";
    out += type_name(config.g.type);
    return out;
}

}  // namespace tiltwise
