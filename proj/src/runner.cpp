#include "tiltwise/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "tiltwise/errors.hpp"
#include "tiltwise/selection.hpp"
#include "tiltwise/validate.hpp"

namespace tiltwise {

namespace {

bool is_dr_estimand(Estimand e) {
    return e == Estimand::psi1 || e == Estimand::psi0 || e == Estimand::rd_all ||
           e == Estimand::rr_all;
}

std::vector<double> flatten(const SensitivityCurve& curve) {
    std::vector<double> out;
    out.reserve(curve.rows.size());
    for (const EstimateRow& r : curve.rows) out.push_back(r.value);
    return out;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

}  // namespace

std::vector<CellKey> curve_layout(const SensitivitySpec& spec, bool dr) {
    std::vector<CellKey> cells;
    const auto pairs = spec.resolved_pairs();
    for (const auto& pair : pairs) {
        for (EstimatorKind kind : spec.estimators) {
            for (Estimand est : spec.estimands) {
                cells.push_back({pair[0], pair[1], est, kind});
            }
        }
    }
    if (dr) {
        for (const auto& pair : pairs) {
            for (Estimand est : spec.estimands) {
                if (is_dr_estimand(est)) {
                    cells.push_back({pair[0], pair[1], est, EstimatorKind::dr});
                }
            }
        }
    }
    return cells;
}

Pipeline make_analysis_pipeline(const RunConfig& config, const NuisanceBundle* warm) {
    // The warm bundle only seeds iterative fits; every replicate still refits
    // all nuisances (and dr components) on its own data.
    return [config, warm](const ObservedDataset& d) {
        const NuisanceBundle nb = fit_nuisances(d, config.models, warm);
        SensitivityCurve curve = sweep(d, nb, config.sensitivity, nullptr);
        if (config.dr) {
            append_dr_rows(d, nb, config.sensitivity, curve, config.selection, nullptr);
        }
        return flatten(curve);
    };
}

void run_simulate(const RunConfig& config) {
    if (!config.has_dgp) {
        throw ConfigError("simulate requires a 'dgp' section in the config");
    }
    ensure_out_dir(config.out_dir);
    const ObservedDataset d = generate(config.dgp);
    const OracleTruth truth = oracle(config.dgp);

    const std::string data_path = config.out_dir + "/data.csv";
    const std::string truth_path = config.out_dir + "/truth.json";
    write_dataset_csv(d, data_path);
    write_truth_json(truth_path, config.dgp, truth);
    std::cout << "wrote " << data_path << " (" << d.n << " rows)\n";
    std::cout << "wrote " << truth_path << "\n";
}

void run_analyze(const RunConfig& config) {
    if (config.data_path.empty()) {
        throw ConfigError("analyze requires a dataset (config 'data' or --data)");
    }
    ensure_out_dir(config.out_dir);
    const ObservedDataset d = load_dataset(config.data_path, config.schema);
    config.sensitivity.validate();

    std::vector<std::string> warnings = d.warnings;

    // Full-data fit: point estimates and the warm start for replicates.
    NuisanceBundle warm = fit_nuisances(d, config.models);
    for (const auto& w : warm.warnings) warnings.push_back(w);
    SensitivityCurve curve = sweep(d, warm, config.sensitivity, &warnings);
    if (config.dr) {
        append_dr_rows(d, warm, config.sensitivity, curve, config.selection, &warnings);
    }

    const std::vector<CellKey> layout = curve_layout(config.sensitivity, config.dr);
    if (layout.size() != curve.rows.size()) {
        throw InferenceError("internal: curve layout mismatch");
    }

    const Pipeline pipeline = make_analysis_pipeline(config, &warm);
    ResamplingResult jk, bs;
    const bool want_jk = config.inference.ci == InferencePlan::Ci::jackknife ||
                         config.inference.ci == InferencePlan::Ci::both;
    const bool want_bs = config.inference.ci == InferencePlan::Ci::bootstrap ||
                         config.inference.ci == InferencePlan::Ci::both;
    if (want_jk) {
        jk = jackknife(pipeline, d, config.inference.level, config.threads);
        for (const auto& w : jk.warnings) warnings.push_back(w);
    }
    if (want_bs) {
        bs = bootstrap(pipeline, d, config.inference.boot_reps, config.inference.seed,
                       config.inference.level, config.inference.stratified_by_s,
                       config.threads);
        for (const auto& w : bs.warnings) warnings.push_back(w);
    }

    std::vector<CurveOutputRow> rows;
    for (std::size_t c = 0; c < curve.rows.size(); ++c) {
        if (!want_jk && !want_bs) {
            CurveOutputRow r;
            r.point = curve.rows[c];
            r.ci_method = "none";
            rows.push_back(r);
            continue;
        }
        if (want_jk) {
            CurveOutputRow r;
            r.point = curve.rows[c];
            r.ci_method = "jackknife";
            r.se = jk.cells[c].se;
            r.ci_low = jk.cells[c].lo;
            r.ci_high = jk.cells[c].hi;
            r.n_failed_replicates = jk.cells[c].n_failed;
            rows.push_back(r);
        }
        if (want_bs) {
            CurveOutputRow r;
            r.point = curve.rows[c];
            r.ci_method = "bootstrap";
            r.se = std::nan("");
            r.ci_low = bs.cells[c].lo;
            r.ci_high = bs.cells[c].hi;
            r.n_failed_replicates = bs.cells[c].n_failed;
            rows.push_back(r);
        }
    }

    const std::string csv_path = config.out_dir + "/curves.csv";
    write_curves_csv(csv_path, rows);
    write_metadata_json(config.out_dir + "/metadata.json", config, d.n, warnings);
    std::cout << "wrote " << csv_path << " (" << rows.size() << " rows)\n";

    if (config.plot) {
        for (Estimand est : config.sensitivity.estimands) {
            const std::string svg_path =
                config.out_dir + "/" + std::string(to_string(est)) + ".svg";
            write_curve_svg(svg_path, est, rows);
            std::cout << "wrote " << svg_path << "\n";
        }
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

int run_validate(bool quick) {
    const std::vector<CheckResult> checks = run_builtin_checks(quick);
    bool all_pass = true;
    for (const CheckResult& c : checks) {
        std::printf("[%s] %-34s measured=%-12.4g threshold=%-10.4g %s\n",
                    c.pass ? "PASS" : "FAIL", c.name.c_str(), c.measured, c.threshold,
                    c.detail.c_str());
        all_pass = all_pass && c.pass;
    }
    std::printf("%s (%zu checks)\n", all_pass ? "all checks passed" : "CHECKS FAILED",
                checks.size());
    return all_pass ? 0 : 1;
}

}  // namespace tiltwise
