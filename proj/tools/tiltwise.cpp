#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tiltwise/config.hpp"
#include "tiltwise/errors.hpp"
#include "tiltwise/estimators.hpp"
#include "tiltwise/runner.hpp"
#include "tiltwise/version.hpp"

namespace {

void print_error_json(const std::string& kind, const std::string& message) {
    nlohmann::json j;
    j["error"]["kind"] = kind;
    j["error"]["message"] = message;
    std::fprintf(stderr, "%s\n", j.dump().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tiltwise: tilt-based sensitivity analysis for extending trial results "
                 "to a target population"};
    app.set_version_flag("--version", TILTWISE_VERSION);
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> data_path, out_dir, ci;
    std::optional<int> boot_reps;
    std::optional<std::uint64_t> seed;
    std::optional<double> level;
    std::optional<unsigned> threads;
    bool plot = false, dr = false, quick = false, corrupt_tilt = false;

    CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic cohort with "
                                                        "known estimand values");
    simulate->add_option("--config", config_path, "JSON config with a dgp section")->required();
    simulate->add_option("--out", out_dir, "output directory");
    simulate->add_option("--seed", seed, "override the dgp seed");

    CLI::App* analyze = app.add_subcommand("analyze", "estimate sensitivity curves for a "
                                                      "cohort CSV");
    analyze->add_option("--config", config_path, "JSON config")->required();
    analyze->add_option("--data", data_path, "cohort CSV (overrides config)");
    analyze->add_option("--out", out_dir, "output directory (overrides config)");
    analyze->add_option("--ci", ci, "interval method: none|jackknife|bootstrap|both");
    analyze->add_option("--boot-reps", boot_reps, "bootstrap replicates (default 1000)");
    analyze->add_option("--seed", seed, "resampling seed");
    analyze->add_option("--level", level, "confidence level (default 0.95)");
    analyze->add_option("--threads", threads, "worker threads (default: TILTWISE_THREADS env "
                                              "or hardware)");
    analyze->add_flag("--plot", plot, "write one SVG per estimand");
    analyze->add_flag("--dr", dr, "add selection-model doubly robust rows");

    CLI::App* validate = app.add_subcommand("validate", "run the built-in consistency checks");
    validate->add_flag("--quick", quick, "smaller sample sizes, under half a minute");
    validate->add_flag("--corrupt-tilt", corrupt_tilt, "negative-control test hook")
        ->group("");  // hidden

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) {
            if (corrupt_tilt) tiltwise::detail::set_tilt_test_offset(0.05);
            return tiltwise::run_validate(quick);
        }

        tiltwise::RunConfig config = tiltwise::load_config(config_path);
        if (data_path) config.data_path = *data_path;
        if (out_dir) config.out_dir = *out_dir;
        if (boot_reps) config.inference.boot_reps = *boot_reps;
        if (seed) {
            config.inference.seed = *seed;
            config.dgp.seed = *seed;
        }
        if (level) config.inference.level = *level;
        if (threads) config.threads = *threads;
        if (plot) config.plot = true;
        if (dr) config.dr = true;
        if (ci) {
            if (*ci == "none") config.inference.ci = tiltwise::InferencePlan::Ci::none;
            else if (*ci == "jackknife") config.inference.ci = tiltwise::InferencePlan::Ci::jackknife;
            else if (*ci == "bootstrap") config.inference.ci = tiltwise::InferencePlan::Ci::bootstrap;
            else if (*ci == "both") config.inference.ci = tiltwise::InferencePlan::Ci::both;
            else throw tiltwise::ConfigError("--ci must be none|jackknife|bootstrap|both");
        }

        if (simulate->parsed()) {
            tiltwise::run_simulate(config);
        } else {
            tiltwise::run_analyze(config);
        }
        return 0;
    } catch (const tiltwise::TiltwiseError& e) {
        print_error_json(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error_json("internal", e.what());
        return 1;
    }
}
