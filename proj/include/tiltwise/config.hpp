#ifndef TILTWISE_CONFIG_HPP
#define TILTWISE_CONFIG_HPP

#include <cstdint>
#include <string>

#include "tiltwise/dataset.hpp"
#include "tiltwise/estimators.hpp"
#include "tiltwise/inference.hpp"
#include "tiltwise/models.hpp"
#include "tiltwise/selection.hpp"
#include "tiltwise/simulate.hpp"

namespace tiltwise {

struct InferencePlan {
    enum class Ci { none, jackknife, bootstrap, both };
    Ci ci = Ci::jackknife;
    int boot_reps = 1000;
    std::uint64_t seed = 0;
    double level = 0.95;
    bool stratified_by_s = false;
};

// One serializable artifact per run: a JSON config file, with command-line
// flags overriding individual fields.
struct RunConfig {
    std::string config_path;  // where this config was loaded from, if anywhere
    std::string data_path;
    std::string out_dir = ".";

    CsvSchema schema;
    NuisanceConfig models;
    SensitivitySpec sensitivity;
    bool dr = false;
    SelectionOptions selection;
    InferencePlan inference;
    bool plot = false;
    unsigned threads = 0;  // 0 = TILTWISE_THREADS env or hardware default

    bool has_dgp = false;
    DgpSpec dgp;
};

RunConfig load_config(const std::string& path);

// Built-in defaults: logistic p/e/g models, linked grid of 21 points on
// [0,1], om+aug estimators, jackknife intervals at 95%.
RunConfig default_config();

std::string describe_models(const NuisanceConfig& config);

}  // namespace tiltwise

#endif
