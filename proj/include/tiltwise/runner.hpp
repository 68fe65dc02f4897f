#ifndef TILTWISE_RUNNER_HPP
#define TILTWISE_RUNNER_HPP

#include <vector>

#include "tiltwise/config.hpp"
#include "tiltwise/inference.hpp"
#include "tiltwise/outputs.hpp"

namespace tiltwise {

// Stable ordering of curve cells for a given spec (grid-major, estimator,
// estimand; dr rows after om/aug per grid point). Pipelines flatten curves in
// this order so resampling cells line up with point estimates.
struct CellKey {
    double eta1;
    double eta0;
    Estimand estimand;
    EstimatorKind estimator;
};

std::vector<CellKey> curve_layout(const SensitivitySpec& spec, bool dr);

// Full estimation pipeline for one dataset: nuisance fits (warm-started from
// the full-data fit when supplied), om/aug sweep, optional dr rows; flattened
// per curve_layout. Used for the point estimates and rerun per replicate.
Pipeline make_analysis_pipeline(const RunConfig& config, const NuisanceBundle* warm);

// Command entry points; they throw TiltwiseError subclasses on failure.
void run_simulate(const RunConfig& config);
void run_analyze(const RunConfig& config);
int run_validate(bool quick);  // returns the exit code (0 iff all checks pass)

}  // namespace tiltwise

#endif
