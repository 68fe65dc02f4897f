#ifndef TILTWISE_OUTPUTS_HPP
#define TILTWISE_OUTPUTS_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "tiltwise/config.hpp"
#include "tiltwise/estimators.hpp"
#include "tiltwise/simulate.hpp"

namespace tiltwise {

// One output line of curves.csv: a curve cell plus its interval variant.
// With --ci both each cell appears twice (tagged jackknife and bootstrap);
// se is NaN for percentile intervals and NaN fields serialize as empty.
struct CurveOutputRow {
    EstimateRow point;
    std::string ci_method = "none";  // none | jackknife | bootstrap
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n_failed_replicates = 0;
};

// All reals at 17 significant digits so text output round-trips bit-for-bit.
std::string format17(double v);

void write_curves_csv(const std::string& path, const std::vector<CurveOutputRow>& rows);
std::vector<CurveOutputRow> read_curves_csv(const std::string& path);

void write_metadata_json(const std::string& path, const RunConfig& config, std::size_t n_rows,
                         const std::vector<std::string>& warnings);

void write_truth_json(const std::string& path, const DgpSpec& spec, const OracleTruth& truth);

// One SVG per estimand: per estimator series, a solid point-estimate path and
// (when intervals are present) two dashed interval paths. Axes and labels use
// line/text elements so paths count the curves exactly.
void write_curve_svg(const std::string& path, Estimand estimand,
                     const std::vector<CurveOutputRow>& rows);

}  // namespace tiltwise

#endif
