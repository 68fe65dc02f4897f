#ifndef TILTWISE_INFERENCE_HPP
#define TILTWISE_INFERENCE_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tiltwise/dataset.hpp"

namespace tiltwise {

// A pipeline maps a dataset to a flat vector of statistics (one per curve
// cell) and is rerun from scratch on every replicate, so nuisance refitting
// is always included in the resampling variability.
using Pipeline = std::function<std::vector<double>(const ObservedDataset&)>;

struct ReplicatePlan {
    enum class Method { jackknife, bootstrap };
    Method method = Method::jackknife;
    int n_boot = 1000;
    std::uint64_t seed = 0;
    double level = 0.95;
    // Resample within S strata instead of the whole cohort. Changes the
    // inferential target; enabling it records a warning.
    bool stratified_by_s = false;
};

struct CellInterval {
    double se = 0.0;  // NaN for percentile intervals
    double lo = 0.0;
    double hi = 0.0;
    std::size_t n_failed = 0;
};

struct ResamplingResult {
    std::vector<double> point;        // pipeline on the full dataset
    std::vector<CellInterval> cells;  // one per pipeline output
    std::vector<std::string> warnings;
};

// Leave-one-out resampling: se = sqrt((m-1)/m * sum (theta_i - mean)^2) over
// the m successful replicates, Wald interval point +- z * se. A replicate
// whose pipeline throws a TiltwiseError (or returns NaN for a cell) is
// counted as failed for the affected cells; more than 5% failures for any
// cell raises InferenceError.
ResamplingResult jackknife(const Pipeline& pipeline, const ObservedDataset& d,
                           double level = 0.95, unsigned threads = 0);

// Nonparametric bootstrap with percentile intervals at the (1±level)/2
// quantiles (linear interpolation between order statistics). Replicate
// indices come from substream(seed, replicate), so results are identical for
// a fixed seed under any thread count.
ResamplingResult bootstrap(const Pipeline& pipeline, const ObservedDataset& d,
                           int n_boot, std::uint64_t seed, double level = 0.95,
                           bool stratified_by_s = false, unsigned threads = 0);

constexpr double kMaxFailedReplicateShare = 0.05;

// point +- z_{(1+level)/2} * se. The 95% quantile is pinned to 1.959964;
// other levels use a rational approximation of the normal quantile.
std::pair<double, double> wald_interval(double point, double se, double level);

// Inverse standard normal CDF (Wichura's AS241-style rational approximation,
// absolute error well below 1e-8 on (0,1)).
double normal_quantile(double p);

// Quantile of a sorted sample by linear interpolation between order
// statistics: h = (m-1)p, value = x[floor(h)] + frac(h) * (x[floor(h)+1] -
// x[floor(h)]).
double interpolated_quantile(std::span<const double> sorted, double p);

}  // namespace tiltwise

#endif
