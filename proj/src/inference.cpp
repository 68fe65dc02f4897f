#include "tiltwise/inference.hpp"

#include <algorithm>
#include <cmath>

#include "tiltwise/errors.hpp"
#include "tiltwise/parallel.hpp"
#include "tiltwise/rng.hpp"

namespace tiltwise {

double normal_quantile(double p) {
    // Wichura's AS241 rational approximation of the inverse normal CDF.
    if (!(p > 0.0 && p < 1.0)) {
        throw ConfigError("normal_quantile requires p strictly inside (0,1)");
    }
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                  3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
              4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
        val = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        val = num / den;
    }
    return q < 0.0 ? -val : val;
}

std::pair<double, double> wald_interval(double point, double se, double level) {
    if (!(se >= 0.0)) throw ConfigError("wald_interval: se must be >= 0");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("wald_interval: level in (0,1)");
    const double z = level == 0.95 ? 1.959964 : normal_quantile(0.5 * (1.0 + level));
    return {point - z * se, point + z * se};
}

double interpolated_quantile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw ConfigError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile level must be in [0,1]");
    const std::size_t m = sorted.size();
    if (m == 1) return sorted[0];
    const double h = static_cast<double>(m - 1) * p;
    const std::size_t lo = static_cast<std::size_t>(std::min(h, static_cast<double>(m - 2)));
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

namespace {

// Runs the pipeline on every replicate dataset; each replicate writes one row
// of the cells-per-replicate table. A TiltwiseError marks the replicate
// failed (all cells NaN).
std::vector<double> run_replicates(const Pipeline& pipeline,
                                   const std::function<ObservedDataset(std::size_t)>& make,
                                   std::size_t n_reps, std::size_t n_cells,
                                   unsigned threads) {
    std::vector<double> table(n_reps * n_cells, std::nan(""));
    parallel_for(n_reps, threads, [&](std::size_t r) {
        try {
            const std::vector<double> vals = pipeline(make(r));
            if (vals.size() != n_cells) {
                throw InferenceError("pipeline returned an inconsistent cell count");
            }
            std::copy(vals.begin(), vals.end(),
                      table.begin() + static_cast<std::ptrdiff_t>(r * n_cells));
        } catch (const InferenceError&) {
            throw;
        } catch (const TiltwiseError&) {
            // replicate failed; row stays NaN
        }
    });
    return table;
}

void check_failures(std::size_t n_failed, std::size_t n_reps, const char* what) {
    if (static_cast<double>(n_failed) >
        kMaxFailedReplicateShare * static_cast<double>(n_reps)) {
        throw InferenceError(std::string(what) + ": " + std::to_string(n_failed) + " of " +
                             std::to_string(n_reps) +
                             " replicates failed (more than 5%)");
    }
}

}  // namespace

ResamplingResult jackknife(const Pipeline& pipeline, const ObservedDataset& d,
                           double level, unsigned threads) {
    ResamplingResult out;
    out.point = pipeline(d);
    const std::size_t n = d.n;
    const std::size_t n_cells = out.point.size();
    if (n < 2) throw InferenceError("jackknife needs at least 2 rows");

    const std::vector<double> table = run_replicates(
        pipeline, [&](std::size_t r) { return d.without_row(r); }, n, n_cells, threads);

    out.cells.resize(n_cells);
    std::size_t max_failed = 0;
    for (std::size_t c = 0; c < n_cells; ++c) {
        double mean = 0.0;
        std::size_t m = 0;
        for (std::size_t r = 0; r < n; ++r) {
            const double v = table[r * n_cells + c];
            if (std::isfinite(v)) {
                mean += v;
                ++m;
            }
        }
        const std::size_t failed = n - m;
        check_failures(failed, n, "jackknife");
        max_failed = std::max(max_failed, failed);
        CellInterval& cell = out.cells[c];
        cell.n_failed = failed;
        if (m < 2) {
            cell.se = std::nan("");
            cell.lo = cell.hi = std::nan("");
            continue;
        }
        mean /= static_cast<double>(m);
        double ss = 0.0;
        bool all_equal = true;
        double first = std::nan("");
        for (std::size_t r = 0; r < n; ++r) {
            const double v = table[r * n_cells + c];
            if (!std::isfinite(v)) continue;
            if (std::isnan(first)) first = v;
            all_equal = all_equal && v == first;
            ss += (v - mean) * (v - mean);
        }
        // A constant statistic has exactly zero variance; don't let the
        // rounding of the replicate mean manufacture one.
        cell.se = all_equal
                      ? 0.0
                      : std::sqrt(ss * static_cast<double>(m - 1) / static_cast<double>(m));
        const auto [lo, hi] = wald_interval(out.point[c], cell.se, level);
        cell.lo = lo;
        cell.hi = hi;
    }
    if (max_failed > 0) {
        out.warnings.push_back("jackknife: " + std::to_string(max_failed) +
                               " replicate(s) failed; se uses successful replicates only");
    }
    return out;
}

ResamplingResult bootstrap(const Pipeline& pipeline, const ObservedDataset& d,
                           int n_boot, std::uint64_t seed, double level,
                           bool stratified_by_s, unsigned threads) {
    if (n_boot < 2) throw ConfigError("bootstrap needs n_boot >= 2");
    ResamplingResult out;
    out.point = pipeline(d);
    const std::size_t n = d.n;
    const std::size_t n_cells = out.point.size();
    const std::size_t reps = static_cast<std::size_t>(n_boot);

    std::vector<std::size_t> trial_rows, cohort_rows;
    if (stratified_by_s) {
        for (std::size_t i = 0; i < n; ++i) {
            (d.s[i] == 1 ? trial_rows : cohort_rows).push_back(i);
        }
        out.warnings.push_back(
            "bootstrap stratified by trial participation: resampling conditions on the "
            "realized S margin, which changes the inferential target");
    }

    auto make = [&](std::size_t r) {
        SplitMix64 rng = substream(seed, r, rng_purpose::bootstrap);
        std::vector<std::size_t> idx(n);
        if (!stratified_by_s) {
            for (std::size_t i = 0; i < n; ++i) idx[i] = rng.bounded(n);
        } else {
            std::size_t k = 0;
            for (std::size_t i = 0; i < trial_rows.size(); ++i) {
                idx[k++] = trial_rows[rng.bounded(trial_rows.size())];
            }
            for (std::size_t i = 0; i < cohort_rows.size(); ++i) {
                idx[k++] = cohort_rows[rng.bounded(cohort_rows.size())];
            }
        }
        return d.take(idx);
    };

    const std::vector<double> table = run_replicates(pipeline, make, reps, n_cells, threads);

    const double alpha = 1.0 - level;
    out.cells.resize(n_cells);
    std::size_t max_failed = 0;
    std::vector<double> vals;
    for (std::size_t c = 0; c < n_cells; ++c) {
        vals.clear();
        for (std::size_t r = 0; r < reps; ++r) {
            const double v = table[r * n_cells + c];
            if (std::isfinite(v)) vals.push_back(v);
        }
        const std::size_t failed = reps - vals.size();
        check_failures(failed, reps, "bootstrap");
        max_failed = std::max(max_failed, failed);
        std::sort(vals.begin(), vals.end());
        CellInterval& cell = out.cells[c];
        cell.n_failed = failed;
        cell.se = std::nan("");
        if (vals.empty()) {
            cell.lo = cell.hi = std::nan("");
            continue;
        }
        cell.lo = interpolated_quantile(vals, alpha / 2.0);
        cell.hi = interpolated_quantile(vals, 1.0 - alpha / 2.0);
    }
    if (max_failed > 0) {
        out.warnings.push_back("bootstrap: " + std::to_string(max_failed) +
                               " replicate(s) failed; intervals use successful replicates only");
    }
    return out;
}

}  // namespace tiltwise
