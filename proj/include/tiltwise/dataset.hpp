#ifndef TILTWISE_DATASET_HPP
#define TILTWISE_DATASET_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tiltwise {

// Observed cohort for a trial nested in a sample from the target population.
// Each row carries covariates x and the participation indicator s; treatment
// a and outcome y are present iff s = 1. Storage is flat and immutable after
// load so replicate workers can share it read-only.
class ObservedDataset {
public:
    std::vector<std::string> covariate_names;
    std::size_t n = 0;      // number of rows
    std::size_t n_cov = 0;  // covariates per row

    std::vector<double> x_flat;      // n * n_cov, row-major
    std::vector<std::int8_t> s;      // 0/1
    std::vector<std::int8_t> a;      // 0/1, -1 when absent (s = 0)
    std::vector<std::int8_t> y;      // 0/1, -1 when absent (s = 0)

    std::vector<std::string> warnings;  // load-time notes (ignored a/y on s=0 rows, ...)

    std::span<const double> x(std::size_t i) const {
        return {x_flat.data() + i * n_cov, n_cov};
    }

    // Throws ValidationError when any structural invariant is broken:
    // n >= 1, finite covariates, a/y present iff s = 1, binary codes.
    void validate() const;

    ObservedDataset without_row(std::size_t drop) const;
    ObservedDataset take(std::span<const std::size_t> indices) const;

    void push_row(std::span<const double> xs, int si, int ai, int yi);
};

struct CohortSummary {
    std::size_t n_total = 0;
    std::size_t n_randomized = 0;
    std::size_t n_nonrandomized = 0;
    std::size_t n_arm1 = 0;
    std::size_t n_arm0 = 0;
    // Outcome rate among randomized rows, indexed by arm; NaN for an empty arm.
    std::array<double, 2> outcome_rate_by_arm = {0.0, 0.0};
};

CohortSummary summarize(const ObservedDataset& d);

// Column-name mapping for CSV input. `one_hot` columns are categorical and
// are expanded into indicator covariates (one per level except the first,
// levels ordered lexicographically); `covariates` are numeric pass-through.
struct CsvSchema {
    std::vector<std::string> covariates;
    std::vector<std::string> one_hot;
    std::string s = "s";
    std::string a = "a";
    std::string y = "y";
};

// Reads a header-first CSV and validates it as a complete-case nested-trial
// cohort. s/a/y cells must be 0/1; an empty a/y cell means absent. A present
// a/y value on an s=0 row is ignored with a warning, not an error.
ObservedDataset load_dataset(const std::string& path, const CsvSchema& schema);

// Writes the dataset back out in the same schema (17 significant digits for
// covariates, so reload reproduces values bit-for-bit).
void write_dataset_csv(const ObservedDataset& d, const std::string& path);

}  // namespace tiltwise

#endif
