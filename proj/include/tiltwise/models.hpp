#ifndef TILTWISE_MODELS_HPP
#define TILTWISE_MODELS_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tiltwise/dataset.hpp"
#include "tiltwise/linalg.hpp"

namespace tiltwise {

// Fitted probability predictions are clipped to this interval before use in
// weights and tilt denominators.
constexpr double kEpsClip = 1e-6;

class ProbabilityModel {
public:
    virtual ~ProbabilityModel() = default;
    virtual double predict(std::span<const double> x) const = 0;
    virtual std::string_view kind() const = 0;
    virtual std::size_t dim() const = 0;  // expected covariate length
};

using ModelPtr = std::shared_ptr<const ProbabilityModel>;

// ---------------------------------------------------------------------------
// Logistic regression (Newton / IRLS on the ridge-penalized Bernoulli
// log-likelihood, optional per-row weights).

struct LogisticOptions {
    double tol_grad = 1e-8;
    int max_iter = 100;
    double ridge = 0.0;
    // When true, hitting max_iter returns converged=false instead of throwing.
    bool best_effort = false;
    // Optional starting coefficients (intercept first); empty means zero start.
    std::vector<double> init;
};

struct LogisticFit {
    std::vector<double> coefficients;  // intercept first
    bool converged = false;
    int iterations = 0;
    double final_gradient_norm = 0.0;
    double ridge_used = 0.0;
};

// `features` has one row per observation and no intercept column. Throws
// SeparationError on complete/quasi-separation when ridge = 0 (including the
// all-labels-identical case), FitError when max_iter is reached without
// convergence and best_effort is false.
LogisticFit fit_logistic(const Matrix& features, std::span<const std::int8_t> labels,
                         const LogisticOptions& opt = {},
                         std::span<const double> weights = {});

class LogisticModel : public ProbabilityModel {
public:
    LogisticModel(LogisticFit fit, std::size_t n_features)
        : fit_(std::move(fit)), dim_(n_features) {}
    double predict(std::span<const double> x) const override;
    std::string_view kind() const override { return "logistic"; }
    std::size_t dim() const override { return dim_; }
    const LogisticFit& fit() const { return fit_; }

private:
    LogisticFit fit_;
    std::size_t dim_;
};

// ---------------------------------------------------------------------------
// Classification random forest: bagged Gini trees grown to purity (or
// min_node), probability = mean of per-tree leaf class-1 proportions. Each
// tree draws its own bootstrap resample and its own feature subset of size
// mtry from substream(seed, tree_index).

struct ForestOptions {
    int n_trees = 2000;
    int mtry = 4;
    int min_node = 1;
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;       // -1 marks a leaf
    double threshold = 0.0; // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
    double leaf_prop = 0.0; // class-1 proportion at a leaf
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct ForestFit {
    int n_trees = 0;
    int mtry = 0;
    int min_node = 1;
    std::uint64_t seed = 0;
    std::vector<Tree> trees;
};

ForestFit fit_forest(const Matrix& features, std::span<const std::int8_t> labels,
                     const ForestOptions& opt = {});

class ForestModel : public ProbabilityModel {
public:
    ForestModel(ForestFit fit, std::size_t n_features)
        : fit_(std::move(fit)), dim_(n_features) {}
    double predict(std::span<const double> x) const override;
    std::string_view kind() const override { return "random_forest"; }
    std::size_t dim() const override { return dim_; }
    const ForestFit& fit() const { return fit_; }

private:
    ForestFit fit_;
    std::size_t dim_;
};

// ---------------------------------------------------------------------------
// Degenerate and derived models.

// A probability known by design (e.g. the randomization probability in a
// marginally randomized trial). Must lie inside the clip interval.
class KnownConstantModel : public ProbabilityModel {
public:
    explicit KnownConstantModel(double value);
    double predict(std::span<const double>) const override { return value_; }
    std::string_view kind() const override { return "known_constant"; }
    std::size_t dim() const override { return 0; }
    double value() const { return value_; }

private:
    double value_;
};

// predict(x) = 1 - inner.predict(x); used for the arm-0 treatment model.
class ComplementModel : public ProbabilityModel {
public:
    explicit ComplementModel(ModelPtr inner) : inner_(std::move(inner)) {}
    double predict(std::span<const double> x) const override {
        return 1.0 - inner_->predict(x);
    }
    std::string_view kind() const override { return inner_->kind(); }
    std::size_t dim() const override { return inner_->dim(); }

private:
    ModelPtr inner_;
};

// Saturated model over a discrete covariate support: one parameter per
// distinct covariate vector, equal to the empirical class-1 proportion of
// that stratum. Predictions are exact (not clipped), so pure strata return
// exactly 0 or 1; prediction on an unseen stratum throws.
class StratumTableModel : public ProbabilityModel {
public:
    StratumTableModel(const Matrix& features, std::span<const std::int8_t> labels);
    double predict(std::span<const double> x) const override;
    std::string_view kind() const override { return "saturated"; }
    std::size_t dim() const override { return dim_; }
    std::size_t n_strata() const { return keys_.size(); }

private:
    std::size_t dim_ = 0;
    std::vector<std::vector<double>> keys_;  // sorted lexicographically
    std::vector<double> props_;
};

// ---------------------------------------------------------------------------
// Nuisance bundle: p(x) = Pr[S=1|X], e[a](x) = Pr[A=a|X,S=1] and
// g[a](x) = Pr[Y=1|X,S=1,A=a].

struct NuisanceBundle {
    ModelPtr p;
    std::array<ModelPtr, 2> e;
    std::array<ModelPtr, 2> g;
    std::vector<std::string> warnings;
};

struct ModelChoice {
    enum class Type { logistic, forest, known, saturated };
    Type type = Type::logistic;
    double known_value = 0.5;  // used by Type::known
    LogisticOptions logistic;
    ForestOptions forest;
};

struct NuisanceConfig {
    ModelChoice p;
    ModelChoice e;  // Type::known means the design randomization probability
    ModelChoice g;
};

// Fits p on all rows (label s), e_1 on s=1 rows (label a) with e_0 = 1 - e_1,
// and g_a on s=1, A=a rows (label y). A logistic fit that fails with
// separation at ridge = 0 is retried once at ridge = 1e-6 and the retry is
// recorded as a warning. `warm` optionally supplies starting coefficients
// from a previous fit on nearby data (resampling replicates).
NuisanceBundle fit_nuisances(const ObservedDataset& d, const NuisanceConfig& config,
                             const NuisanceBundle* warm = nullptr);

double predict_prob(const ProbabilityModel& m, std::span<const double> x);

// Design matrix of the dataset's covariates for the given row indices.
Matrix covariate_matrix(const ObservedDataset& d, std::span<const std::size_t> rows);

}  // namespace tiltwise

#endif
