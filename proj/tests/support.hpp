#ifndef TILTWISE_TESTS_SUPPORT_HPP
#define TILTWISE_TESTS_SUPPORT_HPP

// Shared fixtures and small helpers for the test suites.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tiltwise/dataset.hpp"
#include "tiltwise/models.hpp"
#include "tiltwise/simulate.hpp"

namespace tiltwise::testsupport {

// 12-row cohort on a binary covariate, two strata of 6 rows each:
// 4 randomized (2 per arm) + 2 non-randomized. Saturated arm-1 outcome rates
// are 0.5 (x=0) and 1.0 (x=1, a pure stratum); arm-0 rates are 0.5 in both
// strata. Arms are exactly balanced so the empirical treatment probability
// is 0.5 in every stratum.
inline ObservedDataset make_fixture12() {
    ObservedDataset d;
    d.covariate_names = {"x1"};
    d.n_cov = 1;
    auto add = [&](double x, int s, int a, int y) {
        const double xs[1] = {x};
        d.push_row(xs, s, a, y);
    };
    add(0, 1, 1, 1);
    add(0, 1, 1, 0);
    add(0, 1, 0, 1);
    add(0, 1, 0, 0);
    add(0, 0, -1, -1);
    add(0, 0, -1, -1);
    add(1, 1, 1, 1);
    add(1, 1, 1, 1);
    add(1, 1, 0, 1);
    add(1, 1, 0, 0);
    add(1, 0, -1, -1);
    add(1, 0, -1, -1);
    d.validate();
    return d;
}

// 24-row variant with no pure strata: arm-1 rates 0.25 / 0.75, arm-0 rates
// 0.5 / 0.25, four non-randomized rows per stratum, arms balanced 4/4.
inline ObservedDataset make_fixture24() {
    ObservedDataset d;
    d.covariate_names = {"x1"};
    d.n_cov = 1;
    auto add = [&](double x, int s, int a, int y) {
        const double xs[1] = {x};
        d.push_row(xs, s, a, y);
    };
    auto add_stratum = [&](double x, std::vector<int> y1, std::vector<int> y0) {
        for (int y : y1) add(x, 1, 1, y);
        for (int y : y0) add(x, 1, 0, y);
        for (int k = 0; k < 4; ++k) add(x, 0, -1, -1);
    };
    add_stratum(0.0, {1, 0, 0, 0}, {1, 1, 0, 0});
    add_stratum(1.0, {1, 1, 1, 0}, {1, 0, 0, 0});
    d.validate();
    return d;
}

// Two-point benchmark process: X ~ Bernoulli(0.5), p = e1 = 0.5 everywhere,
// g1 = 0.5, g0 = 0.25, tilts (ln 2, -ln 2). psi1 truth 7/12, phi1 truth 2/3.
inline DgpSpec dgp_a(std::size_t n, std::uint64_t seed) {
    DgpSpec spec;
    spec.support = {
        {{0.0}, 0.5, 0.5, 0.5, 0.5, 0.25},
        {{1.0}, 0.5, 0.5, 0.5, 0.5, 0.25},
    };
    spec.eta_star1 = std::log(2.0);
    spec.eta_star0 = -std::log(2.0);
    spec.n = n;
    spec.seed = seed;
    return spec;
}

// Heterogeneous-outcome variant: g1(x) = 0.3 + 0.4 x.
inline DgpSpec dgp_a_hetero(std::size_t n, std::uint64_t seed) {
    DgpSpec spec = dgp_a(n, seed);
    spec.support[0].g1 = 0.3;
    spec.support[1].g1 = 0.7;
    return spec;
}

inline NuisanceConfig saturated_config() {
    NuisanceConfig cfg;
    cfg.p.type = ModelChoice::Type::saturated;
    cfg.e.type = ModelChoice::Type::saturated;
    cfg.g.type = ModelChoice::Type::saturated;
    return cfg;
}

inline NuisanceConfig known_e_saturated_config(double e1 = 0.5) {
    NuisanceConfig cfg = saturated_config();
    cfg.e.type = ModelChoice::Type::known;
    cfg.e.known_value = e1;
    return cfg;
}

// Scratch directory under the system temp root, unique per call.
class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = (std::filesystem::temp_directory_path() /
                 ("tiltwise_test_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++)))
                    .string();
        std::filesystem::create_directories(path_);
    }
    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const { return path_ + "/" + name; }

private:
    std::string path_;
};

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace tiltwise::testsupport

#endif
