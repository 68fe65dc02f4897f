#include <algorithm>
#include <cmath>
#include <numeric>

#include "tiltwise/errors.hpp"
#include "tiltwise/models.hpp"
#include "tiltwise/rng.hpp"

namespace tiltwise {

namespace {

struct SplitCandidate {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
};

// Weighted Gini impurity of a binary split evaluated over the sorted order of
// one feature. Rows are (value, label) pairs sorted by value.
SplitCandidate best_split_for_feature(const std::vector<std::pair<double, int>>& sorted,
                                      int feature) {
    SplitCandidate best;
    const std::size_t m = sorted.size();
    std::size_t total1 = 0;
    for (const auto& [v, lab] : sorted) total1 += static_cast<std::size_t>(lab);

    std::size_t left_n = 0, left1 = 0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        ++left_n;
        left1 += static_cast<std::size_t>(sorted[i].second);
        if (sorted[i].first == sorted[i + 1].first) continue;  // no boundary here
        const std::size_t right_n = m - left_n;
        const std::size_t right1 = total1 - left1;
        const double pl = static_cast<double>(left1) / static_cast<double>(left_n);
        const double pr = static_cast<double>(right1) / static_cast<double>(right_n);
        const double gini = static_cast<double>(left_n) * pl * (1.0 - pl) +
                            static_cast<double>(right_n) * pr * (1.0 - pr);
        if (!best.found || gini < best.impurity) {
            best.found = true;
            best.feature = feature;
            best.threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
            best.impurity = gini;
        }
    }
    return best;
}

struct TreeBuilder {
    const Matrix& x;
    std::span<const std::int8_t> labels;
    const std::vector<int>& features;  // this tree's candidate features
    int min_node;
    Tree tree;

    int build(std::vector<std::size_t>& rows) {
        const std::size_t m = rows.size();
        std::size_t ones = 0;
        for (std::size_t r : rows) ones += static_cast<std::size_t>(labels[r]);
        const bool pure = ones == 0 || ones == m;

        auto make_leaf = [&]() {
            TreeNode leaf;
            leaf.leaf_prop = static_cast<double>(ones) / static_cast<double>(m);
            tree.nodes.push_back(leaf);
            return static_cast<int>(tree.nodes.size() - 1);
        };
        if (pure || m <= static_cast<std::size_t>(min_node)) return make_leaf();

        SplitCandidate best;
        std::vector<std::pair<double, int>> sorted(m);
        for (int f : features) {
            for (std::size_t i = 0; i < m; ++i) {
                sorted[i] = {x.at(rows[i], static_cast<std::size_t>(f)),
                             static_cast<int>(labels[rows[i]])};
            }
            std::sort(sorted.begin(), sorted.end());
            SplitCandidate cand = best_split_for_feature(sorted, f);
            if (cand.found && (!best.found || cand.impurity < best.impurity)) best = cand;
        }
        if (!best.found) return make_leaf();  // all candidate features constant

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) {
            (x.at(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left_rows
                                                                               : right_rows)
                .push_back(r);
        }

        TreeNode node;
        node.feature = best.feature;
        node.threshold = best.threshold;
        tree.nodes.push_back(node);
        const int self = static_cast<int>(tree.nodes.size() - 1);
        const int left = build(left_rows);
        const int right = build(right_rows);
        tree.nodes[self].left = left;
        tree.nodes[self].right = right;
        return self;
    }
};

}  // namespace

ForestFit fit_forest(const Matrix& features, std::span<const std::int8_t> labels,
                     const ForestOptions& opt) {
    const std::size_t n = features.rows;
    const std::size_t p = features.cols;
    if (n < 2) throw FitError("fit_forest: need at least 2 rows");
    if (labels.size() != n) throw FitError("fit_forest: label length mismatch");
    if (opt.mtry <= 0 || static_cast<std::size_t>(opt.mtry) > p) {
        throw ConfigError("fit_forest: mtry must be in [1, feature count]");
    }
    if (opt.n_trees <= 0) throw ConfigError("fit_forest: n_trees must be positive");

    ForestFit fit;
    fit.n_trees = opt.n_trees;
    fit.mtry = opt.mtry;
    fit.min_node = opt.min_node;
    fit.seed = opt.seed;
    fit.trees.resize(static_cast<std::size_t>(opt.n_trees));

    for (int t = 0; t < opt.n_trees; ++t) {
        SplitMix64 rng = substream(opt.seed, static_cast<std::uint64_t>(t),
                                   rng_purpose::forest_tree);
        // Bootstrap resample, then the tree's feature subset (without
        // replacement, partial Fisher-Yates).
        std::vector<std::size_t> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = rng.bounded(n);

        std::vector<int> pool(p);
        std::iota(pool.begin(), pool.end(), 0);
        std::vector<int> chosen;
        chosen.reserve(static_cast<std::size_t>(opt.mtry));
        for (int k = 0; k < opt.mtry; ++k) {
            const std::size_t j = k + rng.bounded(p - static_cast<std::size_t>(k));
            std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
            chosen.push_back(pool[static_cast<std::size_t>(k)]);
        }

        TreeBuilder builder{features, labels, chosen, opt.min_node, {}};
        builder.build(rows);
        fit.trees[static_cast<std::size_t>(t)] = std::move(builder.tree);
    }
    return fit;
}

double ForestModel::predict(std::span<const double> x) const {
    if (x.size() != dim_) throw ValidationError("forest predict: covariate length mismatch");
    double sum = 0.0;
    for (const Tree& tree : fit_.trees) {
        int node = 0;
        while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
            const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
            node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
        }
        sum += tree.nodes[static_cast<std::size_t>(node)].leaf_prop;
    }
    const double prop = sum / static_cast<double>(fit_.trees.size());
    return std::clamp(prop, kEpsClip, 1.0 - kEpsClip);
}

}  // namespace tiltwise
