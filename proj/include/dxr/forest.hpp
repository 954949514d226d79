#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "dxr/error.hpp"
#include "dxr/fvr.hpp"
#include "dxr/segment.hpp"

namespace dxr {

struct ForestParams {
    std::size_t max_depth = 0;          // 0 = unlimited
    std::size_t min_leaf_samples = 1;
    std::size_t features_per_split = 0; // 0 = ceil(sqrt(feature_count))
    bool bootstrap = true;
};

/// Flat-array tree node. feature_index == -1 marks a leaf carrying per-class
/// sample counts; internal nodes route value <= threshold to `left`.
struct TreeNode {
    int feature_index = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::vector<std::uint32_t> class_counts;  // leaves only

    bool is_leaf() const { return feature_index < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    /// Class id (1-based) the leaf reached by `features` votes for.
    /// Ties break toward the lowest class id.
    int predict(std::span<const double> features) const {
        std::size_t n = 0;
        while (!nodes[n].is_leaf()) {
            const auto& node = nodes[n];
            n = features[static_cast<std::size_t>(node.feature_index)] <= node.threshold
                    ? static_cast<std::size_t>(node.left)
                    : static_cast<std::size_t>(node.right);
        }
        const auto& counts = nodes[n].class_counts;
        std::size_t best = 0;
        for (std::size_t c = 1; c < counts.size(); ++c)
            if (counts[c] > counts[best]) best = c;
        return static_cast<int>(best) + 1;
    }
};

struct Prediction {
    int label = 0;
    std::vector<std::uint32_t> votes;  // index c-1 holds class c's votes
};

/// A majority-vote ensemble over CART trees grown on bootstrap resamples
/// with Gini-impurity splits.
struct Forest {
    std::vector<Tree> trees;
    int n_classes = 0;
    std::size_t feature_count = kFeatureCount;
    std::uint64_t seed = 0;
    ForestParams params;
};

namespace detail {

inline double gini(std::span<const std::uint32_t> counts, std::uint32_t total) {
    if (total == 0) return 0.0;
    double sum_sq = 0.0;
    for (std::uint32_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

struct TreeBuilder {
    const std::vector<FrameVector>& data;
    const ForestParams& params;
    int n_classes;
    std::size_t feature_count;
    std::mt19937_64 rng;
    Tree tree;
    std::vector<std::size_t> sample;  // indices into data, partitioned in place

    TreeBuilder(const std::vector<FrameVector>& d, const ForestParams& p, int classes,
                std::size_t features, std::uint64_t tree_seed)
        : data(d), params(p), n_classes(classes), feature_count(features), rng(tree_seed) {}

    std::size_t effective_features() const {
        if (params.features_per_split > 0)
            return std::min(params.features_per_split, feature_count);
        return static_cast<std::size_t>(
            std::ceil(std::sqrt(static_cast<double>(feature_count))));
    }

    void grow() {
        sample.resize(data.size());
        if (params.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
            for (auto& s : sample) s = pick(rng);
        } else {
            std::iota(sample.begin(), sample.end(), 0);
        }
        build(0, sample.size(), 0);
    }

    std::vector<std::uint32_t> count_classes(std::size_t begin, std::size_t end) const {
        std::vector<std::uint32_t> counts(static_cast<std::size_t>(n_classes), 0);
        for (std::size_t i = begin; i < end; ++i)
            ++counts[static_cast<std::size_t>(data[sample[i]].label - 1)];
        return counts;
    }

    std::int32_t make_leaf(std::vector<std::uint32_t> counts) {
        TreeNode node;
        node.class_counts = std::move(counts);
        tree.nodes.push_back(std::move(node));
        return static_cast<std::int32_t>(tree.nodes.size() - 1);
    }

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double score = std::numeric_limits<double>::infinity();  // weighted child impurity
    };

    Split best_split(std::size_t begin, std::size_t end,
                     const std::vector<std::uint32_t>& counts) {
        const std::size_t n = end - begin;
        Split best;

        std::vector<std::size_t> feature_order(feature_count);
        std::iota(feature_order.begin(), feature_order.end(), 0);
        const std::size_t tries = effective_features();
        // partial Fisher-Yates draw of candidate features
        for (std::size_t t = 0; t < tries; ++t) {
            std::uniform_int_distribution<std::size_t> pick(t, feature_count - 1);
            std::swap(feature_order[t], feature_order[pick(rng)]);
        }

        std::vector<std::pair<double, int>> column(n);  // (value, label)
        std::vector<std::uint32_t> left_counts(static_cast<std::size_t>(n_classes));
        for (std::size_t t = 0; t < tries; ++t) {
            const std::size_t f = feature_order[t];
            for (std::size_t i = 0; i < n; ++i) {
                const auto& v = data[sample[begin + i]];
                column[i] = {v.features[f], v.label};
            }
            std::sort(column.begin(), column.end());
            if (column.front().first == column.back().first) continue;  // constant feature

            std::fill(left_counts.begin(), left_counts.end(), 0);
            std::uint32_t n_left = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                ++left_counts[static_cast<std::size_t>(column[i].second - 1)];
                ++n_left;
                if (column[i].first == column[i + 1].first) continue;
                const std::uint32_t n_right = static_cast<std::uint32_t>(n) - n_left;
                if (n_left < params.min_leaf_samples || n_right < params.min_leaf_samples)
                    continue;
                std::vector<std::uint32_t> right_counts(counts);
                for (std::size_t c = 0; c < right_counts.size(); ++c)
                    right_counts[c] -= left_counts[c];
                const double score =
                    (static_cast<double>(n_left) * gini(left_counts, n_left) +
                     static_cast<double>(n_right) * gini(right_counts, n_right)) /
                    static_cast<double>(n);
                if (score < best.score) {
                    best.score = score;
                    best.feature = static_cast<int>(f);
                    best.threshold = 0.5 * (column[i].first + column[i + 1].first);
                }
            }
        }
        return best;
    }

    std::int32_t build(std::size_t begin, std::size_t end, std::size_t depth) {
        auto counts = count_classes(begin, end);
        const auto total = static_cast<std::uint32_t>(end - begin);
        const bool pure =
            std::count_if(counts.begin(), counts.end(), [](std::uint32_t c) { return c > 0; }) <=
            1;
        const bool depth_capped = params.max_depth > 0 && depth >= params.max_depth;
        if (pure || depth_capped || total < 2 * params.min_leaf_samples || total < 2)
            return make_leaf(std::move(counts));

        const Split split = best_split(begin, end, counts);
        if (split.feature < 0 || split.score >= gini(counts, total))
            return make_leaf(std::move(counts));

        const auto mid = static_cast<std::size_t>(std::distance(
            sample.begin(),
            std::partition(sample.begin() + static_cast<std::ptrdiff_t>(begin),
                           sample.begin() + static_cast<std::ptrdiff_t>(end),
                           [&](std::size_t idx) {
                               return data[idx]
                                          .features[static_cast<std::size_t>(split.feature)] <=
                                      split.threshold;
                           })));
        if (mid == begin || mid == end) return make_leaf(std::move(counts));

        TreeNode node;
        node.feature_index = split.feature;
        node.threshold = split.threshold;
        tree.nodes.push_back(std::move(node));
        const auto id = static_cast<std::int32_t>(tree.nodes.size() - 1);
        const std::int32_t left = build(begin, mid, depth + 1);
        const std::int32_t right = build(mid, end, depth + 1);
        tree.nodes[static_cast<std::size_t>(id)].left = left;
        tree.nodes[static_cast<std::size_t>(id)].right = right;
        return id;
    }
};

inline void check_training_set(const std::vector<FrameVector>& train) {
    if (train.empty()) throw EmptyTrainingError();
    for (const auto& v : train) {
        if (v.label < 1) throw LabelOutOfRangeError(v.label);
        for (std::size_t f = 0; f < v.features.size(); ++f)
            if (!std::isfinite(v.features[f])) throw NonFiniteFeatureError(f);
    }
}

inline int max_label(const std::vector<FrameVector>& train) {
    int m = 0;
    for (const auto& v : train) m = std::max(m, v.label);
    return m;
}

}  // namespace detail

/// Grows `n_trees` trees on bootstrap resamples of `train`. Deterministic
/// for a fixed seed: tree i always draws from its own stream.
inline Forest train_forest(const std::vector<FrameVector>& train, std::size_t n_trees,
                           const ForestParams& params = {}, std::uint64_t seed = 0) {
    if (n_trees < 1) throw Error("n_trees must be >= 1");
    detail::check_training_set(train);

    Forest forest;
    forest.n_classes = detail::max_label(train);
    forest.seed = seed;
    forest.params = params;
    forest.trees.reserve(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        detail::TreeBuilder builder(train, params, forest.n_classes, forest.feature_count,
                                    detail::mix_seed(seed, t));
        builder.grow();
        forest.trees.push_back(std::move(builder.tree));
    }
    return forest;
}

/// Adds `extra_trees` trees grown on `train` while leaving every existing
/// tree untouched. New classes enlarge n_classes.
inline Forest warm_start_extend(const Forest& forest, const std::vector<FrameVector>& train,
                                std::size_t extra_trees) {
    detail::check_training_set(train);
    Forest grown = forest;
    grown.n_classes = std::max(forest.n_classes, detail::max_label(train));
    grown.trees.reserve(forest.trees.size() + extra_trees);
    for (std::size_t t = 0; t < extra_trees; ++t) {
        detail::TreeBuilder builder(train, grown.params, grown.n_classes, grown.feature_count,
                                    detail::mix_seed(grown.seed, forest.trees.size() + t));
        builder.grow();
        grown.trees.push_back(std::move(builder.tree));
    }
    return grown;
}

/// Majority vote across all trees; ties break toward the lowest class id.
inline Prediction predict(const Forest& forest, const FrameVector& vector) {
    for (std::size_t f = 0; f < vector.features.size(); ++f)
        if (!std::isfinite(vector.features[f])) throw NonFiniteFeatureError(f);

    Prediction out;
    out.votes.assign(static_cast<std::size_t>(forest.n_classes), 0);
    for (const auto& tree : forest.trees) {
        const int label = tree.predict(vector.features);
        if (label >= 1 && label <= forest.n_classes)
            ++out.votes[static_cast<std::size_t>(label - 1)];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < out.votes.size(); ++c)
        if (out.votes[c] > out.votes[best]) best = c;
    out.label = static_cast<int>(best) + 1;
    return out;
}

/// Concatenates the member forests' trees in order; the class set is the
/// union. Votes of the combination equal the summed member votes.
inline Forest combine(const std::vector<Forest>& forests) {
    if (forests.empty()) throw IncompatibleForestsError("no forests to combine");
    Forest out;
    out.feature_count = forests.front().feature_count;
    out.seed = forests.front().seed;
    out.params = forests.front().params;
    for (const auto& f : forests) {
        if (f.feature_count != out.feature_count)
            throw IncompatibleForestsError("feature_count differs between forests");
        out.n_classes = std::max(out.n_classes, f.n_classes);
        out.trees.insert(out.trees.end(), f.trees.begin(), f.trees.end());
    }
    return out;
}

/// Mean decrease in Gini impurity per feature, normalized to sum to 1.
/// Node sample counts are reconstructed from the leaf counts.
inline std::array<double, kFeatureCount> feature_importance(const Forest& forest) {
    std::array<double, kFeatureCount> total{};
    std::size_t trees_with_splits = 0;

    for (const auto& tree : forest.trees) {
        // bottom-up class counts per node (children precede their parent is
        // not guaranteed, so resolve recursively with memoization)
        std::vector<std::vector<std::uint32_t>> counts(tree.nodes.size());
        auto resolve = [&](auto&& self, std::size_t n) -> const std::vector<std::uint32_t>& {
            if (!counts[n].empty() || tree.nodes[n].is_leaf())
                return tree.nodes[n].is_leaf() ? tree.nodes[n].class_counts : counts[n];
            const auto& l = self(self, static_cast<std::size_t>(tree.nodes[n].left));
            const auto& r = self(self, static_cast<std::size_t>(tree.nodes[n].right));
            counts[n].assign(std::max(l.size(), r.size()), 0);
            for (std::size_t c = 0; c < l.size(); ++c) counts[n][c] += l[c];
            for (std::size_t c = 0; c < r.size(); ++c) counts[n][c] += r[c];
            return counts[n];
        };

        std::array<double, kFeatureCount> tree_imp{};
        bool has_split = false;
        const double root_total = [&] {
            const auto& rc = resolve(resolve, 0);
            return static_cast<double>(std::accumulate(rc.begin(), rc.end(), 0u));
        }();
        if (root_total == 0.0) continue;
        for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
            const auto& node = tree.nodes[n];
            if (node.is_leaf()) continue;
            has_split = true;
            const auto& nc = resolve(resolve, n);
            const auto& lc = resolve(resolve, static_cast<std::size_t>(node.left));
            const auto& rc = resolve(resolve, static_cast<std::size_t>(node.right));
            const auto nt = std::accumulate(nc.begin(), nc.end(), 0u);
            const auto lt = std::accumulate(lc.begin(), lc.end(), 0u);
            const auto rt = std::accumulate(rc.begin(), rc.end(), 0u);
            const double decrease =
                detail::gini(nc, nt) -
                (static_cast<double>(lt) * detail::gini(lc, lt) +
                 static_cast<double>(rt) * detail::gini(rc, rt)) /
                    static_cast<double>(nt);
            tree_imp[static_cast<std::size_t>(node.feature_index)] +=
                static_cast<double>(nt) / root_total * decrease;
        }
        if (!has_split) continue;
        ++trees_with_splits;
        const double sum = std::accumulate(tree_imp.begin(), tree_imp.end(), 0.0);
        if (sum > 0.0)
            for (std::size_t f = 0; f < kFeatureCount; ++f) total[f] += tree_imp[f] / sum;
    }

    if (trees_with_splits == 0) throw StumplessForestError();
    for (auto& t : total) t /= static_cast<double>(trees_with_splits);
    return total;
}

}  // namespace dxr
