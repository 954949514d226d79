#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "dxr/error.hpp"
#include "dxr/trace.hpp"

namespace dxr {

/// A contiguous window of exactly `segment_size` packets from one trace.
struct Segment {
    std::vector<PacketRecord> packets;
    int label = 0;
    std::size_t index = 0;  // ordinal k within its trace
    std::size_t segment_size = 0;

    double duration() const {
        return packets.empty() ? 0.0 : packets.back().timestamp - packets.front().timestamp;
    }
};

/// Partitions a trace into floor(n/size) non-overlapping consecutive
/// segments; a trailing remainder shorter than `size` is discarded.
inline std::vector<Segment> segment(const LabeledTrace& trace, std::size_t size) {
    if (size == 0) throw SizeZeroError();
    const std::size_t count = trace.packets.size() / size;
    std::vector<Segment> segments;
    segments.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Segment s;
        s.packets.assign(trace.packets.begin() + static_cast<std::ptrdiff_t>(k * size),
                         trace.packets.begin() + static_cast<std::ptrdiff_t>((k + 1) * size));
        s.label = trace.service_label;
        s.index = k;
        s.segment_size = size;
        segments.push_back(std::move(s));
    }
    return segments;
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic train/validation split. `label_of` extracts the class of an
/// element. Stratified per class when every class has >= 2 elements; the
/// validation partition holds round(ratio * n) elements either way.
template <class T, class LabelOf>
inline std::pair<std::vector<T>, std::vector<T>> split_train_val(const std::vector<T>& items,
                                                                 double ratio,
                                                                 std::uint64_t seed,
                                                                 LabelOf label_of) {
    const std::size_t n = items.size();
    if (n < 2) throw DegenerateSplitError("need at least 2 items to split");
    const auto target_val =
        static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    if (target_val == 0 || target_val >= n)
        throw DegenerateSplitError("validation partition would hold " +
                                   std::to_string(target_val) + " of " + std::to_string(n) +
                                   " items");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[label_of(items[i])].push_back(i);
    bool stratify = true;
    for (const auto& [label, idx] : by_class)
        if (idx.size() < 2) stratify = false;

    std::vector<std::size_t> val_indices;
    if (!stratify) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(detail::mix_seed(seed, 0));
        std::shuffle(order.begin(), order.end(), rng);
        val_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target_val));
    } else {
        // largest-remainder quotas keep the total at exactly target_val
        std::vector<std::pair<int, std::vector<std::size_t>>> classes(by_class.begin(),
                                                                      by_class.end());
        std::size_t assigned = 0;
        std::vector<std::size_t> quota(classes.size());
        std::vector<std::pair<double, std::size_t>> remainders;
        for (std::size_t c = 0; c < classes.size(); ++c) {
            const double ideal = ratio * static_cast<double>(classes[c].second.size());
            quota[c] = static_cast<std::size_t>(ideal);
            assigned += quota[c];
            remainders.push_back({ideal - std::floor(ideal), c});
        }
        std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        // sum of floors never exceeds round(ratio*n), so only top-ups remain
        for (std::size_t r = 0; assigned < target_val; ++r) {
            const std::size_t c = remainders[r % remainders.size()].second;
            if (quota[c] < classes[c].second.size()) {
                ++quota[c];
                ++assigned;
            }
        }
        std::uint64_t salt = 1;
        for (std::size_t c = 0; c < classes.size(); ++c) {
            auto& idx = classes[c].second;
            std::mt19937_64 rng(detail::mix_seed(seed, salt++));
            std::shuffle(idx.begin(), idx.end(), rng);
            val_indices.insert(val_indices.end(), idx.begin(),
                               idx.begin() + static_cast<std::ptrdiff_t>(quota[c]));
        }
    }

    std::vector<bool> in_val(n, false);
    for (std::size_t i : val_indices) in_val[i] = true;
    std::pair<std::vector<T>, std::vector<T>> out;
    out.first.reserve(n - target_val);
    out.second.reserve(target_val);
    for (std::size_t i = 0; i < n; ++i) (in_val[i] ? out.second : out.first).push_back(items[i]);
    return out;
}

}  // namespace dxr
