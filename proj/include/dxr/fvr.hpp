#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "dxr/fia.hpp"
#include "dxr/segment.hpp"

namespace dxr {

inline constexpr std::size_t kFeatureCount = 13;

/// Frozen feature order; persisted in every model file so trained models
/// stay reproducible against this contract.
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "pkt_len_mean",        // 1
    "pkt_len_std",         // 2
    "pkt_len_min",         // 3
    "pkt_len_max",         // 4
    "iat_mean",            // 5
    "iat_std",             // 6
    "iat_max",             // 7
    "downlink_fraction",   // 8
    "total_bytes",         // 9
    "duration",            // 10
    "frame_count",         // 11
    "avg_frame_iat",       // 12
    "total_frame_duration" // 13
};

/// The statistical vector one segment maps to, with its service label.
struct FrameVector {
    std::array<double, kFeatureCount> features{};
    int label = 0;
    std::size_t segment_index = 0;
};

namespace detail {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd ms;
    if (xs.empty()) return ms;
    for (double x : xs) ms.mean += x;
    ms.mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - ms.mean) * (x - ms.mean);
    ms.std = std::sqrt(ss / static_cast<double>(xs.size()));
    return ms;
}

}  // namespace detail

/// The feature transformation: ten raw-traffic statistics plus the three
/// frame-derived features from the identified frame set. Thresholds come
/// from the segment itself unless `pinned` supplies precomputed ones.
inline FrameVector vectorize(const Segment& seg, const FiaConfig& fia_config = {},
                             const FiaThresholds* pinned = nullptr) {
    if (seg.packets.empty()) throw EmptySegmentError();

    std::vector<double> lengths, iats;
    lengths.reserve(seg.packets.size());
    iats.reserve(seg.packets.size());
    double len_min = seg.packets.front().length, len_max = 0.0, iat_max = 0.0;
    double total_bytes = 0.0;
    std::size_t downlink = 0;
    for (const auto& p : seg.packets) {
        lengths.push_back(p.length);
        iats.push_back(p.iat);
        len_min = std::min(len_min, p.length);
        len_max = std::max(len_max, p.length);
        iat_max = std::max(iat_max, p.iat);
        total_bytes += p.length;
        if (p.direction == Direction::kDownlink) ++downlink;
    }
    const auto len_ms = detail::mean_std(lengths);
    const auto iat_ms = detail::mean_std(iats);

    const FiaThresholds thresholds = pinned ? *pinned : compute_thresholds(seg, fia_config);
    const FrameSet frames = identify_frames(seg, thresholds, fia_config.min_packets_per_frame);

    FrameVector v;
    v.label = seg.label;
    v.segment_index = seg.index;
    v.features = {
        len_ms.mean,
        len_ms.std,
        len_min,
        len_max,
        iat_ms.mean,
        iat_ms.std,
        iat_max,
        static_cast<double>(downlink) / static_cast<double>(seg.packets.size()),
        total_bytes,
        seg.duration(),
        static_cast<double>(frames.count()),
        frames.avg_frame_iat(),
        frames.total_frame_duration(),
    };
    return v;
}

/// Maps vectorize over segment(trace, size), preserving order. With
/// per-trace thresholds enabled the thresholds are computed once from the
/// whole trace and reused for every segment.
inline std::vector<FrameVector> vectorize_trace(const LabeledTrace& trace, std::size_t size,
                                                const FiaConfig& fia_config = {}) {
    const auto segments = segment(trace, size);
    std::vector<FrameVector> vectors;
    vectors.reserve(segments.size());
    if (fia_config.per_trace_thresholds && !trace.packets.empty()) {
        Segment whole;
        whole.packets = trace.packets;
        whole.label = trace.service_label;
        whole.segment_size = trace.packets.size();
        const FiaThresholds th = compute_thresholds(whole, fia_config);
        for (const auto& s : segments) vectors.push_back(vectorize(s, fia_config, &th));
        return vectors;
    }
    for (const auto& s : segments) vectors.push_back(vectorize(s, fia_config));
    return vectors;
}

/// CSV export of a feature matrix: header = feature names + label.
inline void write_vectors_csv(const std::vector<FrameVector>& vectors, std::ostream& out) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) out << kFeatureNames[i] << ',';
    out << "label\n";
    char buf[64];
    for (const auto& v : vectors) {
        for (double f : v.features) {
            std::snprintf(buf, sizeof buf, "%.9g,", f);
            out << buf;
        }
        out << v.label << '\n';
    }
}

}  // namespace dxr
