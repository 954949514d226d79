#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "dxr/error.hpp"
#include "dxr/segment.hpp"

namespace dxr {

/// Tuning knobs for frame identification.
struct FiaConfig {
    double bin_width = 1e-4;            // iat histogram bin width, seconds
    double prominence_fraction = 0.05;  // peak must reach this fraction of the tallest bin
    std::size_t min_packets_per_frame = 2;
    double fallback_dur_th = 0.005;     // used when the iat histogram is unimodal
    std::optional<double> len_th_abs;   // absolute override for the 25%-of-max rule
    bool per_trace_thresholds = false;  // compute thresholds once per trace instead of per segment
};

/// Thresholds in force for one segment: the packet-length floor and the
/// maximum intra-frame gap, derived from the two inter-arrival-time modes.
struct FiaThresholds {
    double len_th = 0.0;  // bytes
    double dur_th = 0.0;  // seconds
    double t1 = 0.0;      // first iat mode, seconds
    double t2 = 0.0;      // second iat mode, seconds
};

/// A run of large, tightly spaced downlink packets.
struct Frame {
    std::size_t start_index = 0;  // packet ordinal within the segment
    std::size_t end_index = 0;    // inclusive
    double start_time = 0.0;
    double end_time = 0.0;
    std::size_t packet_count = 0;
    double byte_total = 0.0;

    double duration() const { return end_time - start_time; }
};

struct FrameSet {
    std::vector<Frame> frames;
    FiaThresholds thresholds;
    double segment_duration = 0.0;

    std::size_t count() const { return frames.size(); }

    /// Mean gap between consecutive frame start times; 0 with fewer than 2 frames.
    double avg_frame_iat() const {
        if (frames.size() < 2) return 0.0;
        return (frames.back().start_time - frames.front().start_time) /
               static_cast<double>(frames.size() - 1);
    }

    double total_frame_duration() const {
        double total = 0.0;
        for (const auto& f : frames) total += f.duration();
        return total;
    }
};

/// 25% of the maximum observed packet length, floored to whole bytes.
/// A configured absolute override replaces the rule.
inline double length_threshold(const Segment& seg, const FiaConfig& config = {}) {
    if (seg.packets.empty()) throw EmptySegmentError();
    if (config.len_th_abs) return *config.len_th_abs;
    double max_len = 0.0;
    for (const auto& p : seg.packets) max_len = std::max(max_len, p.length);
    return std::floor(0.25 * max_len);
}

/// Centers of the first two qualifying local maxima of the iat histogram,
/// in ascending iat order. A peak qualifies when its count reaches
/// prominence_fraction of the tallest bin.
inline std::pair<double, double> iat_modes(const Segment& seg, double bin_width,
                                           double prominence_fraction = 0.05) {
    if (seg.packets.size() < 2) throw EmptySegmentError();
    if (!(bin_width > 0.0)) throw Error("bin_width must be > 0");

    double max_iat = 0.0;
    for (const auto& p : seg.packets) max_iat = std::max(max_iat, p.iat);
    const auto bin_count = static_cast<std::size_t>(max_iat / bin_width) + 1;
    std::vector<std::uint32_t> hist(bin_count, 0);
    for (const auto& p : seg.packets) {
        auto b = static_cast<std::size_t>(p.iat / bin_width);
        if (b >= bin_count) b = bin_count - 1;
        ++hist[b];
    }

    const std::uint32_t tallest = *std::max_element(hist.begin(), hist.end());
    const double min_count = prominence_fraction * static_cast<double>(tallest);

    // plateau-aware local maxima: compare against the nearest differing
    // neighbours, take the first bin of a flat top
    std::vector<std::size_t> peaks;
    for (std::size_t i = 0; i < bin_count; ++i) {
        if (hist[i] == 0 || static_cast<double>(hist[i]) < min_count) continue;
        if (i > 0 && hist[i - 1] >= hist[i]) continue;
        std::size_t j = i;
        while (j + 1 < bin_count && hist[j + 1] == hist[i]) ++j;
        if (j + 1 < bin_count && hist[j + 1] > hist[i]) continue;
        peaks.push_back(i);
        if (peaks.size() == 2) break;
    }
    if (peaks.size() < 2) throw UnimodalDistributionError(peaks.size());

    const double t1 = (static_cast<double>(peaks[0]) + 0.5) * bin_width;
    const double t2 = (static_cast<double>(peaks[1]) + 0.5) * bin_width;
    return {t1, t2};
}

/// len_th from the length rule; dur_th = t2 - t1 clamped into [t1, t2].
/// Falls back to config.fallback_dur_th when the iat histogram is unimodal.
inline FiaThresholds compute_thresholds(const Segment& seg, const FiaConfig& config = {}) {
    FiaThresholds th;
    th.len_th = length_threshold(seg, config);
    try {
        auto [t1, t2] = iat_modes(seg, config.bin_width, config.prominence_fraction);
        th.t1 = t1;
        th.t2 = t2;
        th.dur_th = std::clamp(t2 - t1, t1, t2);
    } catch (const UnimodalDistributionError&) {
        th.dur_th = config.fallback_dur_th;
        th.t1 = config.fallback_dur_th;
        th.t2 = 2.0 * config.fallback_dur_th;
    } catch (const EmptySegmentError&) {
        // single-packet segment: no iat structure to read
        th.dur_th = config.fallback_dur_th;
        th.t1 = config.fallback_dur_th;
        th.t2 = 2.0 * config.fallback_dur_th;
    }
    return th;
}

/// Scans the segment for maximal runs of >= min_packets_per_frame consecutive
/// downlink packets, each of length >= len_th, with every intra-run iat
/// <= dur_th. Packets with significant inter-arrival times never join a run,
/// so separately transmitted frames stay separate.
inline FrameSet identify_frames(const Segment& seg, const FiaThresholds& thresholds,
                                std::size_t min_packets_per_frame = 2) {
    FrameSet set;
    set.thresholds = thresholds;
    set.segment_duration = seg.duration();

    const auto& p = seg.packets;
    auto qualifies = [&](std::size_t i) {
        return p[i].direction == Direction::kDownlink && p[i].length >= thresholds.len_th;
    };

    std::size_t i = 0;
    while (i < p.size()) {
        if (!qualifies(i)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < p.size() && qualifies(j + 1) && p[j + 1].iat <= thresholds.dur_th) ++j;
        const std::size_t run = j - i + 1;
        if (run >= min_packets_per_frame) {
            Frame f;
            f.start_index = i;
            f.end_index = j;
            f.start_time = p[i].timestamp;
            f.end_time = p[j].timestamp;
            f.packet_count = run;
            for (std::size_t k = i; k <= j; ++k) f.byte_total += p[k].length;
            set.frames.push_back(f);
        }
        i = j + 1;
    }
    return set;
}

/// Frames per second over the segment's wall-clock span.
inline double frame_rate(const FrameSet& frames) {
    if (!(frames.segment_duration > 0.0)) throw ZeroDurationError();
    return static_cast<double>(frames.count()) / frames.segment_duration;
}

}  // namespace dxr
