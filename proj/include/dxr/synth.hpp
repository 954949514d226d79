#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dxr/error.hpp"
#include "dxr/trace.hpp"

namespace dxr {

/// Closed range; lo == hi pins the value.
struct UniformReal {
    double lo = 0.0;
    double hi = 0.0;

    double draw(std::mt19937_64& rng) const {
        if (lo == hi) return lo;
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    }
};

struct UniformInt {
    std::size_t lo = 0;
    std::size_t hi = 0;

    std::size_t draw(std::mt19937_64& rng) const {
        if (lo == hi) return lo;
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    }
};

/// Parameters of one synthetic service. Frames are bursts of large downlink
/// packets; control packets are scattered through the inter-frame gaps so a
/// clean profile never breaks its own bursts. The mid-frame pause knobs
/// inject the chat-style irregularity that defeats frame identification.
struct ServiceProfile {
    std::string name;
    double frame_rate = 60.0;  // Hz
    UniformInt packets_per_frame{10, 10};
    UniformReal frame_packet_length{1200, 1200};  // bytes
    UniformReal intra_frame_iat{1e-4, 1e-4};      // seconds
    double control_packet_rate = 50.0;            // Hz
    UniformReal control_packet_length{80, 200};   // bytes
    double uplink_fraction = 0.5;                 // of control packets
    double jitter = 0.0;    // relative std of the inter-frame gap
    double duration = 10.0; // seconds
    std::uint64_t seed = 1;

    double mid_frame_pause_prob = 0.0;
    UniformReal mid_frame_pause{0.0, 0.0};

    // declared per-feature coefficient-of-variation bound across segments
    double similarity_cv_bound = 0.6;
};

struct GroundTruthFrame {
    double start_time = 0.0;
    double end_time = 0.0;
    std::size_t packet_count = 0;
};

struct SyntheticTrace {
    LabeledTrace trace;
    std::vector<GroundTruthFrame> frames;  // generator ground truth
    ServiceProfile profile;
};

namespace detail {

inline void validate_profile(const ServiceProfile& p) {
    if (!(p.frame_rate > 0.0)) throw InvalidProfileError("frame_rate must be > 0");
    if (!(p.duration > 0.0)) throw InvalidProfileError("duration must be > 0");
    if (p.packets_per_frame.lo < 1 || p.packets_per_frame.lo > p.packets_per_frame.hi)
        throw InvalidProfileError("packets_per_frame range invalid");
    if (!(p.frame_packet_length.lo > 0.0) || p.frame_packet_length.lo > p.frame_packet_length.hi)
        throw InvalidProfileError("frame_packet_length range invalid");
    if (!(p.intra_frame_iat.lo > 0.0) || p.intra_frame_iat.lo > p.intra_frame_iat.hi)
        throw InvalidProfileError("intra_frame_iat range invalid");
    if (p.control_packet_rate > 0.0 &&
        (!(p.control_packet_length.lo > 0.0) ||
         p.control_packet_length.lo > p.control_packet_length.hi))
        throw InvalidProfileError("control_packet_length range invalid");
    if (p.uplink_fraction < 0.0 || p.uplink_fraction > 1.0)
        throw InvalidProfileError("uplink_fraction outside [0,1]");
    if (p.mid_frame_pause_prob > 0.0 && p.packets_per_frame.lo < 4)
        throw InvalidProfileError("mid-frame pauses need >= 4 packets per frame");
    // a frame, pause included, must fit well inside its period
    const double worst_tx =
        static_cast<double>(p.packets_per_frame.hi - 1) * p.intra_frame_iat.hi +
        (p.mid_frame_pause_prob > 0.0 ? p.mid_frame_pause.hi : 0.0);
    if (worst_tx > 0.9 / p.frame_rate)
        throw InvalidProfileError("frame transmission does not fit inside the frame period");
}

}  // namespace detail

/// Deterministic per seed. Timestamps are strictly increasing and stored
/// iats equal the timestamp differences, so generated traces satisfy every
/// ingest invariant.
inline SyntheticTrace generate(const ServiceProfile& profile, int label) {
    detail::validate_profile(profile);
    std::mt19937_64 rng(profile.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    struct RawPacket {
        double t;
        double len;
        Direction dir;
    };
    std::vector<RawPacket> packets;
    SyntheticTrace out;
    out.profile = profile;

    // frame bursts; with zero jitter the k-th frame starts at exactly k/rate
    // so a d-second trace holds exactly floor(d * rate) frames
    const double nominal_gap = 1.0 / profile.frame_rate;
    double jitter_offset = 0.0;
    for (std::size_t k = 0;; ++k) {
        const double start = static_cast<double>(k) * nominal_gap + jitter_offset;
        if (start >= profile.duration - 1e-12) break;
        GroundTruthFrame truth;
        truth.start_time = start;

        const std::size_t n = profile.packets_per_frame.draw(rng);
        std::size_t pause_after = 0;  // gap index, 0 = none
        double pause = 0.0;
        if (profile.mid_frame_pause_prob > 0.0 &&
            std::uniform_real_distribution<double>(0.0, 1.0)(rng) <
                profile.mid_frame_pause_prob) {
            // interior gap so both halves keep at least two packets
            pause_after = std::uniform_int_distribution<std::size_t>(1, n - 3)(rng);
            pause = profile.mid_frame_pause.draw(rng);
        }

        double t = start;
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0) {
                t += profile.intra_frame_iat.draw(rng);
                if (pause_after > 0 && i == pause_after + 1) t += pause;
            }
            packets.push_back({t, std::floor(profile.frame_packet_length.draw(rng)),
                               Direction::kDownlink});
        }
        truth.end_time = t;
        truth.packet_count = n;
        out.frames.push_back(truth);

        if (profile.jitter > 0.0) {
            const double wobble = nominal_gap * profile.jitter * normal(rng);
            jitter_offset = std::max(jitter_offset + wobble,
                                     t - static_cast<double>(k + 1) * nominal_gap + 1e-5);
        }
    }

    // control packets, scattered over the gaps between bursts
    const auto n_control =
        static_cast<std::size_t>(std::llround(profile.control_packet_rate * profile.duration));
    if (n_control > 0) {
        struct Gap {
            double begin, end;
        };
        std::vector<Gap> gaps;
        for (std::size_t f = 0; f + 1 < out.frames.size(); ++f) {
            const double begin = out.frames[f].end_time + 1e-6;
            const double end = out.frames[f + 1].start_time - 1e-6;
            if (end > begin) gaps.push_back({begin, end});
        }
        if (!out.frames.empty() && profile.duration > out.frames.back().end_time + 2e-6)
            gaps.push_back({out.frames.back().end_time + 1e-6, profile.duration - 1e-6});
        double total = 0.0;
        for (const auto& g : gaps) total += g.end - g.begin;
        if (total > 0.0) {
            std::uniform_real_distribution<double> pick(0.0, total);
            std::uniform_real_distribution<double> coin(0.0, 1.0);
            for (std::size_t c = 0; c < n_control; ++c) {
                double u = pick(rng);
                double t = gaps.back().end;
                for (const auto& g : gaps) {
                    const double span = g.end - g.begin;
                    if (u <= span) {
                        t = g.begin + u;
                        break;
                    }
                    u -= span;
                }
                const Direction dir = coin(rng) < profile.uplink_fraction
                                          ? Direction::kUplink
                                          : Direction::kDownlink;
                packets.push_back(
                    {t, std::floor(profile.control_packet_length.draw(rng)), dir});
            }
        }
    }

    std::stable_sort(packets.begin(), packets.end(),
                     [](const RawPacket& a, const RawPacket& b) { return a.t < b.t; });
    for (std::size_t i = 1; i < packets.size(); ++i)
        if (packets[i].t <= packets[i - 1].t) packets[i].t = packets[i - 1].t + 1e-9;

    out.trace.service_label = label;
    out.trace.service_name = profile.name;
    out.trace.packets.reserve(packets.size());
    for (std::size_t i = 0; i < packets.size(); ++i) {
        PacketRecord rec;
        rec.timestamp = packets[i].t;
        rec.length = packets[i].len;
        rec.direction = packets[i].dir;
        rec.iat = i == 0 ? 0.0 : packets[i].t - packets[i - 1].t;
        out.trace.packets.push_back(rec);
    }
    if (out.trace.packets.empty()) throw InvalidProfileError("profile generates no packets");
    return out;
}

/// Five distinguishable service presets. The chat-like profile's mid-frame
/// pauses reproduce the known frame-identification failure mode; the others
/// are clean enough for sub-1% frame-rate recovery.
inline std::vector<ServiceProfile> preset_suite() {
    std::vector<ServiceProfile> suite(5);

    suite[0].name = "vr_video";
    suite[0].frame_rate = 60.0;
    suite[0].packets_per_frame = {12, 16};
    suite[0].frame_packet_length = {1100, 1300};
    suite[0].intra_frame_iat = {0.8e-4, 1.2e-4};
    suite[0].control_packet_rate = 50.0;
    suite[0].control_packet_length = {60, 200};
    suite[0].uplink_fraction = 0.5;
    suite[0].seed = 101;
    suite[0].similarity_cv_bound = 0.5;

    suite[1].name = "vr_game";
    suite[1].frame_rate = 72.0;
    suite[1].packets_per_frame = {18, 24};
    suite[1].frame_packet_length = {1200, 1400};
    suite[1].intra_frame_iat = {0.5e-4, 0.9e-4};
    suite[1].control_packet_rate = 120.0;
    suite[1].control_packet_length = {80, 250};
    suite[1].uplink_fraction = 0.6;
    suite[1].seed = 102;
    suite[1].similarity_cv_bound = 0.5;

    suite[2].name = "vr_chat";
    suite[2].frame_rate = 60.0;
    suite[2].packets_per_frame = {4, 6};
    suite[2].frame_packet_length = {500, 900};
    suite[2].intra_frame_iat = {1.0e-4, 1.4e-4};
    suite[2].control_packet_rate = 160.0;
    suite[2].control_packet_length = {60, 160};
    suite[2].uplink_fraction = 0.5;
    suite[2].seed = 103;
    suite[2].mid_frame_pause_prob = 0.45;
    suite[2].mid_frame_pause = {5.0e-3, 5.1e-3};
    suite[2].similarity_cv_bound = 0.8;

    suite[3].name = "ar";
    suite[3].frame_rate = 45.0;
    suite[3].packets_per_frame = {10, 10};
    suite[3].frame_packet_length = {900, 1100};
    suite[3].intra_frame_iat = {1.0e-4, 1.0e-4};
    suite[3].control_packet_rate = 20.0;
    suite[3].control_packet_length = {60, 140};
    suite[3].uplink_fraction = 0.7;
    suite[3].seed = 104;
    suite[3].similarity_cv_bound = 0.5;

    suite[4].name = "mr";
    suite[4].frame_rate = 90.0;
    suite[4].packets_per_frame = {6, 9};
    suite[4].frame_packet_length = {1300, 1500};
    suite[4].intra_frame_iat = {0.6e-4, 1.0e-4};
    suite[4].control_packet_rate = 80.0;
    suite[4].control_packet_length = {100, 300};
    suite[4].uplink_fraction = 0.4;
    suite[4].seed = 105;
    suite[4].similarity_cv_bound = 0.5;

    return suite;
}

/// Looks a preset up by name; empty optional when unknown.
inline std::optional<ServiceProfile> preset_by_name(const std::string& name) {
    for (auto& p : preset_suite())
        if (p.name == name) return p;
    return std::nullopt;
}

}  // namespace dxr
