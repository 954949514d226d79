#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace dxr {

enum class Direction : std::uint8_t { kDownlink = 0, kUplink = 1 };

inline const char* to_string(Direction d) {
    return d == Direction::kDownlink ? "downlink" : "uplink";
}

/// One packet's four application-level features.
struct PacketRecord {
    double timestamp = 0.0;  // seconds since trace start
    double length = 0.0;     // bytes
    Direction direction = Direction::kDownlink;
    double iat = 0.0;  // seconds since previous packet; 0 for the first

    bool operator==(const PacketRecord&) const = default;
};

/// An ordered packet sequence with its service class.
struct LabeledTrace {
    int service_label = 0;  // 1..C
    std::string service_name;
    std::vector<PacketRecord> packets;

    double duration() const {
        return packets.empty() ? 0.0 : packets.back().timestamp - packets.front().timestamp;
    }
};

/// Soft data-quality findings; loading succeeds regardless.
struct ValidationFinding {
    enum class Kind { kIatMismatch, kZeroLength, kDuplicateTimestamp };
    Kind kind;
    std::size_t row;  // 1-based packet index
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationFinding> findings;

    bool clean() const { return findings.empty(); }
    std::size_t count(ValidationFinding::Kind kind) const {
        std::size_t n = 0;
        for (const auto& f : findings)
            if (f.kind == kind) ++n;
        return n;
    }
};

/// Reports stored-iat/timestamp disagreements (beyond 1e-9), non-positive
/// lengths, and duplicate timestamps. The trace is not modified.
inline ValidationReport validate_trace(const LabeledTrace& trace) {
    ValidationReport report;
    const auto& p = trace.packets;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const std::size_t row = i + 1;
        const double expected_iat = i == 0 ? 0.0 : p[i].timestamp - p[i - 1].timestamp;
        if (std::fabs(p[i].iat - expected_iat) > 1e-9) {
            report.findings.push_back({ValidationFinding::Kind::kIatMismatch, row,
                                       "stored iat " + std::to_string(p[i].iat) +
                                           " != timestamp difference " +
                                           std::to_string(expected_iat)});
        }
        if (!(p[i].length > 0.0)) {
            report.findings.push_back(
                {ValidationFinding::Kind::kZeroLength, row, "non-positive packet length"});
        }
        if (i > 0 && p[i].timestamp == p[i - 1].timestamp) {
            report.findings.push_back(
                {ValidationFinding::Kind::kDuplicateTimestamp, row, "duplicate timestamp"});
        }
    }
    return report;
}

}  // namespace dxr
