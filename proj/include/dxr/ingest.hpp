#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dxr/csv.hpp"
#include "dxr/error.hpp"
#include "dxr/trace.hpp"

namespace dxr {

/// How packet direction is encoded in a capture export.
enum class DirectionEncoding {
    kKeyword,       // text column matched against down/up keyword lists
    kSignedLength,  // negative length means uplink
    kIpPair,        // dst == client_address means downlink
};

/// Maps CSV columns onto the four raw features. Defaults match the
/// standard schema this library itself writes (timestamp,length,direction,iat).
struct ColumnMapping {
    std::string timestamp = "timestamp";
    std::string length = "length";
    std::string direction = "direction";      // unused for kSignedLength
    std::optional<std::string> iat = "iat";   // absent -> derived from timestamps

    DirectionEncoding encoding = DirectionEncoding::kKeyword;
    std::vector<std::string> downlink_keywords = {"downlink", "down", "dl", "d", "rx", "in"};
    std::vector<std::string> uplink_keywords = {"uplink", "up", "ul", "u", "tx", "out"};

    // kIpPair only
    std::string src_column = "src";
    std::string dst_column = "dst";
    std::string client_address;
};

namespace detail {

inline double parse_real(const std::string& cell, std::size_t row, const std::string& column) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw CsvParseError(row, column, "not a number: '" + cell + "'");
    return value;
}

inline std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
    const std::string want = csv::lower(name);
    for (std::size_t i = 0; i < header.size(); ++i)
        if (csv::lower(header[i]) == want) return i;
    throw MissingColumnError(name);
}

inline bool keyword_match(const std::string& cell, const std::vector<std::string>& keywords) {
    const std::string c = csv::lower(cell);
    for (const auto& k : keywords)
        if (c == k) return true;
    return false;
}

}  // namespace detail

/// Parses a labeled packet trace from CSV text. Row numbers in errors are
/// 1-based data rows (the header does not count).
inline LabeledTrace parse_trace_csv(const std::string& text, int label,
                                    const std::string& service_name,
                                    const ColumnMapping& schema = {}) {
    const auto lines = csv::split_lines(text);
    if (lines.empty()) throw EmptyTraceError("no header row");
    const auto header = csv::split_line(lines[0]);

    const std::size_t ts_col = detail::find_column(header, schema.timestamp);
    const std::size_t len_col = detail::find_column(header, schema.length);
    std::size_t dir_col = 0, src_col = 0, dst_col = 0;
    if (schema.encoding == DirectionEncoding::kKeyword)
        dir_col = detail::find_column(header, schema.direction);
    if (schema.encoding == DirectionEncoding::kIpPair) {
        src_col = detail::find_column(header, schema.src_column);
        dst_col = detail::find_column(header, schema.dst_column);
        (void)src_col;
    }
    std::optional<std::size_t> iat_col;
    if (schema.iat) {
        // the iat column is optional even when named: fall back to derivation
        const std::string want = csv::lower(*schema.iat);
        for (std::size_t i = 0; i < header.size(); ++i)
            if (csv::lower(header[i]) == want) iat_col = i;
    }

    LabeledTrace trace;
    trace.service_label = label;
    trace.service_name = service_name;
    trace.packets.reserve(lines.size() - 1);

    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::size_t row = li;  // 1-based data row
        const auto cells = csv::split_line(lines[li]);
        const std::size_t needed =
            std::max({ts_col, len_col,
                      schema.encoding == DirectionEncoding::kKeyword ? dir_col : std::size_t{0},
                      schema.encoding == DirectionEncoding::kIpPair ? dst_col : std::size_t{0},
                      iat_col.value_or(0)});
        if (cells.size() <= needed)
            throw CsvParseError(row, "", "expected at least " + std::to_string(needed + 1) +
                                             " cells, got " + std::to_string(cells.size()));

        PacketRecord rec;
        rec.timestamp = detail::parse_real(cells[ts_col], row, schema.timestamp);
        double raw_len = detail::parse_real(cells[len_col], row, schema.length);

        switch (schema.encoding) {
            case DirectionEncoding::kKeyword: {
                const std::string& cell = cells[dir_col];
                if (detail::keyword_match(cell, schema.downlink_keywords))
                    rec.direction = Direction::kDownlink;
                else if (detail::keyword_match(cell, schema.uplink_keywords))
                    rec.direction = Direction::kUplink;
                else
                    throw CsvParseError(row, schema.direction,
                                        "unrecognized direction '" + cell + "'");
                break;
            }
            case DirectionEncoding::kSignedLength:
                rec.direction = raw_len < 0 ? Direction::kUplink : Direction::kDownlink;
                raw_len = std::fabs(raw_len);
                break;
            case DirectionEncoding::kIpPair:
                rec.direction = cells[dst_col] == schema.client_address ? Direction::kDownlink
                                                                        : Direction::kUplink;
                break;
        }
        rec.length = raw_len;

        if (!trace.packets.empty() && rec.timestamp < trace.packets.back().timestamp)
            throw NonMonotonicTimeError(row, trace.packets.back().timestamp, rec.timestamp);

        if (iat_col)
            rec.iat = detail::parse_real(cells[*iat_col], row, *schema.iat);
        else
            rec.iat = trace.packets.empty() ? 0.0
                                            : rec.timestamp - trace.packets.back().timestamp;
        trace.packets.push_back(rec);
    }

    if (trace.packets.empty()) throw EmptyTraceError();
    return trace;
}

/// Loads a labeled trace from a CSV file (gzip accepted, detected by .gz).
inline LabeledTrace load_trace(const std::string& path, int label,
                               const std::string& service_name,
                               const ColumnMapping& schema = {}) {
    return parse_trace_csv(csv::slurp(path), label, service_name, schema);
}

/// Writes the standard schema: timestamp,length,direction,iat. Times carry
/// nine decimals so a re-load agrees within 1e-9.
inline void write_trace_csv(const LabeledTrace& trace, std::ostream& out) {
    out << "timestamp,length,direction,iat\n";
    char buf[128];
    for (const auto& p : trace.packets) {
        std::snprintf(buf, sizeof buf, "%.9f,%.0f,%s,%.9f\n", p.timestamp, p.length,
                      to_string(p.direction), p.iat);
        out << buf;
    }
}

}  // namespace dxr
