#pragma once

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "clvid/cli/config.hpp"
#include "clvid/evalproto/aggregate.hpp"

namespace clvid::cli {

inline constexpr const char* kReportHeader = "experiment_id,strategy,buffer_capacity,delta,idd,cil_mean,til_mean,buffer_bytes";

struct ReportRow {
    std::size_t experiment_id = 0;
    std::string strategy;
    std::size_t buffer_capacity = 0;   // 0 for strategies without a buffer
    std::optional<double> delta;       // confidence gate threshold, if enabled
    bool idd = false;
    double cil_mean = 0.0;
    double til_mean = 0.0;
    std::uint64_t buffer_bytes = 0;
};

inline std::string delta_label(const std::optional<double>& d) {
    if (!d) return "off";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", *d);
    return buf;
}

inline ReportRow make_row(const RunConfig& cfg, const eval::EvalReport& r) {
    ReportRow row;
    row.experiment_id = r.experiment_id;
    row.strategy = strategy::to_string(cfg.strategy.kind);
    if (strategy::is_rehearsal(cfg.strategy.kind)) {
        row.buffer_capacity = cfg.training.buffer_capacity;
        if (cfg.gate.cdr_enabled) row.delta = cfg.gate.delta;
        row.idd = cfg.gate.idd_enabled;
    }
    row.cil_mean = r.cil_mean;
    row.til_mean = r.til_mean;
    row.buffer_bytes = r.buffer_bytes;
    return row;
}

inline std::string format_row(const ReportRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%s,%zu,%s,%s,%.6f,%.6f,%llu", r.experiment_id, r.strategy.c_str(), r.buffer_capacity,
                  delta_label(r.delta).c_str(), r.idd ? "on" : "off", r.cil_mean, r.til_mean,
                  static_cast<unsigned long long>(r.buffer_bytes));
    return buf;
}

inline std::string format_report(const std::vector<ReportRow>& rows) {
    std::string out = std::string(kReportHeader) + "\n";
    for (const auto& r : rows) out += format_row(r) + "\n";
    return out;
}

inline std::vector<ReportRow> parse_report(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != kReportHeader)
        throw FormatError("report.csv header mismatch: expected '" + std::string(kReportHeader) + "'", 0);
    std::vector<ReportRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_list(line);
        const std::string where = "report.csv line " + std::to_string(line_no);
        if (cells.size() != 8) throw ConfigError(where + ": expected 8 columns, found " + std::to_string(cells.size()));
        ReportRow r;
        r.experiment_id = detail::parse_size(where, cells[0]);
        r.strategy = cells[1];
        r.buffer_capacity = detail::parse_size(where, cells[2]);
        if (cells[3] != "off") r.delta = detail::parse_double(where, cells[3]);
        r.idd = detail::parse_bool(where, cells[4]);
        r.cil_mean = detail::parse_double(where, cells[5]);
        r.til_mean = detail::parse_double(where, cells[6]);
        r.buffer_bytes = detail::parse_u64(where, cells[7]);
        rows.push_back(std::move(r));
    }
    return rows;
}

struct SummaryRow {
    std::string strategy;
    std::size_t buffer_capacity = 0;
    std::optional<double> delta;
    bool idd = false;
    eval::Summary summary;
};

// Rows grouped by (strategy, buffer, delta, idd) in order of first appearance.
inline std::vector<SummaryRow> summarize(const std::vector<ReportRow>& rows) {
    std::vector<SummaryRow> out;
    std::vector<std::vector<eval::EvalReport>> groups;
    for (const auto& r : rows) {
        std::size_t g = 0;
        while (g < out.size() && !(out[g].strategy == r.strategy && out[g].buffer_capacity == r.buffer_capacity &&
                                   out[g].delta == r.delta && out[g].idd == r.idd))
            ++g;
        if (g == out.size()) {
            out.push_back({r.strategy, r.buffer_capacity, r.delta, r.idd, {}});
            groups.emplace_back();
        }
        eval::EvalReport e;
        e.experiment_id = r.experiment_id;
        e.cil_mean = r.cil_mean;
        e.til_mean = r.til_mean;
        e.buffer_bytes = r.buffer_bytes;
        groups[g].push_back(e);
    }
    for (std::size_t g = 0; g < out.size(); ++g) out[g].summary = eval::aggregate(groups[g]);
    return out;
}

// Table layout: strategy, rehearsal flag, C-IL and T-IL as percentages.
inline std::string format_summary(const std::vector<SummaryRow>& rows) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-9s %-9s %-6s %-5s %-4s %-4s %-16s %-16s %s\n", "strategy", "rehearsal", "buffer", "delta",
                  "idd", "E", "C-IL (%)", "T-IL (%)", "buffer_bytes");
    out += buf;
    bool degenerate = false;
    for (const auto& r : rows) {
        const auto& s = r.summary;
        char cil[40], til[40];
        std::snprintf(cil, sizeof cil, "%.2f +/- %.2f", 100.0 * s.cil.mean, 100.0 * s.cil.std);
        std::snprintf(til, sizeof til, "%.2f +/- %.2f", 100.0 * s.til.mean, 100.0 * s.til.std);
        const bool rehearsal = strategy::is_rehearsal(strategy::parse_kind(r.strategy));
        std::snprintf(buf, sizeof buf, "%-9s %-9s %-6zu %-5s %-4s %-4zu %-16s %-16s %.0f\n", r.strategy.c_str(),
                      rehearsal ? "yes" : "no", r.buffer_capacity, delta_label(r.delta).c_str(), r.idd ? "on" : "off",
                      s.experiments, cil, til, s.buffer_bytes.mean);
        out += buf;
        degenerate = degenerate || s.degenerate;
    }
    if (degenerate) out += "note: groups with E = 1 report a standard deviation of 0 (no n-1 estimate)\n";
    return out;
}

} // namespace clvid::cli
