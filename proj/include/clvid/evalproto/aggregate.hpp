#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "clvid/error.hpp"
#include "clvid/evalproto/experiment.hpp"

namespace clvid::eval {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;   // sample standard deviation (n - 1 denominator)
};

// Sample mean and standard deviation. A single value has no spread estimate;
// it reports std 0 and the caller flags the result as degenerate.
inline MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) throw AggregationError("cannot aggregate zero values");
    MeanStd r;
    for (double v : values) r.mean += v;
    r.mean /= static_cast<double>(values.size());
    if (values.size() == 1) return r;
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return r;
}

struct Summary {
    std::size_t experiments = 0;
    MeanStd cil;
    MeanStd til;
    MeanStd buffer_bytes;
    bool degenerate = false;   // E == 1: std reported as 0 by convention
};

inline Summary aggregate(std::span<const EvalReport> reports) {
    if (reports.empty()) throw AggregationError("cannot aggregate an empty report set");
    std::vector<double> cil, til, bytes;
    for (const auto& r : reports) {
        cil.push_back(r.cil_mean);
        til.push_back(r.til_mean);
        bytes.push_back(static_cast<double>(r.buffer_bytes));
    }
    Summary s;
    s.experiments = reports.size();
    s.cil = mean_std(cil);
    s.til = mean_std(til);
    s.buffer_bytes = mean_std(bytes);
    s.degenerate = reports.size() == 1;
    return s;
}

} // namespace clvid::eval
