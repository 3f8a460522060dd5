#pragma once

// CSV and JSON serialization for convergence traces. Doubles are written
// with 17 significant digits so values round-trip exactly.

#include "goldstone/optimizer.hpp"

#include <json.hpp>

#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

namespace goldstone {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline constexpr const char* kTraceCsvHeader =
    "cycle,phase,step,total_loss,local_loss_sum,regularizer,grad_norm,wall_time_s";

inline void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace) {
    os << kTraceCsvHeader << '\n';
    for (const auto& r : trace.records) {
        os << r.cycle << ',' << to_string(r.phase) << ',' << r.step << ','
           << format_double(r.total_loss) << ',' << format_double(r.local_loss_sum) << ','
           << format_double(r.regularizer) << ',' << format_double(r.grad_norm) << ','
           << format_double(r.wall_time_s) << '\n';
    }
}

inline std::string trace_csv(const ConvergenceTrace& trace) {
    std::ostringstream ss;
    write_trace_csv(ss, trace);
    return ss.str();
}

/// Removes one column from a simple (unquoted) CSV document. Reruns of an
/// experiment reproduce every column bit for bit except wall_time_s, so
/// determinism checks compare traces with that column dropped.
inline std::string drop_csv_column(const std::string& csv, const std::string& column) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    std::ptrdiff_t target = -1;
    bool first = true;
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (first) {
            for (std::size_t i = 0; i < fields.size(); ++i)
                if (fields[i] == column) target = static_cast<std::ptrdiff_t>(i);
            first = false;
        }
        bool wrote = false;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (static_cast<std::ptrdiff_t>(i) == target) continue;
            if (wrote) out << ',';
            out << fields[i];
            wrote = true;
        }
        out << '\n';
    }
    return out.str();
}

inline void to_json(nlohmann::json& j, const TraceRecord& r) {
    j = nlohmann::json{{"cycle", r.cycle},
                       {"phase", to_string(r.phase)},
                       {"step", r.step},
                       {"total_loss", r.total_loss},
                       {"local_loss_sum", r.local_loss_sum},
                       {"regularizer", r.regularizer},
                       {"grad_norm", r.grad_norm},
                       {"wall_time_s", r.wall_time_s}};
}

inline void to_json(nlohmann::json& j, const ConvergenceTrace& trace) {
    j = nlohmann::json{{"status", to_string(trace.status)}, {"records", trace.records}};
}

}  // namespace goldstone
