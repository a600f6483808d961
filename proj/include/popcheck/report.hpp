#pragma once

#include "popcheck/pipeline.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace popcheck {

enum class ReportFormat { Text, Json };

inline std::string fixed6(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string format_interval(const ProbInterval& iv) { return "[" + fixed6(iv.lo) + ", " + fixed6(iv.hi) + "]"; }

// One record per run. Timings are left out unless asked for so that identical
// inputs give identical bytes.
inline nlohmann::ordered_json to_json(const RunReport& r, bool timings)
{
    nlohmann::ordered_json j;
    j["formula"] = r.formula;
    auto b = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.bindings)
        b[k] = v;
    j["bindings"] = b;
    j["verdict"] = std::string(to_string(r.verdict));
    j["interval"] = r.interval ? nlohmann::ordered_json::array({r.interval->lo, r.interval->hi}) : nlohmann::ordered_json();
    j["states"] = r.states;
    j["frontier"] = r.frontier;
    j["window"] = r.window;
    j["depth"] = r.depth ? nlohmann::ordered_json(*r.depth) : nlohmann::ordered_json();
    j["epsilon"] = r.epsilon;
    j["steady_epsilon"] = r.steady_epsilon ? nlohmann::ordered_json(*r.steady_epsilon) : nlohmann::ordered_json();
    j["drift_c"] = r.drift_c ? nlohmann::ordered_json(*r.drift_c) : nlohmann::ordered_json();
    j["strategy"] = r.strategy;
    j["ap_shortcut"] = r.ap_shortcut;
    j["capped"] = r.capped;
    if (timings)
        j["timings"] = {{"steady", r.time_steady}, {"explore", r.time_explore}, {"check", r.time_check}};
    j["warnings"] = r.warnings;
    return j;
}

inline void emit_report(std::ostream& os, const std::vector<RunReport>& reports, ReportFormat fmt, bool json_timings = false)
{
    if (fmt == ReportFormat::Json) {
        for (const auto& r : reports)
            os << to_json(r, json_timings).dump() << '\n';
        return;
    }
    // One table per property; rows keep their order within a table.
    std::vector<std::string> order;
    for (const auto& r : reports)
        if (std::find(order.begin(), order.end(), r.source) == order.end())
            order.push_back(r.source);
    for (const auto& source : order) {
        bool header = false;
        for (const auto& r : reports) {
            if (r.source != source)
                continue;
            if (!header) {
                os << "# " << (source.empty() ? r.formula : source) << '\n';
                std::string keys;
                for (const auto& [k, v] : r.bindings)
                    keys += k + std::string(std::max<std::size_t>(1, 12 - k.size()), ' ');
                char head[256];
                std::snprintf(head, sizeof head, "%-10s %-6s %9s %9s %9s %9s  %-22s %s", "epsilon", "depth", "steady_s",
                              "explore_s", "check_s", "n", "interval", "verdict");
                os << keys << head << '\n';
                header = true;
            }
            std::string vals;
            for (const auto& [k, v] : r.bindings)
                vals += k + "=" + v + std::string(std::max<std::size_t>(1, 12 - k.size() - v.size() - 1), ' ');
            char row[256];
            std::snprintf(row, sizeof row, "%-10g %-6s %9.2f %9.2f %9.2f %9zu  %-22s %s", r.epsilon,
                          r.depth ? std::to_string(*r.depth).c_str() : "-", r.time_steady, r.time_explore, r.time_check,
                          r.states, r.interval ? format_interval(*r.interval).c_str() : "-",
                          std::string(to_string(r.verdict)).c_str());
            os << vals << row << '\n';
            for (const auto& w : r.warnings)
                os << "  warning: " << w << '\n';
        }
    }
}

// Several records combine to the worst code: UNKNOWN over FALSE over TRUE.
inline int combined_exit_code(const std::vector<RunReport>& reports)
{
    int code = 0;
    for (const auto& r : reports)
        code = std::max(code, exit_code(r.verdict));
    return code;
}

} // namespace popcheck
