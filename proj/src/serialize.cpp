#include "simcore/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace simcore {

nlohmann::json report_to_json(const SelectionReport& report) {
    const auto& c = report.config;
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& r : report.rounds) {
        rounds.push_back({{"t", r.t},
                          {"size", r.members.size()},
                          {"value", r.value},
                          {"ratio", r.ratio}});
    }
    return nlohmann::json{
        {"config",
         {{"k", c.k},
          {"tau", c.tau},
          {"budget", c.budget},
          {"seed", c.seed},
          {"strict_budget", c.strict_budget},
          {"include_final_round", c.include_final_round},
          {"exact_target", c.exact_target},
          {"top_m", c.top_m},
          {"block_bytes", c.block_bytes},
          {"kmeans",
           {{"geometry", to_string(c.kmeans.geometry)},
            {"max_iter", c.kmeans.max_iter},
            {"tol", c.kmeans.tol}}}}},
        {"target_count", report.target_count},
        {"open_count", report.open_count},
        {"rounds", rounds},
        {"coreset_size", report.coreset.size()},
        {"sampling_ratio", report.sampling_ratio},
        {"stop_reason", to_string(report.stop_reason)},
        {"kmeans_inertia", report.kmeans_inertia},
        {"kmeans_iterations", report.kmeans_iterations},
        {"elapsed_ms", report.elapsed_ms},
    };
}

nlohmann::json validation_to_json(const ValidationReport& report) {
    nlohmann::json j{
        {"count", report.count},
        {"dim", report.dim},
        {"min_norm", report.min_norm},
        {"max_norm", report.max_norm},
        {"all_finite", report.all_finite},
        {"normalized_flag", report.normalized_flag},
    };
    if (!report.all_finite) {
        j["nonfinite_row"] = report.nonfinite_row;
        j["nonfinite_col"] = report.nonfinite_col;
    }
    return j;
}

nlohmann::json metrics_to_json(const EvalMetrics& metrics) {
    nlohmann::json j{
        {"recall", metrics.recall},
        {"selected_count", metrics.selected_count},
        {"relevant_pool_size", metrics.relevant_pool_size},
        {"baseline_precision", metrics.baseline_precision},
    };
    if (metrics.precision) {
        j["precision"] = *metrics.precision;
    } else {
        j["precision"] = nullptr;
    }
    return j;
}

nlohmann::json sweep_to_json(const std::string& param, std::span<const SweepRow> rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j{
            {param, r.param_value},
            {"coreset_size", r.coreset_size},
            {"sampling_ratio", r.sampling_ratio},
            {"rounds", r.rounds},
            {"stop_reason", to_string(r.stop_reason)},
        };
        j["precision"] = r.precision ? nlohmann::json(*r.precision) : nlohmann::json(nullptr);
        j["recall"] = r.recall ? nlohmann::json(*r.recall) : nlohmann::json(nullptr);
        arr.push_back(j);
    }
    return nlohmann::json{{"param", param}, {"rows", arr}};
}

std::string sweep_to_csv(const std::string& param, std::span<const SweepRow> rows) {
    std::ostringstream out;
    out << param << ",coreset_size,sampling_ratio,rounds,stop_reason,precision,recall\n";
    out.precision(17);
    for (const auto& r : rows) {
        out << r.param_value << ',' << r.coreset_size << ',' << r.sampling_ratio << ','
            << r.rounds << ',' << to_string(r.stop_reason) << ',';
        if (r.precision) out << *r.precision;
        out << ',';
        if (r.recall) out << *r.recall;
        out << '\n';
    }
    return out.str();
}

void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_text(const std::string& text, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_indices(std::span<const std::size_t> indices, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file: " + path);
    for (const auto idx : indices) out << idx << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<std::size_t> read_indices(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::size_t> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (ec != std::errc() || ptr != line.data() + line.size()) {
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": cannot parse index");
        }
        out.push_back(v);
        ++lineno;
    }
    return out;
}

}  // namespace simcore
