#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "simcore/embedding.hpp"
#include "simcore/sampler.hpp"
#include "simcore/synth.hpp"

namespace simcore {

nlohmann::json report_to_json(const SelectionReport& report);
nlohmann::json validation_to_json(const ValidationReport& report);
nlohmann::json metrics_to_json(const EvalMetrics& metrics);
nlohmann::json sweep_to_json(const std::string& param, std::span<const SweepRow> rows);
std::string sweep_to_csv(const std::string& param, std::span<const SweepRow> rows);

void write_json(const nlohmann::json& j, const std::string& path);
void write_text(const std::string& text, const std::string& path);

// Newline-delimited decimal indices, ascending.
void write_indices(std::span<const std::size_t> indices, const std::string& path);
std::vector<std::size_t> read_indices(const std::string& path);

}  // namespace simcore
