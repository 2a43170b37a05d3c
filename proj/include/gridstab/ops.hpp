#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "gridstab/feeder.hpp"

namespace gridstab {

/// Shared context for request execution. Relative feeder paths resolve
/// against base_dir; requests without a "feeder" use default_feeder.
struct OpContext {
    std::filesystem::path base_dir = ".";
    std::optional<Feeder> default_feeder;
};

/// Runs one operation on a JSON request and returns the JSON response. The CLI
/// and the HTTP service both go through here.
///
/// Operations: feeder, metrics, acrit, sweep, simulate, heatmap, table1,
/// branch_compare. Throws gridstab errors (InputError for bad requests).
nlohmann::json execute(const std::string& op, const nlohmann::json& request, const OpContext& ctx = {});

/// Canonical text form of a response document.
std::string render_json(const nlohmann::json& doc);

std::string metrics_csv(const nlohmann::json& response);
std::string sweep_csv(const nlohmann::json& response);
std::string table1_csv(const nlohmann::json& response);
std::string branch_compare_csv(const nlohmann::json& response);
/// Per-step, per-phase trajectory of a simulate request.
std::string simulate_csv(const nlohmann::json& request, const OpContext& ctx = {});

/// "start:step:stop" inclusive grid.
std::vector<double> parse_grid(const std::string& text);

}  // namespace gridstab
