#pragma once

#include <string>

#include <json.hpp>

#include "factmatch/evalharness.hpp"

namespace factmatch::eval {

struct Report {
    /// Machine-readable document; key order is fixed so dumps are byte-stable.
    nlohmann::ordered_json document;
    std::string markdown;
};

Report render_report(const EvalRun& run);

/// Rebuilds the markdown tables from a saved machine-readable document.
std::string render_markdown(const nlohmann::ordered_json& document);

/// "0.9512 ± 0.0100", bold when `best`, trailing star when `significant`.
std::string format_cell(double mean, double half_width, bool best, bool significant);

}  // namespace factmatch::eval
