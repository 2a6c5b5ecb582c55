#pragma once

#include <optional>
#include <string>

namespace mpet {

// User-facing run description. Everything is optional; unset fields fall
// back to the selected case's defaults when the plan is resolved. Parsed
// from the flat sectioned key-value format:
//
//     # comment
//     [run]
//     mode = convergence          # convergence | scenario | single-solve
//     case = table2
//     formulation = total-pressure
//     levels = 5
//     nu = 0.49999
//     storage = 1.0
//     lambda = 1.0                # multiplies the case's Lame lambda
//     dt = 0.125
//     t-end = 0.5
//
//     [output]
//     dir = out
//     emit-energy-trace = false
//     emit-matrices = false
//
// Keys before the first section header count as [run] keys. Unknown keys,
// malformed values and out-of-range values are errors that name the key; a
// close known key is suggested when one exists.
struct RunConfig {
    std::optional<std::string> mode;
    std::optional<std::string> case_name;
    std::optional<std::string> formulation;
    std::optional<int> levels;
    std::optional<double> nu;
    std::optional<double> storage;
    std::optional<double> lambda_scale;
    std::optional<double> dt;
    std::optional<double> t_end;
    std::optional<std::string> output_dir;
    std::optional<bool> emit_energy_trace;
    std::optional<bool> emit_matrices;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Value validators shared by the file parser and the command line. Each
// throws std::invalid_argument naming the offending key and value.
void validate_mode_name(const std::string& mode);
void validate_formulation_name(const std::string& formulation);
void validate_case_name(const std::string& case_name);

// Shipped case names (aliases resolved): table1, table2, table3-nu04,
// table4-c0, table5-superconv, brain.
std::string canonical_case_name(const std::string& case_name);

// Edit distance used for the unknown-key suggestions.
int edit_distance(const std::string& a, const std::string& b);

}  // namespace mpet
