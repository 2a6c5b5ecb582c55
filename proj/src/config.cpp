#include "mpet/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace mpet {

namespace {

const std::vector<std::string> kRunKeys = {"mode", "case",    "formulation", "levels", "nu",
                                           "storage", "lambda", "dt",          "t-end"};
const std::vector<std::string> kOutputKeys = {"dir", "emit-energy-trace", "emit-matrices"};

const std::vector<std::string> kModes = {"convergence", "scenario", "single-solve"};
const std::vector<std::string> kFormulations = {"total-pressure", "standard", "both"};
const std::vector<std::string> kCases = {"table1",   "table2", "table3-nu04", "table4-c0",
                                         "table5-superconv", "brain",  "example1-table2"};

std::string trim(const std::string& text) {
    size_t begin = 0;
    size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) {
        ++begin;
    }
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) {
        --end;
    }
    return text.substr(begin, end - begin);
}

std::string join(const std::vector<std::string>& names) {
    std::string out;
    for (size_t i = 0; i < names.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        out += names[i];
    }
    return out;
}

[[noreturn]] void unknown_key(const std::string& section, const std::string& key,
                              const std::vector<std::string>& known) {
    std::string message = "unknown key '" + key + "' in [" + section + "]";
    int best = 3;  // suggest only close misses
    const std::string* suggestion = nullptr;
    for (const std::string& candidate : known) {
        const int d = edit_distance(key, candidate);
        if (d < best) {
            best = d;
            suggestion = &candidate;
        }
    }
    if (suggestion != nullptr) {
        message += " (did you mean '" + *suggestion + "'?)";
    } else {
        message += " (known keys: " + join(known) + ")";
    }
    throw std::invalid_argument(message);
}

int parse_int(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const long parsed = std::strtol(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0') {
        throw std::invalid_argument("value '" + value + "' for key '" + key +
                                    "' is not an integer");
    }
    return static_cast<int>(parsed);
}

double parse_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double parsed = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0') {
        throw std::invalid_argument("value '" + value + "' for key '" + key +
                                    "' is not a number");
    }
    return parsed;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") {
        return true;
    }
    if (value == "false" || value == "0") {
        return false;
    }
    throw std::invalid_argument("value '" + value + "' for key '" + key +
                                "' is not a boolean (use true or false)");
}

void set_run_key(RunConfig& config, const std::string& key, const std::string& value) {
    if (key == "mode") {
        validate_mode_name(value);
        config.mode = value;
    } else if (key == "case") {
        validate_case_name(value);
        config.case_name = value;
    } else if (key == "formulation") {
        validate_formulation_name(value);
        config.formulation = value;
    } else if (key == "levels") {
        const int levels = parse_int(key, value);
        if (levels < 2) {
            throw std::invalid_argument("levels must be at least 2 (rates need two meshes), got " +
                                        value);
        }
        config.levels = levels;
    } else if (key == "nu") {
        const double nu = parse_double(key, value);
        if (!(nu > 0.0 && nu < 0.5)) {
            throw std::invalid_argument("nu must lie in (0, 0.5), got " + value);
        }
        config.nu = nu;
    } else if (key == "storage") {
        const double storage = parse_double(key, value);
        if (storage < 0.0) {
            throw std::invalid_argument("storage must be >= 0, got " + value);
        }
        config.storage = storage;
    } else if (key == "lambda") {
        const double scale = parse_double(key, value);
        if (!(scale > 0.0)) {
            throw std::invalid_argument("lambda must be a positive scale factor, got " + value);
        }
        config.lambda_scale = scale;
    } else if (key == "dt") {
        const double dt = parse_double(key, value);
        if (!(dt > 0.0)) {
            throw std::invalid_argument("dt must be > 0, got " + value);
        }
        config.dt = dt;
    } else if (key == "t-end") {
        const double t_end = parse_double(key, value);
        if (!(t_end > 0.0)) {
            throw std::invalid_argument("t-end must be > 0, got " + value);
        }
        config.t_end = t_end;
    } else {
        unknown_key("run", key, kRunKeys);
    }
}

void set_output_key(RunConfig& config, const std::string& key, const std::string& value) {
    if (key == "dir") {
        if (value.empty()) {
            throw std::invalid_argument("output dir must not be empty");
        }
        config.output_dir = value;
    } else if (key == "emit-energy-trace") {
        config.emit_energy_trace = parse_bool(key, value);
    } else if (key == "emit-matrices") {
        config.emit_matrices = parse_bool(key, value);
    } else {
        unknown_key("output", key, kOutputKeys);
    }
}

}  // namespace

int edit_distance(const std::string& a, const std::string& b) {
    std::vector<int> previous(b.size() + 1);
    std::vector<int> current(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) {
        previous[j] = static_cast<int>(j);
    }
    for (size_t i = 1; i <= a.size(); ++i) {
        current[0] = static_cast<int>(i);
        for (size_t j = 1; j <= b.size(); ++j) {
            const int substitution = previous[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            current[j] = std::min({previous[j] + 1, current[j - 1] + 1, substitution});
        }
        std::swap(previous, current);
    }
    return previous[b.size()];
}

void validate_mode_name(const std::string& mode) {
    if (std::find(kModes.begin(), kModes.end(), mode) == kModes.end()) {
        throw std::invalid_argument("unknown mode '" + mode + "' (known modes: " + join(kModes) +
                                    ")");
    }
}

void validate_formulation_name(const std::string& formulation) {
    if (std::find(kFormulations.begin(), kFormulations.end(), formulation) ==
        kFormulations.end()) {
        throw std::invalid_argument("unknown formulation '" + formulation +
                                    "' (known formulations: " + join(kFormulations) + ")");
    }
}

void validate_case_name(const std::string& case_name) {
    if (std::find(kCases.begin(), kCases.end(), case_name) == kCases.end()) {
        throw std::invalid_argument("unknown case '" + case_name + "' (known cases: " +
                                    join(kCases) + ")");
    }
}

std::string canonical_case_name(const std::string& case_name) {
    validate_case_name(case_name);
    if (case_name == "example1-table2") {
        return "table2";
    }
    return case_name;
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig config;
    std::istringstream stream(text);
    std::string raw_line;
    std::string section = "run";
    int line_number = 0;
    while (std::getline(stream, raw_line)) {
        ++line_number;
        std::string line = raw_line;
        const size_t comment = line.find('#');
        if (comment != std::string::npos) {
            line = line.substr(0, comment);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw std::invalid_argument("line " + std::to_string(line_number) +
                                            ": unterminated section header '" + line + "'");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section != "run" && section != "output") {
                throw std::invalid_argument("line " + std::to_string(line_number) +
                                            ": unknown section [" + section +
                                            "] (known sections: run, output)");
            }
            continue;
        }
        const size_t equals = line.find('=');
        if (equals == std::string::npos) {
            throw std::invalid_argument("line " + std::to_string(line_number) +
                                        ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, equals));
        const std::string value = trim(line.substr(equals + 1));
        if (key.empty()) {
            throw std::invalid_argument("line " + std::to_string(line_number) +
                                        ": missing key before '='");
        }
        if (value.empty()) {
            throw std::invalid_argument("line " + std::to_string(line_number) +
                                        ": missing value for key '" + key + "'");
        }
        if (section == "run") {
            set_run_key(config, key, value);
        } else {
            set_output_key(config, key, value);
        }
    }
    return config;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream stream(path);
    if (!stream) {
        throw std::invalid_argument("cannot read config file '" + path + "'");
    }
    std::ostringstream text;
    text << stream.rdbuf();
    return parse_config_text(text.str());
}

}  // namespace mpet
