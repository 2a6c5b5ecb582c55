#include "mpet/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mpet/linalg.hpp"
#include "mpet/mesh.hpp"
#include "mpet/scenarios.hpp"
#include "mpet/spaces.hpp"
#include "mpet/timestepper.hpp"

namespace mpet {

namespace {

// ============================================================================
// Small utilities
// ============================================================================

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    out << text;
    if (!out) {
        throw std::runtime_error("failed while writing '" + path + "'");
    }
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

std::vector<Formulation> parse_formulations(const std::string& name) {
    if (name == "total-pressure") {
        return {Formulation::kTotalPressure};
    }
    if (name == "standard") {
        return {Formulation::kStandard};
    }
    if (name == "both") {
        return {Formulation::kTotalPressure, Formulation::kStandard};
    }
    throw std::invalid_argument("unknown formulation '" + name + "'");
}

std::string energy_csv(const std::vector<EnergySample>& samples) {
    std::string text = "t,strain,storage,coupling,total,diffusion,transfer,p0_l2\n";
    char line[256];
    for (const EnergySample& s : samples) {
        std::snprintf(line, sizeof(line),
                      "%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e\n", s.t, s.strain,
                      s.storage, s.coupling, s.total, s.diffusion, s.transfer, s.p0_l2);
        text += line;
    }
    return text;
}

void write_operator_matrices(const MpetOperator& op, const std::string& dir) {
    write_matrix_market(op.lhs.monolithic(), join_path(dir, "lhs.mtx"));
    write_matrix_market(op.history.monolithic(), join_path(dir, "history.mtx"));
}

// ============================================================================
// Manufactured-case detail solve (single-solve mode and artifact emission)
// ============================================================================

struct DetailSolve {
    LevelRecord record;  // exact-solution error columns
    std::vector<EnergySample> energy;
};

// One run of the case on an n-by-n mesh, mirroring a convergence-study
// level. Optionally records the energy trace and dumps the assembled
// operator (before boundary elimination) to `matrix_dir`.
DetailSolve solve_manufactured_level(const ManufacturedCase& mcase, Formulation formulation,
                                     int n, bool record_energy,
                                     const std::string* matrix_dir) {
    const int networks = mcase.params.network_count();
    const bool total_pressure = formulation == Formulation::kTotalPressure;

    auto mesh = std::make_shared<Mesh>(build_unit_square_mesh(n));
    const DirichletSpec dirichlet = DirichletSpec::uniform({kTagWhole}, networks);
    const MpetSpaces spaces = total_pressure
                                  ? make_taylor_hood_spaces(mesh, networks, dirichlet)
                                  : make_standard_spaces(mesh, networks, dirichlet);
    const MpetOperator op =
        total_pressure
            ? assemble_total_pressure_operator(spaces, mcase.params, mcase.dt, mcase.theta)
            : assemble_standard_operator(spaces, mcase.params, mcase.dt, mcase.theta);
    if (matrix_dir) {
        write_operator_matrices(op, *matrix_dir);
    }

    BoundaryProgram bcs;
    bcs.displacement.push_back({kTagWhole, mcase.u});
    bcs.network.resize(static_cast<size_t>(networks));
    for (int j = 0; j < networks; ++j) {
        bcs.network[j].push_back({kTagWhole, mcase.p[j]});
    }

    const MpetState initial = linear_consistent_initial_state(op, mcase.sources, bcs);
    RunOptions options;
    options.record_energy = record_energy;
    const TimeGrid grid = TimeGrid::make(mcase.t_end, mcase.dt);
    const RunResult result = run_transient(op, mcase.sources, bcs, initial, grid, options);

    const double t_final = mcase.t_end;
    DetailSolve detail;
    detail.energy = result.energy;
    detail.record.cells_per_side = n;
    detail.record.h = 1.0 / n;

    const FEFunction uh = extract_displacement(op, result.state);
    const TimeVectorField ue = mcase.u;
    const TimeMatrixField gue = mcase.grad_u;
    const ErrorNorms eu = vector_error_norms(
        uh, [&ue, t_final](Vec2 x) { return ue(x, t_final); },
        [&gue, t_final](Vec2 x) { return gue(x, t_final); });
    const FEFunction p1h = extract_network_pressure(op, result.state, 0);
    const TimeScalarField pe = mcase.p[0];
    const TimeVectorField gpe = mcase.grad_p[0];
    const ErrorNorms ep1 = scalar_error_norms(
        p1h, [&pe, t_final](Vec2 x) { return pe(x, t_final); },
        [&gpe, t_final](Vec2 x) { return gpe(x, t_final); });
    detail.record.errors = {eu.l2, eu.h1, ep1.l2, ep1.h1};
    if (total_pressure) {
        const FEFunction p0h = extract_total_pressure(op, result.state);
        const TimeScalarField p0e = mcase.p0;
        const TimeVectorField gp0e = mcase.grad_p0;
        const ErrorNorms ep0 = scalar_error_norms(
            p0h, [&p0e, t_final](Vec2 x) { return p0e(x, t_final); },
            [&gp0e, t_final](Vec2 x) { return gp0e(x, t_final); });
        detail.record.errors.push_back(ep0.l2);
    }
    return detail;
}

ConvergenceReport single_solve_report(const ManufacturedCase& mcase, Formulation formulation,
                                      const DetailSolve& detail) {
    ConvergenceReport report;
    report.case_name = mcase.name;
    report.formulation = formulation;
    report.mode = ErrorMode::kExact;
    report.columns = {"u_l2", "u_h1", "p1_l2", "p1_h1"};
    report.reference_rates = {3.0, 2.0, 2.0, 1.0};
    if (formulation == Formulation::kTotalPressure) {
        report.columns.push_back("p0_l2");
        report.reference_rates.push_back(2.0);
    }
    report.levels.push_back(detail.record);
    return report;
}

// ============================================================================
// Manufactured case construction from the plan
// ============================================================================

ManufacturedCase build_case(const RunPlan& plan) {
    ManufacturedCase mcase = example1_case(plan.nu, plan.storage, plan.lambda_scale);
    mcase.name = plan.case_name;
    if (plan.dt) {
        mcase.dt = *plan.dt;
    }
    if (plan.t_end) {
        mcase.t_end = *plan.t_end;
    }
    return mcase;
}

// ============================================================================
// Scenario helpers
// ============================================================================

// Rebuilds the scenario operator for --emit-matrices; run_scenario does not
// expose its internals.
void emit_scenario_matrices(const ScenarioSpec& spec, Formulation formulation,
                            const std::string& dir) {
    const int networks = spec.params.network_count();
    auto mesh = std::make_shared<Mesh>(
        build_annulus_mesh(spec.inner_radius, spec.outer_radius, spec.resolution));
    DirichletSpec dirichlet;
    for (const DisplacementBC& bc : spec.bcs.displacement) {
        dirichlet.displacement_tags.push_back(bc.tag);
    }
    dirichlet.network_tags.resize(static_cast<size_t>(networks));
    for (int j = 0; j < networks; ++j) {
        if (!spec.bcs.network.empty()) {
            for (const PressureBC& bc : spec.bcs.network[j]) {
                dirichlet.network_tags[j].push_back(bc.tag);
            }
        }
    }
    const bool total_pressure = formulation == Formulation::kTotalPressure;
    const MpetSpaces spaces = total_pressure
                                  ? make_taylor_hood_spaces(mesh, networks, dirichlet)
                                  : make_standard_spaces(mesh, networks, dirichlet);
    const MpetOperator op =
        total_pressure
            ? assemble_total_pressure_operator(spaces, spec.params, spec.dt, spec.theta)
            : assemble_standard_operator(spaces, spec.params, spec.dt, spec.theta);
    write_operator_matrices(op, dir);
}

// Relative gap between two traces: max_k |a_k - b_k| over the shared length,
// scaled by the largest magnitude either trace reaches. Zero when both
// traces vanish.
double trace_relative_gap(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t count = std::min(a.size(), b.size());
    double gap = 0.0;
    double scale = 0.0;
    for (size_t k = 0; k < count; ++k) {
        gap = std::max(gap, std::abs(a[k] - b[k]));
        scale = std::max({scale, std::abs(a[k]), std::abs(b[k])});
    }
    return scale > 0.0 ? gap / scale : 0.0;
}

double trace_max_abs(const std::vector<double>& a) {
    double peak = 0.0;
    for (double v : a) {
        peak = std::max(peak, std::abs(v));
    }
    return peak;
}

std::string comparison_markdown(const ScenarioSpec& spec, const ScenarioResult& tp,
                                const ScenarioResult& standard) {
    if (tp.probes.size() != standard.probes.size()) {
        throw std::runtime_error("comparison: formulation runs disagree on probe count");
    }
    const int networks = spec.params.network_count();
    char line[320];
    std::string text = "# " + spec.name + ": total-pressure vs standard\n\n";
    text +=
        "Per-probe agreement of the two formulations over the full run. The gap is\n"
        "the largest pointwise difference of a trace, scaled by the largest\n"
        "magnitude either formulation reaches on it.\n\n";
    text += "| probe | series | total-pressure peak | standard peak | relative gap |\n";
    text += "| --- | --- | --- | --- | --- |\n";
    for (size_t i = 0; i < tp.probes.size(); ++i) {
        const ProbeTrace& a = tp.probes[i];
        const ProbeTrace& b = standard.probes[i];
        std::snprintf(line, sizeof(line), "| %s | u magnitude (mm) | %.6e | %.6e | %.3e |\n",
                      a.label.c_str(), trace_max_abs(a.u_mag), trace_max_abs(b.u_mag),
                      trace_relative_gap(a.u_mag, b.u_mag));
        text += line;
        for (int j = 0; j < networks; ++j) {
            std::snprintf(line, sizeof(line), "| %s | p%d (Pa) | %.6e | %.6e | %.3e |\n",
                          a.label.c_str(), j + 1, trace_max_abs(a.p[static_cast<size_t>(j)]),
                          trace_max_abs(b.p[static_cast<size_t>(j)]),
                          trace_relative_gap(a.p[static_cast<size_t>(j)],
                                             b.p[static_cast<size_t>(j)]));
            text += line;
        }
    }

    text += "\n## Displacement comparison\n\n";
    for (size_t i = 0; i < tp.probes.size(); ++i) {
        const double peak_tp = trace_max_abs(tp.probes[i].u_mag);
        const double peak_std = trace_max_abs(standard.probes[i].u_mag);
        if (peak_std > 0.0) {
            std::snprintf(line, sizeof(line),
                          "- %s: peak |u| total-pressure %.6e mm, standard %.6e mm "
                          "(ratio %.4f)\n",
                          tp.probes[i].label.c_str(), peak_tp, peak_std, peak_tp / peak_std);
        } else {
            std::snprintf(line, sizeof(line),
                          "- %s: peak |u| total-pressure %.6e mm, standard %.6e mm\n",
                          tp.probes[i].label.c_str(), peak_tp, peak_std);
        }
        text += line;
    }
    return text;
}

void print_scenario_summary(const ScenarioSpec& spec, const ScenarioResult& result) {
    const int networks = spec.params.network_count();
    const int cycles = static_cast<int>(result.stats.empty() ? 0
                                        : result.stats.front().empty()
                                            ? 0
                                            : result.stats.front().front().size());
    std::printf("scenario %s (%s): %d steps, %d per cycle\n", spec.name.c_str(),
                formulation_name(result.formulation).c_str(),
                static_cast<int>(result.times.size()) - 1, result.steps_per_cycle);
    if (cycles == 0) {
        return;
    }
    const int last = cycles - 1;
    for (size_t i = 0; i < result.probes.size(); ++i) {
        const CycleStats u = result.stats[i][0][static_cast<size_t>(last)];
        std::printf("  %-14s |u| max %.4e mm", result.probes[i].label.c_str(), u.max);
        for (int j = 0; j < networks; ++j) {
            const CycleStats p =
                result.stats[i][static_cast<size_t>(j) + 1][static_cast<size_t>(last)];
            std::printf("  p%d [%.2f, %.2f] mmHg", j + 1, p.min / kPascalPerMmhg,
                        p.max / kPascalPerMmhg);
        }
        std::printf("   (final cycle)\n");
    }
}

// ============================================================================
// Mode drivers
// ============================================================================

void run_convergence(const RunPlan& plan) {
    const ManufacturedCase mcase = build_case(plan);
    std::string csv;
    std::string md;
    for (size_t i = 0; i < plan.formulations.size(); ++i) {
        const ConvergenceReport report =
            convergence_study(mcase, plan.formulations[i], plan.levels, plan.error_mode);
        if (i > 0) {
            csv += "\n";
            md += "\n";
        }
        csv += report_csv(report);
        md += report_markdown(report);
    }
    write_text(join_path(plan.output_dir, "report.csv"), csv);
    write_text(join_path(plan.output_dir, "report.md"), md);
    std::cout << md;

    if (plan.emit_energy_trace || plan.emit_matrices) {
        const std::string dir = plan.output_dir;
        const DetailSolve detail =
            solve_manufactured_level(mcase, plan.formulations.front(), 4,
                                     plan.emit_energy_trace, plan.emit_matrices ? &dir : nullptr);
        if (plan.emit_energy_trace) {
            write_text(join_path(plan.output_dir, "energy.csv"), energy_csv(detail.energy));
        }
    }
}

void run_single_solve(const RunPlan& plan) {
    const ManufacturedCase mcase = build_case(plan);
    // Resolution of the finest level an equivalent convergence study would
    // reach, so `levels` keeps one meaning across modes.
    const int n = 4 << (plan.levels - 1);
    std::string csv;
    std::string md;
    for (size_t i = 0; i < plan.formulations.size(); ++i) {
        const bool first = i == 0;
        const std::string dir = plan.output_dir;
        const DetailSolve detail = solve_manufactured_level(
            mcase, plan.formulations[i], n, first && plan.emit_energy_trace,
            first && plan.emit_matrices ? &dir : nullptr);
        if (first && plan.emit_energy_trace) {
            write_text(join_path(plan.output_dir, "energy.csv"), energy_csv(detail.energy));
        }
        const ConvergenceReport report =
            single_solve_report(mcase, plan.formulations[i], detail);
        if (i > 0) {
            csv += "\n";
            md += "\n";
        }
        csv += report_csv(report);
        md += report_markdown(report);
    }
    write_text(join_path(plan.output_dir, "report.csv"), csv);
    write_text(join_path(plan.output_dir, "report.md"), md);
    std::cout << md;
}

void run_scenario_mode(const RunPlan& plan) {
    ScenarioSpec spec = brain_scenario();
    if (plan.dt) {
        spec.dt = *plan.dt;
    }
    if (plan.t_end) {
        spec.t_end = *plan.t_end;
    }

    std::vector<ScenarioResult> results;
    for (size_t i = 0; i < plan.formulations.size(); ++i) {
        const bool record_energy = i == 0 && plan.emit_energy_trace;
        results.push_back(run_scenario(spec, plan.formulations[i], record_energy));
        const std::string name = i == 0
                                     ? "probes.csv"
                                     : "probes-" + formulation_name(plan.formulations[i]) +
                                           ".csv";
        write_probes_csv(results.back(), join_path(plan.output_dir, name));
        print_scenario_summary(spec, results.back());
    }
    if (plan.emit_energy_trace) {
        write_text(join_path(plan.output_dir, "energy.csv"),
                   energy_csv(results.front().energy));
    }
    if (plan.emit_matrices) {
        emit_scenario_matrices(spec, plan.formulations.front(), plan.output_dir);
    }
    if (results.size() == 2) {
        write_text(join_path(plan.output_dir, "comparison.md"),
                   comparison_markdown(spec, results[0], results[1]));
    }
}

}  // namespace

// ============================================================================
// Plan resolution
// ============================================================================

RunPlan resolve_plan(const RunConfig& config) {
    RunPlan plan;

    plan.case_name = canonical_case_name(config.case_name.value_or("table2"));
    const bool is_scenario_case = plan.case_name == "brain";

    std::string mode = config.mode.value_or(is_scenario_case ? "scenario" : "convergence");
    validate_mode_name(mode);
    if (mode == "scenario") {
        plan.mode = RunMode::kScenario;
    } else if (mode == "single-solve") {
        plan.mode = RunMode::kSingleSolve;
    } else {
        plan.mode = RunMode::kConvergence;
    }
    if (is_scenario_case && plan.mode != RunMode::kScenario) {
        throw std::invalid_argument("case 'brain' runs in scenario mode, not '" + mode + "'");
    }
    if (!is_scenario_case && plan.mode == RunMode::kScenario) {
        throw std::invalid_argument("scenario mode requires case 'brain', not '" +
                                    plan.case_name + "'");
    }

    const std::string default_formulation =
        plan.case_name == "table1" ? "standard" : "total-pressure";
    const std::string formulation = config.formulation.value_or(default_formulation);
    validate_formulation_name(formulation);
    plan.formulations = parse_formulations(formulation);

    plan.error_mode = plan.case_name == "table5-superconv" ? ErrorMode::kInterpolant
                                                           : ErrorMode::kExact;

    if (is_scenario_case) {
        if (config.levels) {
            throw std::invalid_argument("key 'levels' applies to manufactured cases only");
        }
        if (config.nu) {
            throw std::invalid_argument("key 'nu' applies to manufactured cases only");
        }
        if (config.storage) {
            throw std::invalid_argument("key 'storage' applies to manufactured cases only");
        }
        if (config.lambda_scale) {
            throw std::invalid_argument("key 'lambda' applies to manufactured cases only");
        }
    } else {
        plan.levels = config.levels.value_or(5);
        plan.nu = config.nu.value_or(plan.case_name == "table3-nu04" ? 0.4 : 0.49999);
        plan.storage = config.storage.value_or(plan.case_name == "table4-c0" ? 0.0 : 1.0);
        plan.lambda_scale = config.lambda_scale.value_or(1.0);
    }

    plan.dt = config.dt;
    plan.t_end = config.t_end;
    plan.output_dir = config.output_dir.value_or("out");
    plan.emit_energy_trace = config.emit_energy_trace.value_or(false);
    plan.emit_matrices = config.emit_matrices.value_or(false);
    return plan;
}

void execute_plan(const RunPlan& plan) {
    if (plan.formulations.empty()) {
        throw std::invalid_argument("execute_plan: no formulation selected");
    }
    std::filesystem::create_directories(plan.output_dir);
    switch (plan.mode) {
        case RunMode::kConvergence:
            run_convergence(plan);
            break;
        case RunMode::kSingleSolve:
            run_single_solve(plan);
            break;
        case RunMode::kScenario:
            run_scenario_mode(plan);
            break;
    }
}

}  // namespace mpet
