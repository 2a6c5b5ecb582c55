#include "mpet/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "mpet/spaces.hpp"

namespace mpet {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

}  // namespace

// ============================================================================
// Scenario definition
// ============================================================================

ScenarioSpec brain_scenario() {
    ScenarioSpec spec;
    spec.name = "brain";
    spec.inner_radius = 30.0;
    spec.outer_radius = 100.0;
    spec.resolution = 10;

    const auto lame = lame_from_E_nu(1500.0, 0.4999);
    spec.params.mu = lame.first;
    spec.params.lambda = lame.second;
    // Networks: 1 CSF/ISF, 2 arterial, 3 venous, 4 capillary.
    spec.params.alpha = {0.49, 0.25, 0.01, 0.25};
    spec.params.storage = {3.9e-4, 2.9e-4, 1.5e-5, 2.9e-4};
    spec.params.permeability = {1.57e-5, 3.75e-2, 3.75e-2, 3.75e-2};
    spec.params.transfer.assign(4, std::vector<double>(4, 0.0));
    const double exchange = 1.0e-6;
    // Fluid exchange: capillaries with arteries, veins and CSF/ISF, plus
    // CSF/ISF with veins; no direct arterial-CSF or arterial-venous leak.
    const int pairs[4][2] = {{1, 3}, {3, 2}, {3, 0}, {0, 2}};
    for (const auto& pair : pairs) {
        spec.params.transfer[pair[0]][pair[1]] = exchange;
        spec.params.transfer[pair[1]][pair[0]] = exchange;
    }
    spec.params.validate();

    // Boundary pressure programs (mmHg formulas scaled to Pa). The CSF
    // pulse on the inner boundary carries the small transmantle pressure
    // difference on top of the outer amplitude.
    const TimeScalarField csf_skull = [](Vec2, double t) {
        return kPascalPerMmhg * (5.0 + 2.0 * std::sin(kTwoPi * t));
    };
    const TimeScalarField csf_ventricle = [](Vec2, double t) {
        return kPascalPerMmhg * (5.0 + 2.012 * std::sin(kTwoPi * t));
    };
    const TimeScalarField arterial_skull = [](Vec2, double t) {
        return kPascalPerMmhg * (70.0 + 10.0 * std::sin(kTwoPi * t));
    };
    const TimeScalarField venous = [](Vec2, double) { return kPascalPerMmhg * 6.0; };

    spec.bcs.displacement.push_back(
        {kTagSkull, [](Vec2, double) -> Vec2 { return {0.0, 0.0}; }});
    spec.bcs.network.resize(4);
    spec.bcs.network[0].push_back({kTagSkull, csf_skull});
    spec.bcs.network[0].push_back({kTagVentricle, csf_ventricle});
    spec.bcs.network[1].push_back({kTagSkull, arterial_skull});
    spec.bcs.network[2].push_back({kTagSkull, venous});
    spec.bcs.network[2].push_back({kTagVentricle, venous});
    // Capillaries (network 4) are flux-free on both boundaries.

    // Ventricular total stress s n with s = -sum_j alpha_j p~_j, where the
    // reference pressures p~_j are the pulse formulas above and the
    // capillary reference tracks the arterial/venous mean.
    const std::vector<double> alpha = spec.params.alpha;
    spec.sources.tractions.push_back({kTagVentricle, [alpha](Vec2, double t) {
                                          const double sine = std::sin(kTwoPi * t);
                                          const double ref1 = 5.0 + 2.012 * sine;
                                          const double ref2 = 70.0 + 10.0 * sine;
                                          const double ref3 = 6.0;
                                          const double ref4 = 0.5 * (ref2 + ref3);
                                          return -kPascalPerMmhg *
                                                 (alpha[0] * ref1 + alpha[1] * ref2 +
                                                  alpha[2] * ref3 + alpha[3] * ref4);
                                      }});

    spec.initial_pressure = {5.0 * kPascalPerMmhg, 70.0 * kPascalPerMmhg, 6.0 * kPascalPerMmhg,
                             0.5 * (70.0 + 6.0) * kPascalPerMmhg};

    spec.t_end = 3.0;
    spec.dt = 0.0125;
    spec.theta = 0.5;
    spec.cycle_length = 1.0;

    spec.probes = {{"ventricle-edge", {30.0, 0.0}},
                   {"mid-depth", {65.0, 0.0}},
                   {"skull-edge", {100.0, 0.0}}};
    return spec;
}

// ============================================================================
// Execution
// ============================================================================

namespace {

int exact_division(double whole, double part, const char* what) {
    const double ratio = whole / part;
    const int count = static_cast<int>(std::llround(ratio));
    if (count < 1 || std::abs(ratio - count) > 1e-8 * std::max(1.0, std::abs(ratio))) {
        throw std::invalid_argument(std::string("run_scenario: ") + what);
    }
    return count;
}

Vec2 nearest_vertex(const Mesh& mesh, Vec2 request) {
    const auto& vertices = mesh.vertices();
    if (vertices.empty()) {
        throw std::invalid_argument("run_scenario: mesh has no vertices");
    }
    Vec2 best = vertices.front();
    double best_d = dot(best - request, best - request);
    for (const Vec2& v : vertices) {
        const double d = dot(v - request, v - request);
        if (d < best_d) {
            best_d = d;
            best = v;
        }
    }
    return best;
}

std::vector<int> bc_tags(const std::vector<PressureBC>& bcs) {
    std::vector<int> tags;
    tags.reserve(bcs.size());
    for (const PressureBC& bc : bcs) {
        tags.push_back(bc.tag);
    }
    return tags;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioSpec& spec, Formulation formulation,
                            bool record_energy) {
    spec.params.validate();
    const int networks = spec.params.network_count();
    if (static_cast<int>(spec.initial_pressure.size()) != networks) {
        throw std::invalid_argument(
            "run_scenario: one initial pressure per network is required");
    }
    if (!spec.bcs.network.empty() &&
        static_cast<int>(spec.bcs.network.size()) != networks) {
        throw std::invalid_argument(
            "run_scenario: boundary program must cover every network (or none)");
    }
    if (!(spec.inner_radius > 0.0) || !(spec.outer_radius > spec.inner_radius)) {
        throw std::invalid_argument("run_scenario: invalid annulus radii");
    }
    const int steps_per_cycle = exact_division(spec.cycle_length, spec.dt,
                                               "cycle length must be a multiple of dt");
    exact_division(spec.t_end, spec.cycle_length, "t_end must be a whole number of cycles");

    auto mesh = std::make_shared<Mesh>(
        build_annulus_mesh(spec.inner_radius, spec.outer_radius, spec.resolution));

    DirichletSpec dirichlet;
    for (const DisplacementBC& bc : spec.bcs.displacement) {
        dirichlet.displacement_tags.push_back(bc.tag);
    }
    dirichlet.network_tags.resize(static_cast<size_t>(networks));
    for (int j = 0; j < networks; ++j) {
        if (!spec.bcs.network.empty()) {
            dirichlet.network_tags[j] = bc_tags(spec.bcs.network[j]);
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

    std::vector<Vector> initial_pressure;
    initial_pressure.reserve(static_cast<size_t>(networks));
    for (int j = 0; j < networks; ++j) {
        initial_pressure.emplace_back(
            static_cast<size_t>(spaces.network_pressure[j].dof_count()),
            spec.initial_pressure[j]);
    }
    const MpetState initial =
        compatible_initial_state(op, spec.sources, spec.bcs, initial_pressure);

    RunOptions options;
    options.record_energy = record_energy;
    for (const ProbeSpec& probe : spec.probes) {
        options.probe_points.push_back(nearest_vertex(*mesh, probe.point));
        options.probe_labels.push_back(probe.label);
    }

    const TimeGrid grid = TimeGrid::make(spec.t_end, spec.dt);
    RunResult run = run_transient(op, spec.sources, spec.bcs, initial, grid, options);

    ScenarioResult result;
    result.formulation = formulation;
    result.mesh = mesh;
    result.steps_per_cycle = steps_per_cycle;
    result.times = std::move(run.times);
    result.probes = std::move(run.probes);
    result.energy = std::move(run.energy);
    result.final_state = std::move(run.state);

    const int cycles = grid.steps / steps_per_cycle;
    result.stats.resize(result.probes.size());
    for (size_t probe = 0; probe < result.probes.size(); ++probe) {
        auto& per_series = result.stats[probe];
        per_series.resize(static_cast<size_t>(networks) + 1);
        for (int series = 0; series <= networks; ++series) {
            const std::vector<double>& values = series == 0
                                                    ? result.probes[probe].u_mag
                                                    : result.probes[probe].p[series - 1];
            for (int cycle = 0; cycle < cycles; ++cycle) {
                per_series[static_cast<size_t>(series)].push_back(
                    cycle_stats(values, steps_per_cycle, cycle));
            }
        }
    }
    return result;
}

// ============================================================================
// Series diagnostics
// ============================================================================

CycleStats cycle_stats(const std::vector<double>& series, int steps_per_cycle, int cycle) {
    if (steps_per_cycle < 1 || cycle < 0) {
        throw std::invalid_argument("cycle_stats: invalid cycle window");
    }
    const size_t begin = static_cast<size_t>(cycle) * steps_per_cycle;
    const size_t end = begin + steps_per_cycle;  // inclusive
    if (end >= series.size()) {
        throw std::invalid_argument("cycle_stats: cycle window exceeds the series");
    }
    CycleStats stats;
    stats.min = series[begin];
    stats.max = series[begin];
    double sum = 0.0;
    for (size_t k = begin; k <= end; ++k) {
        stats.min = std::min(stats.min, series[k]);
        stats.max = std::max(stats.max, series[k]);
        sum += series[k];
    }
    stats.mean = sum / static_cast<double>(steps_per_cycle + 1);
    return stats;
}

double periodicity_defect(const std::vector<double>& series, int steps_per_cycle, int cycle_a,
                          int cycle_b) {
    if (steps_per_cycle < 1 || cycle_a < 0 || cycle_b < 0) {
        throw std::invalid_argument("periodicity_defect: invalid cycle window");
    }
    const size_t a = static_cast<size_t>(cycle_a) * steps_per_cycle;
    const size_t b = static_cast<size_t>(cycle_b) * steps_per_cycle;
    const size_t last = std::max(a, b) + steps_per_cycle;
    if (last >= series.size()) {
        throw std::invalid_argument("periodicity_defect: cycle window exceeds the series");
    }
    double diff = 0.0;
    double magnitude = 0.0;
    for (int k = 0; k <= steps_per_cycle; ++k) {
        diff = std::max(diff, std::abs(series[a + k] - series[b + k]));
        magnitude = std::max({magnitude, std::abs(series[a + k]), std::abs(series[b + k])});
    }
    return magnitude > 0.0 ? diff / magnitude : 0.0;
}

std::vector<std::array<double, 2>> driving_pressure_hulls(const ScenarioSpec& spec) {
    spec.params.validate();
    const int networks = spec.params.network_count();
    if (static_cast<int>(spec.initial_pressure.size()) != networks) {
        throw std::invalid_argument(
            "driving_pressure_hulls: one initial pressure per network is required");
    }
    const int samples = std::max(1, exact_division(spec.cycle_length, spec.dt,
                                                   "cycle length must be a multiple of dt"));
    const Vec2 inner_point = {spec.inner_radius, 0.0};
    const Vec2 outer_point = {spec.outer_radius, 0.0};

    std::vector<std::array<double, 2>> own(static_cast<size_t>(networks));
    for (int j = 0; j < networks; ++j) {
        own[j] = {spec.initial_pressure[j], spec.initial_pressure[j]};
        if (spec.bcs.network.empty()) {
            continue;
        }
        for (const PressureBC& bc : spec.bcs.network[j]) {
            for (int k = 0; k <= samples; ++k) {
                const double t = spec.cycle_length * k / samples;
                for (const Vec2& x : {inner_point, outer_point}) {
                    const double v = bc.value(x, t);
                    own[j][0] = std::min(own[j][0], v);
                    own[j][1] = std::max(own[j][1], v);
                }
            }
        }
    }

    std::vector<std::array<double, 2>> widened = own;
    for (int j = 0; j < networks; ++j) {
        for (int i = 0; i < networks; ++i) {
            if (i == j || spec.params.transfer[j][i] == 0.0) {
                continue;
            }
            widened[j][0] = std::min(widened[j][0], own[i][0]);
            widened[j][1] = std::max(widened[j][1], own[i][1]);
        }
    }
    return widened;
}

// ============================================================================
// Emission
// ============================================================================

std::string probes_csv(const ScenarioResult& result) {
    std::string out = "t";
    for (const ProbeTrace& probe : result.probes) {
        out += "," + probe.label + "_u";
        for (size_t j = 0; j < probe.p.size(); ++j) {
            char column[64];
            std::snprintf(column, sizeof(column), ",%s_p%zu", probe.label.c_str(), j + 1);
            out += column;
        }
    }
    out += "\n";
    char buf[32];
    for (size_t k = 0; k < result.times.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.9e", result.times[k]);
        out += buf;
        for (const ProbeTrace& probe : result.probes) {
            std::snprintf(buf, sizeof(buf), ",%.9e", probe.u_mag[k]);
            out += buf;
            for (const auto& series : probe.p) {
                std::snprintf(buf, sizeof(buf), ",%.9e", series[k]);
                out += buf;
            }
        }
        out += "\n";
    }
    return out;
}

void write_probes_csv(const ScenarioResult& result, const std::string& path) {
    std::ofstream stream(path, std::ios::binary);
    if (!stream) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    stream << probes_csv(result);
    if (!stream) {
        throw std::runtime_error("failed while writing '" + path + "'");
    }
}

}  // namespace mpet
