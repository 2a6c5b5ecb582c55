#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "mpet/mesh.hpp"
#include "mpet/mpet_core.hpp"
#include "mpet/timestepper.hpp"
#include "mpet/types.hpp"

namespace mpet {

inline constexpr double kPascalPerMmhg = 133.32;

// A point series is requested by position and snapped to the nearest mesh
// vertex, so probes sit exactly on degrees of freedom.
struct ProbeSpec {
    std::string label;
    Vec2 point = {0.0, 0.0};
};

// A physiological run on the annulus geometry: material data, the full
// boundary program (Dirichlet values and normal-stress tractions), uniform
// initial network pressures and the probe set. All pressures are in Pa, all
// lengths in mm, time in s.
struct ScenarioSpec {
    std::string name;
    double inner_radius = 30.0;
    double outer_radius = 100.0;
    int resolution = 10;

    MpetParameters params;
    SourceData sources;
    BoundaryProgram bcs;
    std::vector<double> initial_pressure;  // one value per network, Pa

    double t_end = 3.0;
    double dt = 0.0125;
    double theta = 0.5;
    double cycle_length = 1.0;

    std::vector<ProbeSpec> probes;
};

// Four-network cranial scenario: displacement fixed on the outer (skull)
// boundary, pulsating total normal stress on the inner (ventricle) boundary,
// CSF / arterial / venous pressure programs per network, capillaries
// flux-free. Probes sit on the inner boundary, mid-depth, and the outer
// boundary along the positive x-axis.
ScenarioSpec brain_scenario();

struct CycleStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

struct ScenarioResult {
    Formulation formulation = Formulation::kTotalPressure;
    std::shared_ptr<const Mesh> mesh;
    int steps_per_cycle = 0;
    std::vector<double> times;
    std::vector<ProbeTrace> probes;  // probe points already snapped
    std::vector<EnergySample> energy;
    MpetState final_state;
    // stats[probe][series][cycle]; series 0 is |u|, series 1..A the network
    // pressures, cycles are the consecutive windows of length cycle_length.
    std::vector<std::vector<std::vector<CycleStats>>> stats;
};

ScenarioResult run_scenario(const ScenarioSpec& spec, Formulation formulation,
                            bool record_energy = false);

// min/max/mean of one series over cycle `cycle` (both window endpoints
// included).
CycleStats cycle_stats(const std::vector<double>& series, int steps_per_cycle, int cycle);

// Relative difference between two cycles of one series:
// max_k |s(a + k) - s(b + k)| / max |s| over both windows, with a, b the
// starts of the two cycles. Zero for an identically zero series.
double periodicity_defect(const std::vector<double>& series, int steps_per_cycle, int cycle_a,
                          int cycle_b);

// Per-network driving envelope [lo, hi] in Pa: the hull of the network's own
// Dirichlet range (sampled over one cycle) and initial value, widened by the
// envelopes of transfer-coupled neighbors. Interior values that leave this
// hull after the first cycle indicate spurious overshoot.
std::vector<std::array<double, 2>> driving_pressure_hulls(const ScenarioSpec& spec);

// One row per recorded time: t, then u magnitude and every network pressure
// per probe. Deterministic bytes for fixed inputs.
void write_probes_csv(const ScenarioResult& result, const std::string& path);
std::string probes_csv(const ScenarioResult& result);

}  // namespace mpet
