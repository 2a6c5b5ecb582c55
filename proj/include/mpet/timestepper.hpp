#pragma once

#include <string>
#include <vector>

#include "mpet/linalg.hpp"
#include "mpet/mpet_core.hpp"
#include "mpet/spaces.hpp"
#include "mpet/types.hpp"

namespace mpet {

// Uniform grid on [0, t_end]; t_end must be an integer multiple of dt.
struct TimeGrid {
    double t_end = 0.0;
    double dt = 0.0;
    int steps = 0;

    static TimeGrid make(double t_end, double dt);
    double time(int n) const { return n == steps ? t_end : n * dt; }
};

// Time-dependent Dirichlet data, one entry per constrained facet tag.
struct DisplacementBC {
    int tag = 0;
    TimeVectorField value;
};
struct PressureBC {
    int tag = 0;
    TimeScalarField value;
};

struct BoundaryProgram {
    std::vector<DisplacementBC> displacement;
    // Empty (no network has Dirichlet data), or one list per network.
    std::vector<std::vector<PressureBC>> network;
};

// Monolithic coefficient state at one time.
struct MpetState {
    double t = 0.0;
    Vector x;
};

FEFunction extract_displacement(const MpetOperator& op, const MpetState& state);
FEFunction extract_total_pressure(const MpetOperator& op, const MpetState& state);
FEFunction extract_network_pressure(const MpetOperator& op, const MpetState& state, int j);

// All Dirichlet dofs of the operator's spaces in monolithic indexing
// (sorted), and their prescribed values at time t.
std::vector<int> constrained_dofs(const MpetOperator& op);
Vector boundary_values(const MpetOperator& op, const BoundaryProgram& bcs, double t);

// Energy and dissipation diagnostics of one state. `total` is the decaying
// quantity: strain + storage + coupling.
struct EnergySample {
    double t = 0.0;
    double strain = 0.0;     // || eps(u) ||^2 weighted by 2 mu
    double storage = 0.0;    // sum_j c_j || p_j ||^2
    double coupling = 0.0;   // (1/lambda) || p0 + sum alpha_j p_j ||^2, or lambda || div u ||^2
    double total = 0.0;
    double diffusion = 0.0;  // sum_j || grad p_j ||^2 weighted by K_j
    double transfer = 0.0;   // (1/2) sum_{i,j} xi_ji || p_j - p_i ||^2
    double p0_l2 = 0.0;      // || p0 || (zero for the standard formulation)
};
EnergySample energy_sample(const MpetOperator& op, const MpetState& state);

// Point series: displacement magnitude and every network pressure.
struct ProbeTrace {
    Vec2 point = {0.0, 0.0};
    std::string label;
    std::vector<double> u_mag;           // per recorded time
    std::vector<std::vector<double>> p;  // [network][recorded time]
};

struct RunOptions {
    std::vector<Vec2> probe_points;
    std::vector<std::string> probe_labels;  // optional, parallel to probe_points
    bool record_energy = false;
};

struct RunResult {
    std::vector<double> times;
    std::vector<ProbeTrace> probes;
    std::vector<EnergySample> energy;
    MpetState state;  // final state
};

// Initial state consistent with the quasi-static structure: the network
// pressure coefficients are stored verbatim and the displacement (plus
// total pressure) solves the static momentum/divergence equations at
// t = 0 under the program's Dirichlet values.
MpetState compatible_initial_state(const MpetOperator& op, const SourceData& sources,
                                   const BoundaryProgram& bcs,
                                   const std::vector<Vector>& network_pressure);

// March from `initial` (whose time must sit on the grid) to t_end. The
// eliminated system matrix is factored once; boundary values and loads are
// refreshed every step. Restarting from an intermediate state reproduces
// the uninterrupted run exactly.
RunResult run_transient(const MpetOperator& op, const SourceData& sources,
                        const BoundaryProgram& bcs, const MpetState& initial,
                        const TimeGrid& grid, const RunOptions& options = {});

}  // namespace mpet
