#include "mpet/timestepper.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <gtest/gtest.h>

#include "mpet/mesh.hpp"
#include "mpet/mpet_core.hpp"
#include "mpet/spaces.hpp"
#include "mpet/verify.hpp"

namespace mpet {
namespace {

// The operator keeps a pointer to its spaces, so both live side by side in
// one non-copyable fixture assembled against the member's final address.
struct Problem {
    ManufacturedCase mcase;
    std::shared_ptr<const Mesh> mesh;
    MpetSpaces spaces;
    MpetOperator op;
    BoundaryProgram bcs;

    Problem(Formulation formulation, int n, double dt, double theta)
        : mcase(example1_case(0.3, 1.0)),
          mesh(std::make_shared<Mesh>(build_unit_square_mesh(n))),
          spaces(formulation == Formulation::kTotalPressure
                     ? make_taylor_hood_spaces(
                           mesh, mcase.params.network_count(),
                           DirichletSpec::uniform({kTagWhole}, mcase.params.network_count()))
                     : make_standard_spaces(
                           mesh, mcase.params.network_count(),
                           DirichletSpec::uniform({kTagWhole}, mcase.params.network_count()))) {
        op = formulation == Formulation::kTotalPressure
                 ? assemble_total_pressure_operator(spaces, mcase.params, dt, theta)
                 : assemble_standard_operator(spaces, mcase.params, dt, theta);
        bcs.displacement.push_back({kTagWhole, mcase.u});
        bcs.network.resize(static_cast<size_t>(mcase.params.network_count()));
        for (int j = 0; j < mcase.params.network_count(); ++j) {
            bcs.network[static_cast<size_t>(j)].push_back({kTagWhole, mcase.p[j]});
        }
    }
    Problem(const Problem&) = delete;
    Problem& operator=(const Problem&) = delete;
};

std::vector<Vector> zero_network_pressures(const MpetSpaces& spaces) {
    std::vector<Vector> values;
    for (const FESpace& space : spaces.network_pressure) {
        values.emplace_back(static_cast<size_t>(space.dof_count()), 0.0);
    }
    return values;
}

TEST(TimeGrid, SplitsTheIntervalExactly) {
    const TimeGrid grid = TimeGrid::make(0.5, 0.125);
    EXPECT_EQ(grid.steps, 4);
    EXPECT_DOUBLE_EQ(grid.time(0), 0.0);
    EXPECT_DOUBLE_EQ(grid.time(3), 0.375);
    EXPECT_DOUBLE_EQ(grid.time(4), 0.5);
    EXPECT_THROW(TimeGrid::make(0.5, 0.13), std::invalid_argument);
    EXPECT_THROW(TimeGrid::make(-0.5, 0.125), std::invalid_argument);
}

TEST(CompatibleInitialState, ZeroDataGivesTheZeroState) {
    // The verification case vanishes identically at t = 0 except for the
    // sources; with zero initial network pressures the static solve must
    // return zero displacement and total pressure within solver accuracy.
    const Problem p(Formulation::kTotalPressure, 4, 0.125, 0.5);
    const MpetState state =
        compatible_initial_state(p.op, p.mcase.sources, p.bcs, zero_network_pressures(p.spaces));
    EXPECT_DOUBLE_EQ(state.t, 0.0);
    double peak = 0.0;
    for (double c : state.x) {
        peak = std::max(peak, std::abs(c));
    }
    EXPECT_LE(peak, 1e-10);
}

TEST(CompatibleInitialState, KeepsPrescribedNetworkPressures) {
    const Problem p(Formulation::kTotalPressure, 3, 0.125, 0.5);
    std::vector<Vector> pressures = zero_network_pressures(p.spaces);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    for (Vector& v : pressures) {
        for (double& c : v) {
            c = uniform(rng);
        }
    }
    const MpetState state = compatible_initial_state(p.op, p.mcase.sources, p.bcs, pressures);
    for (int j = 0; j < 2; ++j) {
        const int offset = p.op.field_offset(p.op.network_field(j));
        for (size_t i = 0; i < pressures[static_cast<size_t>(j)].size(); ++i) {
            EXPECT_DOUBLE_EQ(state.x[offset + static_cast<int>(i)],
                             pressures[static_cast<size_t>(j)][i]);
        }
    }
}

TEST(RunTransient, ZeroDataStaysZero) {
    for (Formulation f : {Formulation::kTotalPressure, Formulation::kStandard}) {
        Problem p(f, 3, 0.125, 0.5);
        // Replace the manufactured program with homogeneous data.
        SourceData zero_sources;
        BoundaryProgram zero_bcs;
        zero_bcs.displacement.push_back({kTagWhole, [](Vec2, double) {
            return Vec2{0.0, 0.0};
        }});
        zero_bcs.network.resize(2);
        for (int j = 0; j < 2; ++j) {
            zero_bcs.network[j].push_back({kTagWhole, [](Vec2, double) { return 0.0; }});
        }
        const MpetState initial = compatible_initial_state(
            p.op, zero_sources, zero_bcs, zero_network_pressures(p.spaces));
        RunOptions options;
        options.probe_points = {{0.37, 0.41}};
        const RunResult result = run_transient(p.op, zero_sources, zero_bcs, initial,
                                               TimeGrid::make(0.5, 0.125), options);
        ASSERT_EQ(result.times.size(), 5u);
        for (double u : result.probes[0].u_mag) {
            EXPECT_LE(std::abs(u), 1e-12);
        }
        for (const auto& series : result.probes[0].p) {
            for (double v : series) {
                EXPECT_LE(std::abs(v), 1e-12);
            }
        }
    }
}

TEST(RunTransient, IsDeterministic) {
    const Problem p(Formulation::kTotalPressure, 3, 0.125, 0.5);
    const MpetState initial = linear_consistent_initial_state(p.op, p.mcase.sources, p.bcs);
    RunOptions options;
    options.probe_points = {{0.5, 0.5}, {0.25, 0.75}};
    options.record_energy = true;
    const RunResult a =
        run_transient(p.op, p.mcase.sources, p.bcs, initial, TimeGrid::make(0.5, 0.125), options);
    const RunResult b =
        run_transient(p.op, p.mcase.sources, p.bcs, initial, TimeGrid::make(0.5, 0.125), options);
    ASSERT_EQ(a.state.x.size(), b.state.x.size());
    for (size_t i = 0; i < a.state.x.size(); ++i) {
        EXPECT_EQ(a.state.x[i], b.state.x[i]) << "coefficient " << i;
    }
    for (size_t k = 0; k < a.probes[0].u_mag.size(); ++k) {
        EXPECT_EQ(a.probes[0].u_mag[k], b.probes[0].u_mag[k]);
    }
}

TEST(RunTransient, RestartReproducesTheUninterruptedRun) {
    const Problem p(Formulation::kStandard, 3, 0.125, 0.5);
    const MpetState initial = linear_consistent_initial_state(p.op, p.mcase.sources, p.bcs);

    const RunResult full =
        run_transient(p.op, p.mcase.sources, p.bcs, initial, TimeGrid::make(0.5, 0.125));
    const RunResult half =
        run_transient(p.op, p.mcase.sources, p.bcs, initial, TimeGrid::make(0.25, 0.125));
    const RunResult resumed =
        run_transient(p.op, p.mcase.sources, p.bcs, half.state, TimeGrid::make(0.5, 0.125));

    ASSERT_EQ(resumed.state.x.size(), full.state.x.size());
    EXPECT_DOUBLE_EQ(resumed.state.t, full.state.t);
    for (size_t i = 0; i < full.state.x.size(); ++i) {
        EXPECT_NEAR(resumed.state.x[i], full.state.x[i], 1e-12);
    }
}

TEST(RunTransient, RejectsOffGridInitialTime) {
    const Problem p(Formulation::kTotalPressure, 2, 0.125, 0.5);
    MpetState initial = linear_consistent_initial_state(p.op, p.mcase.sources, p.bcs);
    initial.t = 0.06;
    EXPECT_THROW(
        run_transient(p.op, p.mcase.sources, p.bcs, initial, TimeGrid::make(0.5, 0.125)),
        std::invalid_argument);
}

TEST(RunTransient, ThetaOneAndLinearDataAgreeWithCrankNicolson) {
    // Any consistent theta reproduces a solution linear in time exactly
    // when started from the consistent linear state, so backward Euler and
    // the trapezoidal scheme land on the same final coefficients.
    const Problem trap(Formulation::kTotalPressure, 3, 0.125, 0.5);
    const Problem euler(Formulation::kTotalPressure, 3, 0.125, 1.0);
    const MpetState init_trap =
        linear_consistent_initial_state(trap.op, trap.mcase.sources, trap.bcs);
    const MpetState init_euler =
        linear_consistent_initial_state(euler.op, euler.mcase.sources, euler.bcs);
    const RunResult a = run_transient(trap.op, trap.mcase.sources, trap.bcs, init_trap,
                                      TimeGrid::make(0.5, 0.125));
    const RunResult b = run_transient(euler.op, euler.mcase.sources, euler.bcs, init_euler,
                                      TimeGrid::make(0.5, 0.125));
    double gap = 0.0;
    double scale = 0.0;
    for (size_t i = 0; i < a.state.x.size(); ++i) {
        gap = std::max(gap, std::abs(a.state.x[i] - b.state.x[i]));
        scale = std::max(scale, std::abs(a.state.x[i]));
    }
    EXPECT_LE(gap, 1e-9 * scale);
}

TEST(EnergySample, MatchesIndependentQuadratureNorms) {
    const Problem p(Formulation::kTotalPressure, 3, 0.125, 0.5);
    const MpetState state = linear_consistent_initial_state(p.op, p.mcase.sources, p.bcs);
    const EnergySample sample = energy_sample(p.op, state);

    const FEFunction u = extract_displacement(p.op, state);
    const FEFunction p0 = extract_total_pressure(p.op, state);
    const FEFunction p1 = extract_network_pressure(p.op, state, 0);
    const FEFunction p2 = extract_network_pressure(p.op, state, 1);

    const double strain = strain_norm(u, p.mcase.params.mu);
    EXPECT_NEAR(sample.strain, strain * strain, 1e-10 * std::max(1.0, sample.strain));

    const double s1 = weighted_l2_norm(p1, p.mcase.params.storage[0]);
    const double s2 = weighted_l2_norm(p2, p.mcase.params.storage[1]);
    EXPECT_NEAR(sample.storage, s1 * s1 + s2 * s2, 1e-10);

    const double coupling = weighted_combination_l2(
        1.0 / p.mcase.params.lambda, {&p0, &p1, &p2},
        {1.0, p.mcase.params.alpha[0], p.mcase.params.alpha[1]});
    EXPECT_NEAR(sample.coupling, coupling * coupling, 1e-10);
    EXPECT_NEAR(sample.total, sample.strain + sample.storage + sample.coupling, 1e-12);

    const double p0_l2 = weighted_l2_norm(p0, 1.0);
    EXPECT_NEAR(sample.p0_l2, p0_l2, 1e-10);
}

TEST(EnergyDissipation, ZeroDataEnergyIsNonIncreasing) {
    for (Formulation f : {Formulation::kTotalPressure, Formulation::kStandard}) {
        Problem p(f, 4, 0.0625, 0.5);
        SourceData zero_sources;
        BoundaryProgram zero_bcs;
        zero_bcs.displacement.push_back({kTagWhole, [](Vec2, double) {
            return Vec2{0.0, 0.0};
        }});
        zero_bcs.network.resize(2);
        for (int j = 0; j < 2; ++j) {
            zero_bcs.network[j].push_back({kTagWhole, [](Vec2, double) { return 0.0; }});
        }
        std::vector<Vector> pressures = zero_network_pressures(p.spaces);
        std::mt19937 rng(42 + static_cast<int>(f));
        std::uniform_real_distribution<double> uniform(-1.0, 1.0);
        for (Vector& v : pressures) {
            for (double& c : v) {
                c = uniform(rng);
            }
        }
        // Admissible start: zero on the Dirichlet boundary.
        for (int j = 0; j < 2; ++j) {
            for (int node : p.spaces.network_pressure[j].constrained_dofs()) {
                pressures[static_cast<size_t>(j)][static_cast<size_t>(node)] = 0.0;
            }
        }
        const MpetState initial =
            compatible_initial_state(p.op, zero_sources, zero_bcs, pressures);
        RunOptions options;
        options.record_energy = true;
        const RunResult result = run_transient(p.op, zero_sources, zero_bcs, initial,
                                               TimeGrid::make(0.5, 0.0625), options);
        ASSERT_EQ(result.energy.size(), 9u);
        EXPECT_GT(result.energy.front().total, 1e-3);
        for (size_t k = 1; k < result.energy.size(); ++k) {
            EXPECT_LE(result.energy[k].total, result.energy[k - 1].total + 1e-10)
                << formulation_name(f) << " step " << k;
        }
    }
}

TEST(BoundaryValues, SamplesTheProgramAtTheGivenTime) {
    const Problem p(Formulation::kTotalPressure, 2, 0.125, 0.5);
    const std::vector<int> dofs = constrained_dofs(p.op);
    const Vector values = boundary_values(p.op, p.bcs, 0.25);
    ASSERT_EQ(values.size(), dofs.size());
    // The manufactured displacement trace at a known boundary node.
    const FESpace& v = p.spaces.displacement;
    const int node = v.constrained_nodes_by_tag().at(kTagWhole).front();
    const Vec2 expected = p.mcase.u(v.node_coord(node), 0.25);
    bool found_x = false;
    for (size_t k = 0; k < dofs.size(); ++k) {
        if (dofs[k] == v.dof_of(node, 0)) {
            EXPECT_NEAR(values[k], expected[0], 1e-14);
            found_x = true;
        }
    }
    EXPECT_TRUE(found_x);
}

}  // namespace
}  // namespace mpet
