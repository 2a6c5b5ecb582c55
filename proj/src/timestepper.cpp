#include "mpet/timestepper.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace mpet {

namespace {

Vector slice(const Vector& x, int offset, int size) {
    return Vector(x.begin() + offset, x.begin() + offset + size);
}

double quadratic_form(const SparseMatrix& m, const Vector& x) {
    return dot(x, m.apply(x));
}

const FESpace& field_space(const MpetOperator& op, int field) {
    const MpetSpaces& spaces = *op.spaces;
    if (field == 0) {
        return spaces.displacement;
    }
    if (op.has_total_pressure()) {
        if (field == 1) {
            return *spaces.total_pressure;
        }
        return spaces.network_pressure[field - 2];
    }
    return spaces.network_pressure[field - 1];
}

// Dirichlet coefficient values of one scalar/vector space written into the
// monolithic `full` vector at `offset`.
template <typename ValueAt>
void write_tag_values(const FESpace& space, int offset, const ValueAt& value_at, Vector& full) {
    for (const auto& [tag, nodes] : space.constrained_nodes_by_tag()) {
        for (int node : nodes) {
            value_at(tag, node, offset, full);
        }
    }
}

}  // namespace

TimeGrid TimeGrid::make(double t_end, double dt) {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        throw std::invalid_argument("TimeGrid: t_end must be positive");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("TimeGrid: dt must be positive");
    }
    const double ratio = t_end / dt;
    const int steps = static_cast<int>(std::llround(ratio));
    if (steps < 1 || std::abs(ratio - steps) > 1e-8 * std::max(1.0, ratio)) {
        throw std::invalid_argument("TimeGrid: t_end must be an integer multiple of dt");
    }
    return TimeGrid{t_end, dt, steps};
}

FEFunction extract_displacement(const MpetOperator& op, const MpetState& state) {
    const int f = op.displacement_field();
    return FEFunction(op.spaces->displacement,
                      slice(state.x, op.field_offset(f), op.lhs.field_sizes()[f]));
}

FEFunction extract_total_pressure(const MpetOperator& op, const MpetState& state) {
    const int f = op.total_pressure_field();
    return FEFunction(*op.spaces->total_pressure,
                      slice(state.x, op.field_offset(f), op.lhs.field_sizes()[f]));
}

FEFunction extract_network_pressure(const MpetOperator& op, const MpetState& state, int j) {
    const int f = op.network_field(j);
    return FEFunction(op.spaces->network_pressure[j],
                      slice(state.x, op.field_offset(f), op.lhs.field_sizes()[f]));
}

std::vector<int> constrained_dofs(const MpetOperator& op) {
    std::vector<int> out;
    for (int f = 0; f < op.lhs.field_count(); ++f) {
        const FESpace& space = field_space(op, f);
        const int offset = op.field_offset(f);
        for (int dof : space.constrained_dofs()) {
            out.push_back(offset + dof);
        }
    }
    return out;  // offsets grow per field, within-field sorted, so sorted overall
}

Vector boundary_values(const MpetOperator& op, const BoundaryProgram& bcs, double t) {
    const MpetSpaces& spaces = *op.spaces;
    const int a = op.params.network_count();
    if (!bcs.network.empty() && static_cast<int>(bcs.network.size()) != a) {
        throw std::invalid_argument("boundary_values: network list must be empty or have one "
                                    "entry per network");
    }

    Vector full(op.total_size(), 0.0);

    // Displacement: every constrained tag must be programmed exactly once.
    {
        const FESpace& v = spaces.displacement;
        std::set<int> programmed;
        for (const DisplacementBC& bc : bcs.displacement) {
            if (!bc.value) {
                throw std::invalid_argument("boundary_values: displacement entry for tag " +
                                            std::to_string(bc.tag) + " has no value function");
            }
            if (!programmed.insert(bc.tag).second) {
                throw std::invalid_argument("boundary_values: duplicate displacement entry for "
                                            "tag " + std::to_string(bc.tag));
            }
            if (std::find(v.constrained_tags().begin(), v.constrained_tags().end(), bc.tag) ==
                v.constrained_tags().end()) {
                throw std::invalid_argument("boundary_values: displacement tag " +
                                            std::to_string(bc.tag) +
                                            " does not constrain the displacement space");
            }
        }
        for (int tag : v.constrained_tags()) {
            if (!programmed.count(tag)) {
                throw std::invalid_argument("boundary_values: no displacement data for "
                                            "constrained tag " + std::to_string(tag));
            }
        }
        const int offset = op.field_offset(op.displacement_field());
        for (const auto& [tag, nodes] : v.constrained_nodes_by_tag()) {
            const auto it =
                std::find_if(bcs.displacement.begin(), bcs.displacement.end(),
                             [tag = tag](const DisplacementBC& bc) { return bc.tag == tag; });
            for (int node : nodes) {
                const Vec2 value = it->value(v.node_coord(node), t);
                full[offset + v.dof_of(node, 0)] = value[0];
                full[offset + v.dof_of(node, 1)] = value[1];
            }
        }
    }

    // Network pressures, same bookkeeping per network.
    for (int j = 0; j < a; ++j) {
        const FESpace& q = spaces.network_pressure[j];
        const std::vector<PressureBC> empty;
        const std::vector<PressureBC>& list = bcs.network.empty() ? empty : bcs.network[j];
        std::set<int> programmed;
        for (const PressureBC& bc : list) {
            if (!bc.value) {
                throw std::invalid_argument("boundary_values: pressure entry for tag " +
                                            std::to_string(bc.tag) + " of network " +
                                            std::to_string(j) + " has no value function");
            }
            if (!programmed.insert(bc.tag).second) {
                throw std::invalid_argument("boundary_values: duplicate pressure entry for tag " +
                                            std::to_string(bc.tag) + " of network " +
                                            std::to_string(j));
            }
            if (std::find(q.constrained_tags().begin(), q.constrained_tags().end(), bc.tag) ==
                q.constrained_tags().end()) {
                throw std::invalid_argument("boundary_values: tag " + std::to_string(bc.tag) +
                                            " does not constrain network " + std::to_string(j));
            }
        }
        for (int tag : q.constrained_tags()) {
            if (!programmed.count(tag)) {
                throw std::invalid_argument("boundary_values: no pressure data for constrained "
                                            "tag " + std::to_string(tag) + " of network " +
                                            std::to_string(j));
            }
        }
        const int offset = op.field_offset(op.network_field(j));
        for (const auto& [tag, nodes] : q.constrained_nodes_by_tag()) {
            const auto it = std::find_if(list.begin(), list.end(),
                                         [tag = tag](const PressureBC& bc) { return bc.tag == tag; });
            for (int node : nodes) {
                full[offset + node] = it->value(q.node_coord(node), t);
            }
        }
    }

    const std::vector<int> dofs = constrained_dofs(op);
    Vector values(dofs.size());
    for (size_t k = 0; k < dofs.size(); ++k) {
        values[k] = full[dofs[k]];
    }
    return values;
}

EnergySample energy_sample(const MpetOperator& op, const MpetState& state) {
    const int a = op.params.network_count();
    EnergySample s;
    s.t = state.t;

    const Vector u = slice(state.x, op.field_offset(0), op.lhs.field_sizes()[0]);
    s.strain = quadratic_form(op.elasticity, u);

    std::vector<Vector> p(a);
    for (int j = 0; j < a; ++j) {
        const int f = op.network_field(j);
        p[j] = slice(state.x, op.field_offset(f), op.lhs.field_sizes()[f]);
        s.storage += op.params.storage[j] * quadratic_form(op.pressure_mass, p[j]);
        s.diffusion += quadratic_form(op.diffusion[j], p[j]);
    }

    if (op.has_total_pressure()) {
        const int f0 = op.total_pressure_field();
        Vector w = slice(state.x, op.field_offset(f0), op.lhs.field_sizes()[f0]);
        s.p0_l2 = std::sqrt(std::max(0.0, quadratic_form(op.pressure_mass, w)));
        for (int j = 0; j < a; ++j) {
            axpy(op.params.alpha[j], p[j], w);
        }
        s.coupling = quadratic_form(op.pressure_mass, w) / op.params.lambda;
    } else {
        s.coupling = op.params.lambda * quadratic_form(op.div_div, u);
    }

    for (int j = 0; j < a; ++j) {
        for (int i = j + 1; i < a; ++i) {
            if (op.params.transfer[j][i] == 0.0) {
                continue;
            }
            Vector d = p[j];
            axpy(-1.0, p[i], d);
            s.transfer += op.params.transfer[j][i] * quadratic_form(op.pressure_mass, d);
        }
    }

    s.total = s.strain + s.storage + s.coupling;
    return s;
}

MpetState compatible_initial_state(const MpetOperator& op, const SourceData& sources,
                                   const BoundaryProgram& bcs,
                                   const std::vector<Vector>& network_pressure) {
    const MpetSpaces& spaces = *op.spaces;
    const int a = op.params.network_count();
    if (static_cast<int>(network_pressure.size()) != a) {
        throw std::invalid_argument("compatible_initial_state: one pressure vector per network "
                                    "is required");
    }
    const int nq = spaces.network_pressure.front().dof_count();
    for (const Vector& pj : network_pressure) {
        if (static_cast<int>(pj.size()) != nq) {
            throw std::invalid_argument("compatible_initial_state: a network pressure vector has "
                                        "the wrong size");
        }
    }

    const FESpace& v = spaces.displacement;
    const int nv = v.dof_count();

    // Unscaled static loads for the momentum row at t = 0.
    Vector load_u(nv, 0.0);
    if (sources.body_force) {
        load_u = assemble_vector_load(v, [&](Vec2 x) { return sources.body_force(x, 0.0); });
    }
    for (const StressBoundary& tr : sources.tractions) {
        if (!tr.normal_stress) {
            throw std::invalid_argument("compatible_initial_state: traction entry has no stress "
                                        "function");
        }
        axpy(1.0, assemble_boundary_normal_load(v, tr.tag,
                                                [&](Vec2 x) { return tr.normal_stress(x, 0.0); }),
             load_u);
    }

    // Displacement Dirichlet values at t = 0, local indexing.
    const Vector all_values = boundary_values(op, bcs, 0.0);
    const std::vector<int> all_dofs = constrained_dofs(op);
    std::vector<Constraint> u_constraints;
    const int u_off = op.field_offset(op.displacement_field());
    for (size_t k = 0; k < all_dofs.size(); ++k) {
        if (all_dofs[k] >= u_off && all_dofs[k] < u_off + nv) {
            u_constraints.emplace_back(all_dofs[k] - u_off, all_values[k]);
        }
    }

    MpetState state;
    state.t = 0.0;
    state.x.assign(op.total_size(), 0.0);

    if (op.has_total_pressure()) {
        // Solve [ A  B^T ; B  -M/lambda ] (u, p0) = (F, M sum alpha p / lambda).
        BlockMatrix m(std::vector<int>{nv, nq});
        m.set_block(0, 0, op.elasticity);
        m.set_block(0, 1, op.div_coupling.transposed());
        m.set_block(1, 0, op.div_coupling);
        SparseMatrix mass = op.pressure_mass;
        mass.scale(-1.0 / op.params.lambda);
        m.set_block(1, 1, std::move(mass));

        Vector alpha_p(nq, 0.0);
        for (int j = 0; j < a; ++j) {
            axpy(op.params.alpha[j], network_pressure[j], alpha_p);
        }
        Vector rhs(nv + nq, 0.0);
        std::copy(load_u.begin(), load_u.end(), rhs.begin());
        const Vector mass_alpha_p = op.pressure_mass.apply(alpha_p);
        for (int k = 0; k < nq; ++k) {
            rhs[nv + k] = mass_alpha_p[k] / op.params.lambda;
        }

        SparseMatrix mono = m.monolithic();
        apply_dirichlet(mono, rhs, u_constraints);
        const Vector x = solve(mono, rhs);

        std::copy(x.begin(), x.begin() + nv, state.x.begin() + u_off);
        const int p0_off = op.field_offset(op.total_pressure_field());
        std::copy(x.begin() + nv, x.end(), state.x.begin() + p0_off);
    } else {
        // Solve (A + lambda D) u = F + sum alpha_j B^T p_j.
        SparseMatrix m = op.elasticity;
        m.add_scaled(op.div_div, op.params.lambda);
        Vector rhs = load_u;
        const SparseMatrix bt = op.div_coupling.transposed();
        for (int j = 0; j < a; ++j) {
            axpy(op.params.alpha[j], bt.apply(network_pressure[j]), rhs);
        }
        apply_dirichlet(m, rhs, u_constraints);
        const Vector u = solve(m, rhs);
        std::copy(u.begin(), u.end(), state.x.begin() + u_off);
    }

    for (int j = 0; j < a; ++j) {
        const int off = op.field_offset(op.network_field(j));
        std::copy(network_pressure[j].begin(), network_pressure[j].end(),
                  state.x.begin() + off);
    }
    return state;
}

RunResult run_transient(const MpetOperator& op, const SourceData& sources,
                        const BoundaryProgram& bcs, const MpetState& initial,
                        const TimeGrid& grid, const RunOptions& options) {
    if (static_cast<int>(initial.x.size()) != op.total_size()) {
        throw std::invalid_argument("run_transient: initial state has the wrong size");
    }
    const double start_ratio = initial.t / grid.dt;
    const int start = static_cast<int>(std::llround(start_ratio));
    if (start < 0 || start > grid.steps ||
        std::abs(start_ratio - start) > 1e-8 * std::max(1.0, std::abs(start_ratio))) {
        throw std::invalid_argument("run_transient: initial time does not lie on the grid");
    }
    if (!options.probe_labels.empty() &&
        options.probe_labels.size() != options.probe_points.size()) {
        throw std::invalid_argument("run_transient: probe labels must match probe points");
    }

    const int a = op.params.network_count();
    RunResult result;
    result.probes.resize(options.probe_points.size());
    std::vector<int> probe_cells(options.probe_points.size());
    for (size_t k = 0; k < options.probe_points.size(); ++k) {
        result.probes[k].point = options.probe_points[k];
        if (!options.probe_labels.empty()) {
            result.probes[k].label = options.probe_labels[k];
        }
        result.probes[k].p.resize(a);
        probe_cells[k] = locate_cell(*op.spaces->mesh, options.probe_points[k]);
        if (probe_cells[k] < 0) {
            throw std::invalid_argument("run_transient: probe point lies outside the mesh");
        }
    }

    const auto record = [&](const MpetState& state) {
        result.times.push_back(state.t);
        if (!options.probe_points.empty()) {
            const FEFunction u = extract_displacement(op, state);
            std::vector<FEFunction> p;
            p.reserve(a);
            for (int j = 0; j < a; ++j) {
                p.push_back(extract_network_pressure(op, state, j));
            }
            for (size_t k = 0; k < options.probe_points.size(); ++k) {
                const Vec2 value = u.eval_vector_in_cell(probe_cells[k], options.probe_points[k]);
                result.probes[k].u_mag.push_back(norm(value));
                for (int j = 0; j < a; ++j) {
                    result.probes[k].p[j].push_back(
                        p[j].eval_scalar_in_cell(probe_cells[k], options.probe_points[k]));
                }
            }
        }
        if (options.record_energy) {
            result.energy.push_back(energy_sample(op, state));
        }
    };

    const SparseMatrix full = op.lhs.monolithic();
    const std::vector<int> dirichlet = constrained_dofs(op);
    const DirichletLift lift(full, dirichlet);
    const DirectSolver solver(eliminate_dirichlet(full, dirichlet));

    MpetState state = initial;
    record(state);
    for (int n = start; n < grid.steps; ++n) {
        const double t_prev = grid.time(n);
        const double t_next = grid.time(n + 1);
        Vector rhs = assemble_rhs(op, sources, t_prev, t_next, state.x);
        lift.apply(rhs, boundary_values(op, bcs, t_next));
        state.x = solver.solve(rhs);
        state.t = t_next;
        record(state);
    }
    result.state = std::move(state);
    return result;
}

}  // namespace mpet
