#include "mpet/mpet_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mpet {

namespace {

SparseMatrix scaled(const SparseMatrix& m, double s) {
    SparseMatrix out = m;
    out.scale(s);
    return out;
}

SparseMatrix combined(const SparseMatrix& a, double sa, const SparseMatrix& b, double sb) {
    SparseMatrix out = a;
    out.scale(sa);
    out.add_scaled(b, sb);
    return out;
}

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw std::invalid_argument(std::string("MpetParameters: ") + what + " is not finite");
    }
}

}  // namespace

std::string formulation_name(Formulation f) {
    return f == Formulation::kTotalPressure ? "total-pressure" : "standard";
}

void MpetParameters::validate() const {
    const int a = network_count();
    if (a < 1) {
        throw std::invalid_argument("MpetParameters: at least one network is required");
    }
    check_finite(mu, "mu");
    check_finite(lambda, "lambda");
    if (mu <= 0.0) {
        throw std::invalid_argument("MpetParameters: mu must be positive, got " +
                                    std::to_string(mu));
    }
    if (lambda <= 0.0) {
        throw std::invalid_argument("MpetParameters: lambda must be positive, got " +
                                    std::to_string(lambda));
    }
    if (static_cast<int>(storage.size()) != a || static_cast<int>(permeability.size()) != a) {
        throw std::invalid_argument(
            "MpetParameters: alpha, storage, and permeability must have one entry per network");
    }
    if (!permeability_field.empty() && static_cast<int>(permeability_field.size()) != a) {
        throw std::invalid_argument(
            "MpetParameters: permeability_field must be empty or have one entry per network");
    }
    for (int j = 0; j < a; ++j) {
        check_finite(alpha[j], "alpha");
        check_finite(storage[j], "storage");
        check_finite(permeability[j], "permeability");
        if (alpha[j] <= 0.0) {
            throw std::invalid_argument("MpetParameters: alpha[" + std::to_string(j) +
                                        "] must be positive");
        }
        if (storage[j] < 0.0) {
            throw std::invalid_argument("MpetParameters: storage[" + std::to_string(j) +
                                        "] must be nonnegative");
        }
        if (permeability[j] <= 0.0) {
            throw std::invalid_argument("MpetParameters: permeability[" + std::to_string(j) +
                                        "] must be positive");
        }
    }
    if (static_cast<int>(transfer.size()) != a) {
        throw std::invalid_argument("MpetParameters: transfer must be a square table, one row "
                                    "per network");
    }
    for (int j = 0; j < a; ++j) {
        if (static_cast<int>(transfer[j].size()) != a) {
            throw std::invalid_argument("MpetParameters: transfer row " + std::to_string(j) +
                                        " has the wrong length");
        }
        if (transfer[j][j] != 0.0) {
            throw std::invalid_argument("MpetParameters: transfer diagonal entry " +
                                        std::to_string(j) + " must be zero");
        }
        for (int i = 0; i < a; ++i) {
            check_finite(transfer[j][i], "transfer");
            if (transfer[j][i] < 0.0) {
                throw std::invalid_argument("MpetParameters: transfer coefficients must be "
                                            "nonnegative");
            }
            if (transfer[j][i] != transfer[i][j]) {
                throw std::invalid_argument("MpetParameters: transfer table must be symmetric");
            }
        }
    }
}

std::pair<double, double> lame_from_E_nu(double E, double nu) {
    if (!(E > 0.0)) {
        throw std::invalid_argument("lame_from_E_nu: Young's modulus must be positive");
    }
    if (!(nu > -1.0 && nu < 0.5)) {
        throw std::invalid_argument("lame_from_E_nu: Poisson ratio must lie in (-1, 0.5)");
    }
    const double mu = E / (2.0 * (1.0 + nu));
    const double lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    return {mu, lambda};
}

double transfer_rate(const std::vector<std::vector<double>>& xi, const std::vector<double>& p,
                     int j) {
    if (j < 0 || j >= static_cast<int>(xi.size()) || p.size() != xi.size()) {
        throw std::invalid_argument("transfer_rate: index or pressure list out of range");
    }
    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        s += xi[j][i] * (p[j] - p[i]);
    }
    return s;
}

int MpetOperator::total_pressure_field() const {
    if (!has_total_pressure()) {
        throw std::logic_error("MpetOperator: the standard formulation has no total-pressure "
                               "field");
    }
    return 1;
}

int MpetOperator::network_field(int j) const {
    if (j < 0 || j >= params.network_count()) {
        throw std::out_of_range("MpetOperator: network index " + std::to_string(j) +
                                " out of range");
    }
    return (has_total_pressure() ? 2 : 1) + j;
}

namespace {

MpetOperator assemble_operator(Formulation form, const MpetSpaces& spaces,
                               const MpetParameters& params, double dt, double theta) {
    params.validate();
    if (spaces.network_count() != params.network_count()) {
        throw std::invalid_argument("assemble operator: spaces and parameters disagree on the "
                                    "network count");
    }
    const bool wants_tp = form == Formulation::kTotalPressure;
    if (wants_tp != spaces.total_pressure.has_value()) {
        throw std::invalid_argument("assemble operator: spaces were built for the other "
                                    "formulation");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("assemble operator: dt must be positive");
    }
    if (!(theta > 0.0 && theta <= 1.0)) {
        throw std::invalid_argument("assemble operator: theta must lie in (0, 1]");
    }

    MpetOperator op;
    op.formulation = form;
    op.spaces = &spaces;
    op.params = params;
    op.dt = dt;
    op.theta = theta;

    const FESpace& v = spaces.displacement;
    const FESpace& scalar = spaces.network_pressure.front();
    const int a = params.network_count();

    op.elasticity = assemble_elasticity(v, params.mu);
    op.pressure_mass = assemble_scalar_mass(scalar);
    op.div_div = assemble_div_div(v);
    op.div_coupling = assemble_div_coupling(v, scalar);
    op.diffusion.reserve(a);
    for (int j = 0; j < a; ++j) {
        const bool pointwise =
            !params.permeability_field.empty() && params.permeability_field[j] != nullptr;
        op.diffusion.push_back(
            pointwise
                ? assemble_scalar_stiffness(spaces.network_pressure[j],
                                            params.permeability_field[j])
                : assemble_scalar_stiffness(spaces.network_pressure[j], params.permeability[j]));
    }

    const SparseMatrix div_coupling_t = op.div_coupling.transposed();
    const std::vector<int> sizes = spaces.field_sizes();
    op.lhs = BlockMatrix(sizes);
    op.history = BlockMatrix(sizes);

    const double th = theta;
    const double inv_lambda = 1.0 / params.lambda;
    std::vector<double> xi_row_sum(a, 0.0);
    for (int j = 0; j < a; ++j) {
        for (int i = 0; i < a; ++i) {
            xi_row_sum[j] += params.transfer[j][i];
        }
    }

    if (wants_tp) {
        // Fields: 0 = u, 1 = p0, 2+j = network j. The divergence row keeps
        // its sign and carries the same theta factor as the momentum row;
        // each network row is scaled by -theta*dt. Both lhs and the
        // history operator below follow from that one convention.
        op.lhs.set_block(0, 0, scaled(op.elasticity, th));
        op.lhs.set_block(0, 1, scaled(div_coupling_t, th));
        op.lhs.set_block(1, 0, scaled(op.div_coupling, th));
        op.lhs.set_block(1, 1, scaled(op.pressure_mass, -th * inv_lambda));
        for (int j = 0; j < a; ++j) {
            op.lhs.set_block(1, 2 + j, scaled(op.pressure_mass, -th * inv_lambda * params.alpha[j]));
            op.lhs.set_block(2 + j, 1, scaled(op.pressure_mass, -th * inv_lambda * params.alpha[j]));
            for (int i = 0; i < a; ++i) {
                if (i == j) {
                    const double mass_scale =
                        -th * (params.storage[j] + inv_lambda * params.alpha[j] * params.alpha[j]) -
                        th * th * dt * xi_row_sum[j];
                    op.lhs.set_block(2 + j, 2 + j,
                                     combined(op.pressure_mass, mass_scale, op.diffusion[j],
                                              -th * th * dt));
                } else {
                    const double mass_scale = -th * inv_lambda * params.alpha[j] * params.alpha[i] +
                                              th * th * dt * params.transfer[j][i];
                    op.lhs.set_block(2 + j, 2 + i, scaled(op.pressure_mass, mass_scale));
                }
            }
        }

        op.history.set_block(0, 0, scaled(op.elasticity, -(1.0 - th)));
        op.history.set_block(0, 1, scaled(div_coupling_t, -(1.0 - th)));
        op.history.set_block(1, 0, scaled(op.div_coupling, -(1.0 - th)));
        op.history.set_block(1, 1, scaled(op.pressure_mass, (1.0 - th) * inv_lambda));
        for (int j = 0; j < a; ++j) {
            op.history.set_block(1, 2 + j,
                                 scaled(op.pressure_mass, (1.0 - th) * inv_lambda * params.alpha[j]));
            op.history.set_block(2 + j, 1,
                                 scaled(op.pressure_mass, -th * inv_lambda * params.alpha[j]));
            for (int i = 0; i < a; ++i) {
                if (i == j) {
                    const double mass_scale =
                        -th * (params.storage[j] + inv_lambda * params.alpha[j] * params.alpha[j]) +
                        th * (1.0 - th) * dt * xi_row_sum[j];
                    op.history.set_block(2 + j, 2 + j,
                                         combined(op.pressure_mass, mass_scale, op.diffusion[j],
                                                  th * (1.0 - th) * dt));
                } else {
                    const double mass_scale =
                        -th * inv_lambda * params.alpha[j] * params.alpha[i] -
                        th * (1.0 - th) * dt * params.transfer[j][i];
                    op.history.set_block(2 + j, 2 + i, scaled(op.pressure_mass, mass_scale));
                }
            }
        }
    } else {
        // Fields: 0 = u, 1+j = network j. The volumetric term lambda
        // <div u, div v> stays in the momentum block.
        op.lhs.set_block(0, 0, combined(op.elasticity, th, op.div_div, th * params.lambda));
        op.history.set_block(0, 0, combined(op.elasticity, -(1.0 - th), op.div_div,
                                            -(1.0 - th) * params.lambda));
        for (int j = 0; j < a; ++j) {
            op.lhs.set_block(0, 1 + j, scaled(div_coupling_t, -th * params.alpha[j]));
            op.lhs.set_block(1 + j, 0, scaled(op.div_coupling, -th * params.alpha[j]));
            op.history.set_block(0, 1 + j, scaled(div_coupling_t, (1.0 - th) * params.alpha[j]));
            op.history.set_block(1 + j, 0, scaled(op.div_coupling, -th * params.alpha[j]));
            for (int i = 0; i < a; ++i) {
                if (i == j) {
                    op.lhs.set_block(1 + j, 1 + j,
                                     combined(op.pressure_mass,
                                              -th * params.storage[j] - th * th * dt * xi_row_sum[j],
                                              op.diffusion[j], -th * th * dt));
                    op.history.set_block(1 + j, 1 + j,
                                         combined(op.pressure_mass,
                                                  -th * params.storage[j] +
                                                      th * (1.0 - th) * dt * xi_row_sum[j],
                                                  op.diffusion[j], th * (1.0 - th) * dt));
                } else if (params.transfer[j][i] != 0.0) {
                    op.lhs.set_block(1 + j, 1 + i,
                                     scaled(op.pressure_mass, th * th * dt * params.transfer[j][i]));
                    op.history.set_block(
                        1 + j, 1 + i,
                        scaled(op.pressure_mass, -th * (1.0 - th) * dt * params.transfer[j][i]));
                }
            }
        }
    }
    return op;
}

}  // namespace

MpetOperator assemble_total_pressure_operator(const MpetSpaces& spaces,
                                              const MpetParameters& params, double dt,
                                              double theta) {
    return assemble_operator(Formulation::kTotalPressure, spaces, params, dt, theta);
}

MpetOperator assemble_standard_operator(const MpetSpaces& spaces, const MpetParameters& params,
                                        double dt, double theta) {
    return assemble_operator(Formulation::kStandard, spaces, params, dt, theta);
}

Vector assemble_scaled_loads(const MpetOperator& op, const SourceData& sources, double t) {
    if (!op.spaces) {
        throw std::invalid_argument("assemble_scaled_loads: operator has no spaces attached");
    }
    const MpetSpaces& spaces = *op.spaces;
    const int a = op.params.network_count();
    if (!sources.network_source.empty() &&
        static_cast<int>(sources.network_source.size()) != a) {
        throw std::invalid_argument("assemble_scaled_loads: network_source must be empty or "
                                    "have one entry per network");
    }
    Vector out(op.total_size(), 0.0);

    const int u_off = op.field_offset(op.displacement_field());
    if (sources.body_force) {
        const Vector f = assemble_vector_load(
            spaces.displacement, [&](Vec2 x) { return sources.body_force(x, t); });
        for (size_t k = 0; k < f.size(); ++k) {
            out[u_off + k] += f[k];
        }
    }
    for (const StressBoundary& tr : sources.tractions) {
        if (!tr.normal_stress) {
            throw std::invalid_argument("assemble_scaled_loads: traction entry has no stress "
                                        "function");
        }
        const Vector s = assemble_boundary_normal_load(
            spaces.displacement, tr.tag, [&](Vec2 x) { return tr.normal_stress(x, t); });
        for (size_t k = 0; k < s.size(); ++k) {
            out[u_off + k] += s[k];
        }
    }
    if (!sources.network_source.empty()) {
        for (int j = 0; j < a; ++j) {
            if (!sources.network_source[j]) {
                continue;
            }
            const Vector g = assemble_scalar_load(
                spaces.network_pressure[j],
                [&](Vec2 x) { return sources.network_source[j](x, t); });
            const int off = op.field_offset(op.network_field(j));
            for (size_t k = 0; k < g.size(); ++k) {
                out[off + k] += -op.theta * op.dt * g[k];
            }
        }
    }
    return out;
}

Vector assemble_rhs(const MpetOperator& op, const SourceData& sources, double t_prev,
                    double t_next, const Vector& prev_state) {
    if (static_cast<int>(prev_state.size()) != op.total_size()) {
        throw std::invalid_argument("assemble_rhs: previous state has the wrong size");
    }
    Vector rhs = op.history.apply(prev_state);
    axpy(op.theta, assemble_scaled_loads(op, sources, t_next), rhs);
    if (op.theta < 1.0) {
        axpy(1.0 - op.theta, assemble_scaled_loads(op, sources, t_prev), rhs);
    }
    return rhs;
}

FEFunction total_pressure_from_state(double lambda, const std::vector<double>& alpha,
                                     const FEFunction& u, const std::vector<FEFunction>& p,
                                     const FESpace& p0_space) {
    if (alpha.size() != p.size()) {
        throw std::invalid_argument("total_pressure_from_state: alpha and pressure lists differ "
                                    "in size");
    }
    if (&u.space().mesh() != &p0_space.mesh()) {
        throw std::invalid_argument("total_pressure_from_state: displacement lives on a "
                                    "different mesh");
    }
    for (const FEFunction& pj : p) {
        if (&pj.space().mesh() != &p0_space.mesh()) {
            throw std::invalid_argument("total_pressure_from_state: a network pressure lives on "
                                        "a different mesh");
        }
    }
    FEFunction p0(p0_space);
    for (int n = 0; n < p0_space.scalar_node_count(); ++n) {
        const Vec2 x = p0_space.node_coord(n);
        const int cell = locate_cell(p0_space.mesh(), x);
        if (cell < 0) {
            throw std::runtime_error("total_pressure_from_state: node lies outside the mesh");
        }
        const Mat2 grad = u.grad_vector_in_cell(cell, x);
        double value = lambda * (grad.m[0][0] + grad.m[1][1]);
        for (size_t j = 0; j < p.size(); ++j) {
            value -= alpha[j] * p[j].eval_scalar_in_cell(cell, x);
        }
        p0.coeffs()[n] = value;
    }
    return p0;
}

std::pair<FEFunction, FEFunction> solve_stokes_subsystem(const FESpace& v, const FESpace& q0,
                                                         double mu, double inv_lambda,
                                                         const VectorField& f) {
    if (&v.mesh() != &q0.mesh()) {
        throw std::invalid_argument("solve_stokes_subsystem: spaces live on different meshes");
    }
    if (!(mu > 0.0) || inv_lambda < 0.0) {
        throw std::invalid_argument("solve_stokes_subsystem: mu must be positive and "
                                    "inv_lambda nonnegative");
    }
    const bool pin_mean = inv_lambda == 0.0;
    const int nv = v.dof_count();
    const int nq = q0.dof_count();

    std::vector<int> sizes = {nv, nq};
    if (pin_mean) {
        sizes.push_back(1);
    }
    BlockMatrix m(sizes);
    m.set_block(0, 0, assemble_elasticity(v, mu));
    SparseMatrix b = assemble_div_coupling(v, q0);
    m.set_block(0, 1, b.transposed());
    m.set_block(1, 0, std::move(b));
    if (pin_mean) {
        const Vector weights = assemble_scalar_load(q0, [](Vec2) { return 1.0; });
        std::vector<std::pair<int, int>> col_pattern;
        col_pattern.reserve(nq);
        for (int i = 0; i < nq; ++i) {
            col_pattern.emplace_back(i, 0);
        }
        SparseMatrix col = SparseMatrix::from_pattern(nq, 1, col_pattern);
        for (int i = 0; i < nq; ++i) {
            col.add(i, 0, weights[i]);
        }
        m.set_block(2, 1, col.transposed());
        m.set_block(1, 2, std::move(col));
    } else {
        m.set_block(1, 1, scaled(assemble_scalar_mass(q0), -inv_lambda));
    }

    Vector rhs(m.total_size(), 0.0);
    const Vector load = assemble_vector_load(v, f);
    for (int k = 0; k < nv; ++k) {
        rhs[k] = load[k];
    }
    std::vector<Constraint> constraints;
    for (int dof : v.constrained_dofs()) {
        constraints.emplace_back(dof, 0.0);
    }

    SparseMatrix mono = m.monolithic();
    apply_dirichlet(mono, rhs, constraints);
    const Vector x = solve(mono, rhs);

    FEFunction u(v), p0(q0);
    std::copy(x.begin(), x.begin() + nv, u.coeffs().begin());
    std::copy(x.begin() + nv, x.begin() + nv + nq, p0.coeffs().begin());
    return {std::move(u), std::move(p0)};
}

}  // namespace mpet
