#include "mpet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>

#include "mpet/assembly.hpp"
#include "mpet/elements.hpp"
#include "mpet/mesh.hpp"

namespace mpet {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Finite-difference steps. First derivatives use the narrow steps; second
// derivatives and the outer stencil of nested first differences use the wide
// one, where the narrow step would amplify evaluation roundoff (eps / h^2)
// past the oracle tolerance.
constexpr double kSpaceStep = 1e-5;
constexpr double kTimeStep = 1e-6;
constexpr double kWideStep = 1e-4;

constexpr int kNormQuadratureDegree = 6;

}  // namespace

// ============================================================================
// Manufactured cases
// ============================================================================

ManufacturedCase example1_case(double nu, double c_value, double lambda_scale) {
    if (!(nu > 0.0 && nu < 0.5)) {
        throw std::invalid_argument("example1_case: nu must lie in (0, 0.5)");
    }
    if (!(c_value >= 0.0)) {
        throw std::invalid_argument("example1_case: storage coefficient must be >= 0");
    }
    if (!(lambda_scale > 0.0)) {
        throw std::invalid_argument("example1_case: lambda_scale must be > 0");
    }

    auto lame = lame_from_E_nu(1.0, nu);
    const double mu = lame.first;
    const double lambda = lame.second * lambda_scale;
    const double k = 1.0 / (mu + lambda);

    ManufacturedCase mc;
    {
        char label[96];
        std::snprintf(label, sizeof(label), "smooth-square nu=%g c=%g", nu, c_value);
        mc.name = label;
        if (lambda_scale != 1.0) {
            std::snprintf(label, sizeof(label), "smooth-square nu=%g c=%g lambda-scale=%g", nu,
                          c_value, lambda_scale);
            mc.name = label;
        }
    }

    mc.params.mu = mu;
    mc.params.lambda = lambda;
    mc.params.alpha = {1.0, 1.0};
    mc.params.storage = {c_value, c_value};
    mc.params.permeability = {1.0, 1.0};
    mc.params.transfer = {{0.0, 0.0}, {0.0, 0.0}};
    mc.params.validate();

    // Displacement: a divergence-free swirl plus a 1/(mu + lambda) graded
    // part, both vanishing on the boundary of the unit square.
    mc.u = [k](Vec2 x, double t) -> Vec2 {
        const double s = std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
        const double phi = std::sin(2.0 * kPi * x[1]) * (std::cos(2.0 * kPi * x[0]) - 1.0) + k * s;
        const double psi = std::sin(2.0 * kPi * x[0]) * (1.0 - std::cos(2.0 * kPi * x[1])) + k * s;
        return {t * phi, t * psi};
    };
    mc.grad_u = [k](Vec2 x, double t) -> Mat2 {
        const double sx = std::sin(kPi * x[0]), cx = std::cos(kPi * x[0]);
        const double sy = std::sin(kPi * x[1]), cy = std::cos(kPi * x[1]);
        const double s2x = std::sin(2.0 * kPi * x[0]), c2x = std::cos(2.0 * kPi * x[0]);
        const double s2y = std::sin(2.0 * kPi * x[1]), c2y = std::cos(2.0 * kPi * x[1]);
        const double dphi_dx = -2.0 * kPi * s2x * s2y + k * kPi * cx * sy;
        const double dphi_dy = 2.0 * kPi * c2y * (c2x - 1.0) + k * kPi * sx * cy;
        const double dpsi_dx = 2.0 * kPi * c2x * (1.0 - c2y) + k * kPi * cx * sy;
        const double dpsi_dy = 2.0 * kPi * s2x * s2y + k * kPi * sx * cy;
        return Mat2{{{t * dphi_dx, t * dphi_dy}, {t * dpsi_dx, t * dpsi_dy}}};
    };
    mc.div_u = [k](Vec2 x, double t) {
        return t * k * kPi * std::sin(kPi * (x[0] + x[1]));
    };

    for (int network = 1; network <= 2; ++network) {
        const double j = static_cast<double>(network);
        mc.p.push_back([j](Vec2 x, double t) {
            return -j * t * std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
        });
        mc.grad_p.push_back([j](Vec2 x, double t) -> Vec2 {
            const double sx = std::sin(kPi * x[0]), cx = std::cos(kPi * x[0]);
            const double sy = std::sin(kPi * x[1]), cy = std::cos(kPi * x[1]);
            return {-j * t * kPi * cx * sy, -j * t * kPi * sx * cy};
        });
    }

    // p0 = lambda div u - (p_1 + p_2); the lambda k prefactor stays bounded
    // as lambda grows, which is what makes the case a robustness probe.
    mc.p0 = [lambda, k](Vec2 x, double t) {
        const double s = std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
        return t * (lambda * k * kPi * std::sin(kPi * (x[0] + x[1])) + 3.0 * s);
    };
    mc.grad_p0 = [lambda, k](Vec2 x, double t) -> Vec2 {
        const double sx = std::sin(kPi * x[0]), cx = std::cos(kPi * x[0]);
        const double sy = std::sin(kPi * x[1]), cy = std::cos(kPi * x[1]);
        const double ridge = lambda * k * kPi * kPi * std::cos(kPi * (x[0] + x[1]));
        return {t * (ridge + 3.0 * kPi * cx * sy), t * (ridge + 3.0 * kPi * sx * cy)};
    };

    // Body force from the momentum balance: f = -mu lap(u)
    // - (mu + lambda) grad(div u) + sum_j alpha_j grad(p_j), where
    // (mu + lambda) k = 1 collapses the middle term.
    mc.sources.body_force = [mu, k](Vec2 x, double t) -> Vec2 {
        const double s = std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
        const double sx = std::sin(kPi * x[0]), cx = std::cos(kPi * x[0]);
        const double sy = std::sin(kPi * x[1]), cy = std::cos(kPi * x[1]);
        const double s2x = std::sin(2.0 * kPi * x[0]), c2x = std::cos(2.0 * kPi * x[0]);
        const double s2y = std::sin(2.0 * kPi * x[1]), c2y = std::cos(2.0 * kPi * x[1]);
        const double lap_phi =
            4.0 * kPi * kPi * s2y * (1.0 - 2.0 * c2x) - 2.0 * k * kPi * kPi * s;
        const double lap_psi =
            4.0 * kPi * kPi * s2x * (2.0 * c2y - 1.0) - 2.0 * k * kPi * kPi * s;
        const double ridge = kPi * kPi * std::cos(kPi * (x[0] + x[1]));
        return {t * (-mu * lap_phi - ridge - 3.0 * kPi * cx * sy),
                t * (-mu * lap_psi - ridge - 3.0 * kPi * sx * cy)};
    };

    // Network sources g_j = c_j dp_j/dt + div(du/dt) - lap(p_j); nonzero at
    // t = 0 through the time-derivative terms.
    for (int network = 1; network <= 2; ++network) {
        const double j = static_cast<double>(network);
        mc.sources.network_source.push_back([c_value, k, j](Vec2 x, double t) {
            const double s = std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
            return -c_value * j * s + k * kPi * std::sin(kPi * (x[0] + x[1])) -
                   2.0 * j * kPi * kPi * t * s;
        });
    }

    mc.t_end = 0.5;
    mc.dt = 0.125;
    mc.theta = 0.5;
    return mc;
}

// ============================================================================
// Finite-difference residual oracle
// ============================================================================

namespace {

double scalar_or_zero(const TimeScalarField& f, Vec2 x, double t) {
    return f ? f(x, t) : 0.0;
}

Vec2 vector_or_zero(const TimeVectorField& f, Vec2 x, double t) {
    return f ? f(x, t) : Vec2{0.0, 0.0};
}

Vec2 shifted(Vec2 x, int direction, double h) {
    x[direction] += h;
    return x;
}

// d f / d x_d by the narrow central stencil.
double fd_dx(const TimeScalarField& f, Vec2 x, double t, int d, double h) {
    return (f(shifted(x, d, h), t) - f(shifted(x, d, -h), t)) / (2.0 * h);
}

double fd_dt(const TimeScalarField& f, Vec2 x, double t) {
    return (f(x, t + kTimeStep) - f(x, t - kTimeStep)) / (2.0 * kTimeStep);
}

// Gradient of a vector field: row = component, column = direction.
Mat2 fd_grad(const TimeVectorField& f, Vec2 x, double t, double h) {
    Mat2 g{};
    for (int d = 0; d < 2; ++d) {
        const Vec2 plus = f(shifted(x, d, h), t);
        const Vec2 minus = f(shifted(x, d, -h), t);
        g.m[0][d] = (plus[0] - minus[0]) / (2.0 * h);
        g.m[1][d] = (plus[1] - minus[1]) / (2.0 * h);
    }
    return g;
}

double fd_laplacian(const TimeScalarField& f, Vec2 x, double t, double h) {
    double lap = 0.0;
    const double center = f(x, t);
    for (int d = 0; d < 2; ++d) {
        lap += (f(shifted(x, d, h), t) - 2.0 * center + f(shifted(x, d, -h), t)) / (h * h);
    }
    return lap;
}

// Total stress 2 mu eps(u) + lambda div(u) I with the strain taken by finite
// differences of the closed-form displacement.
Mat2 fd_stress(const ManufacturedCase& mc, Vec2 x, double t) {
    const Mat2 g = fd_grad(mc.u, x, t, kSpaceStep);
    const double div = g.m[0][0] + g.m[1][1];
    Mat2 sigma{};
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            sigma.m[a][b] = mc.params.mu * (g.m[a][b] + g.m[b][a]);
        }
        sigma.m[a][a] += mc.params.lambda * div;
    }
    return sigma;
}

void validate_case_fields(const ManufacturedCase& mc) {
    mc.params.validate();
    const size_t networks = static_cast<size_t>(mc.params.network_count());
    if (!mc.u || !mc.grad_u || !mc.div_u || !mc.p0 || !mc.grad_p0) {
        throw std::invalid_argument("residual_oracle: case is missing exact fields");
    }
    if (mc.p.size() != networks || mc.grad_p.size() != networks) {
        throw std::invalid_argument(
            "residual_oracle: case must carry one pressure (and gradient) per network");
    }
    for (size_t j = 0; j < networks; ++j) {
        if (!mc.p[j] || !mc.grad_p[j]) {
            throw std::invalid_argument("residual_oracle: empty network pressure field");
        }
    }
    if (!mc.sources.network_source.empty() && mc.sources.network_source.size() != networks) {
        throw std::invalid_argument(
            "residual_oracle: sources must carry one entry per network (or none)");
    }
}

}  // namespace

double residual_oracle(const ManufacturedCase& mc, const std::vector<Vec2>& points, double t) {
    validate_case_fields(mc);
    const int networks = mc.params.network_count();
    const double momentum_scale = 1.0 + mc.params.mu + mc.params.lambda;

    double worst = 0.0;
    auto track = [&worst](double r) { worst = std::max(worst, std::abs(r)); };

    for (const Vec2& x : points) {
        // Momentum: -div sigma(u) + sum_j alpha_j grad p_j - f, scaled by
        // 1/(1 + mu + lambda) to keep lambda-amplified stencil roundoff under
        // the tolerance for nearly incompressible parameters.
        for (int a = 0; a < 2; ++a) {
            double div_sigma = 0.0;
            for (int b = 0; b < 2; ++b) {
                const Mat2 plus = fd_stress(mc, shifted(x, b, kWideStep), t);
                const Mat2 minus = fd_stress(mc, shifted(x, b, -kWideStep), t);
                div_sigma += (plus.m[a][b] - minus.m[a][b]) / (2.0 * kWideStep);
            }
            double r = -div_sigma - vector_or_zero(mc.sources.body_force, x, t)[a];
            for (int j = 0; j < networks; ++j) {
                r += mc.params.alpha[j] * fd_dx(mc.p[j], x, t, a, kSpaceStep);
            }
            track(r / momentum_scale);
        }

        // d(div u)/dt via the time derivative first: u is evaluated at
        // shifted times, then differenced in space with the wide step.
        const TimeVectorField& u = mc.u;
        auto u_rate = [&u](Vec2 y, double s) -> Vec2 {
            const Vec2 plus = u(y, s + kTimeStep);
            const Vec2 minus = u(y, s - kTimeStep);
            return {(plus[0] - minus[0]) / (2.0 * kTimeStep),
                    (plus[1] - minus[1]) / (2.0 * kTimeStep)};
        };
        double div_u_rate = 0.0;
        for (int d = 0; d < 2; ++d) {
            div_u_rate += (u_rate(shifted(x, d, kWideStep), t)[d] -
                           u_rate(shifted(x, d, -kWideStep), t)[d]) /
                          (2.0 * kWideStep);
        }

        std::vector<double> p_at(networks);
        for (int j = 0; j < networks; ++j) {
            p_at[j] = mc.p[j](x, t);
        }

        // Mass balance per network, absolute.
        for (int j = 0; j < networks; ++j) {
            const double g =
                mc.sources.network_source.empty()
                    ? 0.0
                    : scalar_or_zero(mc.sources.network_source[j], x, t);
            const double r = mc.params.storage[j] * fd_dt(mc.p[j], x, t) +
                             mc.params.alpha[j] * div_u_rate -
                             mc.params.permeability[j] * fd_laplacian(mc.p[j], x, t, kWideStep) +
                             transfer_rate(mc.params.transfer, p_at, j) - g;
            track(r);
        }

        // Cross-checks of the closed-form derivatives against differences of
        // the primary fields, and of p0 against its defining combination.
        const Mat2 gu_fd = fd_grad(mc.u, x, t, kSpaceStep);
        const Mat2 gu = mc.grad_u(x, t);
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                track(gu.m[a][b] - gu_fd.m[a][b]);
            }
        }
        track(mc.div_u(x, t) - (gu_fd.m[0][0] + gu_fd.m[1][1]));
        for (int j = 0; j < networks; ++j) {
            const Vec2 gp = mc.grad_p[j](x, t);
            for (int d = 0; d < 2; ++d) {
                track(gp[d] - fd_dx(mc.p[j], x, t, d, kSpaceStep));
            }
        }
        const Vec2 gp0 = mc.grad_p0(x, t);
        for (int d = 0; d < 2; ++d) {
            track(gp0[d] - fd_dx(mc.p0, x, t, d, kSpaceStep));
        }
        double combo = mc.params.lambda * mc.div_u(x, t);
        for (int j = 0; j < networks; ++j) {
            combo -= mc.params.alpha[j] * p_at[j];
        }
        track(mc.p0(x, t) - combo);
    }
    return worst;
}

std::vector<Vec2> random_interior_points(int count, unsigned seed) {
    if (count < 0) {
        throw std::invalid_argument("random_interior_points: negative count");
    }
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> coord(0.05, 0.95);
    std::vector<Vec2> points;
    points.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double x = coord(rng);
        const double y = coord(rng);
        points.push_back({x, y});
    }
    return points;
}

double residual_oracle_sampled(const ManufacturedCase& mc, int count, unsigned seed) {
    if (count <= 0) {
        throw std::invalid_argument("residual_oracle_sampled: count must be positive");
    }
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> coord(0.05, 0.95);
    std::uniform_real_distribution<double> time(0.05, mc.t_end);
    double worst = 0.0;
    std::vector<Vec2> point(1);
    for (int i = 0; i < count; ++i) {
        const double x = coord(rng);
        const double y = coord(rng);
        const double t = time(rng);
        point[0] = {x, y};
        worst = std::max(worst, residual_oracle(mc, point, t));
    }
    return worst;
}

// ============================================================================
// Interpolation operators
// ============================================================================

namespace {

AffineMap cell_map(const Mesh& mesh, int cell) {
    const auto& tri = mesh.cells()[cell];
    return AffineMap::from_triangle(mesh.vertices()[tri[0]], mesh.vertices()[tri[1]],
                                    mesh.vertices()[tri[2]]);
}

// Exact-trace Dirichlet constraints of a scalar space.
std::vector<Constraint> scalar_trace_constraints(const FESpace& space, const ScalarField& value,
                                                 int offset = 0) {
    std::vector<Constraint> constraints;
    for (const auto& [tag, nodes] : space.constrained_nodes_by_tag()) {
        for (int node : nodes) {
            constraints.emplace_back(offset + space.dof_of(node, 0), value(space.node_coord(node)));
        }
    }
    return constraints;
}

std::vector<Constraint> vector_trace_constraints(const FESpace& space, const VectorField& value,
                                                 int offset = 0) {
    std::vector<Constraint> constraints;
    for (const auto& [tag, nodes] : space.constrained_nodes_by_tag()) {
        for (int node : nodes) {
            const Vec2 v = value(space.node_coord(node));
            constraints.emplace_back(offset + space.dof_of(node, 0), v[0]);
            constraints.emplace_back(offset + space.dof_of(node, 1), v[1]);
        }
    }
    return constraints;
}

// Column vector <psi_q, 1> as an nq x 1 sparse matrix, used to pin the mean
// of a pressure determined only up to a constant.
SparseMatrix mean_column(const FESpace& space) {
    const Vector weights = assemble_scalar_load(space, [](Vec2) { return 1.0; });
    std::vector<std::pair<int, int>> couplings;
    couplings.reserve(weights.size());
    for (size_t i = 0; i < weights.size(); ++i) {
        couplings.emplace_back(static_cast<int>(i), 0);
    }
    SparseMatrix m = SparseMatrix::from_pattern(static_cast<int>(weights.size()), 1, couplings);
    for (size_t i = 0; i < weights.size(); ++i) {
        m.add(static_cast<int>(i), 0, weights[i]);
    }
    return m;
}

}  // namespace

std::pair<FEFunction, FEFunction> stokes_interpolant(const VectorField& u_exact,
                                                     const MatrixField& grad_u_exact,
                                                     const ScalarField& div_u_exact,
                                                     const ScalarField& p0_exact, double mu,
                                                     const FESpace& velocity,
                                                     const FESpace& pressure) {
    if (velocity.value_size() != 2 || pressure.value_size() != 1) {
        throw std::invalid_argument("stokes_interpolant: expected a vector and a scalar space");
    }
    if (&velocity.mesh() != &pressure.mesh()) {
        throw std::invalid_argument("stokes_interpolant: spaces live on different meshes");
    }
    if (!u_exact || !grad_u_exact || !div_u_exact || !p0_exact) {
        throw std::invalid_argument("stokes_interpolant: empty exact field");
    }
    if (velocity.constrained_dofs().empty()) {
        throw std::invalid_argument("stokes_interpolant: velocity space has no Dirichlet dofs");
    }

    const Mesh& mesh = velocity.mesh();
    const int nv = velocity.dof_count();
    const int nq = pressure.dof_count();

    // Momentum right-hand side <2 mu eps(u), eps(v)> + <p0, div v> by
    // quadrature against the exact fields.
    Vector load_v(static_cast<size_t>(nv), 0.0);
    {
        const QuadratureRule& rule = triangle_quadrature(kNormQuadratureDegree);
        const ReferenceElement& element = velocity.element();
        const int nn = element.node_count();
        std::vector<Vec2> ref_grads(static_cast<size_t>(nn));
        for (int c = 0; c < mesh.cell_count(); ++c) {
            const AffineMap map = cell_map(mesh, c);
            const int* dofs = velocity.cell_dofs(c);
            for (size_t q = 0; q < rule.points.size(); ++q) {
                const Vec2 xi = rule.points[q];
                const Vec2 x = map.to_physical(xi);
                const double w = rule.weights[q] * map.det_jacobian;
                element.shape_grad(xi, ref_grads.data());
                const Mat2 g = grad_u_exact(x);
                Mat2 sym{};
                for (int a = 0; a < 2; ++a) {
                    for (int b = 0; b < 2; ++b) {
                        sym.m[a][b] = 0.5 * (g.m[a][b] + g.m[b][a]);
                    }
                }
                const double p0v = p0_exact(x);
                for (int node = 0; node < nn; ++node) {
                    const Vec2 grad = map.inv_jacobian_t * ref_grads[static_cast<size_t>(node)];
                    for (int comp = 0; comp < 2; ++comp) {
                        const double stress_term =
                            2.0 * mu * (sym.m[comp][0] * grad[0] + sym.m[comp][1] * grad[1]);
                        load_v[dofs[node * 2 + comp]] += w * (stress_term + p0v * grad[comp]);
                    }
                }
            }
        }
    }

    const Vector load_q = assemble_scalar_load(pressure, div_u_exact);
    const double mean_target =
        integrate_over_cells(mesh, kNormQuadratureDegree, [&](int, Vec2 x) { return p0_exact(x); });

    BlockMatrix system({nv, nq, 1});
    system.set_block(0, 0, assemble_elasticity(velocity, mu));
    SparseMatrix b = assemble_div_coupling(velocity, pressure);
    system.set_block(0, 1, b.transposed());
    system.set_block(1, 0, std::move(b));
    SparseMatrix mean = mean_column(pressure);
    system.set_block(2, 1, mean.transposed());
    system.set_block(1, 2, std::move(mean));

    Vector rhs(static_cast<size_t>(system.total_size()), 0.0);
    std::copy(load_v.begin(), load_v.end(), rhs.begin());
    std::copy(load_q.begin(), load_q.end(), rhs.begin() + nv);
    rhs[static_cast<size_t>(nv + nq)] = mean_target;

    SparseMatrix mono = system.monolithic();
    const std::vector<Constraint> constraints = vector_trace_constraints(velocity, u_exact);
    apply_dirichlet(mono, rhs, constraints);
    const Vector solution = solve(mono, rhs);

    FEFunction uh(velocity);
    FEFunction p0h(pressure);
    std::copy(solution.begin(), solution.begin() + nv, uh.coeffs().begin());
    std::copy(solution.begin() + nv, solution.begin() + nv + nq, p0h.coeffs().begin());
    return {std::move(uh), std::move(p0h)};
}

FEFunction elliptic_projection(const ScalarField& p_exact, const VectorField& grad_p_exact,
                               double conductivity, const FESpace& space) {
    if (space.value_size() != 1) {
        throw std::invalid_argument("elliptic_projection: expected a scalar space");
    }
    if (!(conductivity > 0.0)) {
        throw std::invalid_argument("elliptic_projection: conductivity must be positive");
    }
    if (!p_exact || !grad_p_exact) {
        throw std::invalid_argument("elliptic_projection: empty exact field");
    }
    if (space.constrained_dofs().empty()) {
        throw std::invalid_argument(
            "elliptic_projection: space needs a Dirichlet boundary to anchor the projection");
    }

    const Mesh& mesh = space.mesh();
    Vector rhs(static_cast<size_t>(space.dof_count()), 0.0);
    const QuadratureRule& rule = triangle_quadrature(kNormQuadratureDegree);
    const ReferenceElement& element = space.element();
    const int nn = element.node_count();
    std::vector<Vec2> ref_grads(static_cast<size_t>(nn));
    for (int c = 0; c < mesh.cell_count(); ++c) {
        const AffineMap map = cell_map(mesh, c);
        const int* dofs = space.cell_dofs(c);
        for (size_t q = 0; q < rule.points.size(); ++q) {
            const Vec2 xi = rule.points[q];
            const Vec2 x = map.to_physical(xi);
            const double w = rule.weights[q] * map.det_jacobian * conductivity;
            element.shape_grad(xi, ref_grads.data());
            const Vec2 g = grad_p_exact(x);
            for (int node = 0; node < nn; ++node) {
                const Vec2 grad = map.inv_jacobian_t * ref_grads[static_cast<size_t>(node)];
                rhs[dofs[node]] += w * dot(g, grad);
            }
        }
    }

    SparseMatrix stiffness = assemble_scalar_stiffness(space, conductivity);
    apply_dirichlet(stiffness, rhs, scalar_trace_constraints(space, p_exact));
    return FEFunction(space, solve(stiffness, rhs));
}

// ============================================================================
// Norms
// ============================================================================

ErrorNorms scalar_error_norms(const FEFunction& fh, const ScalarField& exact,
                              const VectorField& grad_exact) {
    if (fh.space().value_size() != 1) {
        throw std::invalid_argument("scalar_error_norms: vector-valued function given");
    }
    if (!exact || !grad_exact) {
        throw std::invalid_argument("scalar_error_norms: empty exact field");
    }
    const Mesh& mesh = fh.space().mesh();
    const QuadratureRule& rule = triangle_quadrature(kNormQuadratureDegree);
    double l2 = 0.0, semi = 0.0;
    for (int c = 0; c < mesh.cell_count(); ++c) {
        const AffineMap map = cell_map(mesh, c);
        for (size_t q = 0; q < rule.points.size(); ++q) {
            const Vec2 x = map.to_physical(rule.points[q]);
            const double w = rule.weights[q] * map.det_jacobian;
            const double d = fh.eval_scalar_in_cell(c, x) - exact(x);
            const Vec2 gd = fh.grad_scalar_in_cell(c, x) - grad_exact(x);
            l2 += w * d * d;
            semi += w * dot(gd, gd);
        }
    }
    ErrorNorms norms;
    norms.l2 = std::sqrt(l2);
    norms.h1_semi = std::sqrt(semi);
    norms.h1 = std::sqrt(l2 + semi);
    return norms;
}

ErrorNorms vector_error_norms(const FEFunction& fh, const VectorField& exact,
                              const MatrixField& grad_exact) {
    if (fh.space().value_size() != 2) {
        throw std::invalid_argument("vector_error_norms: scalar-valued function given");
    }
    if (!exact || !grad_exact) {
        throw std::invalid_argument("vector_error_norms: empty exact field");
    }
    const Mesh& mesh = fh.space().mesh();
    const QuadratureRule& rule = triangle_quadrature(kNormQuadratureDegree);
    double l2 = 0.0, semi = 0.0;
    for (int c = 0; c < mesh.cell_count(); ++c) {
        const AffineMap map = cell_map(mesh, c);
        for (size_t q = 0; q < rule.points.size(); ++q) {
            const Vec2 x = map.to_physical(rule.points[q]);
            const double w = rule.weights[q] * map.det_jacobian;
            const Vec2 d = fh.eval_vector_in_cell(c, x) - exact(x);
            const Mat2 gh = fh.grad_vector_in_cell(c, x);
            const Mat2 ge = grad_exact(x);
            l2 += w * dot(d, d);
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                    const double e = gh.m[a][b] - ge.m[a][b];
                    semi += w * e * e;
                }
            }
        }
    }
    ErrorNorms norms;
    norms.l2 = std::sqrt(l2);
    norms.h1_semi = std::sqrt(semi);
    norms.h1 = std::sqrt(l2 + semi);
    return norms;
}

ErrorNorms fe_difference_norms(const FEFunction& a, const FEFunction& b) {
    if (!a.space().same_layout(b.space())) {
        throw std::invalid_argument("fe_difference_norms: functions live on different spaces");
    }
    const Mesh& mesh = a.space().mesh();
    const QuadratureRule& rule = triangle_quadrature(kNormQuadratureDegree);
    const bool is_vector = a.space().value_size() == 2;
    double l2 = 0.0, semi = 0.0;
    for (int c = 0; c < mesh.cell_count(); ++c) {
        const AffineMap map = cell_map(mesh, c);
        for (size_t q = 0; q < rule.points.size(); ++q) {
            const Vec2 x = map.to_physical(rule.points[q]);
            const double w = rule.weights[q] * map.det_jacobian;
            if (is_vector) {
                const Vec2 d = a.eval_vector_in_cell(c, x) - b.eval_vector_in_cell(c, x);
                const Mat2 ga = a.grad_vector_in_cell(c, x);
                const Mat2 gb = b.grad_vector_in_cell(c, x);
                l2 += w * dot(d, d);
                for (int r = 0; r < 2; ++r) {
                    for (int s = 0; s < 2; ++s) {
                        const double e = ga.m[r][s] - gb.m[r][s];
                        semi += w * e * e;
                    }
                }
            } else {
                const double d = a.eval_scalar_in_cell(c, x) - b.eval_scalar_in_cell(c, x);
                const Vec2 gd = a.grad_scalar_in_cell(c, x) - b.grad_scalar_in_cell(c, x);
                l2 += w * d * d;
                semi += w * dot(gd, gd);
            }
        }
    }
    ErrorNorms norms;
    norms.l2 = std::sqrt(l2);
    norms.h1_semi = std::sqrt(semi);
    norms.h1 = std::sqrt(l2 + semi);
    return norms;
}

double weighted_l2_norm(const FEFunction& f, double weight) {
    if (weight < 0.0) {
        throw std::invalid_argument("weighted_l2_norm: negative weight");
    }
    if (weight == 0.0) {
        return 0.0;
    }
    const bool is_vector = f.space().value_size() == 2;
    const double integral =
        integrate_over_cells(f.space().mesh(), kNormQuadratureDegree, [&](int c, Vec2 x) {
            if (is_vector) {
                const Vec2 v = f.eval_vector_in_cell(c, x);
                return dot(v, v);
            }
            const double v = f.eval_scalar_in_cell(c, x);
            return v * v;
        });
    return std::sqrt(weight * integral);
}

double weighted_h1_semi_norm(const FEFunction& f, double weight) {
    if (weight < 0.0) {
        throw std::invalid_argument("weighted_h1_semi_norm: negative weight");
    }
    if (weight == 0.0) {
        return 0.0;
    }
    const bool is_vector = f.space().value_size() == 2;
    const double integral =
        integrate_over_cells(f.space().mesh(), kNormQuadratureDegree, [&](int c, Vec2 x) {
            if (is_vector) {
                const Mat2 g = f.grad_vector_in_cell(c, x);
                return g.m[0][0] * g.m[0][0] + g.m[0][1] * g.m[0][1] + g.m[1][0] * g.m[1][0] +
                       g.m[1][1] * g.m[1][1];
            }
            const Vec2 g = f.grad_scalar_in_cell(c, x);
            return dot(g, g);
        });
    return std::sqrt(weight * integral);
}

double strain_norm(const FEFunction& u, double mu) {
    if (u.space().value_size() != 2) {
        throw std::invalid_argument("strain_norm: scalar function given");
    }
    if (!(mu > 0.0)) {
        throw std::invalid_argument("strain_norm: mu must be positive");
    }
    const double integral =
        integrate_over_cells(u.space().mesh(), kNormQuadratureDegree, [&](int c, Vec2 x) {
            const Mat2 g = u.grad_vector_in_cell(c, x);
            double sum = 0.0;
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                    const double eps = 0.5 * (g.m[a][b] + g.m[b][a]);
                    sum += eps * eps;
                }
            }
            return sum;
        });
    return std::sqrt(2.0 * mu * integral);
}

double weighted_combination_l2(double weight, const std::vector<const FEFunction*>& fields,
                               const std::vector<double>& coefficients) {
    if (weight < 0.0) {
        throw std::invalid_argument("weighted_combination_l2: negative weight");
    }
    if (fields.empty() || fields.size() != coefficients.size()) {
        throw std::invalid_argument(
            "weighted_combination_l2: fields and coefficients must pair up");
    }
    for (const FEFunction* f : fields) {
        if (f == nullptr || f->space().value_size() != 1 ||
            !f->space().same_layout(fields.front()->space())) {
            throw std::invalid_argument(
                "weighted_combination_l2: fields must be scalars on one shared space");
        }
    }
    if (weight == 0.0) {
        return 0.0;
    }
    const double integral = integrate_over_cells(
        fields.front()->space().mesh(), kNormQuadratureDegree, [&](int c, Vec2 x) {
            double v = 0.0;
            for (size_t i = 0; i < fields.size(); ++i) {
                v += coefficients[i] * fields[i]->eval_scalar_in_cell(c, x);
            }
            return v * v;
        });
    return std::sqrt(weight * integral);
}

// ============================================================================
// Consistent initialization for convergence studies
// ============================================================================

namespace {

SparseMatrix scaled_copy(const SparseMatrix& m, double s) {
    SparseMatrix out = m;
    out.scale(s);
    return out;
}

// Static (stiffness-only) part of the operator: what remains of the
// semidiscrete system when every time derivative is dropped.
BlockMatrix static_system(const MpetOperator& op) {
    const MpetParameters& params = op.params;
    const int networks = params.network_count();
    BlockMatrix s(op.lhs.field_sizes());

    if (op.formulation == Formulation::kTotalPressure) {
        s.set_block(0, 0, op.elasticity);
        s.set_block(0, 1, op.div_coupling.transposed());
        s.set_block(1, 0, op.div_coupling);
        s.set_block(1, 1, scaled_copy(op.pressure_mass, -1.0 / params.lambda));
        for (int i = 0; i < networks; ++i) {
            s.set_block(1, 2 + i,
                        scaled_copy(op.pressure_mass, -params.alpha[i] / params.lambda));
        }
    } else {
        SparseMatrix momentum = op.elasticity;
        momentum.add_scaled(op.div_div, params.lambda);
        s.set_block(0, 0, std::move(momentum));
        SparseMatrix bt = op.div_coupling.transposed();
        for (int j = 0; j < networks; ++j) {
            s.set_block(0, op.network_field(j), scaled_copy(bt, -params.alpha[j]));
        }
    }

    for (int j = 0; j < networks; ++j) {
        SparseMatrix diag = op.diffusion[j];
        for (int i = 0; i < networks; ++i) {
            if (i == j || params.transfer[j][i] == 0.0) {
                continue;
            }
            diag.add_scaled(op.pressure_mass, params.transfer[j][i]);
            s.set_block(op.network_field(j), op.network_field(i),
                        scaled_copy(op.pressure_mass, -params.transfer[j][i]));
        }
        s.set_block(op.network_field(j), op.network_field(j), std::move(diag));
    }
    return s;
}

// Unscaled loads (F(t), 0, G_j(t)) of the semidiscrete system.
Vector natural_loads(const MpetOperator& op, const SourceData& sources, double t) {
    const MpetSpaces& spaces = *op.spaces;
    Vector loads(static_cast<size_t>(op.total_size()), 0.0);
    if (sources.body_force) {
        const TimeVectorField& f = sources.body_force;
        const Vector fv = assemble_vector_load(spaces.displacement,
                                               [&f, t](Vec2 x) { return f(x, t); });
        std::copy(fv.begin(), fv.end(), loads.begin());
    }
    for (const StressBoundary& traction : sources.tractions) {
        const TimeScalarField& s = traction.normal_stress;
        const Vector tv = assemble_boundary_normal_load(spaces.displacement, traction.tag,
                                                        [&s, t](Vec2 x) { return s(x, t); });
        axpy(1.0, tv, loads);
    }
    if (!sources.network_source.empty()) {
        for (int j = 0; j < op.params.network_count(); ++j) {
            if (!sources.network_source[j]) {
                continue;
            }
            const TimeScalarField& g = sources.network_source[j];
            const Vector gv = assemble_scalar_load(spaces.network_pressure[j],
                                                   [&g, t](Vec2 x) { return g(x, t); });
            const int offset = op.field_offset(op.network_field(j));
            for (size_t i = 0; i < gv.size(); ++i) {
                loads[offset + i] += gv[i];
            }
        }
    }
    return loads;
}

}  // namespace

MpetState linear_consistent_initial_state(const MpetOperator& op, const SourceData& sources,
                                          const BoundaryProgram& bcs) {
    if (op.spaces == nullptr) {
        throw std::invalid_argument("linear_consistent_initial_state: operator has no spaces");
    }
    const MpetParameters& params = op.params;
    const int networks = params.network_count();
    const int scalar_size = op.spaces->network_pressure.front().dof_count();

    const SparseMatrix mono = static_system(op).monolithic();
    const std::vector<int> constrained = constrained_dofs(op);
    const SparseMatrix eliminated = eliminate_dirichlet(mono, constrained);
    const DirichletLift lift(mono, constrained);
    const DirectSolver solver(eliminated);

    const Vector values0 = boundary_values(op, bcs, 0.0);
    Vector slope_values = boundary_values(op, bcs, 1.0);
    for (size_t i = 0; i < slope_values.size(); ++i) {
        slope_values[i] -= values0[i];
    }

    const Vector loads0 = natural_loads(op, sources, 0.0);
    Vector slope_rhs = natural_loads(op, sources, 1.0);
    for (size_t i = 0; i < slope_rhs.size(); ++i) {
        slope_rhs[i] -= loads0[i];
    }
    lift.apply(slope_rhs, slope_values);
    const Vector slope = solver.solve(slope_rhs);

    // Offset right-hand side: move the slope's time-derivative terms of each
    // mass balance to the right.
    Vector offset_rhs = loads0;
    if (op.formulation == Formulation::kTotalPressure) {
        Vector combo(static_cast<size_t>(scalar_size), 0.0);
        const int p0_offset = op.field_offset(op.total_pressure_field());
        for (int i = 0; i < scalar_size; ++i) {
            combo[i] = slope[p0_offset + i];
        }
        for (int j = 0; j < networks; ++j) {
            const int pj_offset = op.field_offset(op.network_field(j));
            for (int i = 0; i < scalar_size; ++i) {
                combo[i] += params.alpha[j] * slope[pj_offset + i];
            }
        }
        const Vector m_combo = op.pressure_mass.apply(combo);
        for (int j = 0; j < networks; ++j) {
            const int pj_offset = op.field_offset(op.network_field(j));
            Vector zj(slope.begin() + pj_offset, slope.begin() + pj_offset + scalar_size);
            const Vector m_zj = op.pressure_mass.apply(zj);
            for (int i = 0; i < scalar_size; ++i) {
                offset_rhs[pj_offset + i] -= params.storage[j] * m_zj[i] +
                                             params.alpha[j] / params.lambda * m_combo[i];
            }
        }
    } else {
        const int nv = op.spaces->displacement.dof_count();
        const Vector slope_u(slope.begin(), slope.begin() + nv);
        const Vector b_slope_u = op.div_coupling.apply(slope_u);
        for (int j = 0; j < networks; ++j) {
            const int pj_offset = op.field_offset(op.network_field(j));
            Vector zj(slope.begin() + pj_offset, slope.begin() + pj_offset + scalar_size);
            const Vector m_zj = op.pressure_mass.apply(zj);
            for (int i = 0; i < scalar_size; ++i) {
                offset_rhs[pj_offset + i] -=
                    params.storage[j] * m_zj[i] + params.alpha[j] * b_slope_u[i];
            }
        }
    }
    lift.apply(offset_rhs, values0);

    MpetState state;
    state.t = 0.0;
    state.x = solver.solve(offset_rhs);
    return state;
}

// ============================================================================
// Convergence studies
// ============================================================================

namespace {

void validate_case(const ManufacturedCase& mc) {
    mc.params.validate();
    const size_t networks = static_cast<size_t>(mc.params.network_count());
    if (!mc.u || !mc.grad_u || !mc.div_u || !mc.p0 || !mc.grad_p0 || mc.p.size() != networks ||
        mc.grad_p.size() != networks) {
        throw std::invalid_argument("convergence_study: incomplete manufactured case");
    }
    if (!(mc.t_end > 0.0) || !(mc.dt > 0.0)) {
        throw std::invalid_argument("convergence_study: case needs t_end > 0 and dt > 0");
    }
}

std::string level_label(int level) {
    if (level == 0) {
        return "H";
    }
    char buf[16];
    std::snprintf(buf, sizeof(buf), "H/%d", 1 << level);
    return buf;
}

}  // namespace

int ConvergenceReport::column_index(const std::string& column) const {
    const auto it = std::find(columns.begin(), columns.end(), column);
    if (it == columns.end()) {
        throw std::out_of_range("ConvergenceReport: no column named '" + column + "'");
    }
    return static_cast<int>(it - columns.begin());
}

double ConvergenceReport::error(int level, const std::string& column) const {
    return levels.at(static_cast<size_t>(level)).errors.at(
        static_cast<size_t>(column_index(column)));
}

double ConvergenceReport::rate(int pair, const std::string& column) const {
    return rates.at(static_cast<size_t>(pair)).at(static_cast<size_t>(column_index(column)));
}

ConvergenceReport convergence_study(const ManufacturedCase& mcase, Formulation formulation,
                                    int levels, ErrorMode mode, int base_n) {
    validate_case(mcase);
    if (levels < 2) {
        throw std::invalid_argument("convergence_study: rates need at least 2 levels");
    }
    if (base_n < 1) {
        throw std::invalid_argument("convergence_study: base_n must be >= 1");
    }
    const int networks = mcase.params.network_count();
    const bool total_pressure = formulation == Formulation::kTotalPressure;

    ConvergenceReport report;
    report.case_name = mcase.name;
    report.formulation = formulation;
    report.mode = mode;
    if (mode == ErrorMode::kExact) {
        report.columns = {"u_l2", "u_h1", "p1_l2", "p1_h1"};
        report.reference_rates = {3.0, 2.0, 2.0, 1.0};
        if (total_pressure) {
            report.columns.push_back("p0_l2");
            report.reference_rates.push_back(2.0);
        }
    } else {
        report.columns = {"p1i_l2", "p1i_h1"};
        report.reference_rates = {2.0, 2.0};
    }

    const TimeGrid grid = TimeGrid::make(mcase.t_end, mcase.dt);
    const double t_final = mcase.t_end;

    for (int level = 0; level < levels; ++level) {
        const int n = base_n << level;
        auto mesh = std::make_shared<Mesh>(build_unit_square_mesh(n));
        const DirichletSpec dirichlet = DirichletSpec::uniform({kTagWhole}, networks);
        const MpetSpaces spaces = total_pressure
                                      ? make_taylor_hood_spaces(mesh, networks, dirichlet)
                                      : make_standard_spaces(mesh, networks, dirichlet);
        const MpetOperator op =
            total_pressure
                ? assemble_total_pressure_operator(spaces, mcase.params, mcase.dt, mcase.theta)
                : assemble_standard_operator(spaces, mcase.params, mcase.dt, mcase.theta);

        BoundaryProgram bcs;
        bcs.displacement.push_back({kTagWhole, mcase.u});
        bcs.network.resize(static_cast<size_t>(networks));
        for (int j = 0; j < networks; ++j) {
            bcs.network[j].push_back({kTagWhole, mcase.p[j]});
        }

        const MpetState initial = linear_consistent_initial_state(op, mcase.sources, bcs);
        RunOptions options;
        options.record_energy = true;
        const RunResult result = run_transient(op, mcase.sources, bcs, initial, grid, options);

        LevelRecord record;
        record.cells_per_side = n;
        record.h = 1.0 / n;

        const FEFunction p1h = extract_network_pressure(op, result.state, 0);
        if (mode == ErrorMode::kExact) {
            const FEFunction uh = extract_displacement(op, result.state);
            const TimeVectorField ue = mcase.u;
            const TimeMatrixField gue = mcase.grad_u;
            const ErrorNorms eu = vector_error_norms(
                uh, [&ue, t_final](Vec2 x) { return ue(x, t_final); },
                [&gue, t_final](Vec2 x) { return gue(x, t_final); });
            const TimeScalarField pe = mcase.p[0];
            const TimeVectorField gpe = mcase.grad_p[0];
            const ErrorNorms ep1 = scalar_error_norms(
                p1h, [&pe, t_final](Vec2 x) { return pe(x, t_final); },
                [&gpe, t_final](Vec2 x) { return gpe(x, t_final); });
            record.errors = {eu.l2, eu.h1, ep1.l2, ep1.h1};
            if (total_pressure) {
                const FEFunction p0h = extract_total_pressure(op, result.state);
                const TimeScalarField p0e = mcase.p0;
                const TimeVectorField gp0e = mcase.grad_p0;
                const ErrorNorms ep0 = scalar_error_norms(
                    p0h, [&p0e, t_final](Vec2 x) { return p0e(x, t_final); },
                    [&gp0e, t_final](Vec2 x) { return gp0e(x, t_final); });
                record.errors.push_back(ep0.l2);
            }
        } else {
            const TimeScalarField pe = mcase.p[0];
            const TimeVectorField gpe = mcase.grad_p[0];
            const FEFunction projected = elliptic_projection(
                [&pe, t_final](Vec2 x) { return pe(x, t_final); },
                [&gpe, t_final](Vec2 x) { return gpe(x, t_final); },
                mcase.params.permeability[0], spaces.network_pressure[0]);
            const ErrorNorms diff = fe_difference_norms(projected, p1h);
            record.errors = {diff.l2, diff.h1};
        }

        if (total_pressure) {
            for (size_t i = 1; i < result.energy.size(); ++i) {
                const EnergySample& sample = result.energy[i];
                if (sample.strain > 0.0) {
                    record.p0_control =
                        std::max(record.p0_control, sample.p0_l2 / std::sqrt(sample.strain));
                }
            }
        }
        report.levels.push_back(std::move(record));
    }

    for (int pair = 0; pair + 1 < levels; ++pair) {
        std::vector<double> row;
        row.reserve(report.columns.size());
        for (size_t col = 0; col < report.columns.size(); ++col) {
            const double coarse = report.levels[pair].errors[col];
            const double fine = report.levels[pair + 1].errors[col];
            row.push_back(std::log2(coarse / fine));
        }
        report.rates.push_back(std::move(row));
    }
    return report;
}

// ============================================================================
// Report emission
// ============================================================================

std::string report_csv(const ConvergenceReport& report) {
    std::string out;
    char buf[64];
    out += "level,cells_per_side,h";
    for (const std::string& column : report.columns) {
        out += "," + column + "," + column + "_rate";
    }
    if (report.formulation == Formulation::kTotalPressure) {
        out += ",p0_control";
    }
    out += "\n";
    for (size_t level = 0; level < report.levels.size(); ++level) {
        const LevelRecord& record = report.levels[level];
        std::snprintf(buf, sizeof(buf), "%s,%d,%.10g", level_label(static_cast<int>(level)).c_str(),
                      record.cells_per_side, record.h);
        out += buf;
        for (size_t col = 0; col < report.columns.size(); ++col) {
            std::snprintf(buf, sizeof(buf), ",%.12e", record.errors[col]);
            out += buf;
            if (level == 0) {
                out += ",";
            } else {
                std::snprintf(buf, sizeof(buf), ",%.6f", report.rates[level - 1][col]);
                out += buf;
            }
        }
        if (report.formulation == Formulation::kTotalPressure) {
            std::snprintf(buf, sizeof(buf), ",%.6f", record.p0_control);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

std::string report_markdown(const ConvergenceReport& report) {
    std::string out;
    char buf[64];
    out += "## " + report.case_name + " (" + formulation_name(report.formulation) + ")\n\n";
    out += "| h |";
    for (const std::string& column : report.columns) {
        out += " " + column + " | rate |";
    }
    out += "\n|---|";
    for (size_t col = 0; col < report.columns.size(); ++col) {
        out += "---|---|";
    }
    out += "\n";
    for (size_t level = 0; level < report.levels.size(); ++level) {
        out += "| " + level_label(static_cast<int>(level)) + " |";
        for (size_t col = 0; col < report.columns.size(); ++col) {
            std::snprintf(buf, sizeof(buf), " %.3e |", report.levels[level].errors[col]);
            out += buf;
            if (level == 0) {
                out += "  |";
            } else {
                std::snprintf(buf, sizeof(buf), " %.2f |", report.rates[level - 1][col]);
                out += buf;
            }
        }
        out += "\n";
    }
    out += report.mode == ErrorMode::kInterpolant ? "| Theoretical |" : "| Optimal |";
    for (size_t col = 0; col < report.columns.size(); ++col) {
        std::snprintf(buf, sizeof(buf), "  | %.0f |", report.reference_rates[col]);
        out += buf;
    }
    out += "\n";
    return out;
}

namespace {

void write_text_file(const std::string& text, const std::string& path) {
    std::ofstream stream(path, std::ios::binary);
    if (!stream) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    stream << text;
    if (!stream) {
        throw std::runtime_error("failed while writing '" + path + "'");
    }
}

}  // namespace

void write_report_csv(const ConvergenceReport& report, const std::string& path) {
    write_text_file(report_csv(report), path);
}

void write_report_markdown(const ConvergenceReport& report, const std::string& path) {
    write_text_file(report_markdown(report), path);
}

}  // namespace mpet
