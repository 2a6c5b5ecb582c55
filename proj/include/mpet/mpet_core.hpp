#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mpet/assembly.hpp"
#include "mpet/linalg.hpp"
#include "mpet/spaces.hpp"
#include "mpet/types.hpp"

namespace mpet {

enum class Formulation { kTotalPressure, kStandard };

std::string formulation_name(Formulation f);

// Material and coupling data for a multi-network poroelastic problem.
struct MpetParameters {
    double mu = 1.0;
    double lambda = 1.0;
    std::vector<double> alpha;         // Biot coefficients, one per network
    std::vector<double> storage;       // storage coefficients c_j >= 0
    std::vector<double> permeability;  // constant permeabilities K_j > 0
    // Optional pointwise permeability per network; empty, or one entry per
    // network where an empty function falls back to the constant value.
    std::vector<ScalarField> permeability_field;
    std::vector<std::vector<double>> transfer;  // xi[j][i], symmetric, zero diagonal

    int network_count() const { return static_cast<int>(alpha.size()); }
    void validate() const;
};

// Plane-strain Lame parameters (mu, lambda) from Young's modulus and
// Poisson ratio.
std::pair<double, double> lame_from_E_nu(double E, double nu);

// Exchange term S_j = sum_i xi[j][i] (p_j - p_i) at one point.
double transfer_rate(const std::vector<std::vector<double>>& xi, const std::vector<double>& p,
                     int j);

// Prescribed total normal stress s(x, t) n on the facets carrying `tag`.
struct StressBoundary {
    int tag = 0;
    TimeScalarField normal_stress;
};

// Time-dependent problem data entering the right-hand side. Empty
// functions (and an empty network_source list) mean zero.
struct SourceData {
    TimeVectorField body_force;
    std::vector<TimeScalarField> network_source;  // empty, or one entry per network
    std::vector<StressBoundary> tractions;
};

// One implicit step couples the unknown state x^{n+1} to the previous one
// through
//     lhs x^{n+1} = history x^n + theta loads(t^{n+1}) + (1-theta) loads(t^n).
// Rows are scaled to make lhs symmetric: the momentum and divergence rows
// carry a factor theta, and each network row is multiplied by -theta*dt
// after the theta discretization in time. Monolithic field order is
// displacement, [total pressure,] network pressures.
struct MpetOperator {
    Formulation formulation = Formulation::kTotalPressure;
    const MpetSpaces* spaces = nullptr;  // not owned; must outlive the operator
    MpetParameters params;
    double dt = 0.0;
    double theta = 1.0;

    BlockMatrix lhs;
    BlockMatrix history;

    // Unscaled component forms, kept for right-hand sides and for energy
    // diagnostics.
    SparseMatrix elasticity;          // <2 mu eps(u), eps(v)>
    SparseMatrix pressure_mass;       // <p, q> on the shared scalar layout
    SparseMatrix div_div;             // <div u, div v>
    SparseMatrix div_coupling;        // <div u, q>
    std::vector<SparseMatrix> diffusion;  // <K_j grad p, grad q> per network

    int displacement_field() const { return 0; }
    bool has_total_pressure() const { return formulation == Formulation::kTotalPressure; }
    int total_pressure_field() const;
    int network_field(int j) const;
    int field_offset(int f) const { return lhs.field_offset(f); }
    int total_size() const { return lhs.total_size(); }
};

MpetOperator assemble_total_pressure_operator(const MpetSpaces& spaces,
                                              const MpetParameters& params, double dt,
                                              double theta);
MpetOperator assemble_standard_operator(const MpetSpaces& spaces, const MpetParameters& params,
                                        double dt, double theta);

// Load vector at a fixed time with the operator's row scaling: the
// momentum row receives <f, v> plus the boundary stress terms, each
// network row receives -theta*dt <g_j, q>.
Vector assemble_scaled_loads(const MpetOperator& op, const SourceData& sources, double t);

// Right-hand side of one step from t_prev to t_next.
Vector assemble_rhs(const MpetOperator& op, const SourceData& sources, double t_prev,
                    double t_next, const Vector& prev_state);

// Pointwise reconstruction p0 = lambda div u - sum_j alpha_j p_j sampled at
// the nodes of p0_space. All functions must live on the same mesh.
FEFunction total_pressure_from_state(double lambda, const std::vector<double>& alpha,
                                     const FEFunction& u, const std::vector<FEFunction>& p,
                                     const FESpace& p0_space);

// Static displacement / total-pressure subsystem with every network
// pressure frozen to zero:
//     <2 mu eps(u), eps(v)> + <p0, div v> = <f, v>
//     <div u, q0> - inv_lambda <p0, q0>   = 0
// u is constrained to zero on the displacement space's Dirichlet tags.
// With inv_lambda = 0 this is the incompressible Stokes limit and p0 is
// pinned to mean zero through a scalar multiplier (intended for a fully
// constrained displacement).
std::pair<FEFunction, FEFunction> solve_stokes_subsystem(const FESpace& v, const FESpace& q0,
                                                         double mu, double inv_lambda,
                                                         const VectorField& f);

}  // namespace mpet
