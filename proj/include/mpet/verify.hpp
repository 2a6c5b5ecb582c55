#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mpet/mpet_core.hpp"
#include "mpet/spaces.hpp"
#include "mpet/timestepper.hpp"
#include "mpet/types.hpp"

namespace mpet {

// ============================================================================
// Manufactured cases
// ============================================================================

// Closed-form exact solution of the multi-network poroelastic system together
// with the sources that make it exact. Gradients and the divergence are
// carried explicitly so error norms and interpolation operators never have to
// differentiate numerically; the residual oracle below cross-checks all of
// them against finite differences of the primary fields.
struct ManufacturedCase {
    std::string name;
    MpetParameters params;

    TimeVectorField u;
    TimeMatrixField grad_u;
    TimeScalarField div_u;
    std::vector<TimeScalarField> p;
    std::vector<TimeVectorField> grad_p;
    TimeScalarField p0;  // lambda div u - sum_j alpha_j p_j
    TimeVectorField grad_p0;

    SourceData sources;

    double t_end = 0.5;
    double dt = 0.125;
    double theta = 0.5;
};

// Smooth two-network case on the unit square, linear in time, vanishing on
// the whole boundary. E = 1, alpha_j = 1, K_j = 1, no transfer; nu and the
// storage coefficient are free. The displacement carries a 1/(mu + lambda)
// component so the solution stays nontrivial while div u shrinks as the
// material approaches incompressibility. `lambda_scale` multiplies lambda
// after conversion from (E, nu); the exact fields and sources are re-derived
// for the scaled value, which makes the case a robustness probe.
ManufacturedCase example1_case(double nu, double c_value, double lambda_scale = 1.0);

// ============================================================================
// Finite-difference residual oracle
// ============================================================================

// Maximum pointwise residual of the strong-form equations over the given
// interior points at time t, evaluated with centered finite differences on
// the closed-form fields (first derivatives: step 1e-5 in space, 1e-6 in
// time; second derivatives and outer stencils of nested first differences:
// step 1e-4, where the 1e-5 step would drown in evaluation roundoff).
//
// The momentum residual is reported scaled by 1/(1 + mu + lambda): its
// grad(div u) term carries a mu + lambda prefactor that amplifies stencil
// roundoff beyond any honest tolerance for nearly incompressible parameters,
// while a genuine source error stays orders of magnitude above the noise
// floor after scaling. Network mass residuals are absolute.
//
// Also cross-checks the case's closed-form gradients, divergence and total
// pressure against finite differences of u and p_j, so a wrong hand-derived
// gradient fails the same gate as a wrong source.
double residual_oracle(const ManufacturedCase& mcase, const std::vector<Vec2>& points, double t);

// Convenience sweep: `count` samples uniform over [0.05, 0.95]^2 in space
// and [0.05, t_end] in time, reproducible for a fixed seed.
double residual_oracle_sampled(const ManufacturedCase& mcase, int count, unsigned seed);

// Uniform random points in [0.05, 0.95]^2, reproducible for a fixed seed.
std::vector<Vec2> random_interior_points(int count, unsigned seed);

// ============================================================================
// Interpolation operators
// ============================================================================

// Stokes-type interpolant (Pi_V u, Pi_Q0 p0): the discrete pair that matches
// the exact pair in the incompressible elasticity sense,
//     <2 mu eps(Pi_V u), eps(v)> + <Pi_Q0 p0, div v> = same with (u, p0),
//     <div Pi_V u, q0> = <div u, q0>,
// with Pi_V u taking the exact trace on the velocity space's Dirichlet
// boundary and Pi_Q0 p0 matching the exact mean (the pressure is only
// determined up to a constant when the displacement is fully constrained).
// Right-hand sides are formed by degree-6 quadrature against the exact
// fields.
std::pair<FEFunction, FEFunction> stokes_interpolant(const VectorField& u_exact,
                                                     const MatrixField& grad_u_exact,
                                                     const ScalarField& div_u_exact,
                                                     const ScalarField& p0_exact, double mu,
                                                     const FESpace& velocity,
                                                     const FESpace& pressure);

// Weighted elliptic projection: <K grad Pi p, grad q> = <K grad p, grad q>
// for all test functions vanishing on the Dirichlet boundary, with Pi p
// taking the exact trace there. The space must be constrained somewhere.
FEFunction elliptic_projection(const ScalarField& p_exact, const VectorField& grad_p_exact,
                               double conductivity, const FESpace& space);

// ============================================================================
// Norms
// ============================================================================

struct ErrorNorms {
    double l2 = 0.0;
    double h1_semi = 0.0;
    double h1 = 0.0;  // sqrt(l2^2 + h1_semi^2)
};

// Difference between a finite element function and a closed-form field,
// integrated cell by cell with the degree-6 rule.
ErrorNorms scalar_error_norms(const FEFunction& fh, const ScalarField& exact,
                              const VectorField& grad_exact);
ErrorNorms vector_error_norms(const FEFunction& fh, const VectorField& exact,
                              const MatrixField& grad_exact);

// Difference of two functions on the same space.
ErrorNorms fe_difference_norms(const FEFunction& a, const FEFunction& b);

// Weighted norms ||v||_w = sqrt(<w v, v>) used by the energy estimates.
double weighted_l2_norm(const FEFunction& f, double weight);
double weighted_h1_semi_norm(const FEFunction& f, double weight);
// || eps(u) ||_{2 mu} = sqrt(<2 mu eps(u), eps(u)>).
double strain_norm(const FEFunction& u, double mu);
// || sum_i coeff_i f_i ||_w for scalar fields on one shared space.
double weighted_combination_l2(double weight, const std::vector<const FEFunction*>& fields,
                               const std::vector<double>& coefficients);

// ============================================================================
// Consistent initialization for convergence studies
// ============================================================================

// Initial state whose discrete trajectory is exactly linear in time,
// assuming loads and boundary data are themselves linear in time (true for
// every shipped manufactured case). Two solves with the static part of the
// operator produce slope and offset of the semidiscrete solution; starting
// from the offset, any consistent theta step reproduces the linear
// trajectory, so measured errors are purely spatial and independent of dt.
// The generic compatible_initial_state leaves an O(h^2) initialization
// transient whose decay depends on dt, which would mask that independence.
MpetState linear_consistent_initial_state(const MpetOperator& op, const SourceData& sources,
                                          const BoundaryProgram& bcs);

// ============================================================================
// Convergence studies
// ============================================================================

// What the error columns measure: distance to the exact solution, or
// distance to its interpolants (the discretization error, which
// superconverges for the pressure in H1).
enum class ErrorMode { kExact, kInterpolant };

struct LevelRecord {
    int cells_per_side = 0;
    double h = 0.0;
    std::vector<double> errors;  // parallel to ConvergenceReport::columns
    // Largest ratio ||p0_h|| / ||eps(u_h)||_{2 mu} over the recorded steps
    // (total-pressure runs only); bounded uniformly under refinement.
    double p0_control = 0.0;
};

struct ConvergenceReport {
    std::string case_name;
    Formulation formulation = Formulation::kTotalPressure;
    ErrorMode mode = ErrorMode::kExact;
    std::vector<std::string> columns;
    std::vector<double> reference_rates;  // footer row of the report
    std::vector<LevelRecord> levels;      // coarse to fine
    // rates[k][c] = log2(errors[k][c] / errors[k+1][c]) for adjacent levels.
    std::vector<std::vector<double>> rates;

    int column_index(const std::string& column) const;
    double error(int level, const std::string& column) const;
    double rate(int pair, const std::string& column) const;
};

// Solves the case on a sequence of uniformly refined unit-square meshes
// (base_n, 2 base_n, ... cells per side) and measures errors at the final
// time. Exact mode reports u in L2/H1, p_1 in L2/H1 and (for the
// total-pressure formulation) p_0 in L2; interpolant mode reports the
// distance of p_{1,h}(T) to the elliptic projection of p_1(T).
ConvergenceReport convergence_study(const ManufacturedCase& mcase, Formulation formulation,
                                    int levels, ErrorMode mode = ErrorMode::kExact,
                                    int base_n = 4);

// Deterministic report emission: CSV for machines, an aligned markdown table
// (error and rate column per field, reference footer) for eyes.
void write_report_csv(const ConvergenceReport& report, const std::string& path);
void write_report_markdown(const ConvergenceReport& report, const std::string& path);
std::string report_markdown(const ConvergenceReport& report);
std::string report_csv(const ConvergenceReport& report);

}  // namespace mpet
