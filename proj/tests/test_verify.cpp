#include "mpet/verify.hpp"

#include <cmath>
#include <memory>
#include <gtest/gtest.h>

#include "mpet/mesh.hpp"
#include "mpet/mpet_core.hpp"
#include "mpet/spaces.hpp"
#include "mpet/timestepper.hpp"

namespace mpet {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::shared_ptr<const Mesh> square(int n) {
    return std::make_shared<Mesh>(build_unit_square_mesh(n));
}

double max_coeff_gap(const FEFunction& a, const FEFunction& b) {
    double gap = 0.0;
    for (size_t i = 0; i < a.coeffs().size(); ++i) {
        gap = std::max(gap, std::abs(a.coeffs()[i] - b.coeffs()[i]));
    }
    return gap;
}

// ============================================================================
// Residual oracle
// ============================================================================

TEST(ResidualOracle, AcceptsEveryShippedCaseVariant) {
    // Sources and closed-form fields must satisfy the strong equations for
    // the full parameter range the studies use, including the lambda-scaled
    // robustness variant.
    const ManufacturedCase variants[] = {
        example1_case(0.49999, 1.0),
        example1_case(0.4, 1.0),
        example1_case(0.49999, 0.0),
        example1_case(0.49999, 1.0, 1000.0),
    };
    for (const ManufacturedCase& mcase : variants) {
        EXPECT_LT(residual_oracle_sampled(mcase, 50, 20260815u), 1e-5) << mcase.name;
    }
}

TEST(ResidualOracle, FlagsACorruptedSource) {
    ManufacturedCase bad = example1_case(0.3, 1.0);
    const TimeScalarField original = bad.sources.network_source[0];
    bad.sources.network_source[0] = [original](Vec2 x, double t) {
        return original(x, t) + 1.0;
    };
    const double residual = residual_oracle(bad, random_interior_points(50, 7u), 0.3);
    EXPECT_GT(residual, 0.5);
    EXPECT_LT(residual, 1.5);
}

TEST(ResidualOracle, FlagsACorruptedClosedFormGradient) {
    ManufacturedCase skewed = example1_case(0.3, 1.0);
    const TimeVectorField original = skewed.grad_p[0];
    skewed.grad_p[0] = [original](Vec2 x, double t) {
        Vec2 g = original(x, t);
        g[0] += 0.5;
        return g;
    };
    EXPECT_GT(residual_oracle(skewed, random_interior_points(50, 7u), 0.3), 0.1);
}

TEST(ResidualOracle, SamplePointsAreInteriorAndReproducible) {
    const std::vector<Vec2> a = random_interior_points(40, 11u);
    const std::vector<Vec2> b = random_interior_points(40, 11u);
    ASSERT_EQ(a.size(), 40u);
    for (size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k][0], b[k][0]);
        EXPECT_EQ(a[k][1], b[k][1]);
        EXPECT_GE(a[k][0], 0.05);
        EXPECT_LE(a[k][0], 0.95);
        EXPECT_GE(a[k][1], 0.05);
        EXPECT_LE(a[k][1], 0.95);
    }
    const std::vector<Vec2> other = random_interior_points(40, 12u);
    EXPECT_NE(a[0][0], other[0][0]);
}

// ============================================================================
// Interpolation operators
// ============================================================================

TEST(StokesInterpolant, ReproducesPairsAlreadyInTheSpaces) {
    const auto mesh = square(4);
    const FESpace velocity(mesh, 2, 2, {kTagWhole});
    const FESpace pressure(mesh, 1, 1);

    // Quadratic displacement and linear pressure lie in the Taylor-Hood
    // pair, so the interpolant must hand them back.
    const VectorField u = [](Vec2 x) {
        return Vec2{x[0] * x[0] + x[0] * x[1] - 2.0 * x[1] * x[1], x[0] + x[1] * x[1]};
    };
    const MatrixField grad_u = [](Vec2 x) {
        return Mat2{{{2.0 * x[0] + x[1], x[0] - 4.0 * x[1]}, {1.0, 2.0 * x[1]}}};
    };
    const ScalarField div_u = [](Vec2 x) { return 2.0 * x[0] + x[1] + 2.0 * x[1]; };
    const ScalarField p0 = [](Vec2 x) { return 1.0 - 2.0 * x[0] + x[1]; };

    const auto [pi_u, pi_p0] = stokes_interpolant(u, grad_u, div_u, p0, 0.8, velocity, pressure);
    EXPECT_LE(max_coeff_gap(pi_u, interpolate(velocity, u)), 1e-10);
    EXPECT_LE(max_coeff_gap(pi_p0, interpolate(pressure, p0)), 1e-10);
}

TEST(StokesInterpolant, ErrorDecreasesUnderRefinement) {
    const ManufacturedCase mcase = example1_case(0.49999, 1.0);
    const double t = mcase.t_end;
    const VectorField u = [&](Vec2 x) { return mcase.u(x, t); };
    const MatrixField grad_u = [&](Vec2 x) { return mcase.grad_u(x, t); };
    const ScalarField div_u = [&](Vec2 x) { return mcase.div_u(x, t); };
    const ScalarField p0 = [&](Vec2 x) { return mcase.p0(x, t); };
    const VectorField grad_p0 = [&](Vec2 x) { return mcase.grad_p0(x, t); };

    double u_h1[2] = {0.0, 0.0};
    double p0_l2[2] = {0.0, 0.0};
    for (int k = 0; k < 2; ++k) {
        const auto mesh = square(4 << k);
        const FESpace velocity(mesh, 2, 2, {kTagWhole});
        const FESpace pressure(mesh, 1, 1);
        const auto [pi_u, pi_p0] =
            stokes_interpolant(u, grad_u, div_u, p0, mcase.params.mu, velocity, pressure);
        u_h1[k] = vector_error_norms(pi_u, u, grad_u).h1;
        p0_l2[k] = scalar_error_norms(pi_p0, p0, grad_p0).l2;
    }
    EXPECT_GT(u_h1[0], 0.0);
    EXPECT_LT(u_h1[1], 0.5 * u_h1[0]);
    EXPECT_GT(p0_l2[0], 0.0);
    EXPECT_LT(p0_l2[1], 0.6 * p0_l2[0]);
}

TEST(StokesInterpolant, RequiresAConstrainedVelocitySpace) {
    const auto mesh = square(2);
    const FESpace velocity(mesh, 2, 2);  // no Dirichlet tags
    const FESpace pressure(mesh, 1, 1);
    const VectorField u = [](Vec2) { return Vec2{0.0, 0.0}; };
    const MatrixField grad_u = [](Vec2) { return Mat2{{{0.0, 0.0}, {0.0, 0.0}}}; };
    const ScalarField zero = [](Vec2) { return 0.0; };
    EXPECT_THROW(stokes_interpolant(u, grad_u, zero, zero, 1.0, velocity, pressure),
                 std::invalid_argument);
}

TEST(EllipticProjection, ReproducesFunctionsInTheSpace) {
    const auto mesh = square(4);
    const FESpace space(mesh, 1, 1, {kTagWhole});
    const ScalarField p = [](Vec2 x) { return 2.0 * x[0] - x[1] + 0.25; };
    const VectorField grad_p = [](Vec2) { return Vec2{2.0, -1.0}; };
    const FEFunction projected = elliptic_projection(p, grad_p, 1.0, space);
    EXPECT_LE(max_coeff_gap(projected, interpolate(space, p)), 1e-12);
}

TEST(EllipticProjection, ConstantConductivityScalesOut) {
    const auto mesh = square(4);
    const FESpace space(mesh, 1, 1, {kTagWhole});
    const ScalarField p = [](Vec2 x) { return std::sin(kPi * x[0]) * std::sin(kPi * x[1]); };
    const VectorField grad_p = [](Vec2 x) {
        return Vec2{kPi * std::cos(kPi * x[0]) * std::sin(kPi * x[1]),
                    kPi * std::sin(kPi * x[0]) * std::cos(kPi * x[1])};
    };
    const FEFunction a = elliptic_projection(p, grad_p, 1.0, space);
    const FEFunction b = elliptic_projection(p, grad_p, 10.0, space);
    EXPECT_LE(max_coeff_gap(a, b), 1e-12);
    EXPECT_THROW(elliptic_projection(p, grad_p, 0.0, space), std::invalid_argument);
}

// ============================================================================
// Error norms
// ============================================================================

TEST(ErrorNorms, VanishForFieldsTheSpaceRepresents) {
    const auto mesh = square(3);
    const FESpace space(mesh, 1, 1);
    const ScalarField p = [](Vec2 x) { return 3.0 * x[0] - 0.5 * x[1] + 1.0; };
    const VectorField grad_p = [](Vec2) { return Vec2{3.0, -0.5}; };
    const ErrorNorms norms = scalar_error_norms(interpolate(space, p), p, grad_p);
    EXPECT_LE(norms.l2, 1e-13);
    EXPECT_LE(norms.h1_semi, 1e-13);
    EXPECT_LE(norms.h1, 1e-13);
}

TEST(ErrorNorms, MatchClosedFormIntegralsOfASmoothField) {
    // Against the zero function the error norms are the norms of the field
    // itself: || sin(pi x) sin(pi y) || = 1/2 and | . |_1 = pi / sqrt(2).
    const auto mesh = square(16);
    const FESpace space(mesh, 1, 1);
    const FEFunction zero(space);
    const ScalarField p = [](Vec2 x) { return std::sin(kPi * x[0]) * std::sin(kPi * x[1]); };
    const VectorField grad_p = [](Vec2 x) {
        return Vec2{kPi * std::cos(kPi * x[0]) * std::sin(kPi * x[1]),
                    kPi * std::sin(kPi * x[0]) * std::cos(kPi * x[1])};
    };
    const ErrorNorms norms = scalar_error_norms(zero, p, grad_p);
    EXPECT_NEAR(norms.l2, 0.5, 1e-6);
    EXPECT_NEAR(norms.h1_semi, kPi / std::sqrt(2.0), 1e-5);
    EXPECT_NEAR(norms.h1, std::sqrt(norms.l2 * norms.l2 + norms.h1_semi * norms.h1_semi), 1e-12);
}

TEST(ErrorNorms, VectorVariantAgreesWithTheScalarOne) {
    const auto mesh = square(16);
    const FESpace space(mesh, 2, 2);
    const FEFunction zero(space);
    const VectorField u = [](Vec2 x) {
        return Vec2{std::sin(kPi * x[0]) * std::sin(kPi * x[1]), 0.0};
    };
    const MatrixField grad_u = [](Vec2 x) {
        return Mat2{{{kPi * std::cos(kPi * x[0]) * std::sin(kPi * x[1]),
                      kPi * std::sin(kPi * x[0]) * std::cos(kPi * x[1])},
                     {0.0, 0.0}}};
    };
    const ErrorNorms norms = vector_error_norms(zero, u, grad_u);
    EXPECT_NEAR(norms.l2, 0.5, 1e-6);
    EXPECT_NEAR(norms.h1_semi, kPi / std::sqrt(2.0), 1e-5);
}

TEST(ErrorNorms, DifferenceOfTwoDiscreteFunctionsIsExact) {
    const auto mesh = square(5);
    const FESpace space(mesh, 1, 1);
    const FEFunction a = interpolate(space, [](Vec2 x) { return x[0] + x[1]; });
    const FEFunction b(space);
    const ErrorNorms norms = fe_difference_norms(a, b);
    // || x + y ||^2 = 7/6 and | x + y |_1^2 = 2 on the unit square.
    EXPECT_NEAR(norms.l2, std::sqrt(7.0 / 6.0), 1e-13);
    EXPECT_NEAR(norms.h1_semi, std::sqrt(2.0), 1e-13);
}

// ============================================================================
// Weighted norms
// ============================================================================

TEST(WeightedNorms, MatchHandComputedIntegrals) {
    const auto mesh = square(4);
    const FESpace space(mesh, 1, 1);
    const FEFunction x = interpolate(space, [](Vec2 p) { return p[0]; });
    // <9 x, x> = 9/3.
    EXPECT_NEAR(weighted_l2_norm(x, 9.0), std::sqrt(3.0), 1e-12);
    EXPECT_DOUBLE_EQ(weighted_l2_norm(x, 0.0), 0.0);
    // grad x = (1, 0) and weight 4.
    EXPECT_NEAR(weighted_h1_semi_norm(x, 4.0), 2.0, 1e-12);
    EXPECT_THROW(weighted_l2_norm(x, -1.0), std::invalid_argument);
}

TEST(WeightedNorms, StrainNormMatchesLinearDisplacements) {
    const auto mesh = square(4);
    const FESpace space(mesh, 2, 2);
    const FEFunction dilation = interpolate(space, [](Vec2 x) { return Vec2{x[0], x[1]}; });
    // eps = I, so <2 mu eps, eps> = 4 mu.
    EXPECT_NEAR(strain_norm(dilation, 0.7), 2.0 * std::sqrt(0.7), 1e-12);
    const FEFunction shear = interpolate(space, [](Vec2 x) { return Vec2{x[1], 0.0}; });
    // eps = [[0, 1/2], [1/2, 0]], so <2 mu eps, eps> = mu.
    EXPECT_NEAR(strain_norm(shear, 1.0), 1.0, 1e-12);
    EXPECT_THROW(strain_norm(dilation, 0.0), std::invalid_argument);
}

TEST(WeightedNorms, CombinationMatchesTheTriangleCase) {
    const auto mesh = square(3);
    const FESpace space(mesh, 1, 1);
    const FEFunction one = interpolate(space, [](Vec2) { return 1.0; });
    const FEFunction other = interpolate(space, [](Vec2) { return 1.0; });
    // || 1 + 1 ||_{1/4} = sqrt(1/4 * 4) = 1.
    EXPECT_NEAR(weighted_combination_l2(0.25, {&one, &other}, {1.0, 1.0}), 1.0, 1e-13);
    EXPECT_DOUBLE_EQ(weighted_combination_l2(0.0, {&one, &other}, {1.0, 1.0}), 0.0);
    // A single field with coefficient -2.
    EXPECT_NEAR(weighted_combination_l2(1.0, {&one}, {-2.0}), 2.0, 1e-13);
    EXPECT_THROW(weighted_combination_l2(1.0, {&one, &other}, {1.0}), std::invalid_argument);
}

// ============================================================================
// Consistent initialization
// ============================================================================

TEST(LinearConsistentInitialState, DoesNotDependOnTheStepSize) {
    const ManufacturedCase mcase = example1_case(0.3, 1.0);
    const auto mesh = square(3);
    const DirichletSpec dirichlet = DirichletSpec::uniform({kTagWhole}, 2);
    const MpetSpaces spaces = make_taylor_hood_spaces(mesh, 2, dirichlet);
    BoundaryProgram bcs;
    bcs.displacement.push_back({kTagWhole, mcase.u});
    bcs.network.resize(2);
    for (int j = 0; j < 2; ++j) {
        bcs.network[j].push_back({kTagWhole, mcase.p[j]});
    }
    const MpetOperator coarse =
        assemble_total_pressure_operator(spaces, mcase.params, 0.125, 0.5);
    const MpetOperator fine =
        assemble_total_pressure_operator(spaces, mcase.params, 0.0625, 0.5);
    const MpetState a = linear_consistent_initial_state(coarse, mcase.sources, bcs);
    const MpetState b = linear_consistent_initial_state(fine, mcase.sources, bcs);
    ASSERT_EQ(a.x.size(), b.x.size());
    for (size_t i = 0; i < a.x.size(); ++i) {
        EXPECT_EQ(a.x[i], b.x[i]) << "coefficient " << i;
    }
}

// ============================================================================
// Convergence studies
// ============================================================================

TEST(ConvergenceStudy, StandardFormulationMatchesKnownCoarseErrors) {
    const ManufacturedCase mcase = example1_case(0.49999, 1.0);
    const ConvergenceReport report =
        convergence_study(mcase, Formulation::kStandard, 2);
    ASSERT_EQ(report.levels.size(), 2u);
    ASSERT_EQ(report.rates.size(), 1u);
    EXPECT_EQ(report.columns, (std::vector<std::string>{"u_l2", "u_h1", "p1_l2", "p1_h1"}));

    // Independently established coarse-mesh errors of the locking study.
    EXPECT_NEAR(report.error(0, "u_l2"), 0.1691, 0.05 * 0.1691);
    EXPECT_NEAR(report.error(0, "u_h1"), 2.066, 0.05 * 2.066);
    EXPECT_EQ(report.levels[0].cells_per_side, 4);
    EXPECT_EQ(report.levels[1].cells_per_side, 8);
    EXPECT_NEAR(report.levels[0].h, 1.0 / 4.0, 1e-15);
    // The pre-asymptotic displacement rate of the locking-affected pair.
    EXPECT_GT(report.rate(0, "u_l2"), 1.5);
    EXPECT_LT(report.rate(0, "u_l2"), 2.5);
}

TEST(ConvergenceStudy, TotalPressureKeepsTheMultiplierControlled) {
    const ManufacturedCase mcase = example1_case(0.49999, 1.0);
    const ConvergenceReport report =
        convergence_study(mcase, Formulation::kTotalPressure, 3, ErrorMode::kExact, 2);
    ASSERT_EQ(report.levels.size(), 3u);
    EXPECT_EQ(report.columns.back(), "p0_l2");
    const double first = report.levels.front().p0_control;
    EXPECT_GT(first, 0.0);
    for (const LevelRecord& level : report.levels) {
        EXPECT_GT(level.p0_control, 0.0);
        EXPECT_LE(level.p0_control, 1.5 * first);
    }
}

TEST(ConvergenceStudy, InterpolantModeReportsDiscretizationColumns) {
    const ManufacturedCase mcase = example1_case(0.49999, 1.0);
    const ConvergenceReport report = convergence_study(mcase, Formulation::kTotalPressure, 2,
                                                       ErrorMode::kInterpolant, 2);
    EXPECT_EQ(report.columns, (std::vector<std::string>{"p1i_l2", "p1i_h1"}));
    EXPECT_EQ(report.reference_rates, (std::vector<double>{2.0, 2.0}));
    EXPECT_THROW(report.column_index("u_l2"), std::out_of_range);
    EXPECT_GT(report.error(0, "p1i_h1"), report.error(1, "p1i_h1"));
}

TEST(ConvergenceStudy, RejectsDegenerateInputs) {
    const ManufacturedCase mcase = example1_case(0.3, 1.0);
    EXPECT_THROW(convergence_study(mcase, Formulation::kStandard, 1), std::invalid_argument);
    EXPECT_THROW(convergence_study(mcase, Formulation::kStandard, 2, ErrorMode::kExact, 0),
                 std::invalid_argument);
    ManufacturedCase broken = mcase;
    broken.dt = 0.0;
    EXPECT_THROW(convergence_study(broken, Formulation::kStandard, 2), std::invalid_argument);
}

// ============================================================================
// Report emission
// ============================================================================

ConvergenceReport tiny_report() {
    ConvergenceReport report;
    report.case_name = "tiny";
    report.formulation = Formulation::kTotalPressure;
    report.mode = ErrorMode::kExact;
    report.columns = {"u_l2", "p0_l2"};
    report.reference_rates = {3.0, 2.0};
    LevelRecord coarse;
    coarse.cells_per_side = 4;
    coarse.h = 0.25;
    coarse.errors = {1.0e-2, 2.0e-2};
    coarse.p0_control = 0.5;
    LevelRecord fine = coarse;
    fine.cells_per_side = 8;
    fine.h = 0.125;
    fine.errors = {1.25e-3, 5.0e-3};
    report.levels = {coarse, fine};
    report.rates = {{3.0, 2.0}};
    return report;
}

TEST(Reports, MarkdownCarriesRatesAndTheReferenceFooter) {
    const ConvergenceReport report = tiny_report();
    const std::string md = report_markdown(report);
    EXPECT_NE(md.find("## tiny (total-pressure)"), std::string::npos);
    EXPECT_NE(md.find("| H |"), std::string::npos);
    EXPECT_NE(md.find("| H/2 |"), std::string::npos);
    EXPECT_NE(md.find("1.250e-03"), std::string::npos);
    EXPECT_NE(md.find("3.00"), std::string::npos);
    EXPECT_NE(md.find("| Optimal |"), std::string::npos);
    EXPECT_EQ(md, report_markdown(report));  // deterministic

    ConvergenceReport interp = report;
    interp.mode = ErrorMode::kInterpolant;
    EXPECT_NE(report_markdown(interp).find("| Theoretical |"), std::string::npos);
}

TEST(Reports, CsvCarriesHeaderRatesAndControlColumn) {
    const ConvergenceReport report = tiny_report();
    const std::string csv = report_csv(report);
    EXPECT_NE(csv.find("level,cells_per_side,h,u_l2,u_l2_rate,p0_l2,p0_l2_rate,p0_control"),
              std::string::npos);
    EXPECT_NE(csv.find("H,4,0.25"), std::string::npos);
    EXPECT_NE(csv.find("3.000000"), std::string::npos);
    EXPECT_EQ(csv, report_csv(report));

    ConvergenceReport standard = report;
    standard.formulation = Formulation::kStandard;
    EXPECT_EQ(report_csv(standard).find("p0_control"), std::string::npos);
}

}  // namespace
}  // namespace mpet
