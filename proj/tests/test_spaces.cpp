#include "mpet/spaces.hpp"

#include <cmath>
#include <memory>
#include <gtest/gtest.h>

#include "mpet/mesh.hpp"

namespace mpet {
namespace {

std::shared_ptr<const Mesh> square(int n) {
    return std::make_shared<Mesh>(build_unit_square_mesh(n));
}

TEST(FESpace, QuadraticVectorSpaceCountsDofs) {
    // P2 scalar nodes = vertices + edges = 25 + 56 on the 4x4 square;
    // the vector space carries two components per node.
    const FESpace v(square(4), 2, 2);
    EXPECT_EQ(v.scalar_node_count(), 81);
    EXPECT_EQ(v.dof_count(), 162);
    EXPECT_EQ(v.local_dof_count(), 12);
}

TEST(FESpace, LinearSpaceConstrainsBoundaryVertices) {
    // P1 with the whole boundary constrained: 4n boundary vertices.
    const FESpace q(square(4), 1, 1, {kTagWhole});
    EXPECT_EQ(q.dof_count(), 25);
    EXPECT_EQ(q.constrained_dofs().size(), 16u);
    const auto& by_tag = q.constrained_nodes_by_tag();
    ASSERT_EQ(by_tag.size(), 1u);
    EXPECT_EQ(by_tag.at(kTagWhole).size(), 16u);
}

TEST(FESpace, ConstrainedDofsSitOnTheConstrainedBoundary) {
    const FESpace v(square(3), 2, 2, {kTagWhole});
    for (int dof : v.constrained_dofs()) {
        const Vec2 x = v.node_coord(dof / 2);
        const bool on_boundary = x[0] < 1e-12 || x[0] > 1.0 - 1e-12 || x[1] < 1e-12 ||
                                 x[1] > 1.0 - 1e-12;
        EXPECT_TRUE(on_boundary);
    }
    // Both components of every boundary node are constrained: 12 boundary
    // vertices plus 12 boundary edge midpoints.
    EXPECT_EQ(v.constrained_dofs().size(), 48u);
}

TEST(Interpolation, ReproducesPolynomialsOfTheSpaceDegree) {
    const auto mesh = square(3);
    const FESpace q2(mesh, 2, 1);
    const auto poly = [](Vec2 x) { return 1.0 + 2.0 * x[0] - x[1] + 3.0 * x[0] * x[1] -
                                          x[0] * x[0] + 0.5 * x[1] * x[1]; };
    const FEFunction fh = interpolate(q2, ScalarField(poly));
    const Vec2 samples[] = {{0.17, 0.09}, {0.55, 0.42}, {0.83, 0.97}, {0.31, 0.64}};
    for (const Vec2 x : samples) {
        EXPECT_NEAR(fh.eval_scalar(x), poly(x), 1e-13);
    }
}

TEST(Interpolation, VectorGradientLayout) {
    // u = (x + 2y, 3x - y): rows of the gradient are component gradients.
    const auto mesh = square(2);
    const FESpace v(mesh, 2, 2);
    const FEFunction uh = interpolate(v, VectorField([](Vec2 x) {
        return Vec2{x[0] + 2.0 * x[1], 3.0 * x[0] - x[1]};
    }));
    const int cell = 0;
    const Mat2 g = uh.grad_vector_in_cell(cell, {0.2, 0.1});
    EXPECT_NEAR(g.m[0][0], 1.0, 1e-13);
    EXPECT_NEAR(g.m[0][1], 2.0, 1e-13);
    EXPECT_NEAR(g.m[1][0], 3.0, 1e-13);
    EXPECT_NEAR(g.m[1][1], -1.0, 1e-13);
}

TEST(LocateCell, FindsInteriorPointsAndBreaksTiesLow) {
    const auto mesh = square(4);
    for (const Vec2 x : {Vec2{0.01, 0.01}, Vec2{0.99, 0.5}, Vec2{0.5, 0.99}}) {
        const int cell = locate_cell(*mesh, x);
        ASSERT_GE(cell, 0);
        EXPECT_LT(cell, mesh->cell_count());
    }
    EXPECT_EQ(locate_cell(*mesh, {1.5, 0.5}), -1);
    // A point on a shared edge belongs to the lowest-indexed owner, so two
    // queries agree regardless of the hint.
    const Vec2 shared = {0.125, 0.125};
    EXPECT_EQ(locate_cell(*mesh, shared, 0), locate_cell(*mesh, shared, 17));
}

TEST(DirichletSpecUniform, CoversEveryNetwork) {
    const DirichletSpec spec = DirichletSpec::uniform({kTagWhole}, 3);
    EXPECT_EQ(spec.displacement_tags, std::vector<int>{kTagWhole});
    ASSERT_EQ(spec.network_tags.size(), 3u);
    for (const auto& tags : spec.network_tags) {
        EXPECT_EQ(tags, std::vector<int>{kTagWhole});
    }
}

TEST(MpetSpaces, TaylorHoodLayout) {
    const auto mesh = square(4);
    const MpetSpaces spaces =
        make_taylor_hood_spaces(mesh, 2, DirichletSpec::uniform({kTagWhole}, 2));
    EXPECT_EQ(spaces.displacement.degree(), 2);
    EXPECT_EQ(spaces.displacement.value_size(), 2);
    ASSERT_TRUE(spaces.total_pressure.has_value());
    // The total pressure is a Lagrange multiplier; it never carries
    // Dirichlet data.
    EXPECT_TRUE(spaces.total_pressure->constrained_dofs().empty());
    ASSERT_EQ(spaces.network_pressure.size(), 2u);
    EXPECT_EQ(spaces.field_count(), 4);
    const std::vector<int> sizes = spaces.field_sizes();
    EXPECT_EQ(sizes, (std::vector<int>{162, 25, 25, 25}));
}

TEST(MpetSpaces, StandardLayoutDropsTheMultiplier) {
    const auto mesh = square(4);
    const MpetSpaces spaces =
        make_standard_spaces(mesh, 2, DirichletSpec::uniform({kTagWhole}, 2));
    EXPECT_FALSE(spaces.total_pressure.has_value());
    EXPECT_EQ(spaces.field_count(), 3);
    EXPECT_EQ(spaces.field_sizes(), (std::vector<int>{162, 25, 25}));
}

TEST(FEFunction, RejectsCoefficientSizeMismatch) {
    const auto mesh = square(2);
    const FESpace q(mesh, 1, 1);
    EXPECT_THROW(FEFunction(q, std::vector<double>(7, 0.0)), std::invalid_argument);
}

}  // namespace
}  // namespace mpet
