#include "mpet/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <gtest/gtest.h>

namespace mpet {
namespace {

SparseMatrix dense3(const double (&a)[3][3]) {
    std::vector<std::pair<int, int>> pattern;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (a[i][j] != 0.0) {
                pattern.emplace_back(i, j);
            }
        }
    }
    SparseMatrix m = SparseMatrix::from_pattern(3, 3, pattern);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (a[i][j] != 0.0) {
                m.add(i, j, a[i][j]);
            }
        }
    }
    return m;
}

TEST(SparseMatrix, PatternIsFixedAndDeduplicated) {
    SparseMatrix m = SparseMatrix::from_pattern(2, 2, {{0, 0}, {0, 1}, {0, 1}, {1, 1}});
    EXPECT_EQ(m.nnz(), 3);
    m.add(0, 1, 2.5);
    m.add(0, 1, 0.5);
    EXPECT_DOUBLE_EQ(m.at(0, 1), 3.0);
    EXPECT_DOUBLE_EQ(m.at(1, 0), 0.0);  // outside the pattern reads as zero
    EXPECT_THROW(m.add(1, 0, 1.0), std::out_of_range);
}

TEST(SparseMatrix, ApplyMatchesDenseArithmetic) {
    const SparseMatrix m = dense3({{2, -1, 0}, {-1, 2, -1}, {0, -1, 2}});
    const Vector y = m.apply({1.0, 2.0, 3.0});
    EXPECT_DOUBLE_EQ(y[0], 0.0);
    EXPECT_DOUBLE_EQ(y[1], 0.0);
    EXPECT_DOUBLE_EQ(y[2], 4.0);
}

TEST(SparseMatrix, TransposeAndSymmetryDefect) {
    const SparseMatrix m = dense3({{1, 2, 0}, {0, 3, 0}, {4, 0, 5}});
    const SparseMatrix mt = m.transposed();
    EXPECT_DOUBLE_EQ(mt.at(2, 0), 0.0);
    EXPECT_DOUBLE_EQ(mt.at(0, 2), 4.0);
    EXPECT_DOUBLE_EQ(mt.at(1, 0), 2.0);
    EXPECT_GT(m.symmetry_defect(), 0.0);
    const SparseMatrix s = dense3({{2, -1, 0}, {-1, 2, -1}, {0, -1, 2}});
    EXPECT_DOUBLE_EQ(s.symmetry_defect(), 0.0);
}

TEST(SparseMatrix, AddScaledRequiresMatchingPattern) {
    SparseMatrix a = dense3({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    const SparseMatrix b = dense3({{2, 0, 0}, {0, 2, 0}, {0, 0, 2}});
    a.add_scaled(b, 0.5);
    EXPECT_DOUBLE_EQ(a.at(1, 1), 2.0);
    const SparseMatrix c = dense3({{1, 1, 0}, {0, 1, 0}, {0, 0, 1}});
    EXPECT_THROW(a.add_scaled(c, 1.0), std::invalid_argument);
}

TEST(AssembleAdd, ScattersACellBlock) {
    SparseMatrix m = SparseMatrix::from_pattern(3, 3, {{0, 0}, {0, 2}, {2, 0}, {2, 2}});
    const std::vector<double> block = {1.0, 2.0, 3.0, 4.0};  // row-major 2x2
    assemble_add(m, block, {0, 2}, {0, 2});
    EXPECT_DOUBLE_EQ(m.at(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(m.at(0, 2), 2.0);
    EXPECT_DOUBLE_EQ(m.at(2, 0), 3.0);
    EXPECT_DOUBLE_EQ(m.at(2, 2), 4.0);
}

TEST(BlockMatrix, MonolithicAssemblyUsesFieldOffsets) {
    BlockMatrix blocks({2, 1});
    // A block whose dimensions disagree with the field sizes is rejected.
    EXPECT_THROW(blocks.set_block(0, 0, dense3({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}})),
                 std::invalid_argument);

    BlockMatrix ok({2, 1});
    SparseMatrix a = SparseMatrix::from_pattern(2, 2, {{0, 0}, {1, 1}});
    a.add(0, 0, 2.0);
    a.add(1, 1, 3.0);
    SparseMatrix b = SparseMatrix::from_pattern(2, 1, {{0, 0}});
    b.add(0, 0, 7.0);
    ok.set_block(0, 0, a);
    ok.set_block(0, 1, b);
    EXPECT_EQ(ok.total_size(), 3);
    EXPECT_EQ(ok.field_offset(1), 2);
    const SparseMatrix mono = ok.monolithic();
    EXPECT_DOUBLE_EQ(mono.at(0, 2), 7.0);
    EXPECT_DOUBLE_EQ(mono.at(1, 1), 3.0);
    const Vector y = ok.apply({1.0, 1.0, 1.0});
    EXPECT_DOUBLE_EQ(y[0], 9.0);
    EXPECT_DOUBLE_EQ(y[1], 3.0);
    EXPECT_DOUBLE_EQ(y[2], 0.0);
}

TEST(ApplyDirichlet, EliminationKeepsSymmetryAndValues) {
    SparseMatrix m = dense3({{4, 1, 2}, {1, 5, 1}, {2, 1, 6}});
    Vector rhs = {1.0, 2.0, 3.0};
    apply_dirichlet(m, rhs, {{1, 10.0}});
    EXPECT_DOUBLE_EQ(m.symmetry_defect(), 0.0);
    EXPECT_DOUBLE_EQ(m.at(1, 1), 1.0);
    EXPECT_DOUBLE_EQ(m.at(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(m.at(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(rhs[1], 10.0);
    // Lifted right-hand side: original rhs minus column * value.
    EXPECT_DOUBLE_EQ(rhs[0], 1.0 - 1.0 * 10.0);
    EXPECT_DOUBLE_EQ(rhs[2], 3.0 - 1.0 * 10.0);
    const Vector x = solve(m, rhs);
    EXPECT_NEAR(x[1], 10.0, 1e-12);
}

TEST(ApplyDirichlet, SplitEliminationMatchesTheOneShotPath) {
    const SparseMatrix m = dense3({{4, 1, 2}, {1, 5, 1}, {2, 1, 6}});
    const std::vector<int> constrained = {2};

    SparseMatrix one_shot = m;
    Vector rhs_one = {1.0, 2.0, 3.0};
    apply_dirichlet(one_shot, rhs_one, {{2, -4.0}});

    const SparseMatrix eliminated = eliminate_dirichlet(m, constrained);
    const DirichletLift lift(m, constrained);
    Vector rhs_split = {1.0, 2.0, 3.0};
    lift.apply(rhs_split, {-4.0});

    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(rhs_split[i], rhs_one[i], 1e-14) << "row " << i;
        for (int j = 0; j < 3; ++j) {
            EXPECT_NEAR(eliminated.at(i, j), one_shot.at(i, j), 1e-14)
                << "entry " << i << "," << j;
        }
    }
}

TEST(DirectSolver, SolvesAndChecksResiduals) {
    const SparseMatrix m = dense3({{4, 1, 0}, {1, 3, 1}, {0, 1, 2}});
    const DirectSolver solver(m);
    const Vector b = {5.0, 5.0, 3.0};
    const Vector x = solver.solve(b);
    Vector r = m.apply(x);
    axpy(-1.0, b, r);
    EXPECT_LE(norm2(r), 1e-10 * norm2(b));
    // A zero right-hand side returns the zero vector.
    const Vector z = solver.solve({0.0, 0.0, 0.0});
    EXPECT_LE(norm2(z), 1e-14);
}

TEST(DirectSolver, SolvesAnIndefiniteSaddlePointSystem) {
    // [A B^T; B 0] with A SPD: the signature of every eliminated step.
    std::vector<std::pair<int, int>> pattern;
    for (int i = 0; i < 2; ++i) {
        pattern.emplace_back(i, i);
        pattern.emplace_back(i, 2);
        pattern.emplace_back(2, i);
    }
    SparseMatrix m = SparseMatrix::from_pattern(3, 3, pattern);
    m.add(0, 0, 2.0);
    m.add(1, 1, 2.0);
    m.add(0, 2, 1.0);
    m.add(1, 2, -1.0);
    m.add(2, 0, 1.0);
    m.add(2, 1, -1.0);
    // Exact solution x = (1, -1, 1): b = (3, -3, 2).
    const Vector x = solve(m, {3.0, -3.0, 2.0});
    EXPECT_NEAR(x[0], 1.0, 1e-12);
    EXPECT_NEAR(x[1], -1.0, 1e-12);
    EXPECT_NEAR(x[2], 1.0, 1e-12);
}

TEST(DirectSolver, NamesTheOffendingRowOfASingularMatrix) {
    SparseMatrix m = SparseMatrix::from_pattern(3, 3, {{0, 0}, {1, 1}, {2, 2}});
    m.add(0, 0, 1.0);
    m.add(2, 2, 1.0);  // row 1 stays identically zero
    try {
        DirectSolver solver(m);
        FAIL() << "expected a singularity error";
    } catch (const std::exception& e) {
        EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
    }
}

TEST(VectorOps, DotNormAxpy) {
    const Vector a = {3.0, 4.0};
    EXPECT_DOUBLE_EQ(norm2(a), 5.0);
    EXPECT_DOUBLE_EQ(dot(a, {1.0, 1.0}), 7.0);
    Vector y = {1.0, 1.0};
    axpy(2.0, a, y);
    EXPECT_DOUBLE_EQ(y[0], 7.0);
    EXPECT_DOUBLE_EQ(y[1], 9.0);
}

}  // namespace
}  // namespace mpet
