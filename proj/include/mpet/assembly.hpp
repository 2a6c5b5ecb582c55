#pragma once

#include <functional>

#include "mpet/linalg.hpp"
#include "mpet/spaces.hpp"
#include "mpet/types.hpp"

namespace mpet {

// Bilinear forms over a mesh. Bilinear assembly integrates with a rule of
// degree 2*(trial degree)+1; load vectors use the degree-6 rule.

// <c p, q> on a scalar space.
SparseMatrix assemble_scalar_mass(const FESpace& q, double coeff = 1.0);

// <k grad p, grad q> on a scalar space, constant or pointwise k.
SparseMatrix assemble_scalar_stiffness(const FESpace& q, double k);
SparseMatrix assemble_scalar_stiffness(const FESpace& q, const ScalarField& k);

// <2 mu eps(u), eps(v)> on a vector space.
SparseMatrix assemble_elasticity(const FESpace& v, double mu);

// <div u, div v> on a vector space.
SparseMatrix assemble_div_div(const FESpace& v);

// <div u, q>: rows over the scalar space, columns over the vector space.
SparseMatrix assemble_div_coupling(const FESpace& v, const FESpace& q);

Vector assemble_scalar_load(const FESpace& q, const ScalarField& g);
Vector assemble_vector_load(const FESpace& v, const VectorField& f);

// Boundary load of a prescribed normal stress: integral of s (n . v) over
// the facets carrying `tag`, with n the outward unit normal.
Vector assemble_boundary_normal_load(const FESpace& v, int tag, const ScalarField& s);

// Integral of a pointwise callback over the mesh with the given rule
// degree; the callback receives the cell index and the physical point.
double integrate_over_cells(const Mesh& mesh, int quad_degree,
                            const std::function<double(int, Vec2)>& integrand);

}  // namespace mpet
