#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "mpet/elements.hpp"
#include "mpet/mesh.hpp"
#include "mpet/types.hpp"

namespace mpet {

// Continuous Lagrange space (P1 or P2, scalar or 2-vector) on a triangle
// mesh. Scalar nodes are the mesh vertices followed (for P2) by the edge
// midpoints; vector dofs interleave components per node. Dofs sitting on
// facets whose tag is listed in `constrained_tags` are Dirichlet dofs.
class FESpace {
  public:
    FESpace(std::shared_ptr<const Mesh> mesh, int degree, int value_size,
            std::vector<int> constrained_tags = {});

    const Mesh& mesh() const { return *mesh_; }
    const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
    int degree() const { return degree_; }
    int value_size() const { return value_size_; }
    const ReferenceElement& element() const { return element_; }

    int scalar_node_count() const { return static_cast<int>(node_coords_.size()); }
    int dof_count() const { return value_size_ * scalar_node_count(); }
    int local_dof_count() const { return value_size_ * element_.node_count(); }

    Vec2 node_coord(int scalar_node) const { return node_coords_[scalar_node]; }
    int dof_of(int scalar_node, int component) const {
        return scalar_node * value_size_ + component;
    }

    // Global dofs of a cell, component-interleaved, matching the local
    // basis ordering (node 0 comp 0, node 0 comp 1, node 1 comp 0, ...).
    const int* cell_dofs(int cell) const {
        return cell_dofs_.data() + static_cast<size_t>(cell) * local_dof_count();
    }

    const std::vector<int>& constrained_tags() const { return constrained_tags_; }
    // All Dirichlet dofs, sorted ascending.
    const std::vector<int>& constrained_dofs() const { return constrained_dofs_; }
    // Dirichlet scalar nodes per tag (tags in ascending order); a node shared
    // by facets of two constrained tags appears only under the lowest tag.
    const std::map<int, std::vector<int>>& constrained_nodes_by_tag() const {
        return constrained_nodes_by_tag_;
    }

    bool same_layout(const FESpace& other) const {
        return mesh_ == other.mesh_ && degree_ == other.degree_ &&
               value_size_ == other.value_size_;
    }

  private:
    std::shared_ptr<const Mesh> mesh_;
    int degree_;
    int value_size_;
    ReferenceElement element_;
    std::vector<Vec2> node_coords_;
    std::vector<int> cell_dofs_;
    std::vector<int> constrained_tags_;
    std::vector<int> constrained_dofs_;
    std::map<int, std::vector<int>> constrained_nodes_by_tag_;
};

// Finite element function: coefficients over a space. The space must
// outlive the function.
class FEFunction {
  public:
    explicit FEFunction(const FESpace& space)
        : space_(&space), coeffs_(space.dof_count(), 0.0) {}
    FEFunction(const FESpace& space, std::vector<double> coeffs);

    const FESpace& space() const { return *space_; }
    std::vector<double>& coeffs() { return coeffs_; }
    const std::vector<double>& coeffs() const { return coeffs_; }

    double eval_scalar_in_cell(int cell, Vec2 x) const;
    Vec2 eval_vector_in_cell(int cell, Vec2 x) const;
    Vec2 grad_scalar_in_cell(int cell, Vec2 x) const;
    // (d u_i / d x_j) at x, row = component, column = derivative.
    Mat2 grad_vector_in_cell(int cell, Vec2 x) const;

    // Point evaluation anywhere in the domain; locates the containing cell
    // (lowest cell index wins on shared edges) and caches it as a hint.
    double eval_scalar(Vec2 x) const;
    Vec2 eval_vector(Vec2 x) const;

  private:
    const FESpace* space_;
    std::vector<double> coeffs_;
    mutable int cell_hint_ = 0;
};

// Containing cell of a point (barycentric tolerance 1e-12, lowest cell
// index on ties); returns -1 if the point is outside the mesh.
int locate_cell(const Mesh& mesh, Vec2 x, int hint = 0);

// Nodal interpolation.
FEFunction interpolate(const FESpace& space, const ScalarField& f);
FEFunction interpolate(const FESpace& space, const VectorField& f);

// Dirichlet data for the coupled problem: facet tags constraining the
// displacement space and, per network, the pressure spaces.
struct DirichletSpec {
    std::vector<int> displacement_tags;
    std::vector<std::vector<int>> network_tags;  // one entry per network

    static DirichletSpec uniform(std::vector<int> tags, int network_count);
};

// Field spaces for one MPET problem. `total_pressure` is present for the
// three-field (total-pressure) formulation and absent for the classical
// two-field one.
struct MpetSpaces {
    std::shared_ptr<const Mesh> mesh;
    FESpace displacement;                    // vector P2
    std::optional<FESpace> total_pressure;   // scalar P1, never constrained
    std::vector<FESpace> network_pressure;   // scalar P1 per network

    int network_count() const { return static_cast<int>(network_pressure.size()); }
    int field_count() const {
        return 1 + (total_pressure ? 1 : 0) + network_count();
    }
    // Monolithic field order: displacement, [total pressure,] networks.
    std::vector<int> field_sizes() const;
};

MpetSpaces make_taylor_hood_spaces(std::shared_ptr<const Mesh> mesh, int network_count,
                                   const DirichletSpec& dirichlet);
MpetSpaces make_standard_spaces(std::shared_ptr<const Mesh> mesh, int network_count,
                                const DirichletSpec& dirichlet);

}  // namespace mpet
