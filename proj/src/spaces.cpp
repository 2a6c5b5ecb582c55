#include "mpet/spaces.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace mpet {

FESpace::FESpace(std::shared_ptr<const Mesh> mesh, int degree, int value_size,
                 std::vector<int> constrained_tags)
    : mesh_(std::move(mesh)),
      degree_(degree),
      value_size_(value_size),
      element_(degree),
      constrained_tags_(std::move(constrained_tags)) {
    if (!mesh_) throw std::invalid_argument("FESpace: null mesh");
    if (value_size_ != 1 && value_size_ != 2) {
        throw std::invalid_argument("FESpace: value size must be 1 or 2");
    }
    const Mesh& m = *mesh_;

    node_coords_ = m.vertices();
    if (degree_ == 2) {
        node_coords_.reserve(m.vertex_count() + m.edge_count());
        for (const auto& e : m.edges()) {
            node_coords_.push_back(0.5 * (m.vertices()[e[0]] + m.vertices()[e[1]]));
        }
    }

    // Cell dof maps. Scalar node ids: vertex id, then (P2) vertex_count +
    // edge id for the midpoint of that edge.
    const int nodes_per_cell = element_.node_count();
    cell_dofs_.resize(static_cast<size_t>(m.cell_count()) * nodes_per_cell * value_size_);
    size_t pos = 0;
    for (int c = 0; c < m.cell_count(); ++c) {
        int scalar_nodes[6];
        for (int k = 0; k < 3; ++k) scalar_nodes[k] = m.cells()[c][k];
        if (degree_ == 2) {
            for (int k = 0; k < 3; ++k) {
                scalar_nodes[3 + k] = m.vertex_count() + m.cell_edges()[c][k];
            }
        }
        for (int k = 0; k < nodes_per_cell; ++k) {
            for (int comp = 0; comp < value_size_; ++comp) {
                cell_dofs_[pos++] = scalar_nodes[k] * value_size_ + comp;
            }
        }
    }

    // Dirichlet nodes per tag. Sorted tag order makes the lowest tag win
    // when regions meet at a corner.
    std::vector<int> tags = constrained_tags_;
    std::sort(tags.begin(), tags.end());
    tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
    for (int tag : tags) {
        if (!m.has_tag(tag)) {
            throw std::invalid_argument("FESpace: no mesh facet carries tag " +
                                        std::to_string(tag));
        }
    }
    std::set<int> seen;
    for (int tag : tags) {
        std::set<int> nodes;
        for (int f = 0; f < m.facet_count(); ++f) {
            if (m.facet_tags()[f] != tag) continue;
            nodes.insert(m.facets()[f][0]);
            nodes.insert(m.facets()[f][1]);
            if (degree_ == 2) nodes.insert(m.vertex_count() + m.facet_edge(f));
        }
        std::vector<int>& list = constrained_nodes_by_tag_[tag];
        for (int n : nodes) {
            if (seen.insert(n).second) list.push_back(n);
        }
    }
    for (const auto& [tag, nodes] : constrained_nodes_by_tag_) {
        for (int n : nodes) {
            for (int comp = 0; comp < value_size_; ++comp) {
                constrained_dofs_.push_back(n * value_size_ + comp);
            }
        }
    }
    std::sort(constrained_dofs_.begin(), constrained_dofs_.end());
}

FEFunction::FEFunction(const FESpace& space, std::vector<double> coeffs)
    : space_(&space), coeffs_(std::move(coeffs)) {
    if (static_cast<int>(coeffs_.size()) != space.dof_count()) {
        throw std::invalid_argument("FEFunction: coefficient count " +
                                    std::to_string(coeffs_.size()) + " does not match space (" +
                                    std::to_string(space.dof_count()) + " dofs)");
    }
}

namespace {

AffineMap cell_map(const Mesh& m, int cell) {
    const auto& t = m.cells()[cell];
    return AffineMap::from_triangle(m.vertices()[t[0]], m.vertices()[t[1]], m.vertices()[t[2]]);
}

}  // namespace

double FEFunction::eval_scalar_in_cell(int cell, Vec2 x) const {
    const FESpace& s = *space_;
    const Vec2 xi = cell_map(s.mesh(), cell).to_reference(x);
    double shape[6];
    s.element().shape(xi, shape);
    const int* dofs = s.cell_dofs(cell);
    double value = 0.0;
    for (int k = 0; k < s.element().node_count(); ++k) value += shape[k] * coeffs_[dofs[k]];
    return value;
}

Vec2 FEFunction::eval_vector_in_cell(int cell, Vec2 x) const {
    const FESpace& s = *space_;
    const Vec2 xi = cell_map(s.mesh(), cell).to_reference(x);
    double shape[6];
    s.element().shape(xi, shape);
    const int* dofs = s.cell_dofs(cell);
    Vec2 value{0.0, 0.0};
    for (int k = 0; k < s.element().node_count(); ++k) {
        value[0] += shape[k] * coeffs_[dofs[2 * k]];
        value[1] += shape[k] * coeffs_[dofs[2 * k + 1]];
    }
    return value;
}

Vec2 FEFunction::grad_scalar_in_cell(int cell, Vec2 x) const {
    const FESpace& s = *space_;
    const AffineMap map = cell_map(s.mesh(), cell);
    const Vec2 xi = map.to_reference(x);
    Vec2 ref_grad[6];
    s.element().shape_grad(xi, ref_grad);
    const int* dofs = s.cell_dofs(cell);
    Vec2 g{0.0, 0.0};
    for (int k = 0; k < s.element().node_count(); ++k) {
        const Vec2 gk = map.inv_jacobian_t * ref_grad[k];
        g = g + coeffs_[dofs[k]] * gk;
    }
    return g;
}

Mat2 FEFunction::grad_vector_in_cell(int cell, Vec2 x) const {
    const FESpace& s = *space_;
    const AffineMap map = cell_map(s.mesh(), cell);
    const Vec2 xi = map.to_reference(x);
    Vec2 ref_grad[6];
    s.element().shape_grad(xi, ref_grad);
    const int* dofs = s.cell_dofs(cell);
    Mat2 g{{{0.0, 0.0}, {0.0, 0.0}}};
    for (int k = 0; k < s.element().node_count(); ++k) {
        const Vec2 gk = map.inv_jacobian_t * ref_grad[k];
        for (int comp = 0; comp < 2; ++comp) {
            const double c = coeffs_[dofs[2 * k + comp]];
            g.m[comp][0] += c * gk[0];
            g.m[comp][1] += c * gk[1];
        }
    }
    return g;
}

double FEFunction::eval_scalar(Vec2 x) const {
    const int cell = locate_cell(space_->mesh(), x, cell_hint_);
    if (cell < 0) {
        throw std::runtime_error("point (" + std::to_string(x[0]) + ", " + std::to_string(x[1]) +
                                 ") lies outside the mesh");
    }
    cell_hint_ = cell;
    return eval_scalar_in_cell(cell, x);
}

Vec2 FEFunction::eval_vector(Vec2 x) const {
    const int cell = locate_cell(space_->mesh(), x, cell_hint_);
    if (cell < 0) {
        throw std::runtime_error("point (" + std::to_string(x[0]) + ", " + std::to_string(x[1]) +
                                 ") lies outside the mesh");
    }
    cell_hint_ = cell;
    return eval_vector_in_cell(cell, x);
}

int locate_cell(const Mesh& mesh, Vec2 x, int hint) {
    constexpr double kTol = 1e-12;
    const auto inside = [&](int c) {
        const Vec2 xi = cell_map(mesh, c).to_reference(x);
        return xi[0] >= -kTol && xi[1] >= -kTol && xi[0] + xi[1] <= 1.0 + kTol;
    };
    if (hint >= 0 && hint < mesh.cell_count() && inside(hint)) {
        // A hinted hit is only returned directly if unambiguous; edge and
        // vertex points must keep the lowest-index rule.
        const Vec2 xi = cell_map(mesh, hint).to_reference(x);
        const bool interior = xi[0] > kTol && xi[1] > kTol && xi[0] + xi[1] < 1.0 - kTol;
        if (interior) return hint;
    }
    for (int c = 0; c < mesh.cell_count(); ++c) {
        if (inside(c)) return c;
    }
    return -1;
}

FEFunction interpolate(const FESpace& space, const ScalarField& f) {
    if (space.value_size() != 1) {
        throw std::invalid_argument("interpolate: scalar field on a vector space");
    }
    FEFunction u(space);
    for (int n = 0; n < space.scalar_node_count(); ++n) {
        u.coeffs()[n] = f(space.node_coord(n));
    }
    return u;
}

FEFunction interpolate(const FESpace& space, const VectorField& f) {
    if (space.value_size() != 2) {
        throw std::invalid_argument("interpolate: vector field on a scalar space");
    }
    FEFunction u(space);
    for (int n = 0; n < space.scalar_node_count(); ++n) {
        const Vec2 v = f(space.node_coord(n));
        u.coeffs()[2 * n] = v[0];
        u.coeffs()[2 * n + 1] = v[1];
    }
    return u;
}

DirichletSpec DirichletSpec::uniform(std::vector<int> tags, int network_count) {
    DirichletSpec spec;
    spec.displacement_tags = tags;
    spec.network_tags.assign(network_count, tags);
    return spec;
}

std::vector<int> MpetSpaces::field_sizes() const {
    std::vector<int> sizes;
    sizes.push_back(displacement.dof_count());
    if (total_pressure) sizes.push_back(total_pressure->dof_count());
    for (const FESpace& q : network_pressure) sizes.push_back(q.dof_count());
    return sizes;
}

namespace {

MpetSpaces make_spaces(std::shared_ptr<const Mesh> mesh, int network_count,
                       const DirichletSpec& dirichlet, bool with_total_pressure) {
    if (network_count < 1) {
        throw std::invalid_argument("MPET spaces need at least one network");
    }
    if (static_cast<int>(dirichlet.network_tags.size()) != network_count) {
        throw std::invalid_argument(
            "DirichletSpec has " + std::to_string(dirichlet.network_tags.size()) +
            " network entries for " + std::to_string(network_count) + " networks");
    }
    MpetSpaces spaces{
        mesh,
        FESpace(mesh, 2, 2, dirichlet.displacement_tags),
        std::nullopt,
        {},
    };
    if (with_total_pressure) spaces.total_pressure.emplace(mesh, 1, 1);
    for (int j = 0; j < network_count; ++j) {
        spaces.network_pressure.emplace_back(mesh, 1, 1, dirichlet.network_tags[j]);
    }
    return spaces;
}

}  // namespace

MpetSpaces make_taylor_hood_spaces(std::shared_ptr<const Mesh> mesh, int network_count,
                                   const DirichletSpec& dirichlet) {
    return make_spaces(std::move(mesh), network_count, dirichlet, true);
}

MpetSpaces make_standard_spaces(std::shared_ptr<const Mesh> mesh, int network_count,
                                const DirichletSpec& dirichlet) {
    return make_spaces(std::move(mesh), network_count, dirichlet, false);
}

}  // namespace mpet
