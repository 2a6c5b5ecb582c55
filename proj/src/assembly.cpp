#include "mpet/assembly.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "mpet/elements.hpp"

namespace mpet {

namespace {

constexpr int kLoadQuadratureDegree = 6;

// Reference shape values and gradients tabulated at the points of a rule.
struct BasisTable {
    int node_count = 0;
    std::vector<double> values;   // [point * node_count + node]
    std::vector<Vec2> ref_grads;  // same layout

    BasisTable(const ReferenceElement& element, const QuadratureRule& rule) {
        node_count = element.node_count();
        const size_t np = rule.points.size();
        values.resize(np * node_count);
        ref_grads.resize(np * node_count);
        for (size_t p = 0; p < np; ++p) {
            element.shape(rule.points[p], &values[p * node_count]);
            element.shape_grad(rule.points[p], &ref_grads[p * node_count]);
        }
    }
};

std::vector<std::pair<int, int>> square_couplings(const FESpace& space) {
    std::vector<std::pair<int, int>> couplings;
    const int nd = space.local_dof_count();
    couplings.reserve(static_cast<size_t>(space.mesh().cell_count()) * nd * nd);
    for (int c = 0; c < space.mesh().cell_count(); ++c) {
        const int* dofs = space.cell_dofs(c);
        for (int a = 0; a < nd; ++a) {
            for (int b = 0; b < nd; ++b) {
                couplings.emplace_back(dofs[a], dofs[b]);
            }
        }
    }
    return couplings;
}

std::vector<std::pair<int, int>> rectangular_couplings(const FESpace& row_space,
                                                       const FESpace& col_space) {
    if (&row_space.mesh() != &col_space.mesh()) {
        throw std::invalid_argument("assembly: row and column spaces use different meshes");
    }
    std::vector<std::pair<int, int>> couplings;
    const int nr = row_space.local_dof_count();
    const int nc = col_space.local_dof_count();
    couplings.reserve(static_cast<size_t>(row_space.mesh().cell_count()) * nr * nc);
    for (int c = 0; c < row_space.mesh().cell_count(); ++c) {
        const int* rd = row_space.cell_dofs(c);
        const int* cd = col_space.cell_dofs(c);
        for (int a = 0; a < nr; ++a) {
            for (int b = 0; b < nc; ++b) {
                couplings.emplace_back(rd[a], cd[b]);
            }
        }
    }
    return couplings;
}

AffineMap cell_map(const Mesh& mesh, int cell) {
    const auto& tri = mesh.cells()[cell];
    return AffineMap::from_triangle(mesh.vertices()[tri[0]], mesh.vertices()[tri[1]],
                                    mesh.vertices()[tri[2]]);
}

// Physical gradients of every scalar node at one quadrature point.
void physical_grads(const BasisTable& table, size_t point, const AffineMap& map,
                    std::vector<Vec2>& out) {
    out.resize(table.node_count);
    for (int k = 0; k < table.node_count; ++k) {
        out[k] = map.inv_jacobian_t * table.ref_grads[point * table.node_count + k];
    }
}

SparseMatrix assemble_stiffness_impl(const FESpace& q,
                                     const std::function<double(Vec2)>& k_at) {
    if (q.value_size() != 1) {
        throw std::invalid_argument("assemble_scalar_stiffness: vector space given");
    }
    SparseMatrix m = SparseMatrix::from_pattern(q.dof_count(), q.dof_count(), square_couplings(q));
    const QuadratureRule rule = triangle_quadrature(2 * q.degree() + 1);
    const BasisTable table(q.element(), rule);
    const int nd = q.local_dof_count();
    std::vector<double> block(static_cast<size_t>(nd) * nd);
    std::vector<Vec2> grads;
    for (int c = 0; c < q.mesh().cell_count(); ++c) {
        const AffineMap map = cell_map(q.mesh(), c);
        std::fill(block.begin(), block.end(), 0.0);
        for (size_t p = 0; p < rule.points.size(); ++p) {
            physical_grads(table, p, map, grads);
            const double w =
                rule.weights[p] * map.det_jacobian * k_at(map.to_physical(rule.points[p]));
            for (int a = 0; a < nd; ++a) {
                for (int b = 0; b < nd; ++b) {
                    block[static_cast<size_t>(a) * nd + b] += w * dot(grads[a], grads[b]);
                }
            }
        }
        assemble_add(m, block.data(), q.cell_dofs(c), nd, q.cell_dofs(c), nd);
    }
    return m;
}

}  // namespace

SparseMatrix assemble_scalar_mass(const FESpace& q, double coeff) {
    if (q.value_size() != 1) {
        throw std::invalid_argument("assemble_scalar_mass: vector space given");
    }
    SparseMatrix m = SparseMatrix::from_pattern(q.dof_count(), q.dof_count(), square_couplings(q));
    const QuadratureRule rule = triangle_quadrature(2 * q.degree() + 1);
    const BasisTable table(q.element(), rule);
    const int nd = q.local_dof_count();
    std::vector<double> block(static_cast<size_t>(nd) * nd);
    for (int c = 0; c < q.mesh().cell_count(); ++c) {
        const AffineMap map = cell_map(q.mesh(), c);
        std::fill(block.begin(), block.end(), 0.0);
        for (size_t p = 0; p < rule.points.size(); ++p) {
            const double w = rule.weights[p] * map.det_jacobian * coeff;
            const double* phi = &table.values[p * nd];
            for (int a = 0; a < nd; ++a) {
                for (int b = 0; b < nd; ++b) {
                    block[static_cast<size_t>(a) * nd + b] += w * phi[a] * phi[b];
                }
            }
        }
        assemble_add(m, block.data(), q.cell_dofs(c), nd, q.cell_dofs(c), nd);
    }
    return m;
}

SparseMatrix assemble_scalar_stiffness(const FESpace& q, double k) {
    return assemble_stiffness_impl(q, [k](Vec2) { return k; });
}

SparseMatrix assemble_scalar_stiffness(const FESpace& q, const ScalarField& k) {
    if (!k) {
        throw std::invalid_argument("assemble_scalar_stiffness: empty coefficient field");
    }
    return assemble_stiffness_impl(q, [&k](Vec2 x) { return k(x); });
}

SparseMatrix assemble_elasticity(const FESpace& v, double mu) {
    if (v.value_size() != 2) {
        throw std::invalid_argument("assemble_elasticity: scalar space given");
    }
    SparseMatrix m = SparseMatrix::from_pattern(v.dof_count(), v.dof_count(), square_couplings(v));
    const QuadratureRule rule = triangle_quadrature(2 * v.degree() + 1);
    const BasisTable table(v.element(), rule);
    const int nn = table.node_count;
    const int nd = v.local_dof_count();
    std::vector<double> block(static_cast<size_t>(nd) * nd);
    std::vector<Vec2> grads;
    for (int c = 0; c < v.mesh().cell_count(); ++c) {
        const AffineMap map = cell_map(v.mesh(), c);
        std::fill(block.begin(), block.end(), 0.0);
        for (size_t p = 0; p < rule.points.size(); ++p) {
            physical_grads(table, p, map, grads);
            const double w = rule.weights[p] * map.det_jacobian * mu;
            // 2 mu eps(phi_a e_alpha) : eps(phi_b e_beta)
            //   = mu [ (grad_a . grad_b) delta_{alpha beta} + grad_a[beta] grad_b[alpha] ]
            for (int a = 0; a < nn; ++a) {
                for (int b = 0; b < nn; ++b) {
                    const double gab = dot(grads[a], grads[b]);
                    for (int alpha = 0; alpha < 2; ++alpha) {
                        for (int beta = 0; beta < 2; ++beta) {
                            double val = grads[a][beta] * grads[b][alpha];
                            if (alpha == beta) {
                                val += gab;
                            }
                            block[static_cast<size_t>(a * 2 + alpha) * nd + (b * 2 + beta)] +=
                                w * val;
                        }
                    }
                }
            }
        }
        assemble_add(m, block.data(), v.cell_dofs(c), nd, v.cell_dofs(c), nd);
    }
    return m;
}

SparseMatrix assemble_div_div(const FESpace& v) {
    if (v.value_size() != 2) {
        throw std::invalid_argument("assemble_div_div: scalar space given");
    }
    SparseMatrix m = SparseMatrix::from_pattern(v.dof_count(), v.dof_count(), square_couplings(v));
    const QuadratureRule rule = triangle_quadrature(2 * v.degree() + 1);
    const BasisTable table(v.element(), rule);
    const int nn = table.node_count;
    const int nd = v.local_dof_count();
    std::vector<double> block(static_cast<size_t>(nd) * nd);
    std::vector<Vec2> grads;
    for (int c = 0; c < v.mesh().cell_count(); ++c) {
        const AffineMap map = cell_map(v.mesh(), c);
        std::fill(block.begin(), block.end(), 0.0);
        for (size_t p = 0; p < rule.points.size(); ++p) {
            physical_grads(table, p, map, grads);
            const double w = rule.weights[p] * map.det_jacobian;
            // div(phi_a e_alpha) = grad_a[alpha]
            for (int a = 0; a < nn; ++a) {
                for (int alpha = 0; alpha < 2; ++alpha) {
                    for (int b = 0; b < nn; ++b) {
                        for (int beta = 0; beta < 2; ++beta) {
                            block[static_cast<size_t>(a * 2 + alpha) * nd + (b * 2 + beta)] +=
                                w * grads[a][alpha] * grads[b][beta];
                        }
                    }
                }
            }
        }
        assemble_add(m, block.data(), v.cell_dofs(c), nd, v.cell_dofs(c), nd);
    }
    return m;
}

SparseMatrix assemble_div_coupling(const FESpace& v, const FESpace& q) {
    if (v.value_size() != 2 || q.value_size() != 1) {
        throw std::invalid_argument("assemble_div_coupling: expects a vector and a scalar space");
    }
    SparseMatrix m =
        SparseMatrix::from_pattern(q.dof_count(), v.dof_count(), rectangular_couplings(q, v));
    const QuadratureRule rule = triangle_quadrature(2 * std::max(v.degree(), q.degree()) + 1);
    const BasisTable vtab(v.element(), rule);
    const BasisTable qtab(q.element(), rule);
    const int nv = v.local_dof_count();
    const int nq = q.local_dof_count();
    std::vector<double> block(static_cast<size_t>(nq) * nv);
    std::vector<Vec2> grads;
    for (int c = 0; c < v.mesh().cell_count(); ++c) {
        const AffineMap map = cell_map(v.mesh(), c);
        std::fill(block.begin(), block.end(), 0.0);
        for (size_t p = 0; p < rule.points.size(); ++p) {
            physical_grads(vtab, p, map, grads);
            const double* psi = &qtab.values[p * qtab.node_count];
            const double w = rule.weights[p] * map.det_jacobian;
            for (int a = 0; a < nq; ++a) {
                for (int b = 0; b < vtab.node_count; ++b) {
                    for (int beta = 0; beta < 2; ++beta) {
                        block[static_cast<size_t>(a) * nv + (b * 2 + beta)] +=
                            w * psi[a] * grads[b][beta];
                    }
                }
            }
        }
        assemble_add(m, block.data(), q.cell_dofs(c), nq, v.cell_dofs(c), nv);
    }
    return m;
}

Vector assemble_scalar_load(const FESpace& q, const ScalarField& g) {
    if (q.value_size() != 1) {
        throw std::invalid_argument("assemble_scalar_load: vector space given");
    }
    if (!g) {
        throw std::invalid_argument("assemble_scalar_load: empty source field");
    }
    Vector load(q.dof_count(), 0.0);
    const QuadratureRule rule = triangle_quadrature(kLoadQuadratureDegree);
    const BasisTable table(q.element(), rule);
    const int nd = q.local_dof_count();
    for (int c = 0; c < q.mesh().cell_count(); ++c) {
        const AffineMap map = cell_map(q.mesh(), c);
        const int* dofs = q.cell_dofs(c);
        for (size_t p = 0; p < rule.points.size(); ++p) {
            const double w =
                rule.weights[p] * map.det_jacobian * g(map.to_physical(rule.points[p]));
            const double* phi = &table.values[p * nd];
            for (int a = 0; a < nd; ++a) {
                load[dofs[a]] += w * phi[a];
            }
        }
    }
    return load;
}

Vector assemble_vector_load(const FESpace& v, const VectorField& f) {
    if (v.value_size() != 2) {
        throw std::invalid_argument("assemble_vector_load: scalar space given");
    }
    if (!f) {
        throw std::invalid_argument("assemble_vector_load: empty source field");
    }
    Vector load(v.dof_count(), 0.0);
    const QuadratureRule rule = triangle_quadrature(kLoadQuadratureDegree);
    const BasisTable table(v.element(), rule);
    const int nn = table.node_count;
    for (int c = 0; c < v.mesh().cell_count(); ++c) {
        const AffineMap map = cell_map(v.mesh(), c);
        const int* dofs = v.cell_dofs(c);
        for (size_t p = 0; p < rule.points.size(); ++p) {
            const double w = rule.weights[p] * map.det_jacobian;
            const Vec2 fx = f(map.to_physical(rule.points[p]));
            const double* phi = &table.values[p * nn];
            for (int a = 0; a < nn; ++a) {
                for (int alpha = 0; alpha < 2; ++alpha) {
                    load[dofs[a * 2 + alpha]] += w * phi[a] * fx[alpha];
                }
            }
        }
    }
    return load;
}

Vector assemble_boundary_normal_load(const FESpace& v, int tag, const ScalarField& s) {
    if (v.value_size() != 2) {
        throw std::invalid_argument("assemble_boundary_normal_load: scalar space given");
    }
    if (!s) {
        throw std::invalid_argument("assemble_boundary_normal_load: empty stress field");
    }
    const Mesh& mesh = v.mesh();
    if (!mesh.has_tag(tag)) {
        throw std::invalid_argument("assemble_boundary_normal_load: no facet carries tag " +
                                    std::to_string(tag));
    }
    Vector load(v.dof_count(), 0.0);
    const SegmentQuadrature& line = segment_quadrature();
    const ReferenceElement& element = v.element();
    std::vector<double> phi(element.node_count());
    for (int f = 0; f < mesh.facet_count(); ++f) {
        if (mesh.facet_tags()[f] != tag) {
            continue;
        }
        const int cell = mesh.facet_cell(f);
        const AffineMap map = cell_map(mesh, cell);
        const int* dofs = v.cell_dofs(cell);
        const Vec2 a = mesh.vertices()[mesh.facets()[f][0]];
        const Vec2 b = mesh.vertices()[mesh.facets()[f][1]];
        const Vec2 n = mesh.outward_normal(f);
        const double len = mesh.facet_length(f);
        for (size_t p = 0; p < line.points.size(); ++p) {
            const double t = line.points[p];
            const Vec2 x = {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
            element.shape(map.to_reference(x), phi.data());
            const double w = line.weights[p] * len * s(x);
            for (int k = 0; k < element.node_count(); ++k) {
                for (int alpha = 0; alpha < 2; ++alpha) {
                    load[dofs[k * 2 + alpha]] += w * phi[k] * n[alpha];
                }
            }
        }
    }
    return load;
}

double integrate_over_cells(const Mesh& mesh, int quad_degree,
                            const std::function<double(int, Vec2)>& integrand) {
    if (!integrand) {
        throw std::invalid_argument("integrate_over_cells: empty integrand");
    }
    const QuadratureRule rule = triangle_quadrature(quad_degree);
    double total = 0.0;
    for (int c = 0; c < mesh.cell_count(); ++c) {
        const auto& tri = mesh.cells()[c];
        const AffineMap map = AffineMap::from_triangle(
            mesh.vertices()[tri[0]], mesh.vertices()[tri[1]], mesh.vertices()[tri[2]]);
        for (size_t p = 0; p < rule.points.size(); ++p) {
            total +=
                rule.weights[p] * map.det_jacobian * integrand(c, map.to_physical(rule.points[p]));
        }
    }
    return total;
}

}  // namespace mpet
