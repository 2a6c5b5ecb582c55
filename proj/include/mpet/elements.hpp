#pragma once

#include <vector>

#include "mpet/types.hpp"

namespace mpet {

// Nodal Lagrange basis on the reference triangle with vertices
// (0,0), (1,0), (0,1). Node layout: the three vertices first, then (for
// degree 2) the midpoints of edges (0,1), (1,2), (2,0).
class ReferenceElement {
  public:
    explicit ReferenceElement(int degree);

    int degree() const { return degree_; }
    int node_count() const { return degree_ == 1 ? 3 : 6; }
    Vec2 node(int i) const;

    // Shape values / reference gradients of all nodes at a reference point.
    void shape(Vec2 xi, double* values) const;
    void shape_grad(Vec2 xi, Vec2* grads) const;

    std::vector<double> shape(Vec2 xi) const;
    std::vector<Vec2> shape_grad(Vec2 xi) const;

  private:
    int degree_;
};

// Gauss rule on the reference triangle, exact for polynomials up to
// `degree`. Points are reference coordinates; weights include the reference
// area (they sum to 1/2) and are all positive.
struct QuadratureRule {
    int degree = 0;
    std::vector<Vec2> points;
    std::vector<double> weights;
};

// Smallest shipped rule exact at least to the requested degree (<= 6).
const QuadratureRule& triangle_quadrature(int degree);

// Gauss-Legendre rule on [0,1] for facet integrals, exact to degree 5.
struct SegmentQuadrature {
    std::vector<double> points;
    std::vector<double> weights;
};
const SegmentQuadrature& segment_quadrature();

// Affine map from the reference triangle onto a physical triangle (a,b,c).
// Physical gradients are invJT * reference gradients.
struct AffineMap {
    Vec2 origin;
    Mat2 jacobian;
    Mat2 inv_jacobian_t;
    double det_jacobian = 0.0;

    static AffineMap from_triangle(Vec2 a, Vec2 b, Vec2 c);
    Vec2 to_physical(Vec2 xi) const;
    Vec2 to_reference(Vec2 x) const;
};

}  // namespace mpet
