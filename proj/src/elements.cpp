#include "mpet/elements.hpp"

#include <stdexcept>
#include <string>

namespace mpet {

ReferenceElement::ReferenceElement(int degree) : degree_(degree) {
    if (degree != 1 && degree != 2) {
        throw std::invalid_argument("reference element degree must be 1 or 2, got " +
                                    std::to_string(degree));
    }
}

Vec2 ReferenceElement::node(int i) const {
    static const Vec2 nodes[6] = {
        {0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0},  // vertices
        {0.5, 0.0}, {0.5, 0.5}, {0.0, 0.5},  // midpoints of edges (0,1),(1,2),(2,0)
    };
    if (i < 0 || i >= node_count()) {
        throw std::out_of_range("reference node index " + std::to_string(i));
    }
    return nodes[i];
}

void ReferenceElement::shape(Vec2 xi, double* v) const {
    const double x = xi[0], y = xi[1];
    const double l0 = 1.0 - x - y, l1 = x, l2 = y;
    if (degree_ == 1) {
        v[0] = l0;
        v[1] = l1;
        v[2] = l2;
        return;
    }
    v[0] = l0 * (2.0 * l0 - 1.0);
    v[1] = l1 * (2.0 * l1 - 1.0);
    v[2] = l2 * (2.0 * l2 - 1.0);
    v[3] = 4.0 * l0 * l1;
    v[4] = 4.0 * l1 * l2;
    v[5] = 4.0 * l2 * l0;
}

void ReferenceElement::shape_grad(Vec2 xi, Vec2* g) const {
    const double x = xi[0], y = xi[1];
    const double l0 = 1.0 - x - y, l1 = x, l2 = y;
    // Barycentric gradients.
    const Vec2 d0{-1.0, -1.0}, d1{1.0, 0.0}, d2{0.0, 1.0};
    if (degree_ == 1) {
        g[0] = d0;
        g[1] = d1;
        g[2] = d2;
        return;
    }
    g[0] = (4.0 * l0 - 1.0) * d0;
    g[1] = (4.0 * l1 - 1.0) * d1;
    g[2] = (4.0 * l2 - 1.0) * d2;
    g[3] = 4.0 * (l1 * d0 + l0 * d1);
    g[4] = 4.0 * (l2 * d1 + l1 * d2);
    g[5] = 4.0 * (l0 * d2 + l2 * d0);
}

std::vector<double> ReferenceElement::shape(Vec2 xi) const {
    std::vector<double> v(node_count());
    shape(xi, v.data());
    return v;
}

std::vector<Vec2> ReferenceElement::shape_grad(Vec2 xi) const {
    std::vector<Vec2> g(node_count());
    shape_grad(xi, g.data());
    return g;
}

namespace {

// Appends the three points (1-2a, a, a)-type barycentric orbits as reference
// coordinates; weights are normalized to sum to 1 and scaled by the
// reference area 1/2 at the end.
void orbit3(QuadratureRule& r, double a, double w) {
    const double b = 1.0 - 2.0 * a;
    r.points.push_back({a, a});
    r.points.push_back({b, a});
    r.points.push_back({a, b});
    r.weights.insert(r.weights.end(), 3, w);
}

void orbit6(QuadratureRule& r, double a, double b, double w) {
    const double c = 1.0 - a - b;
    r.points.push_back({a, b});
    r.points.push_back({b, a});
    r.points.push_back({a, c});
    r.points.push_back({c, a});
    r.points.push_back({b, c});
    r.points.push_back({c, b});
    r.weights.insert(r.weights.end(), 6, w);
}

QuadratureRule make_rule(int degree) {
    QuadratureRule r;
    r.degree = degree;
    switch (degree) {
        case 1:
            r.points.push_back({1.0 / 3.0, 1.0 / 3.0});
            r.weights.push_back(1.0);
            break;
        case 2:
            orbit3(r, 1.0 / 6.0, 1.0 / 3.0);
            break;
        case 4:
            orbit3(r, 0.445948490915965, 0.223381589678011);
            orbit3(r, 0.091576213509771, 0.109951743655322);
            break;
        case 5:
            r.points.push_back({1.0 / 3.0, 1.0 / 3.0});
            r.weights.push_back(0.225);
            orbit3(r, 0.470142064105115, 0.132394152788506);
            orbit3(r, 0.101286507323456, 0.125939180544827);
            break;
        case 6:
            orbit3(r, 0.063089014491502, 0.050844906370207);
            orbit3(r, 0.249286745170910, 0.116786275726379);
            orbit6(r, 0.310352451033785, 0.053145049844816, 0.082851075618374);
            break;
        default:
            throw std::logic_error("no rule tabulated for degree " + std::to_string(degree));
    }
    for (double& w : r.weights) w *= 0.5;
    return r;
}

}  // namespace

const QuadratureRule& triangle_quadrature(int degree) {
    if (degree < 0 || degree > 6) {
        throw std::invalid_argument("triangle quadrature supports degrees 0..6, got " +
                                    std::to_string(degree));
    }
    static const QuadratureRule rules[] = {make_rule(1), make_rule(2), make_rule(4),
                                           make_rule(5), make_rule(6)};
    for (const QuadratureRule& r : rules) {
        if (r.degree >= degree) return r;
    }
    throw std::logic_error("unreachable");
}

const SegmentQuadrature& segment_quadrature() {
    static const SegmentQuadrature rule = [] {
        SegmentQuadrature q;
        const double s = std::sqrt(3.0 / 5.0);
        q.points = {0.5 * (1.0 - s), 0.5, 0.5 * (1.0 + s)};
        q.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
        return q;
    }();
    return rule;
}

AffineMap AffineMap::from_triangle(Vec2 a, Vec2 b, Vec2 c) {
    AffineMap map;
    map.origin = a;
    map.jacobian = Mat2::from_columns(b - a, c - a);
    map.det_jacobian = map.jacobian.det();
    map.inv_jacobian_t = map.jacobian.inverse().transpose();
    return map;
}

Vec2 AffineMap::to_physical(Vec2 xi) const { return origin + jacobian * xi; }

Vec2 AffineMap::to_reference(Vec2 x) const {
    return inv_jacobian_t.transpose() * (x - origin);
}

}  // namespace mpet
