#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mpet/types.hpp"

namespace mpet {

// Boundary tags used by the shipped geometries.
inline constexpr int kTagWhole = 1;
inline constexpr int kTagSkull = 2;
inline constexpr int kTagVentricle = 3;

// Conforming triangle mesh, immutable after construction. Cells are
// counter-clockwise; facets are the boundary edges, each carrying one
// integer tag. Construction validates orientation, index ranges and that
// the facet list covers the topological boundary exactly once, and builds
// the edge connectivity needed for quadratic dofs and refinement.
class Mesh {
  public:
    Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> cells,
         std::vector<std::array<int, 2>> facets, std::vector<int> facet_tags);

    int vertex_count() const { return static_cast<int>(vertices_.size()); }
    int cell_count() const { return static_cast<int>(cells_.size()); }
    int facet_count() const { return static_cast<int>(facets_.size()); }
    int edge_count() const { return static_cast<int>(edges_.size()); }

    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::vector<std::array<int, 3>>& cells() const { return cells_; }
    const std::vector<std::array<int, 2>>& facets() const { return facets_; }
    const std::vector<int>& facet_tags() const { return facet_tags_; }

    // Unique mesh edges as sorted vertex pairs, and per-cell edge ids for
    // the local edges (0,1), (1,2), (2,0).
    const std::vector<std::array<int, 2>>& edges() const { return edges_; }
    const std::vector<std::array<int, 3>>& cell_edges() const { return cell_edges_; }

    int facet_edge(int f) const { return facet_edge_[f]; }
    int facet_cell(int f) const { return facet_cell_[f]; }
    bool has_tag(int tag) const;

    double cell_area(int c) const;
    double total_area() const;
    double facet_length(int f) const;
    Vec2 facet_midpoint(int f) const;
    // Unit normal on a boundary facet pointing out of the domain.
    Vec2 outward_normal(int f) const;

    bool operator==(const Mesh& other) const;

  private:
    std::vector<Vec2> vertices_;
    std::vector<std::array<int, 3>> cells_;
    std::vector<std::array<int, 2>> facets_;
    std::vector<int> facet_tags_;
    std::vector<std::array<int, 2>> edges_;
    std::vector<std::array<int, 3>> cell_edges_;
    std::vector<int> facet_edge_;
    std::vector<int> facet_cell_;
};

enum class Diagonal { kRight, kLeft };

// n x n squares on [0,1]^2, each split by one diagonal (lower-left to
// upper-right by default); the whole boundary is tagged kTagWhole.
Mesh build_unit_square_mesh(int n, Diagonal diagonal = Diagonal::kRight);

// Annulus of triangles between two circles centred at the origin;
// `resolution` is the number of radial layers, the angular count is chosen
// to keep cells roughly isotropic. Inner boundary is tagged kTagVentricle,
// outer kTagSkull.
Mesh build_annulus_mesh(double r_inner, double r_outer, int resolution);

// Red refinement: every triangle splits into four via edge midpoints;
// boundary facets split in two and inherit their tag.
Mesh refine_uniform(const Mesh& mesh);

// Copy of the mesh with facet tags remapped; the callback receives the
// facet midpoint and current tag.
Mesh retag_facets(const Mesh& mesh, const std::function<int(Vec2, int)>& new_tag);

// Plain-text mesh format:
//   mpetmesh 1
//   vertices <N>   followed by N lines "x y"
//   cells <M>      followed by M lines "i j k"   (zero-based, CCW)
//   facets <K>     followed by K lines "i j tag"
// Errors carry the offending line number.
Mesh read_mesh(std::istream& in);
Mesh read_mesh_file(const std::string& path);
void write_mesh(const Mesh& mesh, std::ostream& out);
void write_mesh_file(const Mesh& mesh, const std::string& path);

}  // namespace mpet
