#include "mpet/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mpet {

namespace {

double signed_area(Vec2 a, Vec2 b, Vec2 c) {
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

std::array<int, 2> sorted_pair(int a, int b) {
    return a < b ? std::array<int, 2>{a, b} : std::array<int, 2>{b, a};
}

}  // namespace

Mesh::Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> cells,
           std::vector<std::array<int, 2>> facets, std::vector<int> facet_tags)
    : vertices_(std::move(vertices)),
      cells_(std::move(cells)),
      facets_(std::move(facets)),
      facet_tags_(std::move(facet_tags)) {
    const int nv = vertex_count();
    if (facets_.size() != facet_tags_.size()) {
        throw std::invalid_argument("mesh: facet and tag counts differ");
    }
    for (size_t c = 0; c < cells_.size(); ++c) {
        for (int v : cells_[c]) {
            if (v < 0 || v >= nv) {
                throw std::invalid_argument("mesh: cell " + std::to_string(c) +
                                            " references vertex " + std::to_string(v) +
                                            " out of range");
            }
        }
        const auto& t = cells_[c];
        if (signed_area(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]) <= 0.0) {
            throw std::invalid_argument("mesh: cell " + std::to_string(c) +
                                        " has non-positive area (vertices must be CCW)");
        }
    }

    // Edge table: id per unique sorted vertex pair, plus incidence counts.
    std::map<std::array<int, 2>, int> edge_id;
    cell_edges_.resize(cells_.size());
    for (size_t c = 0; c < cells_.size(); ++c) {
        for (int k = 0; k < 3; ++k) {
            const auto key = sorted_pair(cells_[c][k], cells_[c][(k + 1) % 3]);
            auto [it, inserted] = edge_id.try_emplace(key, static_cast<int>(edges_.size()));
            if (inserted) edges_.push_back(key);
            cell_edges_[c][k] = it->second;
        }
    }
    std::vector<int> incidence(edges_.size(), 0);
    std::vector<int> edge_owner(edges_.size(), -1);
    for (size_t c = 0; c < cells_.size(); ++c) {
        for (int e : cell_edges_[c]) {
            if (++incidence[e] > 2) {
                throw std::invalid_argument("mesh: edge shared by more than two cells");
            }
            edge_owner[e] = static_cast<int>(c);
        }
    }

    // The facet list must be exactly the boundary edges, once each.
    std::vector<int> facet_of_edge(edges_.size(), -1);
    facet_edge_.resize(facets_.size());
    facet_cell_.resize(facets_.size());
    for (size_t f = 0; f < facets_.size(); ++f) {
        for (int v : facets_[f]) {
            if (v < 0 || v >= nv) {
                throw std::invalid_argument("mesh: facet " + std::to_string(f) +
                                            " references vertex " + std::to_string(v) +
                                            " out of range");
            }
        }
        const auto key = sorted_pair(facets_[f][0], facets_[f][1]);
        auto it = edge_id.find(key);
        if (it == edge_id.end()) {
            throw std::invalid_argument("mesh: facet " + std::to_string(f) +
                                        " is not an edge of any cell");
        }
        const int e = it->second;
        if (incidence[e] != 1) {
            throw std::invalid_argument("mesh: facet " + std::to_string(f) +
                                        " is an interior edge");
        }
        if (facet_of_edge[e] != -1) {
            throw std::invalid_argument("mesh: facet " + std::to_string(f) +
                                        " duplicates facet " + std::to_string(facet_of_edge[e]));
        }
        facet_of_edge[e] = static_cast<int>(f);
        facet_edge_[f] = e;
        facet_cell_[f] = edge_owner[e];
    }
    for (size_t e = 0; e < edges_.size(); ++e) {
        if (incidence[e] == 1 && facet_of_edge[e] == -1) {
            throw std::invalid_argument("mesh: boundary edge (" + std::to_string(edges_[e][0]) +
                                        "," + std::to_string(edges_[e][1]) +
                                        ") carries no facet tag");
        }
    }
}

bool Mesh::has_tag(int tag) const {
    return std::find(facet_tags_.begin(), facet_tags_.end(), tag) != facet_tags_.end();
}

double Mesh::cell_area(int c) const {
    const auto& t = cells_[c];
    return signed_area(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
}

double Mesh::total_area() const {
    double a = 0.0;
    for (int c = 0; c < cell_count(); ++c) a += cell_area(c);
    return a;
}

double Mesh::facet_length(int f) const {
    return norm(vertices_[facets_[f][1]] - vertices_[facets_[f][0]]);
}

Vec2 Mesh::facet_midpoint(int f) const {
    return 0.5 * (vertices_[facets_[f][0]] + vertices_[facets_[f][1]]);
}

Vec2 Mesh::outward_normal(int f) const {
    const Vec2 a = vertices_[facets_[f][0]];
    const Vec2 b = vertices_[facets_[f][1]];
    const Vec2 t = b - a;
    Vec2 n{t[1], -t[0]};
    const double len = norm(n);
    n = {n[0] / len, n[1] / len};
    const auto& cell = cells_[facet_cell_[f]];
    const Vec2 centroid =
        (1.0 / 3.0) * (vertices_[cell[0]] + vertices_[cell[1]] + vertices_[cell[2]]);
    if (dot(n, facet_midpoint(f) - centroid) < 0.0) n = {-n[0], -n[1]};
    return n;
}

bool Mesh::operator==(const Mesh& other) const {
    return vertices_ == other.vertices_ && cells_ == other.cells_ &&
           facets_ == other.facets_ && facet_tags_ == other.facet_tags_;
}

Mesh build_unit_square_mesh(int n, Diagonal diagonal) {
    if (n < 1) {
        throw std::invalid_argument("unit square mesh needs n >= 1, got " + std::to_string(n));
    }
    std::vector<Vec2> vertices;
    vertices.reserve(static_cast<size_t>(n + 1) * (n + 1));
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
        }
    }
    const auto id = [n](int i, int j) { return j * (n + 1) + i; };

    std::vector<std::array<int, 3>> cells;
    cells.reserve(2 * static_cast<size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            if (diagonal == Diagonal::kRight) {
                cells.push_back({a, b, c});
                cells.push_back({a, c, d});
            } else {
                cells.push_back({a, b, d});
                cells.push_back({b, c, d});
            }
        }
    }

    std::vector<std::array<int, 2>> facets;
    facets.reserve(4 * static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) facets.push_back({id(i, 0), id(i + 1, 0)});
    for (int j = 0; j < n; ++j) facets.push_back({id(n, j), id(n, j + 1)});
    for (int i = n; i > 0; --i) facets.push_back({id(i, n), id(i - 1, n)});
    for (int j = n; j > 0; --j) facets.push_back({id(0, j), id(0, j - 1)});
    std::vector<int> tags(facets.size(), kTagWhole);
    return Mesh(std::move(vertices), std::move(cells), std::move(facets), std::move(tags));
}

Mesh build_annulus_mesh(double r_inner, double r_outer, int resolution) {
    if (!(r_inner > 0.0) || !(r_outer > r_inner)) {
        throw std::invalid_argument("annulus mesh needs 0 < r_inner < r_outer");
    }
    if (resolution < 1) {
        throw std::invalid_argument("annulus mesh needs resolution >= 1");
    }
    const int nr = resolution;
    const double dr = (r_outer - r_inner) / nr;
    const double r_mean = 0.5 * (r_inner + r_outer);
    const int nc =
        std::max<int>(16, static_cast<int>(std::llround(2.0 * std::numbers::pi * r_mean / dr)));

    std::vector<Vec2> vertices;
    vertices.reserve(static_cast<size_t>(nr + 1) * nc);
    for (int k = 0; k <= nr; ++k) {
        const double r = r_inner + k * dr;
        for (int m = 0; m < nc; ++m) {
            const double phi = 2.0 * std::numbers::pi * m / nc;
            vertices.push_back({r * std::cos(phi), r * std::sin(phi)});
        }
    }
    const auto id = [nc](int k, int m) { return k * nc + (m % nc); };

    std::vector<std::array<int, 3>> cells;
    cells.reserve(2 * static_cast<size_t>(nr) * nc);
    for (int k = 0; k < nr; ++k) {
        for (int m = 0; m < nc; ++m) {
            const int a = id(k, m), b = id(k + 1, m), c = id(k + 1, m + 1), d = id(k, m + 1);
            cells.push_back({a, b, c});
            cells.push_back({a, c, d});
        }
    }

    std::vector<std::array<int, 2>> facets;
    std::vector<int> tags;
    for (int m = 0; m < nc; ++m) {
        facets.push_back({id(0, m), id(0, m + 1)});
        tags.push_back(kTagVentricle);
    }
    for (int m = 0; m < nc; ++m) {
        facets.push_back({id(nr, m), id(nr, m + 1)});
        tags.push_back(kTagSkull);
    }
    return Mesh(std::move(vertices), std::move(cells), std::move(facets), std::move(tags));
}

Mesh refine_uniform(const Mesh& mesh) {
    const int nv = mesh.vertex_count();
    std::vector<Vec2> vertices = mesh.vertices();
    vertices.resize(nv + mesh.edge_count());
    for (int e = 0; e < mesh.edge_count(); ++e) {
        const auto& pair = mesh.edges()[e];
        vertices[nv + e] = 0.5 * (mesh.vertices()[pair[0]] + mesh.vertices()[pair[1]]);
    }

    std::vector<std::array<int, 3>> cells;
    cells.reserve(4 * static_cast<size_t>(mesh.cell_count()));
    for (int c = 0; c < mesh.cell_count(); ++c) {
        const auto& t = mesh.cells()[c];
        const auto& e = mesh.cell_edges()[c];
        const int m01 = nv + e[0], m12 = nv + e[1], m20 = nv + e[2];
        cells.push_back({t[0], m01, m20});
        cells.push_back({m01, t[1], m12});
        cells.push_back({m20, m12, t[2]});
        cells.push_back({m01, m12, m20});
    }

    std::vector<std::array<int, 2>> facets;
    std::vector<int> tags;
    facets.reserve(2 * static_cast<size_t>(mesh.facet_count()));
    for (int f = 0; f < mesh.facet_count(); ++f) {
        const auto& pair = mesh.facets()[f];
        const int m = nv + mesh.facet_edge(f);
        facets.push_back({pair[0], m});
        facets.push_back({m, pair[1]});
        tags.insert(tags.end(), 2, mesh.facet_tags()[f]);
    }
    return Mesh(std::move(vertices), std::move(cells), std::move(facets), std::move(tags));
}

Mesh retag_facets(const Mesh& mesh, const std::function<int(Vec2, int)>& new_tag) {
    std::vector<int> tags(mesh.facet_count());
    for (int f = 0; f < mesh.facet_count(); ++f) {
        tags[f] = new_tag(mesh.facet_midpoint(f), mesh.facet_tags()[f]);
    }
    return Mesh(mesh.vertices(), mesh.cells(), mesh.facets(), std::move(tags));
}

namespace {

// Whitespace-delimited token reader that tracks line numbers for
// diagnostics.
class TokenReader {
  public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    // Line on which the most recent token started.
    int line() const { return token_line_; }

    bool next(std::string& token) {
        token.clear();
        int ch;
        while ((ch = in_.get()) != EOF) {
            if (ch == '\n') {
                ++line_;
            } else if (!std::isspace(static_cast<unsigned char>(ch))) {
                break;
            }
        }
        token_line_ = line_;
        if (ch == EOF) return false;
        token.push_back(static_cast<char>(ch));
        while ((ch = in_.get()) != EOF && !std::isspace(static_cast<unsigned char>(ch))) {
            token.push_back(static_cast<char>(ch));
        }
        if (ch == '\n') ++line_;
        return true;
    }

    [[noreturn]] void fail(const std::string& message) const {
        throw std::runtime_error("mesh parse error at line " + std::to_string(token_line_) +
                                 ": " + message);
    }

    std::string expect(const std::string& what) {
        std::string token;
        if (!next(token)) fail("unexpected end of file, expected " + what);
        return token;
    }

    long expect_integer(const std::string& what) {
        const std::string token = expect(what);
        size_t pos = 0;
        long value = 0;
        try {
            value = std::stol(token, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != token.size()) fail("expected integer for " + what + ", got '" + token + "'");
        return value;
    }

    double expect_number(const std::string& what) {
        const std::string token = expect(what);
        size_t pos = 0;
        double value = 0.0;
        try {
            value = std::stod(token, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != token.size()) fail("expected number for " + what + ", got '" + token + "'");
        return value;
    }

  private:
    std::istream& in_;
    int line_ = 1;
    int token_line_ = 1;
};

}  // namespace

Mesh read_mesh(std::istream& in) {
    TokenReader reader(in);
    if (reader.expect("header") != "mpetmesh") reader.fail("missing 'mpetmesh' header");
    const long version = reader.expect_integer("format version");
    if (version != 1) reader.fail("unsupported format version " + std::to_string(version));

    if (reader.expect("section") != "vertices") reader.fail("expected 'vertices' section");
    const long nv = reader.expect_integer("vertex count");
    if (nv < 0) reader.fail("negative vertex count");
    std::vector<Vec2> vertices(nv);
    for (long i = 0; i < nv; ++i) {
        vertices[i][0] = reader.expect_number("vertex coordinate");
        vertices[i][1] = reader.expect_number("vertex coordinate");
    }

    if (reader.expect("section") != "cells") reader.fail("expected 'cells' section");
    const long ncell = reader.expect_integer("cell count");
    if (ncell < 0) reader.fail("negative cell count");
    std::vector<std::array<int, 3>> cells(ncell);
    std::vector<int> cell_line(ncell);
    for (long c = 0; c < ncell; ++c) {
        for (int k = 0; k < 3; ++k) {
            const long v = reader.expect_integer("cell vertex index");
            if (k == 0) cell_line[c] = reader.line();
            if (v < 0 || v >= nv) {
                reader.fail("cell " + std::to_string(c) + " vertex index " + std::to_string(v) +
                            " out of range");
            }
            cells[c][k] = static_cast<int>(v);
        }
        if (signed_area(vertices[cells[c][0]], vertices[cells[c][1]], vertices[cells[c][2]]) <=
            0.0) {
            throw std::runtime_error("mesh parse error at line " + std::to_string(cell_line[c]) +
                                     ": cell " + std::to_string(c) +
                                     " has non-positive area (vertices must be CCW)");
        }
    }

    if (reader.expect("section") != "facets") reader.fail("expected 'facets' section");
    const long nf = reader.expect_integer("facet count");
    if (nf < 0) reader.fail("negative facet count");
    std::vector<std::array<int, 2>> facets(nf);
    std::vector<int> tags(nf);
    for (long f = 0; f < nf; ++f) {
        for (int k = 0; k < 2; ++k) {
            const long v = reader.expect_integer("facet vertex index");
            if (v < 0 || v >= nv) {
                reader.fail("facet " + std::to_string(f) + " vertex index " + std::to_string(v) +
                            " out of range");
            }
            facets[f][k] = static_cast<int>(v);
        }
        tags[f] = static_cast<int>(reader.expect_integer("facet tag"));
    }
    std::string extra;
    if (reader.next(extra)) reader.fail("unexpected trailing content '" + extra + "'");

    try {
        return Mesh(std::move(vertices), std::move(cells), std::move(facets), std::move(tags));
    } catch (const std::invalid_argument& err) {
        throw std::runtime_error("mesh parse error: " + std::string(err.what()));
    }
}

Mesh read_mesh_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mesh file '" + path + "'");
    return read_mesh(in);
}

void write_mesh(const Mesh& mesh, std::ostream& out) {
    char buf[80];
    out << "mpetmesh 1\n";
    out << "vertices " << mesh.vertex_count() << "\n";
    for (const Vec2& v : mesh.vertices()) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v[0], v[1]);
        out << buf;
    }
    out << "cells " << mesh.cell_count() << "\n";
    for (const auto& c : mesh.cells()) out << c[0] << " " << c[1] << " " << c[2] << "\n";
    out << "facets " << mesh.facet_count() << "\n";
    for (int f = 0; f < mesh.facet_count(); ++f) {
        const auto& p = mesh.facets()[f];
        out << p[0] << " " << p[1] << " " << mesh.facet_tags()[f] << "\n";
    }
}

void write_mesh_file(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_mesh(mesh, out);
    if (!out) throw std::runtime_error("failed writing mesh to '" + path + "'");
}

}  // namespace mpet
