#pragma once

#include "mesh.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace hho {

enum class ElementType { triangle, quad, tet, hex };

inline ElementType parse_element_type(const std::string& s)
{
    if (s == "triangle" || s == "tri")
        return ElementType::triangle;
    if (s == "quad" || s == "quadrilateral")
        return ElementType::quad;
    if (s == "tet" || s == "tetrahedron")
        return ElementType::tet;
    if (s == "hex" || s == "hexahedron")
        return ElementType::hex;
    throw DomainError("unknown element type '" + s + "'");
}

// Builds a mesh from convex elements given by vertex lists: triangles (3),
// counter-clockwise quads (4), tets (4) or hexes (8: bottom loop, then top).
// Boundary faces are tagged by `tagger(barycenter)`, unless `face_tags`
// (keyed by sorted vertex ids) names them.
inline Mesh mesh_from_elements(int dim, std::vector<Point> vertices, const std::vector<std::vector<std::size_t>>& elems,
                               const std::function<std::string(const Point&)>& tagger,
                               const std::map<std::vector<std::size_t>, std::string>& face_tags = {})
{
    MeshTopology t;
    t.dim = dim;
    t.vertices = std::move(vertices);
    std::map<std::vector<std::size_t>, std::size_t> index;
    auto add_face = [&](std::vector<std::size_t> loop) {
        std::vector<std::size_t> key = loop;
        std::sort(key.begin(), key.end());
        auto it = index.find(key);
        if (it != index.end())
            return it->second;
        const std::size_t id = t.faces.size();
        t.faces.push_back(std::move(loop));
        index.emplace(std::move(key), id);
        return id;
    };
    for (const auto& e : elems) {
        std::vector<std::vector<std::size_t>> loops;
        if (dim == 2) {
            for (std::size_t i = 0; i < e.size(); ++i)
                loops.push_back({e[i], e[(i + 1) % e.size()]});
        } else if (e.size() == 4) {
            loops = {{e[0], e[1], e[2]}, {e[0], e[1], e[3]}, {e[0], e[2], e[3]}, {e[1], e[2], e[3]}};
        } else if (e.size() == 8) {
            loops = {{e[0], e[1], e[2], e[3]}, {e[4], e[5], e[6], e[7]}, {e[0], e[1], e[5], e[4]},
                     {e[1], e[2], e[6], e[5]}, {e[2], e[3], e[7], e[6]}, {e[3], e[0], e[4], e[7]}};
        } else {
            throw ValidationError("unsupported element with " + std::to_string(e.size()) + " vertices");
        }
        std::vector<std::size_t> cf;
        for (auto& l : loops)
            cf.push_back(add_face(l));
        t.cells.push_back(cf);
    }
    t.orientation = orient_convex(t);
    std::vector<int> refs(t.faces.size(), 0);
    for (const auto& c : t.cells)
        for (auto f : c)
            ++refs[f];
    for (std::size_t f = 0; f < t.faces.size(); ++f) {
        if (refs[f] != 1)
            continue;
        std::vector<std::size_t> key = t.faces[f];
        std::sort(key.begin(), key.end());
        auto it = face_tags.find(key);
        if (it != face_tags.end()) {
            t.tags[f] = it->second;
            continue;
        }
        Point bc = Point::Zero();
        for (auto v : t.faces[f])
            bc += t.vertices[v];
        bc /= double(t.faces[f].size());
        t.tags[f] = tagger ? tagger(bc) : std::string("boundary");
    }
    return Mesh::build(std::move(t));
}

// Tags boundary faces of a box by the side they lie on: xmin, xmax, ymin, ...
inline std::function<std::string(const Point&)> box_tagger(const Point& lo, const Point& hi, int dim)
{
    return [lo, hi, dim](const Point& x) {
        static const char* names[3][2] = {{"xmin", "xmax"}, {"ymin", "ymax"}, {"zmin", "zmax"}};
        for (int a = 0; a < dim; ++a) {
            const double tol = 1e-10 * (hi[a] - lo[a]);
            if (std::abs(x[a] - lo[a]) <= tol)
                return std::string(names[a][0]);
            if (std::abs(x[a] - hi[a]) <= tol)
                return std::string(names[a][1]);
        }
        return std::string("boundary");
    };
}

// Conforming structured mesh of the box [lo, hi]; quads split into 2
// triangles, hexes into 6 tetrahedra (Kuhn split).
inline Mesh generate_structured(const Point& lo, const Point& hi, const std::array<int, 3>& div, ElementType type)
{
    const bool three = type == ElementType::tet || type == ElementType::hex;
    const int dim = three ? 3 : 2;
    for (int a = 0; a < dim; ++a) {
        if (div[a] < 1)
            throw DomainError("divisions must be >= 1 per axis");
        if (!(hi[a] - lo[a] > 0))
            throw DomainError("box has zero measure along axis " + std::to_string(a));
    }
    const int nx = div[0], ny = div[1], nz = three ? div[2] : 0;
    std::vector<Point> v;
    auto vid = [&](int i, int j, int k) { return std::size_t((k * (ny + 1) + j) * (nx + 1) + i); };
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i) {
                Point p(lo.x() + (hi.x() - lo.x()) * i / nx, lo.y() + (hi.y() - lo.y()) * j / ny, 0.0);
                if (three)
                    p.z() = lo.z() + (hi.z() - lo.z()) * k / nz;
                // Snap the far side exactly onto the box.
                if (i == nx) p.x() = hi.x();
                if (j == ny) p.y() = hi.y();
                if (three && k == nz) p.z() = hi.z();
                v.push_back(p);
            }
    std::vector<std::vector<std::size_t>> elems;
    if (!three) {
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const auto a = vid(i, j, 0), b = vid(i + 1, j, 0), c = vid(i + 1, j + 1, 0), d = vid(i, j + 1, 0);
                if (type == ElementType::quad) {
                    elems.push_back({a, b, c, d});
                } else {
                    elems.push_back({a, b, c});
                    elems.push_back({a, c, d});
                }
            }
    } else {
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i) {
                    auto c = [&](int di, int dj, int dk) { return vid(i + di, j + dj, k + dk); };
                    if (type == ElementType::hex) {
                        elems.push_back({c(0, 0, 0), c(1, 0, 0), c(1, 1, 0), c(0, 1, 0), c(0, 0, 1), c(1, 0, 1),
                                         c(1, 1, 1), c(0, 1, 1)});
                        continue;
                    }
                    std::array<int, 3> perm{0, 1, 2};
                    do {
                        std::array<int, 3> cur{0, 0, 0};
                        std::vector<std::size_t> tet{c(0, 0, 0)};
                        for (int s = 0; s < 3; ++s) {
                            cur[perm[s]] = 1;
                            tet.push_back(c(cur[0], cur[1], cur[2]));
                        }
                        elems.push_back(tet);
                    } while (std::next_permutation(perm.begin(), perm.end()));
                }
    }
    return mesh_from_elements(dim, std::move(v), elems, box_tagger(lo, hi, dim));
}

// Same topology, vertices moved by `map`. The map must preserve orientation.
inline Mesh map_vertices(const Mesh& m, const std::function<Point(const Point&)>& map)
{
    MeshTopology t = m.topology();
    for (auto& v : t.vertices)
        v = map(v);
    return Mesh::build(std::move(t));
}

inline Mesh rename_tags(const Mesh& m, const std::map<std::string, std::string>& names)
{
    MeshTopology t = m.topology();
    for (auto& [f, tag] : t.tags) {
        auto it = names.find(tag);
        if (it != names.end())
            tag = it->second;
    }
    return Mesh::build(std::move(t));
}

// Retags boundary faces carrying `from` whose barycenter satisfies `pred`.
inline Mesh retag_boundary(const Mesh& m, const std::string& from, const std::function<bool(const Point&)>& pred,
                           const std::string& to)
{
    MeshTopology t = m.topology();
    for (std::size_t f = 0; f < m.num_faces(); ++f)
        if (m.face(f).is_boundary() && m.face(f).tag == from && pred(m.face(f).barycenter))
            t.tags[f] = to;
    return Mesh::build(std::move(t));
}

// Cook's membrane: trapezoid (0,0), (48,44), (48,60), (0,44). Tags: left,
// right, bottom, top.
inline Mesh cook_membrane_mesh(int n, ElementType type = ElementType::quad)
{
    Mesh ref = generate_structured(Point(0, 0, 0), Point(1, 1, 0), {n, n, 1}, type);
    ref = map_vertices(ref, [](const Point& p) {
        const double xi = p.x(), eta = p.y();
        return Point(48.0 * xi, (1.0 - eta) * 44.0 * xi + eta * (44.0 + 16.0 * xi), 0.0);
    });
    return rename_tags(ref, {{"xmin", "left"}, {"xmax", "right"}, {"ymin", "bottom"}, {"ymax", "top"}});
}

// Quarter of the perforated strip: [0, 100] x [0, 180] minus the disk of
// radius 50 at the origin. O-grid with na angular and nr radial divisions.
// Tags: hole, right, top, bottom (y = 0), left (x = 0).
inline Mesh perforated_strip_mesh(int na, int nr, ElementType type = ElementType::triangle, double width = 100.0,
                                  double height = 180.0, double radius = 50.0)
{
    if (na % 2 != 0)
        throw DomainError("angular divisions must be even");
    // Reference x is radial (eta), reference y angular (xi); keeps the map orientation-preserving.
    Mesh ref = generate_structured(Point(0, 0, 0), Point(1, 1, 0), {nr, na, 1}, type);
    const double W = width, Hh = height, R = radius;
    ref = map_vertices(ref, [=](const Point& p) {
        const double xi = p.y(), eta = p.x();
        const Point in(R * std::cos(0.5 * pi * xi), R * std::sin(0.5 * pi * xi), 0.0);
        Point out;
        if (xi <= 0.5)
            out = Point(W, 2.0 * Hh * xi, 0.0);
        else
            out = Point(W - 2.0 * W * (xi - 0.5), Hh, 0.0);
        if (xi == 1.0)
            out.x() = 0.0;
        Point x = (1.0 - eta) * in + eta * out;
        if (xi == 1.0)
            x.x() = 0.0;
        if (xi == 0.0)
            x.y() = 0.0;
        return x;
    });
    MeshTopology t = ref.topology();
    for (auto& [f, tag] : t.tags) {
        const Point bc = ref.face(f).barycenter;
        if (tag == "xmin")
            tag = "hole";
        else if (tag == "ymin")
            tag = "bottom";
        else if (tag == "ymax")
            tag = "left";
        else if (tag == "xmax")
            tag = bc.x() > W - 1e-9 * W ? "right" : "top";
    }
    return Mesh::build(std::move(t));
}

namespace detail {

// Star-shapedness of a union of cell faces with respect to point x.
inline bool star_shaped_about(const Mesh& m, const std::vector<std::pair<std::size_t, int>>& faces, const Point& x,
                              double h)
{
    const double tol = 1e-12 * std::pow(h, m.dimension());
    for (const auto& [fi, s] : faces) {
        const Face& f = m.face(fi);
        if (m.dimension() == 2) {
            if (!(0.5 * f.measure * s * (f.barycenter - x).dot(f.normal) > tol))
                return false;
            continue;
        }
        const auto& fv = f.vertices;
        for (std::size_t j = 0; j < fv.size(); ++j) {
            const Point& a = m.vertex(fv[j]);
            const Point& b = m.vertex(fv[(j + 1) % fv.size()]);
            if (!(s * (a - f.barycenter).cross(b - f.barycenter).dot(f.barycenter - x) / 6.0 > tol))
                return false;
        }
    }
    return true;
}

} // namespace detail

// Merges pairs of neighbouring cells across a shared face. About
// merge_fraction of the cells take part in a merge. Deterministic in seed.
inline Mesh agglomerate(const Mesh& m, double merge_fraction, unsigned seed)
{
    if (!(merge_fraction >= 0.0 && merge_fraction <= 0.5))
        throw DomainError("merge fraction must lie in [0, 0.5]");
    const std::size_t target = std::size_t(std::llround(merge_fraction * double(m.num_cells()) / 2.0));
    if (target == 0)
        return m;
    std::vector<std::size_t> interior;
    for (std::size_t f = 0; f < m.num_faces(); ++f)
        if (!m.face(f).is_boundary())
            interior.push_back(f);
    std::mt19937 rng(seed);
    std::shuffle(interior.begin(), interior.end(), rng);
    std::vector<Index> partner(m.num_cells(), -1);
    std::size_t merged = 0;
    for (std::size_t f : interior) {
        if (merged >= target)
            break;
        const std::size_t a = std::size_t(m.face(f).cells[0]), b = std::size_t(m.face(f).cells[1]);
        if (partner[a] >= 0 || partner[b] >= 0)
            continue;
        std::vector<std::pair<std::size_t, int>> faces;
        for (std::size_t c : {a, b}) {
            const Cell& cell = m.cell(c);
            for (std::size_t i = 0; i < cell.faces.size(); ++i) {
                const Face& g = m.face(cell.faces[i]);
                const bool shared = !g.is_boundary() && ((std::size_t(g.cells[0]) == a && std::size_t(g.cells[1]) == b) ||
                                                         (std::size_t(g.cells[0]) == b && std::size_t(g.cells[1]) == a));
                if (!shared)
                    faces.push_back({cell.faces[i], cell.orientation[i]});
            }
        }
        const double va = m.cell(a).measure, vb = m.cell(b).measure;
        const Point bc = (va * m.cell(a).barycenter + vb * m.cell(b).barycenter) / (va + vb);
        const double h = std::max(m.cell(a).diameter, m.cell(b).diameter);
        if (!detail::star_shaped_about(m, faces, bc, h))
            continue;
        partner[a] = Index(b);
        partner[b] = Index(a);
        ++merged;
    }
    // New cells in order of their lowest original id; shared faces removed.
    std::vector<char> removed(m.num_faces(), 0);
    MeshTopology t;
    t.dim = m.dimension();
    t.vertices = m.vertices();
    std::vector<std::vector<std::pair<std::size_t, int>>> cells;
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
        if (partner[c] >= 0 && std::size_t(partner[c]) < c)
            continue;
        std::vector<std::pair<std::size_t, int>> faces;
        std::vector<std::size_t> group{c};
        if (partner[c] >= 0)
            group.push_back(std::size_t(partner[c]));
        for (std::size_t g : group) {
            const Cell& cell = m.cell(g);
            for (std::size_t i = 0; i < cell.faces.size(); ++i) {
                const Face& f = m.face(cell.faces[i]);
                const bool internal = group.size() == 2 && !f.is_boundary() &&
                                      std::find(group.begin(), group.end(), std::size_t(f.cells[0])) != group.end() &&
                                      std::find(group.begin(), group.end(), std::size_t(f.cells[1])) != group.end();
                if (internal)
                    removed[cell.faces[i]] = 1;
                else
                    faces.push_back({cell.faces[i], cell.orientation[i]});
            }
        }
        cells.push_back(std::move(faces));
    }
    std::vector<Index> new_id(m.num_faces(), -1);
    for (std::size_t f = 0; f < m.num_faces(); ++f) {
        if (removed[f])
            continue;
        new_id[f] = Index(t.faces.size());
        t.faces.push_back(m.face(f).vertices);
        if (!m.face(f).tag.empty())
            t.tags[std::size_t(new_id[f])] = m.face(f).tag;
    }
    for (const auto& faces : cells) {
        std::vector<std::size_t> ids;
        std::vector<int> orient;
        for (const auto& [f, s] : faces) {
            ids.push_back(std::size_t(new_id[f]));
            orient.push_back(s);
        }
        t.cells.push_back(std::move(ids));
        t.orientation.push_back(std::move(orient));
    }
    return Mesh::build(std::move(t));
}

namespace detail {

inline bool polygon_star_shaped(const std::vector<Point>& loop)
{
    double area = 0.0;
    Point c = Point::Zero();
    const std::size_t n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = loop[i];
        const Point& b = loop[(i + 1) % n];
        const double cr = a.x() * b.y() - b.x() * a.y();
        area += 0.5 * cr;
        c += cr * (a + b) / 6.0;
    }
    if (!(area > 0))
        return false;
    c /= area;
    double h = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        h = std::max(h, (loop[i] - loop[(i + 1) % n]).norm());
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = loop[i];
        const Point& b = loop[(i + 1) % n];
        if (!((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x() > 1e-12 * h * h))
            return false;
    }
    return true;
}

} // namespace detail

// Random moves of interior vertices (2D only), each move kept only if all
// adjacent cells stay star-shaped. amplitude is an absolute length.
inline Mesh perturb_nodes(const Mesh& m, double amplitude, unsigned seed)
{
    if (m.dimension() != 2)
        throw UnsupportedOperation("node perturbation is only supported in 2D (keeps faces planar)");
    if (amplitude == 0.0)
        return m;
    double min_edge = 1e300;
    for (const auto& f : m.faces())
        min_edge = std::min(min_edge, f.measure);
    if (!(amplitude > 0 && amplitude < 0.5 * min_edge))
        throw DomainError("amplitude must lie in (0, 0.5 * min edge length)");
    std::vector<char> on_boundary(m.num_vertices(), 0);
    for (const auto& f : m.faces())
        if (f.is_boundary())
            for (auto v : f.vertices)
                on_boundary[v] = 1;
    std::vector<std::vector<std::size_t>> vcells(m.num_vertices());
    for (std::size_t c = 0; c < m.num_cells(); ++c)
        for (auto v : m.cell(c).vertices)
            vcells[v].push_back(c);
    std::vector<Point> x = m.vertices();
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (std::size_t v = 0; v < x.size(); ++v) {
        const double dx = amplitude * U(rng), dy = amplitude * U(rng);
        if (on_boundary[v])
            continue;
        const Point old = x[v];
        x[v] = old + Point(dx, dy, 0.0);
        bool ok = true;
        for (auto c : vcells[v]) {
            std::vector<Point> loop;
            for (auto w : m.cell(c).vertices)
                loop.push_back(x[w]);
            ok = ok && detail::polygon_star_shaped(loop);
        }
        if (!ok)
            x[v] = old;
    }
    MeshTopology t = m.topology();
    t.vertices = std::move(x);
    return Mesh::build(std::move(t));
}

} // namespace hho
