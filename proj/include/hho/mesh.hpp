#pragma once

#include "core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace hho {

enum class CellShape { triangle, quadrilateral, polygon, tetrahedron, hexahedron, polyhedron };

inline const char* to_string(CellShape s)
{
    switch (s) {
    case CellShape::triangle: return "triangle";
    case CellShape::quadrilateral: return "quadrilateral";
    case CellShape::polygon: return "polygon";
    case CellShape::tetrahedron: return "tetrahedron";
    case CellShape::hexahedron: return "hexahedron";
    case CellShape::polyhedron: return "polyhedron";
    }
    return "unknown";
}

// A face is a segment (2D) or a planar vertex loop (3D). The stored normal
// points out of cells[0]; cells[1] is -1 on the boundary.
struct Face {
    std::vector<std::size_t> vertices;
    std::array<Index, 2> cells{-1, -1};
    int num_refs = 0;
    Point normal = Point::Zero();
    Point barycenter = Point::Zero();
    double measure = 0.0;
    double diameter = 0.0;
    std::string tag;

    bool is_boundary() const { return cells[1] < 0; }
};

// orientation[i] is +1 when faces[i]'s stored normal points out of this cell.
struct Cell {
    std::vector<std::size_t> faces;
    std::vector<int> orientation;
    std::vector<std::size_t> vertices; // 2D: counter-clockwise loop; 3D: sorted, unique
    Point barycenter = Point::Zero();
    double measure = 0.0;
    double diameter = 0.0;
    CellShape shape = CellShape::polygon;
};

// Raw topology accepted by Mesh::build. An empty orientation list means the
// face loop is outward for the first (lowest id) referencing cell.
struct MeshTopology {
    int dim = 2;
    std::vector<Point> vertices;
    std::vector<std::vector<std::size_t>> faces;
    std::vector<std::vector<std::size_t>> cells;
    std::vector<std::vector<int>> orientation;
    std::map<std::size_t, std::string> tags;
};

namespace detail {

inline Point newell_normal(const std::vector<Point>& pts)
{
    Point n = Point::Zero();
    const std::size_t m = pts.size();
    for (std::size_t i = 0; i < m; ++i) {
        const Point& a = pts[i];
        const Point& b = pts[(i + 1) % m];
        n.x() += (a.y() - b.y()) * (a.z() + b.z());
        n.y() += (a.z() - b.z()) * (a.x() + b.x());
        n.z() += (a.x() - b.x()) * (a.y() + b.y());
    }
    return n;
}

inline double max_pair_distance(const std::vector<Point>& pts)
{
    double h = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            h = std::max(h, (pts[i] - pts[j]).norm());
    return h;
}

} // namespace detail

class Mesh {
public:
    Mesh() = default;

    static Mesh build(MeshTopology topo);

    int dimension() const { return dim_; }
    std::size_t num_vertices() const { return vertices_.size(); }
    std::size_t num_faces() const { return faces_.size(); }
    std::size_t num_cells() const { return cells_.size(); }
    std::size_t num_boundary_faces() const
    {
        return static_cast<std::size_t>(std::count_if(faces_.begin(), faces_.end(),
                                                      [](const Face& f) { return f.is_boundary(); }));
    }

    const std::vector<Point>& vertices() const { return vertices_; }
    const std::vector<Face>& faces() const { return faces_; }
    const std::vector<Cell>& cells() const { return cells_; }
    const Point& vertex(std::size_t i) const { return vertices_[i]; }
    const Face& face(std::size_t i) const { return faces_[i]; }
    const Cell& cell(std::size_t i) const { return cells_[i]; }

    Point outward_normal(std::size_t cell, std::size_t local_face) const
    {
        const Cell& c = cells_[cell];
        return double(c.orientation[local_face]) * faces_[c.faces[local_face]].normal;
    }

    std::vector<Point> face_points(std::size_t f) const
    {
        std::vector<Point> p;
        for (auto v : faces_[f].vertices)
            p.push_back(vertices_[v]);
        return p;
    }

    double volume() const
    {
        double v = 0.0;
        for (const auto& c : cells_)
            v += c.measure;
        return v;
    }

    std::set<std::string> boundary_tags() const
    {
        std::set<std::string> s;
        for (const auto& f : faces_)
            if (f.is_boundary())
                s.insert(f.tag);
        return s;
    }

    void set_tag(std::size_t face, std::string tag) { faces_[face].tag = std::move(tag); }

    MeshTopology topology() const
    {
        MeshTopology t;
        t.dim = dim_;
        t.vertices = vertices_;
        for (const auto& f : faces_)
            t.faces.push_back(f.vertices);
        for (const auto& c : cells_) {
            t.cells.push_back(c.faces);
            t.orientation.push_back(c.orientation);
        }
        for (std::size_t i = 0; i < faces_.size(); ++i)
            if (!faces_[i].tag.empty())
                t.tags[i] = faces_[i].tag;
        return t;
    }

    // Orientation issues found while building; reported by validate().
    const std::vector<std::size_t>& inconsistent_faces() const { return inconsistent_faces_; }

    friend bool operator==(const Mesh& a, const Mesh& b)
    {
        if (a.dim_ != b.dim_ || a.vertices_ != b.vertices_ || a.faces_.size() != b.faces_.size() ||
            a.cells_.size() != b.cells_.size())
            return false;
        for (std::size_t i = 0; i < a.faces_.size(); ++i)
            if (a.faces_[i].vertices != b.faces_[i].vertices || a.faces_[i].tag != b.faces_[i].tag ||
                a.faces_[i].cells != b.faces_[i].cells)
                return false;
        for (std::size_t i = 0; i < a.cells_.size(); ++i)
            if (a.cells_[i].faces != b.cells_[i].faces || a.cells_[i].orientation != b.cells_[i].orientation)
                return false;
        return true;
    }

private:
    void compute_face_geometry(Face& f) const;
    void compute_cell_geometry(Cell& c) const;

    int dim_ = 2;
    std::vector<Point> vertices_;
    std::vector<Face> faces_;
    std::vector<Cell> cells_;
    std::vector<std::size_t> inconsistent_faces_;
};

inline void Mesh::compute_face_geometry(Face& f) const
{
    std::vector<Point> p;
    for (auto v : f.vertices)
        p.push_back(vertices_[v]);
    if (dim_ == 2) {
        const Point t = p[1] - p[0];
        f.measure = t.norm();
        f.diameter = f.measure;
        f.barycenter = 0.5 * (p[0] + p[1]);
        f.normal = f.measure > 0 ? Point(Point(t.y(), -t.x(), 0.0) / f.measure) : Point(Point::Zero());
        return;
    }
    const Point nn = detail::newell_normal(p);
    const double twice_area = nn.norm();
    f.normal = twice_area > 0 ? Point(nn / twice_area) : Point::Zero();
    f.measure = 0.5 * twice_area;
    f.diameter = detail::max_pair_distance(p);
    Point avg = Point::Zero();
    for (const auto& q : p)
        avg += q;
    avg /= double(p.size());
    Point bc = Point::Zero();
    double area = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Point& a = p[i];
        const Point& b = p[(i + 1) % p.size()];
        const double ai = 0.5 * (a - avg).cross(b - avg).dot(f.normal);
        area += ai;
        bc += ai * (avg + a + b) / 3.0;
    }
    f.barycenter = area != 0.0 ? Point(bc / area) : avg;
}

inline void Mesh::compute_cell_geometry(Cell& c) const
{
    std::vector<Point> p;
    for (auto v : c.vertices)
        p.push_back(vertices_[v]);
    c.diameter = detail::max_pair_distance(p);
    Point ref = Point::Zero();
    for (const auto& q : p)
        ref += q;
    ref /= double(p.size());
    // Cone decomposition from ref: exact for any planar-faced polytope.
    double vol = 0.0;
    Point mom = Point::Zero();
    const double d = dim_;
    for (std::size_t i = 0; i < c.faces.size(); ++i) {
        const Face& f = faces_[c.faces[i]];
        const Point n = double(c.orientation[i]) * f.normal;
        const double vi = f.measure * (f.barycenter - ref).dot(n) / d;
        vol += vi;
        mom += vi * (ref + d / (d + 1.0) * (f.barycenter - ref));
    }
    c.measure = vol;
    c.barycenter = vol != 0.0 ? Point(mom / vol) : ref;
}

inline Mesh Mesh::build(MeshTopology topo)
{
    if (topo.dim != 2 && topo.dim != 3)
        throw ValidationError("mesh dimension must be 2 or 3");
    Mesh m;
    m.dim_ = topo.dim;
    m.vertices_ = std::move(topo.vertices);
    if (m.dim_ == 2)
        for (auto& v : m.vertices_)
            v.z() = 0.0;
    const std::size_t nv = m.vertices_.size();
    m.faces_.resize(topo.faces.size());
    for (std::size_t i = 0; i < topo.faces.size(); ++i) {
        const auto& fv = topo.faces[i];
        if (m.dim_ == 2 && fv.size() != 2)
            throw ValidationError("face " + std::to_string(i) + ": 2D faces need exactly 2 vertices");
        if (m.dim_ == 3 && fv.size() < 3)
            throw ValidationError("face " + std::to_string(i) + ": 3D faces need at least 3 vertices");
        for (auto v : fv)
            if (v >= nv)
                throw ValidationError("face " + std::to_string(i) + ": vertex index out of range");
        m.faces_[i].vertices = fv;
    }
    if (topo.orientation.size() != topo.cells.size())
        topo.orientation.resize(topo.cells.size());

    // Adjacency: cells[0] is the lowest referencing cell id.
    std::vector<std::vector<std::pair<std::size_t, int>>> refs(m.faces_.size());
    m.cells_.resize(topo.cells.size());
    for (std::size_t c = 0; c < topo.cells.size(); ++c) {
        const auto& cf = topo.cells[c];
        if (cf.empty())
            throw ValidationError("cell " + std::to_string(c) + ": no faces");
        auto& orient = topo.orientation[c];
        const bool given = !orient.empty();
        if (given && orient.size() != cf.size())
            throw ValidationError("cell " + std::to_string(c) + ": orientation list size mismatch");
        for (std::size_t i = 0; i < cf.size(); ++i) {
            if (cf[i] >= m.faces_.size())
                throw ValidationError("cell " + std::to_string(c) + ": face index out of range");
            const int s = given ? orient[i] : (refs[cf[i]].empty() ? 1 : -1);
            refs[cf[i]].push_back({c, s});
        }
        m.cells_[c].faces = cf;
        m.cells_[c].orientation.assign(cf.size(), 1);
    }
    for (std::size_t f = 0; f < m.faces_.size(); ++f) {
        auto& face = m.faces_[f];
        face.num_refs = int(refs[f].size());
        if (refs[f].empty())
            continue;
        // Normalize so the stored loop is outward for cells[0].
        const int flip = refs[f][0].second;
        if (flip < 0)
            std::reverse(face.vertices.begin(), face.vertices.end());
        face.cells[0] = Index(refs[f][0].first);
        if (refs[f].size() > 1) {
            face.cells[1] = Index(refs[f][1].first);
            if (refs[f][1].second * flip > 0 || refs[f][1].first == refs[f][0].first)
                m.inconsistent_faces_.push_back(f);
        }
        for (std::size_t r = 0; r < refs[f].size(); ++r) {
            auto& cell = m.cells_[refs[f][r].first];
            for (std::size_t i = 0; i < cell.faces.size(); ++i)
                if (cell.faces[i] == f)
                    cell.orientation[i] = refs[f][r].second * flip;
        }
    }
    for (const auto& [f, tag] : topo.tags)
        if (f < m.faces_.size())
            m.faces_[f].tag = tag;
    for (auto& f : m.faces_)
        m.compute_face_geometry(f);

    for (auto& c : m.cells_) {
        if (m.dim_ == 2) {
            // Chain the outward-oriented edges into a counter-clockwise loop.
            std::map<std::size_t, std::size_t> next;
            for (std::size_t i = 0; i < c.faces.size(); ++i) {
                const auto& fv = m.faces_[c.faces[i]].vertices;
                if (c.orientation[i] > 0)
                    next[fv[0]] = fv[1];
                else
                    next[fv[1]] = fv[0];
            }
            std::vector<std::size_t> loop;
            if (next.size() == c.faces.size()) {
                std::size_t v = next.begin()->first;
                for (std::size_t it = 0; it < c.faces.size(); ++it) {
                    loop.push_back(v);
                    auto nx = next.find(v);
                    if (nx == next.end())
                        break;
                    v = nx->second;
                }
            }
            if (loop.size() != c.faces.size()) {
                std::set<std::size_t> s;
                for (auto fi : c.faces)
                    for (auto v : m.faces_[fi].vertices)
                        s.insert(v);
                loop.assign(s.begin(), s.end());
            }
            c.vertices = loop;
            c.shape = c.faces.size() == 3 ? CellShape::triangle
                    : c.faces.size() == 4 ? CellShape::quadrilateral
                                          : CellShape::polygon;
        } else {
            std::set<std::size_t> s;
            bool all_tri = true, all_quad = true;
            for (auto fi : c.faces) {
                const auto& fv = m.faces_[fi].vertices;
                s.insert(fv.begin(), fv.end());
                all_tri = all_tri && fv.size() == 3;
                all_quad = all_quad && fv.size() == 4;
            }
            c.vertices.assign(s.begin(), s.end());
            if (c.faces.size() == 4 && all_tri && s.size() == 4)
                c.shape = CellShape::tetrahedron;
            else if (c.faces.size() == 6 && all_quad && s.size() == 8)
                c.shape = CellShape::hexahedron;
            else
                c.shape = CellShape::polyhedron;
        }
        m.compute_cell_geometry(c);
    }
    return m;
}

// Orientation signs for convex cells, from the side of each face plane the
// cell's vertex average lies on.
inline std::vector<std::vector<int>> orient_convex(const MeshTopology& t)
{
    std::vector<std::vector<int>> out(t.cells.size());
    for (std::size_t c = 0; c < t.cells.size(); ++c) {
        std::set<std::size_t> vs;
        for (auto f : t.cells[c])
            vs.insert(t.faces[f].begin(), t.faces[f].end());
        Point ref = Point::Zero();
        for (auto v : vs)
            ref += t.vertices[v];
        ref /= double(vs.size());
        for (auto f : t.cells[c]) {
            std::vector<Point> p;
            for (auto v : t.faces[f])
                p.push_back(t.vertices[v]);
            Point n, xf = Point::Zero();
            for (const auto& q : p)
                xf += q;
            xf /= double(p.size());
            if (t.dim == 2) {
                const Point d = p[1] - p[0];
                n = Point(d.y(), -d.x(), 0.0);
            } else {
                n = detail::newell_normal(p);
            }
            out[c].push_back((xf - ref).dot(n) > 0 ? 1 : -1);
        }
    }
    return out;
}

struct ValidationCheck {
    std::string name;
    bool pass = true;
    std::vector<std::size_t> offenders;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    double shape_regularity = 0.0; // max over cells of h_T / rho_T (diagnostic proxy)

    bool ok() const
    {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
    }
    const ValidationCheck* find(const std::string& name) const
    {
        for (const auto& c : checks)
            if (c.name == name)
                return &c;
        return nullptr;
    }
};

// Signed volumes of the (barycenter, face sub-simplex) pieces of a cell.
inline std::vector<double> sub_simplex_volumes(const Mesh& m, std::size_t cell)
{
    const Cell& c = m.cell(cell);
    std::vector<double> out;
    for (std::size_t i = 0; i < c.faces.size(); ++i) {
        const Face& f = m.face(c.faces[i]);
        const double s = c.orientation[i];
        if (m.dimension() == 2) {
            out.push_back(0.5 * f.measure * s * (f.barycenter - c.barycenter).dot(f.normal));
            continue;
        }
        const auto& fv = f.vertices;
        for (std::size_t j = 0; j < fv.size(); ++j) {
            const Point& a = m.vertex(fv[j]);
            const Point& b = m.vertex(fv[(j + 1) % fv.size()]);
            const Point cr = (a - f.barycenter).cross(b - f.barycenter);
            out.push_back(s * cr.dot(f.barycenter - c.barycenter) / 6.0);
        }
    }
    return out;
}

inline ValidationReport validate(const Mesh& m)
{
    ValidationReport r;
    ValidationCheck adj{"face_adjacency"}, tags{"boundary_tags"}, orient{"orientation"},
        planar{"planarity"}, measure{"face_measure"}, cmeasure{"cell_measure"}, star{"star_shaped"}, closed{"closed_cells"};
    for (std::size_t f = 0; f < m.num_faces(); ++f) {
        const Face& face = m.face(f);
        if (face.num_refs < 1 || face.num_refs > 2)
            adj.offenders.push_back(f);
        if (face.num_refs == 1 && face.tag.empty())
            tags.offenders.push_back(f);
        if (!(face.measure > 0))
            measure.offenders.push_back(f);
        if (m.dimension() == 3) {
            double dev = 0.0;
            for (auto v : face.vertices)
                dev = std::max(dev, std::abs((m.vertex(v) - face.barycenter).dot(face.normal)));
            if (dev > 1e-10 * face.diameter)
                planar.offenders.push_back(f);
        }
    }
    orient.offenders = m.inconsistent_faces();
    double ratio = 0.0;
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
        const Cell& cell = m.cell(c);
        if (!(cell.measure > 0))
            cmeasure.offenders.push_back(c);
        const double tol = 1e-12 * std::pow(cell.diameter, m.dimension());
        bool ok = true;
        for (double v : sub_simplex_volumes(m, c))
            ok = ok && v > tol;
        if (!ok)
            star.offenders.push_back(c);
        Point sum = Point::Zero();
        double rho = 1e300;
        for (std::size_t i = 0; i < cell.faces.size(); ++i) {
            const Face& f = m.face(cell.faces[i]);
            const Point n = m.outward_normal(c, i);
            sum += f.measure * n;
            rho = std::min(rho, (f.barycenter - cell.barycenter).dot(n));
        }
        double scale = 0.0;
        for (auto fi : cell.faces)
            scale += m.face(fi).measure;
        if (sum.norm() > 1e-10 * scale)
            closed.offenders.push_back(c);
        if (rho > 0)
            ratio = std::max(ratio, cell.diameter / (2.0 * rho));
    }
    for (auto* ch : {&adj, &tags, &orient, &planar, &measure, &cmeasure, &star, &closed}) {
        ch->pass = ch->offenders.empty();
        r.checks.push_back(*ch);
    }
    r.shape_regularity = ratio;
    return r;
}

} // namespace hho
