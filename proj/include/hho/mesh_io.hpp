#pragma once

#include "mesh_generators.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace hho {

enum class MeshFormat { native, gmsh };

inline MeshFormat parse_mesh_format(const std::string& s)
{
    if (s == "native" || s == "hho")
        return MeshFormat::native;
    if (s == "gmsh" || s == "msh")
        return MeshFormat::gmsh;
    throw DomainError("unknown mesh format '" + s + "'");
}

inline MeshFormat guess_mesh_format(const std::string& path)
{
    return path.size() >= 4 && path.substr(path.size() - 4) == ".msh" ? MeshFormat::gmsh : MeshFormat::native;
}

namespace detail {

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    // Next non-empty line that is not a comment; false at end of input.
    bool next(std::string& line)
    {
        while (std::getline(in_, line)) {
            ++lineno_;
            const auto p = line.find_first_not_of(" \t\r");
            if (p == std::string::npos || line[p] == '#')
                continue;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            return true;
        }
        return false;
    }

    std::string require(const char* what)
    {
        std::string line;
        if (!next(line))
            throw ParseError(std::string("unexpected end of file, expected ") + what, lineno_ + 1);
        return line;
    }

    std::size_t line() const { return lineno_; }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, lineno_); }

private:
    std::istream& in_;
    std::size_t lineno_ = 0;
};

template <typename T>
std::vector<T> tokens(const std::string& line, LineReader& r, std::size_t expected_min = 0)
{
    std::istringstream ss(line);
    std::vector<T> out;
    std::string tok;
    while (ss >> tok) {
        std::istringstream ts(tok);
        T v;
        if (!(ts >> v) || !ts.eof())
            r.fail("malformed token '" + tok + "'");
        out.push_back(v);
    }
    if (out.size() < expected_min)
        r.fail("too few values");
    return out;
}

inline std::pair<std::string, std::size_t> section_header(const std::string& line, LineReader& r)
{
    std::istringstream ss(line);
    std::string name;
    long long n = -1;
    if (!(ss >> name >> n) || n < 0)
        r.fail("expected '<SECTION> <count>'");
    return {name, std::size_t(n)};
}

} // namespace detail

// Native format:
//   HHOMESH 1
//   DIMENSION d
//   VERTICES n        then n lines "x y z"
//   FACES m           then m lines "k v1 .. vk"
//   CELLS c           then c lines "k f1 .. fk [o1 .. ok]"
//   BOUNDARY b        then b lines "face tag"
//   END
// Orientation signs are optional; without them a face loop is outward for
// the lowest-id cell that lists it.
inline Mesh read_native(std::istream& in)
{
    detail::LineReader r(in);
    std::string line = r.require("header");
    {
        std::istringstream ss(line);
        std::string magic;
        int version = 0;
        if (!(ss >> magic >> version) || magic != "HHOMESH" || version != 1)
            r.fail("expected 'HHOMESH 1'");
    }
    MeshTopology t;
    line = r.require("DIMENSION");
    {
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key >> t.dim) || key != "DIMENSION" || (t.dim != 2 && t.dim != 3))
            r.fail("expected 'DIMENSION 2|3'");
    }
    auto [vs, nv] = detail::section_header(r.require("VERTICES"), r);
    if (vs != "VERTICES")
        r.fail("expected VERTICES section");
    for (std::size_t i = 0; i < nv; ++i) {
        auto v = detail::tokens<double>(r.require("vertex"), r, 2);
        if (v.size() > 3)
            r.fail("too many coordinates");
        t.vertices.push_back(Point(v[0], v[1], v.size() > 2 ? v[2] : 0.0));
    }
    auto [fs, nf] = detail::section_header(r.require("FACES"), r);
    if (fs != "FACES")
        r.fail("expected FACES section");
    for (std::size_t i = 0; i < nf; ++i) {
        auto v = detail::tokens<long long>(r.require("face"), r, 1);
        if (v[0] < 2 || v.size() != std::size_t(v[0]) + 1)
            r.fail("face vertex count mismatch");
        std::vector<std::size_t> loop;
        for (std::size_t j = 1; j < v.size(); ++j) {
            if (v[j] < 0 || std::size_t(v[j]) >= nv)
                r.fail("vertex index out of range");
            loop.push_back(std::size_t(v[j]));
        }
        t.faces.push_back(loop);
    }
    auto [cs, nc] = detail::section_header(r.require("CELLS"), r);
    if (cs != "CELLS")
        r.fail("expected CELLS section");
    bool any_orientation = false;
    for (std::size_t i = 0; i < nc; ++i) {
        auto v = detail::tokens<long long>(r.require("cell"), r, 1);
        const std::size_t k = std::size_t(std::max(0LL, v[0]));
        if (k < 1 || (v.size() != k + 1 && v.size() != 2 * k + 1))
            r.fail("cell face count mismatch");
        std::vector<std::size_t> faces;
        std::vector<int> orient;
        for (std::size_t j = 1; j <= k; ++j) {
            if (v[j] < 0 || std::size_t(v[j]) >= nf)
                r.fail("face index out of range");
            faces.push_back(std::size_t(v[j]));
        }
        if (v.size() == 2 * k + 1) {
            any_orientation = true;
            for (std::size_t j = k + 1; j <= 2 * k; ++j) {
                if (v[j] != 1 && v[j] != -1)
                    r.fail("orientation must be +1 or -1");
                orient.push_back(int(v[j]));
            }
        }
        t.cells.push_back(faces);
        t.orientation.push_back(orient);
    }
    if (any_orientation)
        for (std::size_t c = 0; c < nc; ++c)
            if (t.orientation[c].empty())
                r.fail("orientation signs must be given for all cells or none");
    auto [bs, nb] = detail::section_header(r.require("BOUNDARY"), r);
    if (bs != "BOUNDARY")
        r.fail("expected BOUNDARY section");
    for (std::size_t i = 0; i < nb; ++i) {
        std::istringstream ss(r.require("boundary entry"));
        long long f;
        std::string tag;
        if (!(ss >> f >> tag) || f < 0 || std::size_t(f) >= nf)
            r.fail("expected '<face id> <tag>'");
        t.tags[std::size_t(f)] = tag;
    }
    line = r.require("END");
    if (line.substr(line.find_first_not_of(" \t"), 3) != "END")
        r.fail("expected END");
    Mesh m = Mesh::build(std::move(t));
    if (m.dimension() == 3) {
        const auto rep = validate(m);
        if (const auto* pl = rep.find("planarity"); pl && !pl->pass)
            throw ValidationError("nonplanar face " + std::to_string(pl->offenders.front()));
    }
    return m;
}

inline void write_native(const Mesh& m, std::ostream& out)
{
    out << "HHOMESH 1\nDIMENSION " << m.dimension() << "\n";
    out << "VERTICES " << m.num_vertices() << "\n" << std::setprecision(17);
    for (const auto& v : m.vertices()) {
        out << v.x() << " " << v.y();
        if (m.dimension() == 3)
            out << " " << v.z();
        out << "\n";
    }
    out << "FACES " << m.num_faces() << "\n";
    for (const auto& f : m.faces()) {
        out << f.vertices.size();
        for (auto v : f.vertices)
            out << " " << v;
        out << "\n";
    }
    out << "CELLS " << m.num_cells() << "\n";
    for (const auto& c : m.cells()) {
        out << c.faces.size();
        for (auto f : c.faces)
            out << " " << f;
        for (auto o : c.orientation)
            out << " " << o;
        out << "\n";
    }
    std::size_t nb = 0;
    for (const auto& f : m.faces())
        nb += f.tag.empty() ? 0 : 1;
    out << "BOUNDARY " << nb << "\n";
    for (std::size_t i = 0; i < m.num_faces(); ++i)
        if (!m.face(i).tag.empty())
            out << i << " " << m.face(i).tag << "\n";
    out << "END\n";
}

// Gmsh ASCII 2.2 subset: triangles (type 2) and tetrahedra (type 4) as
// cells; lines (1) or triangles (2) of lower dimension carry boundary tags.
inline Mesh read_gmsh(std::istream& in)
{
    detail::LineReader r(in);
    std::string line;
    std::map<long long, std::string> names;
    std::map<long long, std::size_t> node_index;
    std::vector<Point> nodes;
    struct Elem {
        int type;
        long long phys;
        std::vector<long long> nodes;
    };
    std::vector<Elem> elems;
    bool have_format = false, have_nodes = false, have_elems = false;
    while (r.next(line)) {
        if (line.rfind("$MeshFormat", 0) == 0) {
            auto v = detail::tokens<double>(r.require("format line"), r, 3);
            if (v[0] < 2.0 || v[0] >= 3.0 || v[1] != 0)
                r.fail("only ASCII MSH 2.x is supported");
            if (r.require("$EndMeshFormat").rfind("$EndMeshFormat", 0) != 0)
                r.fail("expected $EndMeshFormat");
            have_format = true;
        } else if (line.rfind("$PhysicalNames", 0) == 0) {
            auto n = detail::tokens<long long>(r.require("count"), r, 1)[0];
            for (long long i = 0; i < n; ++i) {
                std::istringstream ss(r.require("physical name"));
                long long dim, id;
                std::string name;
                if (!(ss >> dim >> id >> std::quoted(name)))
                    r.fail("malformed physical name");
                names[id] = name;
            }
            if (r.require("$EndPhysicalNames").rfind("$EndPhysicalNames", 0) != 0)
                r.fail("expected $EndPhysicalNames");
        } else if (line.rfind("$Nodes", 0) == 0) {
            auto n = detail::tokens<long long>(r.require("count"), r, 1)[0];
            for (long long i = 0; i < n; ++i) {
                auto v = detail::tokens<double>(r.require("node"), r, 4);
                node_index[(long long)v[0]] = nodes.size();
                nodes.push_back(Point(v[1], v[2], v[3]));
            }
            if (r.require("$EndNodes").rfind("$EndNodes", 0) != 0)
                r.fail("expected $EndNodes");
            have_nodes = true;
        } else if (line.rfind("$Elements", 0) == 0) {
            auto n = detail::tokens<long long>(r.require("count"), r, 1)[0];
            for (long long i = 0; i < n; ++i) {
                auto v = detail::tokens<long long>(r.require("element"), r, 3);
                const int type = int(v[1]);
                const std::size_t ntags = std::size_t(v[2]);
                std::size_t nn = 0;
                switch (type) {
                case 15: nn = 1; break;
                case 1: nn = 2; break;
                case 2: nn = 3; break;
                case 4: nn = 4; break;
                default: r.fail("unsupported element type " + std::to_string(type));
                }
                if (v.size() != 3 + ntags + nn)
                    r.fail("element node count mismatch");
                Elem e{type, ntags > 0 ? v[3] : -1, {}};
                for (std::size_t j = 0; j < nn; ++j)
                    e.nodes.push_back(v[3 + ntags + j]);
                elems.push_back(std::move(e));
            }
            if (r.require("$EndElements").rfind("$EndElements", 0) != 0)
                r.fail("expected $EndElements");
            have_elems = true;
        } else if (line[0] == '$') {
            // Skip unknown sections.
            const std::string end = "$End" + line.substr(1);
            std::string l2;
            while (true) {
                if (!r.next(l2))
                    r.fail("unterminated section " + line);
                if (l2.rfind(end, 0) == 0)
                    break;
            }
        } else {
            r.fail("unexpected content outside a section");
        }
    }
    if (!have_format || !have_nodes || !have_elems)
        throw ParseError("missing $MeshFormat, $Nodes or $Elements section", r.line());
    int dim = 2;
    for (const auto& e : elems)
        if (e.type == 4)
            dim = 3;
    const int cell_type = dim == 3 ? 4 : 2, face_type = dim == 3 ? 2 : 1;
    auto node = [&](long long id) {
        auto it = node_index.find(id);
        if (it == node_index.end())
            throw ParseError("element references unknown node " + std::to_string(id), 0);
        return it->second;
    };
    std::vector<std::vector<std::size_t>> cells;
    std::map<std::vector<std::size_t>, std::string> ftags;
    for (const auto& e : elems) {
        std::vector<std::size_t> vs;
        for (auto id : e.nodes)
            vs.push_back(node(id));
        if (e.type == cell_type) {
            cells.push_back(vs);
        } else if (e.type == face_type) {
            std::sort(vs.begin(), vs.end());
            auto it = names.find(e.phys);
            ftags[vs] = it != names.end() ? it->second : (e.phys >= 0 ? std::to_string(e.phys) : "boundary");
        }
    }
    if (cells.empty())
        throw ParseError("no cells found", r.line());
    // Drop nodes not used by any cell (e.g. geometry points).
    std::vector<Index> remap(nodes.size(), -1);
    std::vector<Point> used;
    for (auto& c : cells)
        for (auto& v : c) {
            if (remap[v] < 0) {
                remap[v] = Index(used.size());
                used.push_back(nodes[v]);
            }
            v = std::size_t(remap[v]);
        }
    std::map<std::vector<std::size_t>, std::string> ftags2;
    for (const auto& [key, tag] : ftags) {
        std::vector<std::size_t> k2;
        bool ok = true;
        for (auto v : key) {
            ok = ok && remap[v] >= 0;
            if (ok)
                k2.push_back(std::size_t(remap[v]));
        }
        if (ok) {
            std::sort(k2.begin(), k2.end());
            ftags2[k2] = tag;
        }
    }
    return mesh_from_elements(dim, std::move(used), cells, [](const Point&) { return std::string("boundary"); },
                              ftags2);
}

// Writes simplicial meshes only (triangles in 2D, tetrahedra in 3D).
inline void write_gmsh(const Mesh& m, std::ostream& out)
{
    const int d = m.dimension();
    for (const auto& c : m.cells())
        if (c.shape != (d == 3 ? CellShape::tetrahedron : CellShape::triangle))
            throw UnsupportedOperation("Gmsh export supports triangle and tetrahedron meshes only");
    std::map<std::string, int> phys;
    for (const auto& f : m.faces())
        if (f.is_boundary() && !f.tag.empty() && !phys.count(f.tag))
            phys.emplace(f.tag, int(phys.size()) + 1);
    const int domain_id = int(phys.size()) + 1;
    out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
    out << "$PhysicalNames\n" << phys.size() + 1 << "\n";
    for (const auto& [name, id] : phys)
        out << d - 1 << " " << id << " \"" << name << "\"\n";
    out << d << " " << domain_id << " \"domain\"\n$EndPhysicalNames\n";
    out << "$Nodes\n" << m.num_vertices() << "\n" << std::setprecision(17);
    for (std::size_t i = 0; i < m.num_vertices(); ++i)
        out << i + 1 << " " << m.vertex(i).x() << " " << m.vertex(i).y() << " " << m.vertex(i).z() << "\n";
    out << "$EndNodes\n";
    std::size_t nb = 0;
    for (const auto& f : m.faces())
        nb += f.is_boundary() ? 1 : 0;
    out << "$Elements\n" << nb + m.num_cells() << "\n";
    std::size_t id = 1;
    for (const auto& f : m.faces()) {
        if (!f.is_boundary())
            continue;
        const int p = f.tag.empty() ? 0 : phys[f.tag];
        out << id++ << " " << (d == 3 ? 2 : 1) << " 2 " << p << " " << p;
        for (auto v : f.vertices)
            out << " " << v + 1;
        out << "\n";
    }
    for (const auto& c : m.cells()) {
        out << id++ << " " << (d == 3 ? 4 : 2) << " 2 " << domain_id << " " << domain_id;
        for (auto v : c.vertices)
            out << " " << v + 1;
        out << "\n";
    }
    out << "$EndElements\n";
}

inline Mesh import_mesh(const std::string& path, MeshFormat format)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open mesh file '" + path + "'");
    try {
        return format == MeshFormat::gmsh ? read_gmsh(in) : read_native(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

inline Mesh import_mesh(const std::string& path) { return import_mesh(path, guess_mesh_format(path)); }

inline void export_mesh(const Mesh& m, const std::string& path, MeshFormat format)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write mesh file '" + path + "'");
    if (format == MeshFormat::gmsh)
        write_gmsh(m, out);
    else
        write_native(m, out);
    if (!out)
        throw Error("error while writing '" + path + "'");
}

} // namespace hho
