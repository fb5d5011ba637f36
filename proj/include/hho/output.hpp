#pragma once

#include "mesh.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace hho {

// Field with `components` values per entity, entity-major.
struct Field {
    std::string name;
    int components = 1;
    std::vector<double> values;

    std::size_t size() const { return components > 0 ? values.size() / std::size_t(components) : 0; }
};

inline std::ofstream open_output(const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open '" + path + "' for writing");
    out << std::setprecision(17);
    return out;
}

inline void write_csv(std::ostream& out, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows)
{
    out << std::setprecision(17);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& r : rows) {
        if (r.size() != header.size())
            throw ContractViolation("CSV row width does not match the header");
        for (std::size_t i = 0; i < r.size(); ++i)
            out << (i ? "," : "") << r[i];
        out << "\n";
    }
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows)
{
    auto out = open_output(path);
    write_csv(out, header, rows);
    if (!out)
        throw Error("write failed for '" + path + "'");
}

namespace vtk {
inline constexpr int vertex = 1, triangle = 5, polygon = 7, quad = 9, tetra = 10, polyhedron = 42;
}

namespace detail {

inline void write_fields(std::ostream& out, const std::vector<Field>& fields, std::size_t n)
{
    for (const auto& f : fields) {
        if (f.components < 1 || f.values.size() != n * std::size_t(f.components))
            throw ContractViolation("field '" + f.name + "' is not sized to the mesh entities");
        if (f.components == 1) {
            out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : f.values)
                out << v << "\n";
        } else if (f.components == 3) {
            out << "VECTORS " << f.name << " double\n";
            for (std::size_t i = 0; i < n; ++i)
                out << f.values[3 * i] << " " << f.values[3 * i + 1] << " " << f.values[3 * i + 2] << "\n";
        } else {
            out << "FIELD " << f.name << "_data 1\n" << f.name << " " << f.components << " " << n << " double\n";
            for (std::size_t i = 0; i < n; ++i) {
                for (int c = 0; c < f.components; ++c)
                    out << (c ? " " : "") << f.values[i * std::size_t(f.components) + std::size_t(c)];
                out << "\n";
            }
        }
    }
}

} // namespace detail

// Legacy ASCII unstructured grid. 2D cells are written as triangles, quads or
// polygons; tetrahedra as VTK_TETRA and every other 3D cell as VTK_POLYHEDRON
// with an outward face stream.
inline void write_vtk(std::ostream& out, const Mesh& m, const std::vector<Field>& cell_fields,
                      const std::vector<Field>& point_fields = {})
{
    out << std::setprecision(17);
    out << "# vtk DataFile Version 4.2\nhho output\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << m.num_vertices() << " double\n";
    for (const auto& p : m.vertices())
        out << p.x() << " " << p.y() << " " << p.z() << "\n";
    std::vector<std::vector<std::size_t>> conn(m.num_cells());
    std::vector<int> types(m.num_cells());
    std::size_t total = 0;
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
        const Cell& cell = m.cell(c);
        auto& e = conn[c];
        if (m.dimension() == 2) {
            e.assign(cell.vertices.begin(), cell.vertices.end());
            types[c] = e.size() == 3 ? vtk::triangle : e.size() == 4 ? vtk::quad : vtk::polygon;
        } else if (cell.shape == CellShape::tetrahedron) {
            e.assign(cell.vertices.begin(), cell.vertices.end());
            // Positive orientation: (v1 - v0, v2 - v0, v3 - v0) right-handed.
            const auto& V = m.vertices();
            if ((V[e[1]] - V[e[0]]).cross(V[e[2]] - V[e[0]]).dot(V[e[3]] - V[e[0]]) < 0)
                std::swap(e[1], e[2]);
            types[c] = vtk::tetra;
        } else {
            e.push_back(cell.faces.size());
            for (std::size_t i = 0; i < cell.faces.size(); ++i) {
                auto fv = m.face(cell.faces[i]).vertices;
                if (cell.orientation[i] < 0)
                    std::reverse(fv.begin(), fv.end());
                e.push_back(fv.size());
                e.insert(e.end(), fv.begin(), fv.end());
            }
            types[c] = vtk::polyhedron;
        }
        total += e.size() + 1;
    }
    out << "CELLS " << m.num_cells() << " " << total << "\n";
    for (const auto& e : conn) {
        out << e.size();
        for (auto v : e)
            out << " " << v;
        out << "\n";
    }
    out << "CELL_TYPES " << m.num_cells() << "\n";
    for (int t : types)
        out << t << "\n";
    if (!cell_fields.empty()) {
        out << "CELL_DATA " << m.num_cells() << "\n";
        detail::write_fields(out, cell_fields, m.num_cells());
    }
    if (!point_fields.empty()) {
        out << "POINT_DATA " << m.num_vertices() << "\n";
        detail::write_fields(out, point_fields, m.num_vertices());
    }
}

inline void write_vtk(const Mesh& m, const std::vector<Field>& cell_fields, const std::string& path,
                      const std::vector<Field>& point_fields = {})
{
    auto out = open_output(path);
    write_vtk(out, m, cell_fields, point_fields);
    if (!out)
        throw Error("write failed for '" + path + "'");
}

// Point cloud (one VTK_VERTEX per point), e.g. quadrature-point values.
inline void write_vtk_points(std::ostream& out, const std::vector<Point>& pts, const std::vector<Field>& fields)
{
    out << std::setprecision(17);
    out << "# vtk DataFile Version 4.2\nhho point cloud\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << pts.size() << " double\n";
    for (const auto& p : pts)
        out << p.x() << " " << p.y() << " " << p.z() << "\n";
    out << "CELLS " << pts.size() << " " << 2 * pts.size() << "\n";
    for (std::size_t i = 0; i < pts.size(); ++i)
        out << "1 " << i << "\n";
    out << "CELL_TYPES " << pts.size() << "\n";
    for (std::size_t i = 0; i < pts.size(); ++i)
        out << vtk::vertex << "\n";
    if (!fields.empty()) {
        out << "POINT_DATA " << pts.size() << "\n";
        detail::write_fields(out, fields, pts.size());
    }
}

inline void write_vtk_points(const std::vector<Point>& pts, const std::vector<Field>& fields, const std::string& path)
{
    auto out = open_output(path);
    write_vtk_points(out, pts, fields);
    if (!out)
        throw Error("write failed for '" + path + "'");
}

// Minimal reader for files produced by write_vtk / write_vtk_points.
struct VtkData {
    std::vector<Point> points;
    std::vector<std::vector<std::size_t>> cells;
    std::vector<int> types;
    std::vector<Field> cell_fields;
    std::vector<Field> point_fields;
};

inline VtkData read_vtk(std::istream& in)
{
    VtkData d;
    std::string tok;
    std::vector<Field>* target = nullptr;
    std::size_t count = 0;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok)
            throw ParseError("malformed VTK: " + what, 0);
    };
    while (in >> tok) {
        if (tok == "POINTS") {
            std::size_t n;
            std::string type;
            expect(bool(in >> n >> type), "POINTS header");
            d.points.resize(n);
            for (auto& p : d.points)
                expect(bool(in >> p.x() >> p.y() >> p.z()), "point coordinates");
        } else if (tok == "CELLS") {
            std::size_t n, total;
            expect(bool(in >> n >> total), "CELLS header");
            d.cells.resize(n);
            for (auto& c : d.cells) {
                std::size_t k;
                expect(bool(in >> k), "cell size");
                c.resize(k);
                for (auto& v : c)
                    expect(bool(in >> v), "cell entry");
            }
        } else if (tok == "CELL_TYPES") {
            std::size_t n;
            expect(bool(in >> n), "CELL_TYPES header");
            d.types.resize(n);
            for (auto& t : d.types)
                expect(bool(in >> t), "cell type");
        } else if (tok == "CELL_DATA" || tok == "POINT_DATA") {
            expect(bool(in >> count), "data header");
            target = tok == "CELL_DATA" ? &d.cell_fields : &d.point_fields;
        } else if (tok == "SCALARS" || tok == "VECTORS") {
            expect(target != nullptr, "field outside a data section");
            Field f;
            std::string type;
            expect(bool(in >> f.name >> type), "field header");
            f.components = tok == "VECTORS" ? 3 : 1;
            if (tok == "SCALARS") {
                std::string rest;
                std::getline(in, rest);
                std::istringstream rs(rest);
                int nc;
                if (rs >> nc)
                    f.components = nc;
                std::string lt, name;
                expect(bool(in >> lt >> name) && lt == "LOOKUP_TABLE", "lookup table");
            }
            f.values.resize(count * std::size_t(f.components));
            for (auto& v : f.values)
                expect(bool(in >> v), "field value");
            target->push_back(std::move(f));
        } else if (tok == "FIELD") {
            expect(target != nullptr, "field outside a data section");
            std::string fname;
            int narr;
            expect(bool(in >> fname >> narr), "FIELD header");
            for (int a = 0; a < narr; ++a) {
                Field f;
                std::size_t n;
                std::string type;
                expect(bool(in >> f.name >> f.components >> n >> type), "FIELD array header");
                f.values.resize(n * std::size_t(f.components));
                for (auto& v : f.values)
                    expect(bool(in >> v), "field value");
                target->push_back(std::move(f));
            }
        }
    }
    return d;
}

inline VtkData read_vtk(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open '" + path + "'");
    return read_vtk(in);
}

} // namespace hho
