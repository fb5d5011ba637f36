#pragma once

#include "mesh_io.hpp"
#include "output.hpp"
#include "solver.hpp"
#include "sphere.hpp"

#include <cstdlib>
#include <filesystem>

#ifndef HHO_DATA_DIR
#define HHO_DATA_DIR "data"
#endif

namespace hho {

enum class BenchmarkKind { sphere, cook, strip, cube };

inline BenchmarkKind parse_benchmark(const std::string& s)
{
    if (s == "sphere")
        return BenchmarkKind::sphere;
    if (s == "cook")
        return BenchmarkKind::cook;
    if (s == "strip")
        return BenchmarkKind::strip;
    if (s == "cube")
        return BenchmarkKind::cube;
    throw DomainError("unknown benchmark '" + s + "' (expected sphere, cook, strip or cube)");
}

inline const char* to_string(BenchmarkKind b)
{
    switch (b) {
    case BenchmarkKind::sphere: return "sphere";
    case BenchmarkKind::cook: return "cook";
    case BenchmarkKind::strip: return "strip";
    case BenchmarkKind::cube: return "cube";
    }
    return "?";
}

inline std::string data_path(const std::string& name)
{
    if (const char* env = std::getenv("HHO_DATA_DIR"))
        return std::string(env) + "/" + name;
    return std::string(HHO_DATA_DIR) + "/" + name;
}

// ---------------------------------------------------------------- materials

inline MaterialParams sphere_material()
{
    MaterialParams mp;
    mp.E = 210e3;
    mp.nu = 0.3;
    mp.sigma_y0 = 240.0;
    return mp;
}

inline MaterialParams cook_material()
{
    MaterialParams mp;
    mp.E = 70.0;
    mp.nu = 0.4999;
    mp.sigma_y0 = 0.243;
    mp.H = 0.135;
    return mp;
}

inline MaterialParams strip_material()
{
    MaterialParams mp;
    mp.E = 70.0;
    mp.nu = 0.3;
    mp.sigma_y0 = 0.8;
    mp.H = 10.0;
    mp.K = 5.0;
    return mp;
}

inline MaterialParams cube_material()
{
    MaterialParams mp;
    mp.E = 200e3;
    mp.nu = 0.3;
    mp.sigma_y0 = 150.0;
    return mp;
}

// ---------------------------------------------------------------- meshes

inline Mesh sphere_mesh() { return import_mesh(data_path("sphere_octant_506.msh")); }

// Quarter block [0, 10]^3: symmetry planes x = 0 and y = 0, clamped bottom,
// load patch x, y < 5 on the top face.
inline Mesh cube_mesh(int n, ElementType type = ElementType::hex)
{
    Mesh m = generate_structured(Point(0, 0, 0), Point(10, 10, 10), {n, n, n}, type);
    m = rename_tags(m, {{"xmin", "sym_x"}, {"ymin", "sym_y"}, {"zmin", "bottom"}, {"zmax", "top"},
                        {"xmax", "side"}, {"ymax", "side"}});
    return retag_boundary(m, "top", [](const Point& x) { return x.x() < 5.0 && x.y() < 5.0; }, "load");
}

inline Mesh strip_mesh(int na = 16, int nr = 8, ElementType type = ElementType::triangle)
{
    return perforated_strip_mesh(na, nr, type);
}

// ---------------------------------------------------------------- problems

struct BenchmarkOptions {
    int k = 1;
    int l = -1; // -1: l = k
    double beta0 = 1.0;
    int steps = -1; // -1: benchmark default
    SolverOptions solver;
};

inline LocalDofLayout benchmark_layout(int dim, const BenchmarkOptions& o)
{
    return LocalDofLayout(dim, o.k, o.l < 0 ? o.k : o.l);
}

// Pressure steps of 10 MPa up to 350 MPa; the load factor is the pressure.
inline ProblemSetup sphere_problem(std::shared_ptr<const Mesh> mesh, const BenchmarkOptions& o = {},
                                   double p_max = 350.0)
{
    ProblemSetup s;
    s.mesh = std::move(mesh);
    s.layout = benchmark_layout(3, o);
    s.material = sphere_material();
    s.beta0 = o.beta0;
    s.dirichlet = {{"sym_x", {true, false, false}, {}},
                   {"sym_y", {false, true, false}, {}},
                   {"sym_z", {false, false, true}, {}}};
    s.neumann = {NeumannBC::pressure("inner", [](const Point&, double t) { return t; })};
    const int n = o.steps > 0 ? o.steps : int(std::lround(p_max / 10.0));
    s.load_factors = ProblemSetup::uniform_steps(n, p_max);
    s.options = o.solver;
    return s;
}

inline ProblemSetup cook_problem(std::shared_ptr<const Mesh> mesh, const BenchmarkOptions& o = {})
{
    ProblemSetup s;
    s.mesh = std::move(mesh);
    s.layout = benchmark_layout(2, o);
    s.material = cook_material();
    s.beta0 = o.beta0;
    s.dirichlet = {{"left", {true, true, true}, {}}};
    // F_y = 1.8 N spread over the 16 mm right edge.
    s.neumann = {{"right", [](const Point&, const Point&, double t) { return Point(0.0, 1.8 / 16.0 * t, 0.0); }}};
    s.load_factors = ProblemSetup::uniform_steps(o.steps > 0 ? o.steps : 20);
    s.options = o.solver;
    return s;
}

// Quarter strip, top edge displaced by delta = 5 mm.
inline ProblemSetup strip_problem(std::shared_ptr<const Mesh> mesh, const BenchmarkOptions& o = {})
{
    ProblemSetup s;
    s.mesh = std::move(mesh);
    s.layout = benchmark_layout(2, o);
    s.material = strip_material();
    s.beta0 = o.beta0;
    s.dirichlet = {{"bottom", {false, true, false}, {}},
                   {"left", {true, false, false}, {}},
                   {"top", {false, true, false}, [](const Point&, double t) { return Point(0.0, 5.0 * t, 0.0); }}};
    s.load_factors = ProblemSetup::uniform_steps(o.steps > 0 ? o.steps : 20);
    s.options = o.solver;
    return s;
}

inline ProblemSetup cube_problem(std::shared_ptr<const Mesh> mesh, const BenchmarkOptions& o = {})
{
    ProblemSetup s;
    s.mesh = std::move(mesh);
    s.layout = benchmark_layout(3, o);
    s.material = cube_material();
    s.beta0 = o.beta0;
    s.dirichlet = {{"sym_x", {true, false, false}, {}},
                   {"sym_y", {false, true, false}, {}},
                   {"bottom", {true, true, true}, {}}};
    s.neumann = {{"load", [](const Point&, const Point&, double t) { return Point(0.0, 0.0, -350.0 * t); }}};
    s.load_factors = ProblemSetup::uniform_steps(o.steps > 0 ? o.steps : 30);
    s.options = o.solver;
    return s;
}

// ---------------------------------------------------------------- post-processing

// Displacement at a boundary or interface point from the face unknowns
// (average over faces containing x).
inline Point probe_displacement(const Solver& s, const Vector& faces, const Point& x, double tol = 1e-8)
{
    const Mesh& m = s.mesh();
    const int d = m.dimension();
    const Index Nf = Index(s.layout().face_scalar());
    Point sum = Point::Zero();
    int count = 0;
    for (std::size_t f = 0; f < m.num_faces(); ++f) {
        const Face& face = m.face(f);
        const double h = face.diameter;
        if ((x - face.barycenter).norm() > h * (1 + tol))
            continue;
        bool inside = false;
        if (d == 2) {
            const Point a = m.vertex(face.vertices[0]), b = m.vertex(face.vertices[1]);
            const double s01 = (x - a).dot(b - a) / (b - a).squaredNorm();
            inside = s01 >= -tol && s01 <= 1 + tol && ((a + s01 * (b - a)) - x).norm() <= tol * h;
        } else {
            if (std::abs((x - face.barycenter).dot(face.normal)) > tol * h)
                continue;
            inside = true;
            const auto& v = face.vertices;
            for (std::size_t i = 0; i < v.size() && inside; ++i) {
                const Point a = m.vertex(v[i]), b = m.vertex(v[(i + 1) % v.size()]);
                inside = (b - a).cross(x - a).dot(face.normal) >= -tol * h * h;
            }
        }
        if (!inside)
            continue;
        const Vector psi = s.face_basis_of(f).eval(x);
        for (int a = 0; a < d; ++a)
            sum[a] += psi.dot(faces.segment(s.dof(f, a, 0), Nf));
        ++count;
    }
    if (count == 0)
        throw DomainError("probe point lies on no mesh face");
    return sum / double(count);
}

inline std::vector<Point> behaviour_points(const Solver& s)
{
    std::vector<Point> pts;
    pts.reserve(s.num_points());
    for (const auto& ops : s.operators())
        pts.insert(pts.end(), ops.rule.points.begin(), ops.rule.points.end());
    return pts;
}

// Quadrature-weighted cell means of a per-point scalar.
inline std::vector<double> cell_means(const Solver& s, const std::function<double(std::size_t)>& value)
{
    std::vector<double> out(s.mesh().num_cells(), 0.0);
    for (std::size_t c = 0; c < out.size(); ++c) {
        const auto& ops = s.operators(c);
        double sum = 0.0, w = 0.0;
        for (std::size_t j = 0; j < ops.rule.size(); ++j) {
            sum += ops.rule.weights[j] * value(s.point_offset(c) + j);
            w += ops.rule.weights[j];
        }
        out[c] = sum / w;
    }
    return out;
}

inline std::vector<double> cell_mean_trace(const Solver& s, const GlobalState& st)
{
    return cell_means(s, [&](std::size_t q) { return mandel::trace(st.stress[q]); });
}

inline std::vector<double> cell_mean_plastic_strain(const Solver& s, const GlobalState& st)
{
    return cell_means(s, [&](std::size_t q) { return st.states[q].p; });
}

// Vertex displacement averaged over the reconstructions of adjacent cells.
inline std::vector<Point> vertex_displacements(const Solver& s, const GlobalState& st)
{
    const Mesh& m = s.mesh();
    std::vector<Point> u(m.num_vertices(), Point::Zero());
    std::vector<int> cnt(m.num_vertices(), 0);
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
        const Vector dofs = s.local_dofs(st, c);
        for (auto v : m.cell(c).vertices) {
            u[v] += reconstructed_displacement(s.operators(c), dofs, m.vertex(v));
            ++cnt[v];
        }
    }
    for (std::size_t v = 0; v < u.size(); ++v)
        if (cnt[v])
            u[v] /= double(cnt[v]);
    return u;
}

// Mean normal displacement over faces carrying `tag`.
inline double mean_normal_displacement(const Solver& s, const Vector& faces, const std::string& tag)
{
    const Mesh& m = s.mesh();
    const int d = m.dimension();
    const Index Nf = Index(s.layout().face_scalar());
    double num = 0.0, area = 0.0;
    for (std::size_t f = 0; f < m.num_faces(); ++f) {
        const Face& face = m.face(f);
        if (!face.is_boundary() || face.tag != tag)
            continue;
        const auto q = face_quadrature(m, f, s.layout().k);
        for (std::size_t p = 0; p < q.size(); ++p) {
            const Vector psi = s.face_basis_of(f).eval(q.points[p]);
            double un = 0.0;
            for (int a = 0; a < d; ++a)
                un += face.normal[a] * psi.dot(faces.segment(s.dof(f, a, 0), Nf));
            num += q.weights[p] * un;
        }
        area += face.measure;
    }
    if (area == 0.0)
        throw DomainError("no boundary face carries tag '" + tag + "'");
    return num / area;
}

// Radial and hoop stresses at the behaviour points (sphere centred at the origin).
struct SphereCloud {
    std::vector<double> r, rr, tt;
};

inline SphereCloud sphere_cloud(const Solver& s, const GlobalState& st)
{
    SphereCloud cl;
    const auto pts = behaviour_points(s);
    for (std::size_t q = 0; q < pts.size(); ++q) {
        const double r = pts[q].norm();
        const Point n = pts[q] / r;
        const Eigen::Matrix3d sig = mandel::to_matrix(st.stress[q]);
        const double srr = n.dot(sig * n);
        cl.r.push_back(r);
        cl.rr.push_back(srr);
        cl.tt.push_back(0.5 * (sig.trace() - srr));
    }
    return cl;
}

// Stacked (sigma_rr, sigma_tt) RMS error relative to the RMS of the analytic values,
// over points with |r - R_p| >= band.
inline double sphere_rms_error(const SphereCloud& cl, const SphereParams& sp, double P, double band = 5.0)
{
    const double rp = plastic_radius(sp, P);
    double e2 = 0.0, r2 = 0.0;
    for (std::size_t q = 0; q < cl.r.size(); ++q) {
        if (std::abs(cl.r[q] - rp) < band)
            continue;
        const auto ex = sphere_stress(sp, P, std::clamp(cl.r[q], sp.r_in, sp.r_out));
        e2 += std::pow(cl.rr[q] - ex.rr, 2) + std::pow(cl.tt[q] - ex.tt, 2);
        r2 += ex.rr * ex.rr + ex.tt * ex.tt;
    }
    return std::sqrt(e2 / r2);
}

// RMS of the pointwise difference of two clouds on the same points, relative to the RMS of b.
inline double cloud_rms_difference(const SphereCloud& a, const SphereCloud& b)
{
    if (a.r.size() != b.r.size())
        throw ContractViolation("clouds differ in size");
    double e2 = 0.0, r2 = 0.0;
    for (std::size_t q = 0; q < a.r.size(); ++q) {
        e2 += std::pow(a.rr[q] - b.rr[q], 2) + std::pow(a.tt[q] - b.tt[q], 2);
        r2 += b.rr[q] * b.rr[q] + b.tt[q] * b.tt[q];
    }
    return std::sqrt(e2 / r2);
}

// Analytic-vs-discrete comparison on the same radial grid for clouds with different points.
inline double sphere_profile_difference(const SphereCloud& a, const SphereCloud& b, const SphereParams& sp, int bins = 20)
{
    auto binned = [&](const SphereCloud& c) {
        std::vector<double> rr(std::size_t(bins), 0.0), tt(std::size_t(bins), 0.0), n(std::size_t(bins), 0.0);
        for (std::size_t q = 0; q < c.r.size(); ++q) {
            int i = int((c.r[q] - sp.r_in) / (sp.r_out - sp.r_in) * bins);
            i = std::clamp(i, 0, bins - 1);
            rr[std::size_t(i)] += c.rr[q];
            tt[std::size_t(i)] += c.tt[q];
            n[std::size_t(i)] += 1.0;
        }
        for (std::size_t i = 0; i < rr.size(); ++i)
            if (n[i] > 0) {
                rr[i] /= n[i];
                tt[i] /= n[i];
            }
        return std::make_pair(rr, tt);
    };
    const auto [ar, at] = binned(a);
    const auto [br, bt] = binned(b);
    double e2 = 0.0, r2 = 0.0;
    for (std::size_t i = 0; i < ar.size(); ++i) {
        e2 += std::pow(ar[i] - br[i], 2) + std::pow(at[i] - bt[i], 2);
        r2 += br[i] * br[i] + bt[i] * bt[i];
    }
    return std::sqrt(e2 / r2);
}

// Sign-oscillation witness for a per-cell field: interior cells (no boundary
// face) that are strict local extrema among their face neighbours by more than
// `margin`. The reference count is that of the field after `sweeps` damped
// neighbour-averaging passes (half weight on the cell), which annihilate the
// checkerboard mode and keep the large-scale shape.
struct OscillationReport {
    std::size_t count = 0;
    std::size_t reference = 0;
    double margin = 0.0;
    bool pass = false;
};

// Interior cells that are strict extrema (by margin) over their face neighbours
// and touch a face neighbour that is a strict extremum of the opposite kind.
// Sign alternation between neighbours separates oscillations from valleys and
// ridges lying across the mesh directions.
inline std::size_t oscillating_cells(const Mesh& m, const std::vector<double>& v, double margin)
{
    // +1 strict maximum, -1 strict minimum, 0 otherwise or at the boundary.
    std::vector<int> kind(m.num_cells(), 0);
    auto other = [&](const Face& face, std::size_t c) {
        return std::size_t(face.cells[0]) == c ? std::size_t(face.cells[1]) : std::size_t(face.cells[0]);
    };
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
        bool interior = true, is_max = true, is_min = true;
        for (auto f : m.cell(c).faces) {
            const Face& face = m.face(f);
            if (face.is_boundary()) {
                interior = false;
                break;
            }
            const std::size_t o = other(face, c);
            is_max = is_max && v[c] > v[o] + margin;
            is_min = is_min && v[c] < v[o] - margin;
        }
        kind[c] = interior ? (is_max ? 1 : is_min ? -1 : 0) : 0;
    }
    std::size_t n = 0;
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
        if (!kind[c])
            continue;
        bool alternates = false;
        for (auto f : m.cell(c).faces)
            alternates = alternates || kind[other(m.face(f), c)] == -kind[c];
        n += alternates ? 1 : 0;
    }
    return n;
}

inline std::vector<double> smooth_cell_field(const Mesh& m, std::vector<double> v, int sweeps)
{
    for (int s = 0; s < sweeps; ++s) {
        std::vector<double> next(v.size());
        for (std::size_t c = 0; c < m.num_cells(); ++c) {
            double sum = 0.0;
            int n = 0;
            for (auto f : m.cell(c).faces) {
                const Face& face = m.face(f);
                if (face.is_boundary())
                    continue;
                const std::size_t o = std::size_t(face.cells[0]) == c ? std::size_t(face.cells[1]) : std::size_t(face.cells[0]);
                sum += v[o];
                ++n;
            }
            next[c] = n ? 0.5 * (v[c] + sum / n) : v[c];
        }
        v = std::move(next);
    }
    return v;
}

inline OscillationReport trace_oscillation(const Mesh& m, const std::vector<double>& field, int sweeps = 3)
{
    OscillationReport r;
    const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
    // Expected neighbour difference of a field varying over its full range across the mesh.
    const double cells_across = std::pow(double(m.num_cells()), 1.0 / m.dimension());
    r.margin = 0.5 * (*hi - *lo) / cells_across;
    r.count = oscillating_cells(m, field, r.margin);
    r.reference = oscillating_cells(m, smooth_cell_field(m, field, sweeps), r.margin);
    r.pass = r.count <= 2 * r.reference;
    return r;
}

// ---------------------------------------------------------------- convergence study

// Manufactured displacement with its gradient; the body force follows from the material.
struct ManufacturedSolution {
    std::function<Point(const Point&)> u;
    std::function<Eigen::Matrix3d(const Point&)> grad;
    std::function<Point(const Point&, const MaterialParams&)> body_force;
};

// Divergence-free plane field u = (sin(pi x) cos(pi y), -cos(pi x) sin(pi y)); f = 2 pi^2 mu u.
inline ManufacturedSolution solenoidal_solution()
{
    ManufacturedSolution ms;
    ms.u = [](const Point& x) {
        return Point(std::sin(pi * x.x()) * std::cos(pi * x.y()), -std::cos(pi * x.x()) * std::sin(pi * x.y()), 0.0);
    };
    ms.grad = [](const Point& x) {
        const double sx = std::sin(pi * x.x()), cx = std::cos(pi * x.x());
        const double sy = std::sin(pi * x.y()), cy = std::cos(pi * x.y());
        Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
        g << pi * cx * cy, -pi * sx * sy, 0, pi * sx * sy, -pi * cx * cy, 0, 0, 0, 0;
        return g;
    };
    ms.body_force = [u = ms.u](const Point& x, const MaterialParams& mp) {
        return Point(2.0 * pi * pi * mp.mu() * u(x));
    };
    return ms;
}

// Generic plane field with nonzero divergence; f = -div sigma by second derivatives.
inline ManufacturedSolution polynomial_trig_solution()
{
    ManufacturedSolution ms;
    ms.u = [](const Point& x) {
        return Point(std::sin(pi * x.x()) * std::sin(pi * x.y()), x.x() * x.x() * x.y() - 0.5 * x.y() * x.y(), 0.0);
    };
    ms.grad = [](const Point& x) {
        Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
        g(0, 0) = pi * std::cos(pi * x.x()) * std::sin(pi * x.y());
        g(0, 1) = pi * std::sin(pi * x.x()) * std::cos(pi * x.y());
        g(1, 0) = 2.0 * x.x() * x.y();
        g(1, 1) = x.x() * x.x() - x.y();
        return g;
    };
    ms.body_force = [](const Point& x, const MaterialParams& mp) {
        const double mu = mp.mu(), lam = mp.lambda();
        const double s = std::sin(pi * x.x()) * std::sin(pi * x.y());
        const double cc = std::cos(pi * x.x()) * std::cos(pi * x.y());
        // u1 = sin sin, u2 = x^2 y - y^2/2.
        const double lap1 = -2.0 * pi * pi * s, lap2 = 2.0 * x.y() - 1.0;
        // div u = pi cos(pi x) sin(pi y) + x^2 - y.
        const double ddx = -pi * pi * s + 2.0 * x.x();
        const double ddy = pi * pi * cc - 1.0;
        return Point(-(mu * lap1 + (lam + mu) * ddx), -(mu * lap2 + (lam + mu) * ddy), 0.0);
    };
    return ms;
}

struct ConvergenceLevel {
    int n = 0;
    double h = 0.0;
    Index dofs = 0;
    double error = 0.0;
};

struct ConvergenceTable {
    std::vector<ConvergenceLevel> levels;
    double rate = 0.0; // least-squares slope of log(error) against log(h)
};

// Energy error (sum_T (C e, e)_T)^{1/2} with e = grad^s u - E_T(u_h).
inline double energy_error(const Solver& s, const GlobalState& st, const ManufacturedSolution& ms)
{
    const Mesh& m = s.mesh();
    const int d = m.dimension();
    const TangentModulus C = elastic_tangent(s.setup().material);
    double e2 = 0.0;
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
        const Vector dofs = s.local_dofs(st, c);
        const auto q = cell_quadrature(m, c, 2 * s.layout().k + 6);
        for (std::size_t p = 0; p < q.size(); ++p) {
            Eigen::Matrix3d g = ms.grad(q.points[p]);
            if (d == 2) {
                g.row(2).setZero();
                g.col(2).setZero();
            }
            const SymTensor e = mandel::from_matrix(0.5 * (g + g.transpose())) -
                                reconstructed_strain(s.operators(c), dofs, q.points[p]);
            e2 += q.weights[p] * e.dot(C * e);
        }
    }
    return std::sqrt(e2);
}

inline double least_squares_rate(const std::vector<ConvergenceLevel>& lv)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(lv.size());
    for (const auto& l : lv) {
        const double x = std::log(l.h), y = std::log(l.error);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Elastic solves on the unit square with Dirichlet data from the exact field.
inline ConvergenceTable convergence_study(const ManufacturedSolution& ms, int k, int l, ElementType type, double nu,
                                          const std::vector<int>& divisions = {4, 8, 16, 32}, double E = 1.0)
{
    ConvergenceTable t;
    for (int n : divisions) {
        ProblemSetup s;
        s.mesh = std::make_shared<Mesh>(generate_structured(Point(0, 0, 0), Point(1, 1, 0), {n, n, 1}, type));
        s.layout = LocalDofLayout(2, k, l);
        s.material.E = E;
        s.material.nu = nu;
        s.material.sigma_y0 = std::numeric_limits<double>::max() / 1e10;
        const MaterialParams mp = s.material;
        for (const auto& tag : s.mesh->boundary_tags())
            s.dirichlet.push_back({tag, {true, true, true}, [u = ms.u](const Point& x, double) { return u(x); }});
        s.body_force = [f = ms.body_force, mp](const Point& x, double) { return f(x, mp); };
        s.load_factors = {1.0};
        const Solver sol(s);
        GlobalState st = sol.initial_state();
        const auto h = sol.run(st, {}, false);
        if (!h.completed())
            throw NumericalError("elastic convergence solve failed");
        ConvergenceLevel lv;
        lv.n = n;
        lv.h = 1.0 / n;
        lv.dofs = sol.num_face_dofs();
        lv.error = energy_error(sol, st, ms);
        t.levels.push_back(lv);
    }
    t.rate = least_squares_rate(t.levels);
    return t;
}

// ---------------------------------------------------------------- benchmark driver

struct BenchmarkResult {
    SolveHistory history;
    bool limit_load_reached = false;
    std::vector<std::string> files;
    std::map<std::string, double> summary;
};

// Runs a benchmark on the given mesh and writes CSV (and optionally VTK) output
// into out_dir with prefix `<name>_`. Empty out_dir writes nothing.
inline BenchmarkResult run_benchmark(BenchmarkKind kind, std::shared_ptr<const Mesh> mesh, const BenchmarkOptions& o,
                                     const std::string& out_dir = "", bool vtk = false)
{
    ProblemSetup setup;
    switch (kind) {
    case BenchmarkKind::sphere: setup = sphere_problem(mesh, o); break;
    case BenchmarkKind::cook: setup = cook_problem(mesh, o); break;
    case BenchmarkKind::strip: setup = strip_problem(mesh, o); break;
    case BenchmarkKind::cube: setup = cube_problem(mesh, o); break;
    }
    const Solver sol(setup);
    GlobalState st = sol.initial_state();
    BenchmarkResult res;
    std::vector<std::vector<double>> curve;
    std::vector<std::string> curve_header;
    const SphereParams sp;
    std::optional<GlobalState> sphere_at_300;
    switch (kind) {
    case BenchmarkKind::sphere: curve_header = {"step", "pressure", "mean_outer_radial_displacement", "iterations"}; break;
    case BenchmarkKind::cook: curve_header = {"step", "load_factor", "force", "uy_A", "iterations"}; break;
    case BenchmarkKind::strip:
        curve_header = {"step", "load_factor", "delta", "ux_A", "uy_A", "ux_B", "uy_B", "iterations"};
        break;
    case BenchmarkKind::cube: curve_header = {"step", "load_factor", "pressure", "mean_load_uz", "iterations"}; break;
    }
    auto on_step = [&](const GlobalState& g, const StepReport& r) {
        const double t = r.load_factor;
        const double it = double(r.iterations);
        switch (kind) {
        case BenchmarkKind::sphere:
            curve.push_back({double(r.step), t, mean_normal_displacement(sol, g.faces, "outer"), it});
            if (std::abs(t - 300.0) < 1e-9)
                sphere_at_300 = g;
            break;
        case BenchmarkKind::cook:
            curve.push_back({double(r.step), t, 1.8 * t, probe_displacement(sol, g.faces, Point(48, 60, 0)).y(), it});
            break;
        case BenchmarkKind::strip: {
            const Point a = probe_displacement(sol, g.faces, Point(50, 0, 0));
            const Point b = probe_displacement(sol, g.faces, Point(0, 50, 0));
            curve.push_back({double(r.step), t, 5.0 * t, a.x(), a.y(), b.x(), b.y(), it});
            break;
        }
        case BenchmarkKind::cube:
            curve.push_back({double(r.step), t, 350.0 * t, -mean_normal_displacement(sol, g.faces, "load"), it});
            break;
        }
    };
    res.history = sol.run(st, on_step, false);
    res.limit_load_reached = !res.history.completed();
    res.summary["steps_converged"] = double(res.history.steps.size());
    res.summary["total_iterations"] = double(res.history.total_iterations);
    res.summary["last_converged_load"] = res.history.last_converged_load();
    res.summary["dofs"] = double(sol.num_face_dofs());
    // Response column: outer displacement (sphere), probe or patch displacement otherwise.
    const std::size_t col = kind == BenchmarkKind::sphere ? 2 : 3;
    if (!curve.empty())
        res.summary["final_" + curve_header[col]] = curve.back()[col];
    if (kind == BenchmarkKind::sphere) {
        res.summary["last_converged_pressure"] = res.history.last_converged_load();
        if (sphere_at_300)
            res.summary["rms_error_300"] = sphere_rms_error(sphere_cloud(sol, *sphere_at_300), sp, 300.0);
    }
    if (kind == BenchmarkKind::strip) {
        const auto pm = cell_mean_plastic_strain(sol, st);
        const std::size_t c = std::size_t(std::max_element(pm.begin(), pm.end()) - pm.begin());
        bool at_hole = false;
        for (auto f : sol.mesh().cell(c).faces)
            at_hole = at_hole || sol.mesh().face(f).tag == "hole";
        res.summary["max_p"] = pm[c];
        res.summary["max_p_at_hole"] = at_hole ? 1.0 : 0.0;
    }
    const auto osc = trace_oscillation(sol.mesh(), cell_mean_trace(sol, st));
    res.summary["trace_oscillations"] = double(osc.count);
    res.summary["trace_oscillations_reference"] = double(osc.reference);
    if (out_dir.empty())
        return res;
    std::filesystem::create_directories(out_dir);
    const std::string prefix = out_dir + "/" + to_string(kind) + "_";
    write_csv(prefix + "load_curve.csv", curve_header, curve);
    res.files.push_back(prefix + "load_curve.csv");
    {
        auto out = open_output(prefix + "steps.csv");
        write_step_csv(res.history, out);
        res.files.push_back(prefix + "steps.csv");
    }
    // Quadrature-point stresses at the last converged step (sphere: at P = 300 when reached).
    const GlobalState& qs = (kind == BenchmarkKind::sphere && sphere_at_300) ? *sphere_at_300 : st;
    const auto pts = behaviour_points(sol);
    std::vector<std::vector<double>> rows;
    if (kind == BenchmarkKind::sphere) {
        const auto cl = sphere_cloud(sol, qs);
        const double P = sphere_at_300 ? 300.0 : qs.load_factor;
        for (std::size_t q = 0; q < pts.size(); ++q) {
            const auto ex = P > 0 && P < limit_load(sp) ? sphere_stress(sp, P, std::clamp(cl.r[q], sp.r_in, sp.r_out))
                                                        : SphereStress{};
            rows.push_back({cl.r[q], cl.rr[q], cl.tt[q], ex.rr, ex.tt, mandel::trace(qs.stress[q])});
        }
        write_csv(prefix + "stress_cloud.csv", {"r", "sigma_rr", "sigma_tt", "exact_rr", "exact_tt", "trace"}, rows);
    } else {
        for (std::size_t q = 0; q < pts.size(); ++q)
            rows.push_back({pts[q].x(), pts[q].y(), pts[q].z(), mandel::trace(qs.stress[q]), qs.states[q].p});
        write_csv(prefix + "stress_cloud.csv", {"x", "y", "z", "trace", "p"}, rows);
    }
    res.files.push_back(prefix + "stress_cloud.csv");
    {
        auto out = open_output(prefix + "summary.csv");
        out << "quantity,value\n";
        for (const auto& [k, v] : res.summary)
            out << k << "," << v << "\n";
        res.files.push_back(prefix + "summary.csv");
    }
    if (vtk) {
        const auto u = vertex_displacements(sol, st);
        Field disp{"displacement", 3, {}};
        for (const auto& p : u)
            disp.values.insert(disp.values.end(), {p.x(), p.y(), p.z()});
        Field p{"p", 1, cell_mean_plastic_strain(sol, st)};
        Field tr{"trace_sigma", 1, cell_mean_trace(sol, st)};
        write_vtk(sol.mesh(), {p, tr}, prefix + "fields.vtk", {disp});
        res.files.push_back(prefix + "fields.vtk");
        Field qp{"p", 1, {}}, qt{"trace_sigma", 1, {}};
        for (std::size_t q = 0; q < pts.size(); ++q) {
            qp.values.push_back(st.states[q].p);
            qt.values.push_back(mandel::trace(st.stress[q]));
        }
        write_vtk_points(pts, {qp, qt}, prefix + "points.vtk");
        res.files.push_back(prefix + "points.vtk");
    }
    return res;
}

} // namespace hho
