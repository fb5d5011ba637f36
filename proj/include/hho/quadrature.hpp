#pragma once

#include "mesh.hpp"

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <vector>

namespace hho {

struct QuadratureRule {
    std::vector<Point> points;
    std::vector<double> weights;
    int order = 0;

    std::size_t size() const { return points.size(); }
    double sum_weights() const
    {
        double s = 0.0;
        for (double w : weights)
            s += w;
        return s;
    }
    void append(const QuadratureRule& other)
    {
        points.insert(points.end(), other.points.begin(), other.points.end());
        weights.insert(weights.end(), other.weights.begin(), other.weights.end());
    }
};

namespace quadrature {

struct Rule1D {
    std::vector<double> x; // nodes on [0, 1]
    std::vector<double> w; // weights summing to 1
};

// n-point Gauss-Legendre on [0, 1], Newton iteration on the Legendre recurrence.
inline const Rule1D& gauss_legendre(int n)
{
    static std::mutex mtx;
    static std::map<int, Rule1D> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end())
        return it->second;
    Rule1D r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16)
                break;
        }
        double p0 = 1.0, p1 = 0.0;
        for (int j = 1; j <= n; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        r.x[n - 1 - i] = 0.5 * (1.0 + z);
        r.w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    return cache.emplace(n, std::move(r)).first->second;
}

inline int gauss_points_for(int order) { return std::max(1, (order + 2) / 2); }

// Barycentric simplex rule with weights summing to 1.
struct SimplexRule {
    std::vector<std::array<double, 4>> bary;
    std::vector<double> w;
};

namespace detail {

inline void orbit3(SimplexRule& r, double w) { r.bary.push_back({1.0 / 3, 1.0 / 3, 1.0 / 3, 0}); r.w.push_back(w); }

inline void orbit21(SimplexRule& r, double a, double w)
{
    const double b = 0.5 * (1.0 - a);
    for (auto p : {std::array<double, 4>{a, b, b, 0}, {b, a, b, 0}, {b, b, a, 0}}) {
        r.bary.push_back(p);
        r.w.push_back(w);
    }
}

inline void orbit111(SimplexRule& r, double a, double b, double w)
{
    const double c = 1.0 - a - b;
    for (auto p : {std::array<double, 4>{a, b, c, 0}, {a, c, b, 0}, {b, a, c, 0}, {b, c, a, 0}, {c, a, b, 0},
                   {c, b, a, 0}}) {
        r.bary.push_back(p);
        r.w.push_back(w);
    }
}

// Dunavant rules of degree 1, 2, 4, 5, 6, 8 (all weights positive).
inline SimplexRule dunavant(int degree)
{
    SimplexRule r;
    switch (degree) {
    case 1: orbit3(r, 1.0); break;
    case 2: orbit21(r, 2.0 / 3.0, 1.0 / 3.0); break;
    case 4:
        orbit21(r, 0.108103018168070, 0.223381589678011);
        orbit21(r, 0.816847572980459, 0.109951743655322);
        break;
    case 5:
        orbit3(r, 0.225);
        orbit21(r, 0.059715871789770, 0.132394152788506);
        orbit21(r, 0.797426985353087, 0.125939180544827);
        break;
    case 6:
        orbit21(r, 0.501426509658179, 0.116786275726379);
        orbit21(r, 0.873821971016996, 0.050844906370207);
        orbit111(r, 0.053145049844817, 0.310352451033784, 0.082851075618374);
        break;
    case 8:
        orbit3(r, 0.144315607677787);
        orbit21(r, 0.081414823414554, 0.095091634267285);
        orbit21(r, 0.658861384496480, 0.103217370534718);
        orbit21(r, 0.898905543365938, 0.032458497623198);
        orbit111(r, 0.008394777409958, 0.263112829634638, 0.027230314174435);
        break;
    default: throw NumericalError("no Dunavant rule of degree " + std::to_string(degree));
    }
    // Tabulated weights carry 15 digits; renormalize the sum exactly.
    double s = 0.0;
    for (double w : r.w)
        s += w;
    for (double& w : r.w)
        w /= s;
    return r;
}

// Collapsed (Duffy) Gauss rule on the triangle; degree q exact.
inline SimplexRule collapsed_triangle(int q)
{
    const auto& gu = gauss_legendre(gauss_points_for(q + 1));
    const auto& gv = gauss_legendre(gauss_points_for(q));
    SimplexRule r;
    for (std::size_t i = 0; i < gu.x.size(); ++i)
        for (std::size_t j = 0; j < gv.x.size(); ++j) {
            const double u = gu.x[i], v = gv.x[j];
            const double x = u, y = (1.0 - u) * v;
            r.bary.push_back({1.0 - x - y, x, y, 0.0});
            r.w.push_back(2.0 * gu.w[i] * gv.w[j] * (1.0 - u));
        }
    return r;
}

inline SimplexRule collapsed_tetrahedron(int q)
{
    const auto& gu = gauss_legendre(gauss_points_for(q + 2));
    const auto& gv = gauss_legendre(gauss_points_for(q + 1));
    const auto& gw = gauss_legendre(gauss_points_for(q));
    SimplexRule r;
    for (std::size_t i = 0; i < gu.x.size(); ++i)
        for (std::size_t j = 0; j < gv.x.size(); ++j)
            for (std::size_t l = 0; l < gw.x.size(); ++l) {
                const double u = gu.x[i], v = gv.x[j], t = gw.x[l];
                const double x = u, y = (1.0 - u) * v, z = (1.0 - u) * (1.0 - v) * t;
                r.bary.push_back({1.0 - x - y - z, x, y, z});
                r.w.push_back(6.0 * gu.w[i] * gv.w[j] * gw.w[l] * (1.0 - u) * (1.0 - u) * (1.0 - v));
            }
    return r;
}

} // namespace detail

inline const SimplexRule& triangle(int order)
{
    static std::mutex mtx;
    static std::map<int, SimplexRule> cache;
    std::lock_guard<std::mutex> lock(mtx);
    order = std::max(order, 1);
    auto it = cache.find(order);
    if (it != cache.end())
        return it->second;
    SimplexRule r;
    if (order <= 8) {
        static const int map[9] = {1, 1, 2, 4, 4, 5, 6, 8, 8};
        r = detail::dunavant(map[order]);
    } else {
        r = detail::collapsed_triangle(order);
    }
    return cache.emplace(order, std::move(r)).first->second;
}

inline const SimplexRule& tetrahedron(int order)
{
    static std::mutex mtx;
    static std::map<int, SimplexRule> cache;
    std::lock_guard<std::mutex> lock(mtx);
    order = std::max(order, 1);
    auto it = cache.find(order);
    if (it != cache.end())
        return it->second;
    SimplexRule r;
    if (order == 1) {
        r.bary.push_back({0.25, 0.25, 0.25, 0.25});
        r.w.push_back(1.0);
    } else if (order == 2) {
        const double a = (5.0 - std::sqrt(5.0)) / 20.0, b = (5.0 + 3.0 * std::sqrt(5.0)) / 20.0;
        for (int i = 0; i < 4; ++i) {
            std::array<double, 4> p{a, a, a, a};
            p[i] = b;
            r.bary.push_back(p);
            r.w.push_back(0.25);
        }
    } else {
        r = detail::collapsed_tetrahedron(order);
    }
    return cache.emplace(order, std::move(r)).first->second;
}

} // namespace quadrature

inline QuadratureRule segment_rule(const Point& a, const Point& b, int order)
{
    const auto& g = quadrature::gauss_legendre(quadrature::gauss_points_for(order));
    const double len = (b - a).norm();
    QuadratureRule r;
    r.order = order;
    for (std::size_t i = 0; i < g.x.size(); ++i) {
        r.points.push_back(a + g.x[i] * (b - a));
        r.weights.push_back(g.w[i] * len);
    }
    return r;
}

// measure may be signed (sub-simplex splitting); a valid star-shaped split keeps it positive.
inline QuadratureRule triangle_rule(const Point& a, const Point& b, const Point& c, int order, double measure)
{
    const auto& s = quadrature::triangle(order);
    QuadratureRule r;
    r.order = order;
    for (std::size_t i = 0; i < s.w.size(); ++i) {
        r.points.push_back(s.bary[i][0] * a + s.bary[i][1] * b + s.bary[i][2] * c);
        r.weights.push_back(s.w[i] * measure);
    }
    return r;
}

inline QuadratureRule triangle_rule(const Point& a, const Point& b, const Point& c, int order)
{
    return triangle_rule(a, b, c, order, 0.5 * (b - a).cross(c - a).norm());
}

inline double signed_tet_volume(const Point& a, const Point& b, const Point& c, const Point& d)
{
    return (b - a).cross(c - a).dot(d - a) / 6.0;
}

inline QuadratureRule tetra_rule(const Point& a, const Point& b, const Point& c, const Point& d, int order,
                                 double volume)
{
    const auto& s = quadrature::tetrahedron(order);
    QuadratureRule r;
    r.order = order;
    for (std::size_t i = 0; i < s.w.size(); ++i) {
        r.points.push_back(s.bary[i][0] * a + s.bary[i][1] * b + s.bary[i][2] * c + s.bary[i][3] * d);
        r.weights.push_back(s.w[i] * volume);
    }
    return r;
}

inline QuadratureRule tetra_rule(const Point& a, const Point& b, const Point& c, const Point& d, int order)
{
    return tetra_rule(a, b, c, d, order, std::abs(signed_tet_volume(a, b, c, d)));
}

// Bilinear map of a quadrilateral p0..p3 (loop order); exact for degree
// `order` integrands when the Jacobian is positive.
inline QuadratureRule quad_rule(const std::array<Point, 4>& p, int order, const Point& normal)
{
    const Point skew = p[0] + p[2] - p[1] - p[3];
    const double h = std::max((p[2] - p[0]).norm(), (p[3] - p[1]).norm());
    const bool affine = skew.norm() <= 1e-14 * h;
    const auto& g = quadrature::gauss_legendre(quadrature::gauss_points_for(affine ? order : order + 1));
    QuadratureRule r;
    r.order = order;
    for (std::size_t i = 0; i < g.x.size(); ++i)
        for (std::size_t j = 0; j < g.x.size(); ++j) {
            const double s = g.x[i], t = g.x[j];
            const Point x = (1 - s) * (1 - t) * p[0] + s * (1 - t) * p[1] + s * t * p[2] + (1 - s) * t * p[3];
            const Point ds = (1 - t) * (p[1] - p[0]) + t * (p[2] - p[3]);
            const Point dt = (1 - s) * (p[3] - p[0]) + s * (p[2] - p[1]);
            r.points.push_back(x);
            r.weights.push_back(g.w[i] * g.w[j] * ds.cross(dt).dot(normal));
        }
    return r;
}

namespace detail {

inline bool quad_is_convex(const std::array<Point, 4>& p, const Point& normal)
{
    for (int i = 0; i < 4; ++i) {
        const Point& a = p[(i + 3) % 4];
        const Point& b = p[i];
        const Point& c = p[(i + 1) % 4];
        if ((b - a).cross(c - b).dot(normal) <= 0)
            return false;
    }
    return true;
}

inline bool is_axis_box(const Mesh& m, const Cell& c, Point& lo, Point& hi)
{
    lo = Point::Constant(1e300);
    hi = Point::Constant(-1e300);
    for (auto v : c.vertices) {
        lo = lo.cwiseMin(m.vertex(v));
        hi = hi.cwiseMax(m.vertex(v));
    }
    const double tol = 1e-12 * c.diameter;
    for (auto v : c.vertices)
        for (int a = 0; a < 3; ++a) {
            const double x = m.vertex(v)[a];
            if (std::abs(x - lo[a]) > tol && std::abs(x - hi[a]) > tol)
                return false;
        }
    const double vol = (hi - lo).prod();
    return std::abs(vol - c.measure) <= 1e-12 * vol;
}

} // namespace detail

// Positive-weight rule exact to `order` on the given cell.
inline QuadratureRule cell_quadrature(const Mesh& m, std::size_t cell, int order)
{
    const Cell& c = m.cell(cell);
    order = std::max(order, 0);
    QuadratureRule r;
    r.order = order;
    if (m.dimension() == 2) {
        const Point ez(0, 0, 1);
        if (c.shape == CellShape::triangle && c.vertices.size() == 3)
            return triangle_rule(m.vertex(c.vertices[0]), m.vertex(c.vertices[1]), m.vertex(c.vertices[2]), order,
                                 c.measure);
        if (c.shape == CellShape::quadrilateral && c.vertices.size() == 4) {
            std::array<Point, 4> p{m.vertex(c.vertices[0]), m.vertex(c.vertices[1]), m.vertex(c.vertices[2]),
                                   m.vertex(c.vertices[3])};
            if (detail::quad_is_convex(p, ez))
                return quad_rule(p, order, ez);
        }
        for (std::size_t i = 0; i < c.faces.size(); ++i) {
            const Face& f = m.face(c.faces[i]);
            Point a = m.vertex(f.vertices[0]), b = m.vertex(f.vertices[1]);
            if (c.orientation[i] < 0)
                std::swap(a, b);
            const double area = 0.5 * (a - c.barycenter).cross(b - c.barycenter).z();
            auto sub = triangle_rule(c.barycenter, a, b, order, area);
            r.append(sub);
        }
        return r;
    }
    if (c.shape == CellShape::tetrahedron) {
        const auto& v = c.vertices;
        return tetra_rule(m.vertex(v[0]), m.vertex(v[1]), m.vertex(v[2]), m.vertex(v[3]), order, c.measure);
    }
    if (c.shape == CellShape::hexahedron) {
        Point lo, hi;
        if (detail::is_axis_box(m, c, lo, hi)) {
            const auto& g = quadrature::gauss_legendre(quadrature::gauss_points_for(order));
            const Point ext = hi - lo;
            const double vol = ext.prod();
            for (std::size_t i = 0; i < g.x.size(); ++i)
                for (std::size_t j = 0; j < g.x.size(); ++j)
                    for (std::size_t l = 0; l < g.x.size(); ++l) {
                        r.points.push_back(lo + Point(g.x[i] * ext.x(), g.x[j] * ext.y(), g.x[l] * ext.z()));
                        r.weights.push_back(g.w[i] * g.w[j] * g.w[l] * vol);
                    }
            return r;
        }
    }
    for (std::size_t i = 0; i < c.faces.size(); ++i) {
        const Face& f = m.face(c.faces[i]);
        const auto& fv = f.vertices;
        const std::size_t n = fv.size();
        for (std::size_t j = 0; j < n; ++j) {
            Point a = m.vertex(fv[j]), b = m.vertex(fv[(j + 1) % n]);
            if (c.orientation[i] < 0)
                std::swap(a, b);
            const double vol = signed_tet_volume(c.barycenter, f.barycenter, a, b);
            r.append(tetra_rule(c.barycenter, f.barycenter, a, b, order, vol));
        }
    }
    return r;
}

inline QuadratureRule face_quadrature(const Mesh& m, std::size_t face, int order)
{
    const Face& f = m.face(face);
    order = std::max(order, 0);
    if (m.dimension() == 2)
        return segment_rule(m.vertex(f.vertices[0]), m.vertex(f.vertices[1]), order);
    const auto& fv = f.vertices;
    if (fv.size() == 3)
        return triangle_rule(m.vertex(fv[0]), m.vertex(fv[1]), m.vertex(fv[2]), order, f.measure);
    if (fv.size() == 4) {
        std::array<Point, 4> p{m.vertex(fv[0]), m.vertex(fv[1]), m.vertex(fv[2]), m.vertex(fv[3])};
        if (detail::quad_is_convex(p, f.normal))
            return quad_rule(p, order, f.normal);
    }
    QuadratureRule r;
    r.order = order;
    for (std::size_t j = 0; j < fv.size(); ++j) {
        const Point& a = m.vertex(fv[j]);
        const Point& b = m.vertex(fv[(j + 1) % fv.size()]);
        const double area = 0.5 * (a - f.barycenter).cross(b - f.barycenter).dot(f.normal);
        r.append(triangle_rule(f.barycenter, a, b, order, area));
    }
    return r;
}

} // namespace hho
