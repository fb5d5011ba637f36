#pragma once

#include "quadrature.hpp"

#include <Eigen/Cholesky>

#include <array>
#include <functional>
#include <vector>

namespace hho {

using Exponent = std::array<int, 3>;

// Monomial exponents ordered by total degree, then lexicographically
// descending in the leading variable. Lower-degree spaces are prefixes.
inline std::vector<Exponent> monomial_exponents(int vars, int degree)
{
    std::vector<Exponent> out;
    for (int deg = 0; deg <= degree; ++deg) {
        if (vars == 0) {
            if (deg == 0)
                out.push_back({0, 0, 0});
            continue;
        }
        if (vars == 1) {
            out.push_back({deg, 0, 0});
        } else if (vars == 2) {
            for (int a = deg; a >= 0; --a)
                out.push_back({a, deg - a, 0});
        } else {
            for (int a = deg; a >= 0; --a)
                for (int b = deg - a; b >= 0; --b)
                    out.push_back({a, b, deg - a - b});
        }
    }
    return out;
}

enum class EntityKind { cell, face };

struct BasisSpec {
    EntityKind kind = EntityKind::cell;
    int degree = 0;
    int vars = 2;          // number of variables (d for cells, d-1 for faces)
    std::size_t size = 1;  // C(degree + vars, vars)
    Point center = Point::Zero();
    double diameter = 1.0;
};

// Scaled translated monomials ((x - center) / h)^alpha in local coordinates.
// Face bases use an orthonormal tangent frame of the face.
class ScaledMonomials {
public:
    ScaledMonomials() = default;
    ScaledMonomials(EntityKind kind, int vars, int degree, const Point& center, double h,
                    const Eigen::Matrix3d& frame = Eigen::Matrix3d::Identity())
        : frame_(frame), exps_(monomial_exponents(vars, degree))
    {
        spec_.kind = kind;
        spec_.degree = degree;
        spec_.vars = vars;
        spec_.size = exps_.size();
        spec_.center = center;
        spec_.diameter = h;
    }

    const BasisSpec& spec() const { return spec_; }
    std::size_t size() const { return exps_.size(); }
    int degree() const { return spec_.degree; }
    const std::vector<Exponent>& exponents() const { return exps_; }

    Eigen::Vector3d local(const Point& x) const { return frame_ * (x - spec_.center) / spec_.diameter; }

    Vector eval(const Point& x) const
    {
        Vector v(size());
        eval(x, v);
        return v;
    }

    void eval(const Point& x, Eigen::Ref<Vector> out) const
    {
        const auto pw = powers(local(x));
        for (std::size_t i = 0; i < exps_.size(); ++i)
            out[Index(i)] = pw[0][exps_[i][0]] * pw[1][exps_[i][1]] * pw[2][exps_[i][2]];
    }

    // Physical-space gradients, one row per basis function (size x 3).
    Matrix eval_grad(const Point& x) const
    {
        Matrix g(size(), 3);
        eval_grad(x, g);
        return g;
    }

    void eval_grad(const Point& x, Eigen::Ref<Matrix> g) const
    {
        const auto pw = powers(local(x));
        const double ih = 1.0 / spec_.diameter;
        for (std::size_t i = 0; i < exps_.size(); ++i) {
            const auto& e = exps_[i];
            Eigen::Vector3d gl;
            for (int a = 0; a < 3; ++a) {
                if (e[a] == 0) {
                    gl[a] = 0.0;
                    continue;
                }
                double v = e[a] * ih;
                for (int b = 0; b < 3; ++b)
                    v *= (b == a) ? pw[b][e[b] - 1] : pw[b][e[b]];
                gl[a] = v;
            }
            g.row(Index(i)) = (frame_.transpose() * gl).transpose();
        }
    }

private:
    std::array<std::array<double, 16>, 3> powers(const Eigen::Vector3d& y) const
    {
        std::array<std::array<double, 16>, 3> pw{};
        for (int a = 0; a < 3; ++a) {
            pw[a][0] = 1.0;
            for (int p = 1; p <= spec_.degree && p < 16; ++p)
                pw[a][p] = pw[a][p - 1] * y[a];
        }
        return pw;
    }

    BasisSpec spec_;
    Eigen::Matrix3d frame_ = Eigen::Matrix3d::Identity();
    std::vector<Exponent> exps_;
};

inline ScaledMonomials cell_basis(const Mesh& m, std::size_t cell, int degree)
{
    const Cell& c = m.cell(cell);
    return ScaledMonomials(EntityKind::cell, m.dimension(), degree, c.barycenter, c.diameter);
}

// Orthonormal frame whose first d-1 rows span the face.
inline Eigen::Matrix3d face_frame(const Mesh& m, std::size_t face)
{
    const Face& f = m.face(face);
    Eigen::Matrix3d fr = Eigen::Matrix3d::Zero();
    if (m.dimension() == 2) {
        fr.row(0) = Point(-f.normal.y(), f.normal.x(), 0.0).transpose();
        fr.row(1) = f.normal.transpose();
        fr(2, 2) = 1.0;
        return fr;
    }
    Point t1 = m.vertex(f.vertices[1]) - m.vertex(f.vertices[0]);
    t1 -= t1.dot(f.normal) * f.normal;
    t1.normalize();
    const Point t2 = f.normal.cross(t1);
    fr.row(0) = t1.transpose();
    fr.row(1) = t2.transpose();
    fr.row(2) = f.normal.transpose();
    return fr;
}

inline ScaledMonomials face_basis(const Mesh& m, std::size_t face, int degree)
{
    const Face& f = m.face(face);
    return ScaledMonomials(EntityKind::face, m.dimension() - 1, degree, f.barycenter, f.diameter,
                           face_frame(m, face));
}

// Gram matrix on the rule; throws if not positive definite.
inline Matrix mass_matrix(const ScaledMonomials& basis, const QuadratureRule& rule)
{
    const Index n = Index(basis.size());
    Matrix M = Matrix::Zero(n, n);
    Vector phi(n);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        basis.eval(rule.points[q], phi);
        M.selfadjointView<Eigen::Lower>().rankUpdate(phi, rule.weights[q]);
    }
    M = M.selfadjointView<Eigen::Lower>();
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success)
        throw NumericalError("mass matrix is not positive definite");
    return M;
}

// L2 projection of a scalar function; returns basis coefficients.
inline Vector l2_project(const ScaledMonomials& basis, const QuadratureRule& rule,
                         const std::function<double(const Point&)>& f)
{
    const Index n = Index(basis.size());
    Matrix M = mass_matrix(basis, rule);
    Vector rhs = Vector::Zero(n);
    Vector phi(n);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        basis.eval(rule.points[q], phi);
        rhs += rule.weights[q] * f(rule.points[q]) * phi;
    }
    return M.llt().solve(rhs);
}

// Component-major vector projection: coefficient (a, i) at a * size + i.
inline Vector l2_project_vector(const ScaledMonomials& basis, const QuadratureRule& rule, int dim,
                                const std::function<Point(const Point&)>& f)
{
    const Index n = Index(basis.size());
    Matrix M = mass_matrix(basis, rule);
    Matrix rhs = Matrix::Zero(n, dim);
    Vector phi(n);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        basis.eval(rule.points[q], phi);
        const Point v = f(rule.points[q]);
        for (int a = 0; a < dim; ++a)
            rhs.col(a) += rule.weights[q] * v[a] * phi;
    }
    Matrix sol = M.llt().solve(rhs);
    Vector out(n * dim);
    for (int a = 0; a < dim; ++a)
        out.segment(a * n, n) = sol.col(a);
    return out;
}

inline double evaluate(const ScaledMonomials& basis, const Vector& coeffs, const Point& x)
{
    return basis.eval(x).dot(coeffs.head(Index(basis.size())));
}

inline Point evaluate_vector(const ScaledMonomials& basis, const Vector& coeffs, int dim, const Point& x)
{
    const Vector phi = basis.eval(x);
    const Index n = Index(basis.size());
    Point v = Point::Zero();
    for (int a = 0; a < dim; ++a)
        v[a] = phi.dot(coeffs.segment(a * n, n));
    return v;
}

} // namespace hho
