#pragma once

#include "basis.hpp"
#include "material.hpp"

#include <Eigen/LU>

#include <cmath>
#include <functional>
#include <vector>

namespace hho {

// Face degree k, cell degree l in {k-1, k, k+1}; local ordering is the cell
// block then faces in cell-local order, each block component-major.
struct LocalDofLayout {
    int dim = 2;
    int k = 1;
    int l = 1;

    LocalDofLayout() = default;
    LocalDofLayout(int d, int face_degree, int cell_degree) : dim(d), k(face_degree), l(cell_degree) { validate(); }

    void validate() const
    {
        if (dim != 2 && dim != 3)
            throw DomainError("dimension must be 2 or 3");
        if (k < 1)
            throw DomainError("face degree k must be >= 1");
        if (l < k - 1 || l > k + 1)
            throw DomainError("cell degree l must lie in {k-1, k, k+1}");
        if (k == 1 && l == 0)
            throw DomainError("(k, l) = (1, 0) cannot control rigid-body motions");
    }

    std::size_t cell_scalar() const { return poly_dim(dim, l); }
    std::size_t face_scalar() const { return poly_dim(dim - 1, k); }
    std::size_t cell_dofs() const { return std::size_t(dim) * cell_scalar(); }
    std::size_t face_dofs() const { return std::size_t(dim) * face_scalar(); }
    std::size_t local_size(std::size_t num_faces) const { return cell_dofs() + num_faces * face_dofs(); }
    std::size_t face_offset(std::size_t local_face) const { return cell_dofs() + local_face * face_dofs(); }
    int sym_size() const { return dim * (dim + 1) / 2; }
    int reconstruction_degree() const { return std::max(k + 1, l); }
    int operator_order() const { return 2 * reconstruction_degree(); }
};

namespace symtensor {

// Mandel basis tensor c of the d-dimensional symmetric space.
inline Eigen::Matrix3d basis_tensor(int dim, int c)
{
    Eigen::Matrix3d E = Eigen::Matrix3d::Zero();
    if (c < dim) {
        E(c, c) = 1.0;
        return E;
    }
    int p, q;
    if (dim == 2) {
        p = 0;
        q = 1;
    } else {
        static const int P[3] = {0, 0, 1}, Q[3] = {1, 2, 2};
        p = P[c - 3];
        q = Q[c - 3];
    }
    E(p, q) = E(q, p) = 1.0 / sqrt2;
    return E;
}

// Position of d-dimensional component c inside the 6-component Mandel vector.
inline int to_mandel(int dim, int c) { return dim == 3 ? c : mandel::plane[c]; }

} // namespace symtensor

struct OperatorOptions {
    int behavior_order = -1;  // quadrature order for behaviour integration; -1 means 2k
    bool keep_strain_basis = true;
};

// Per-cell operators. G: strain coefficients (sym component major) x local
// dofs. D: P^{k+1} vector coefficients x local dofs. S: sum over faces of
// h_F^{-1} S_F^T M_F S_F with S_F the face stabilization map.
struct LocalOperatorSet {
    std::size_t cell = 0;
    LocalDofLayout layout;
    std::size_t num_faces = 0;
    std::size_t local_size = 0;
    ScaledMonomials basis;   // cell basis of degree max(k+1, l); lower degrees are prefixes
    std::vector<ScaledMonomials> face_bases;
    Matrix mass_k;           // scalar P^k cell mass matrix
    std::vector<Matrix> face_mass;
    Matrix G;
    Matrix D;
    Matrix S;
    std::vector<Matrix> S_face;
    QuadratureRule rule;     // behaviour quadrature
    Matrix strain_basis;     // rows [j * 6 .. j * 6 + 5]: Mandel strain at point j per local dof

    Eigen::Ref<const Matrix> strain_at(std::size_t j) const
    {
        return strain_basis.middleRows(Index(j) * 6, 6);
    }
};

namespace detail {

struct CellIntegrals {
    Matrix mass;                  // N1 x N1
    std::vector<Matrix> phi_dphi; // [b] Nk x Nc: int phi_i d_b phi_j
    std::vector<std::vector<Matrix>> dphi_dphi; // [b][a] N1 x N1: int d_b phi_i d_a phi_j
    std::vector<Vector> dphi;     // [b] N1: int d_b phi_i
};

} // namespace detail

inline LocalOperatorSet build_operators(const Mesh& m, std::size_t cell, const LocalDofLayout& L,
                                        const OperatorOptions& opt = {})
{
    const int d = m.dimension();
    if (d != L.dim)
        throw DomainError("layout dimension does not match the mesh");
    const Cell& c = m.cell(cell);
    const std::size_t nF = c.faces.size();
    const int K1 = L.reconstruction_degree();
    const Index N1 = Index(poly_dim(d, K1)), Nk = Index(poly_dim(d, L.k)), Nkp1 = Index(poly_dim(d, L.k + 1));
    const Index Nc = Index(L.cell_scalar()), Nf = Index(L.face_scalar());
    const Index nloc = Index(L.local_size(nF));
    const Index ncell = Index(L.cell_dofs()), nfd = Index(L.face_dofs());
    const int nsym = L.sym_size();
    const int qo = L.operator_order();

    LocalOperatorSet ops;
    ops.cell = cell;
    ops.layout = L;
    ops.num_faces = nF;
    ops.local_size = std::size_t(nloc);
    ops.basis = cell_basis(m, cell, K1);

    // Cell integrals.
    const QuadratureRule cq = cell_quadrature(m, cell, qo);
    detail::CellIntegrals ci;
    ci.mass = Matrix::Zero(N1, N1);
    ci.phi_dphi.assign(d, Matrix::Zero(Nk, Nc));
    ci.dphi_dphi.assign(d, std::vector<Matrix>(d, Matrix::Zero(N1, N1)));
    ci.dphi.assign(d, Vector::Zero(N1));
    Vector phi(N1);
    Matrix grad(N1, 3);
    for (std::size_t q = 0; q < cq.size(); ++q) {
        const double w = cq.weights[q];
        ops.basis.eval(cq.points[q], phi);
        ops.basis.eval_grad(cq.points[q], grad);
        ci.mass.noalias() += w * phi * phi.transpose();
        for (int b = 0; b < d; ++b) {
            ci.phi_dphi[b].noalias() += w * phi.head(Nk) * grad.col(b).head(Nc).transpose();
            ci.dphi[b] += w * grad.col(b);
            for (int a = 0; a < d; ++a)
                ci.dphi_dphi[b][a].noalias() += w * grad.col(b) * grad.col(a).transpose();
        }
    }
    ops.mass_k = ci.mass.topLeftCorner(Nk, Nk);
    Eigen::LLT<Matrix> mk_llt(ops.mass_k);
    if (mk_llt.info() != Eigen::Success)
        throw NumericalError("cell mass matrix is not positive definite (cell " + std::to_string(cell) + ")");

    // Face integrals.
    struct FaceData {
        Point n;
        double h;
        Matrix mass;                // Nf x Nf
        Matrix trace_phi;           // Nf x N1: int psi_m phi_j
        std::vector<Matrix> dphi_psi; // [b] N1 x Nf: int d_b phi_i psi_m
        Vector psi_int;             // Nf
        Matrix cell_trace;          // N1 x Nc: int phi_i phi_j
        std::vector<Matrix> dphi_phi; // [b] N1 x Nc: int d_b phi_i phi_j
    };
    std::vector<FaceData> fd(nF);
    ops.face_bases.resize(nF);
    for (std::size_t i = 0; i < nF; ++i) {
        const std::size_t f = c.faces[i];
        auto& F = fd[i];
        F.n = m.outward_normal(cell, i);
        F.h = m.face(f).diameter;
        ops.face_bases[i] = face_basis(m, f, L.k);
        const QuadratureRule fq = face_quadrature(m, f, qo);
        F.mass = Matrix::Zero(Nf, Nf);
        F.trace_phi = Matrix::Zero(Nf, N1);
        F.dphi_psi.assign(d, Matrix::Zero(N1, Nf));
        F.psi_int = Vector::Zero(Nf);
        F.cell_trace = Matrix::Zero(N1, Nc);
        F.dphi_phi.assign(d, Matrix::Zero(N1, Nc));
        Vector psi(Nf);
        for (std::size_t q = 0; q < fq.size(); ++q) {
            const double w = fq.weights[q];
            ops.face_bases[i].eval(fq.points[q], psi);
            ops.basis.eval(fq.points[q], phi);
            ops.basis.eval_grad(fq.points[q], grad);
            F.mass.noalias() += w * psi * psi.transpose();
            F.trace_phi.noalias() += w * psi * phi.transpose();
            F.psi_int += w * psi;
            F.cell_trace.noalias() += w * phi * phi.head(Nc).transpose();
            for (int b = 0; b < d; ++b) {
                F.dphi_psi[b].noalias() += w * grad.col(b) * psi.transpose();
                F.dphi_phi[b].noalias() += w * grad.col(b) * phi.head(Nc).transpose();
            }
        }
        ops.face_mass.push_back(F.mass);
    }

    // Strain reconstruction G.
    ops.G = Matrix::Zero(nsym * Nk, nloc);
    for (int s = 0; s < nsym; ++s) {
        const Eigen::Matrix3d E = symtensor::basis_tensor(d, s);
        auto rows = ops.G.middleRows(s * Nk, Nk);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                if (E(a, b) != 0.0)
                    rows.middleCols(a * Nc, Nc) += E(a, b) * ci.phi_dphi[b];
        for (std::size_t i = 0; i < nF; ++i) {
            const Point En = E * fd[i].n;
            const Index off = Index(L.face_offset(i));
            for (int a = 0; a < d; ++a) {
                if (En[a] == 0.0)
                    continue;
                rows.middleCols(off + a * Nf, Nf) += En[a] * fd[i].trace_phi.leftCols(Nk).transpose();
                rows.middleCols(a * Nc, Nc) -= En[a] * fd[i].cell_trace.topRows(Nk);
            }
        }
        rows = mk_llt.solve(Matrix(rows));
    }

    // Displacement reconstruction D in P^{k+1}: bordered Neumann problem.
    {
        const Index n1 = Nkp1;
        const Index nd = d * n1;
        const int nskew = d * (d - 1) / 2;
        const Index ncon = d + nskew;
        Matrix A = Matrix::Zero(nd + ncon, nd + ncon);
        Matrix B = Matrix::Zero(nd + ncon, nloc);
        Matrix KG = Matrix::Zero(n1, n1);
        for (int b = 0; b < d; ++b)
            KG += ci.dphi_dphi[b][b].topLeftCorner(n1, n1);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                Matrix blk = 0.5 * ci.dphi_dphi[b][a].topLeftCorner(n1, n1);
                if (a == b)
                    blk += 0.5 * KG;
                A.block(a * n1, b * n1, n1, n1) = blk;
                // cell columns: the same bilinear form against the degree-l cell basis
                B.block(a * n1, b * Nc, n1, Nc) = blk.leftCols(std::min(Nc, n1));
            }
        for (std::size_t i = 0; i < nF; ++i) {
            const Point& n = fd[i].n;
            std::vector<Matrix> Gt(d);
            for (int b = 0; b < d; ++b)
                Gt[b] = fd[i].dphi_phi[b].topRows(n1);
            Matrix Gn_n = Matrix::Zero(n1, Nf), Gt_n = Matrix::Zero(n1, Nc);
            for (int b = 0; b < d; ++b) {
                Gn_n += n[b] * fd[i].dphi_psi[b].topRows(n1);
                Gt_n += n[b] * Gt[b];
            }
            const Index off = Index(L.face_offset(i));
            for (int a = 0; a < d; ++a)
                for (int cc = 0; cc < d; ++cc) {
                    Matrix fblk = 0.5 * n[a] * fd[i].dphi_psi[cc].topRows(n1);
                    Matrix cblk = 0.5 * n[a] * Gt[cc];
                    if (a == cc) {
                        fblk += 0.5 * Gn_n;
                        cblk += 0.5 * Gt_n;
                    }
                    B.block(a * n1, off + cc * Nf, n1, Nf) += fblk;
                    B.block(a * n1, cc * Nc, n1, Nc) -= cblk;
                }
        }
        // Mean value: int D_a = int v_T,a.
        for (int a = 0; a < d; ++a) {
            const Index r = nd + a;
            A.block(r, a * n1, 1, n1) = ci.mass.row(0).head(n1);
            A.block(a * n1, r, n1, 1) = ci.mass.row(0).head(n1).transpose();
            B.block(r, a * Nc, 1, Nc) = ci.mass.row(0).head(Nc);
        }
        // Skew moment: int (d_q D_p - d_p D_q)/2 = int_dT (v_p n_q - v_q n_p)/2.
        int sk = 0;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q, ++sk) {
                const Index r = nd + d + sk;
                Vector row = Vector::Zero(nd);
                row.segment(p * n1, n1) = 0.5 * ci.dphi[q].head(n1);
                row.segment(q * n1, n1) = -0.5 * ci.dphi[p].head(n1);
                A.block(r, 0, 1, nd) = row.transpose();
                A.block(0, r, nd, 1) = row;
                for (std::size_t i = 0; i < nF; ++i) {
                    const Point& n = fd[i].n;
                    const Index off = Index(L.face_offset(i));
                    B.block(r, off + p * Nf, 1, Nf) += 0.5 * n[q] * fd[i].psi_int.transpose();
                    B.block(r, off + q * Nf, 1, Nf) -= 0.5 * n[p] * fd[i].psi_int.transpose();
                }
            }
        Eigen::PartialPivLU<Matrix> lu(A);
        const Matrix X = lu.solve(B);
        if (!X.allFinite())
            throw NumericalError("singular displacement reconstruction system (cell " + std::to_string(cell) + ")");
        ops.D = X.topRows(nd);
    }

    // Stabilization.
    ops.S = Matrix::Zero(nloc, nloc);
    ops.S_face.resize(nF);
    {
        const Index n1 = Nkp1;
        // Q = I - Pi_T^l on P^{k+1} coefficients (unused for l = k+1).
        Matrix Q = Matrix::Identity(n1, n1);
        if (L.l <= L.k) {
            const Matrix Ml = ci.mass.topLeftCorner(Nc, Nc);
            Q.topRows(Nc) -= Ml.llt().solve(ci.mass.block(0, 0, Nc, n1));
        }
        for (std::size_t i = 0; i < nF; ++i) {
            const auto& F = fd[i];
            Eigen::LLT<Matrix> mf(F.mass);
            if (mf.info() != Eigen::Success)
                throw NumericalError("face mass matrix is not positive definite");
            const Matrix Pc = mf.solve(F.trace_phi.leftCols(Nc)); // Nf x Nc
            Matrix SF = Matrix::Zero(nfd, nloc);
            const Index off = Index(L.face_offset(i));
            for (int a = 0; a < d; ++a) {
                SF.block(a * Nf, off + a * Nf, Nf, Nf).setIdentity();
                SF.block(a * Nf, a * Nc, Nf, Nc) -= Pc;
            }
            if (L.l <= L.k) {
                const Matrix PD = mf.solve(F.trace_phi.leftCols(n1) * Q); // Nf x n1
                for (int a = 0; a < d; ++a)
                    SF.middleRows(a * Nf, Nf) -= PD * ops.D.middleRows(a * n1, n1);
            }
            Matrix MF = Matrix::Zero(nfd, nfd);
            for (int a = 0; a < d; ++a)
                MF.block(a * Nf, a * Nf, Nf, Nf) = F.mass;
            ops.S.noalias() += (1.0 / F.h) * SF.transpose() * MF * SF;
            ops.S_face[i] = std::move(SF);
        }
        ops.S = 0.5 * (ops.S + ops.S.transpose()).eval();
    }

    // Behaviour quadrature and cached strain evaluations.
    const int bo = opt.behavior_order >= 0 ? opt.behavior_order : 2 * L.k;
    ops.rule = cell_quadrature(m, cell, bo);
    if (opt.keep_strain_basis) {
        ops.strain_basis = Matrix::Zero(Index(ops.rule.size()) * 6, nloc);
        for (std::size_t j = 0; j < ops.rule.size(); ++j) {
            ops.basis.eval(ops.rule.points[j], phi);
            for (int s = 0; s < nsym; ++s)
                ops.strain_basis.row(Index(j) * 6 + symtensor::to_mandel(d, s)) =
                    phi.head(Nk).transpose() * ops.G.middleRows(s * Nk, Nk);
        }
    }
    return ops;
}

// Mandel strain (6 components, plane strain zero-padded) of dofs at point x.
inline SymTensor reconstructed_strain(const LocalOperatorSet& ops, const Vector& dofs, const Point& x)
{
    const int d = ops.layout.dim;
    const Index Nk = Index(poly_dim(d, ops.layout.k));
    const Vector phi = ops.basis.eval(x).head(Nk);
    const Vector g = ops.G * dofs;
    SymTensor e = SymTensor::Zero();
    for (int s = 0; s < ops.layout.sym_size(); ++s)
        e[symtensor::to_mandel(d, s)] = phi.dot(g.segment(s * Nk, Nk));
    return e;
}

inline Point reconstructed_displacement(const LocalOperatorSet& ops, const Vector& dofs, const Point& x)
{
    const int d = ops.layout.dim;
    const Index n1 = Index(poly_dim(d, ops.layout.k + 1));
    const Vector phi = ops.basis.eval(x).head(n1);
    const Vector u = ops.D * dofs;
    Point v = Point::Zero();
    for (int a = 0; a < d; ++a)
        v[a] = phi.dot(u.segment(a * n1, n1));
    return v;
}

// Component-wise L2 projections onto the cell and face spaces.
inline Vector reduction(const Mesh& m, std::size_t cell, const LocalDofLayout& L,
                        const std::function<Point(const Point&)>& v, int extra_order = 8)
{
    const Cell& c = m.cell(cell);
    const int d = m.dimension();
    const int order = L.operator_order() + extra_order;
    Vector out = Vector::Zero(Index(L.local_size(c.faces.size())));
    const auto cb = cell_basis(m, cell, L.l);
    out.head(Index(L.cell_dofs())) = l2_project_vector(cb, cell_quadrature(m, cell, order), d, v);
    for (std::size_t i = 0; i < c.faces.size(); ++i) {
        const auto fb = face_basis(m, c.faces[i], L.k);
        out.segment(Index(L.face_offset(i)), Index(L.face_dofs())) =
            l2_project_vector(fb, face_quadrature(m, c.faces[i], order), d, v);
    }
    return out;
}

// Gram matrix of the local strain seminorm.
inline Matrix seminorm_matrix(const Mesh& m, std::size_t cell, const LocalDofLayout& L)
{
    const Cell& c = m.cell(cell);
    const int d = m.dimension();
    const Index Nc = Index(L.cell_scalar()), Nf = Index(L.face_scalar());
    const Index nloc = Index(L.local_size(c.faces.size()));
    const auto cb = cell_basis(m, cell, L.l);
    const int qo = L.operator_order();
    Matrix N = Matrix::Zero(nloc, nloc);
    const QuadratureRule cq = cell_quadrature(m, cell, qo);
    Matrix grad(Nc, 3);
    for (std::size_t q = 0; q < cq.size(); ++q) {
        cb.eval_grad(cq.points[q], grad);
        const double w = cq.weights[q];
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                Matrix blk = 0.5 * w * grad.col(b) * grad.col(a).transpose();
                if (a == b)
                    blk += 0.5 * w * grad.leftCols(d) * grad.leftCols(d).transpose();
                N.block(a * Nc, b * Nc, Nc, Nc) += blk;
            }
    }
    Vector phi(Nc), psi(Nf);
    for (std::size_t i = 0; i < c.faces.size(); ++i) {
        const std::size_t f = c.faces[i];
        const auto fb = face_basis(m, f, L.k);
        const QuadratureRule fq = face_quadrature(m, f, qo);
        const double g = 1.0 / m.face(f).diameter;
        const Index off = Index(L.face_offset(i));
        for (std::size_t q = 0; q < fq.size(); ++q) {
            cb.eval(fq.points[q], phi);
            fb.eval(fq.points[q], psi);
            Vector z(Nc + Nf);
            z << phi, -psi;
            const Matrix zz = g * fq.weights[q] * z * z.transpose();
            for (int a = 0; a < d; ++a) {
                N.block(a * Nc, a * Nc, Nc, Nc) += zz.topLeftCorner(Nc, Nc);
                N.block(a * Nc, off + a * Nf, Nc, Nf) += zz.topRightCorner(Nc, Nf);
                N.block(off + a * Nf, a * Nc, Nf, Nc) += zz.bottomLeftCorner(Nf, Nc);
                N.block(off + a * Nf, off + a * Nf, Nf, Nf) += zz.bottomRightCorner(Nf, Nf);
            }
        }
    }
    return N;
}

// Evaluated pointwise (not through the Gram matrix) so rigid motions give
// zero to rounding of the field values, not of their squares.
inline double strain_seminorm(const Mesh& m, std::size_t cell, const LocalDofLayout& L, const Vector& v)
{
    const Cell& c = m.cell(cell);
    const int d = m.dimension();
    const Index Nc = Index(L.cell_scalar()), Nf = Index(L.face_scalar());
    const auto cb = cell_basis(m, cell, L.l);
    const int qo = L.operator_order();
    double sum = 0.0;
    const QuadratureRule cq = cell_quadrature(m, cell, qo);
    Matrix grad(Nc, 3);
    for (std::size_t q = 0; q < cq.size(); ++q) {
        cb.eval_grad(cq.points[q], grad);
        Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
        for (int a = 0; a < d; ++a)
            G.row(a) = (grad.transpose() * v.segment(a * Nc, Nc)).transpose();
        sum += cq.weights[q] * (0.5 * (G + G.transpose())).squaredNorm();
    }
    for (std::size_t i = 0; i < c.faces.size(); ++i) {
        const std::size_t f = c.faces[i];
        const auto fb = face_basis(m, f, L.k);
        const QuadratureRule fq = face_quadrature(m, f, qo);
        const Index off = Index(L.face_offset(i));
        for (std::size_t q = 0; q < fq.size(); ++q) {
            const Vector phi = cb.eval(fq.points[q]), psi = fb.eval(fq.points[q]);
            double j2 = 0.0;
            for (int a = 0; a < d; ++a) {
                const double jump = phi.dot(v.segment(a * Nc, Nc)) - psi.dot(v.segment(off + a * Nf, Nf));
                j2 += jump * jump;
            }
            sum += fq.weights[q] * j2 / m.face(f).diameter;
        }
    }
    return std::sqrt(sum);
}

} // namespace hho
