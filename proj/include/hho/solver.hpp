#pragma once

#include "operators.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <atomic>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <thread>

namespace hho {

using VectorField = std::function<Point(const Point& x, double t)>;
using TractionField = std::function<Point(const Point& x, const Point& n, double t)>;

// Prescribed displacement on the selected components of faces with this tag.
struct DirichletBC {
    std::string tag;
    std::array<bool, 3> components{true, true, true};
    VectorField value; // empty means zero
};

struct NeumannBC {
    std::string tag;
    TractionField traction;

    static NeumannBC pressure(std::string tag, std::function<double(const Point&, double)> p)
    {
        return {std::move(tag), [p](const Point& x, const Point& n, double t) { return Point(-p(x, t) * n); }};
    }
};

struct SolverOptions {
    double rtol = 1e-8;
    double atol = 1e-12;
    int max_iterations = 25;
    TangentKind tangent = TangentKind::consistent;
    int behavior_order = -1; // -1: 2k
    unsigned threads = 0;    // 0: hardware concurrency
    bool coercivity = false; // record the tangent spectrum minimum each iteration
    int polish_iterations = 0; // extra iterations after convergence; the smallest residual is kept
};

struct ProblemSetup {
    std::shared_ptr<const Mesh> mesh;
    LocalDofLayout layout;
    MaterialParams material;
    double beta0 = 1.0;
    VectorField body_force;
    std::vector<DirichletBC> dirichlet;
    std::vector<NeumannBC> neumann;
    std::vector<double> load_factors; // t^1 .. t^N
    SolverOptions options;

    static std::vector<double> uniform_steps(int n, double t_end = 1.0)
    {
        if (n < 1)
            throw DomainError("number of steps must be positive");
        std::vector<double> t(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            t[std::size_t(i)] = t_end * double(i + 1) / double(n);
        return t;
    }

    void validate() const
    {
        if (!mesh)
            throw DomainError("problem has no mesh");
        if (layout.dim != mesh->dimension())
            throw DomainError("layout dimension does not match the mesh");
        layout.validate();
        material.validate();
        if (!(beta0 > 0))
            throw DomainError("stabilization parameter beta0 must be positive");
        if (load_factors.empty())
            throw DomainError("at least one load step is required");
        const auto tags = mesh->boundary_tags();
        bool any = false;
        for (const auto& bc : dirichlet) {
            if (!tags.count(bc.tag))
                throw DomainError("Dirichlet tag '" + bc.tag + "' does not exist on the mesh boundary");
            any = any || bc.components[0] || bc.components[1] || bc.components[2];
        }
        if (!any)
            throw DomainError("the Dirichlet boundary must be nonempty");
        for (const auto& bc : neumann)
            if (!tags.count(bc.tag))
                throw DomainError("Neumann tag '" + bc.tag + "' does not exist on the mesh boundary");
    }
};

struct GlobalState {
    Vector faces;                    // face-id-major, then component, then basis function
    std::vector<Vector> cells;       // cell unknowns per cell
    std::vector<MaterialState> states; // committed internal variables, cell-major
    std::vector<SymTensor> strain;   // committed total strain at behaviour points
    std::vector<SymTensor> stress;   // committed stress at behaviour points
    // Rounding remainders of the unknowns (value = faces + faces_lo). Nearly
    // incompressible problems need the strain to finer than one ulp of u.
    Vector faces_lo;
    std::vector<Vector> cells_lo;
    double load_factor = 0.0;
    int step = 0;
};

enum class StepStatus { converged, non_convergence, linear_solver_breakdown, numerical_error };

inline const char* to_string(StepStatus s)
{
    switch (s) {
    case StepStatus::converged: return "converged";
    case StepStatus::non_convergence: return "non_convergence";
    case StepStatus::linear_solver_breakdown: return "linear_solver_breakdown";
    case StepStatus::numerical_error: return "numerical_error";
    }
    return "?";
}

struct StepReport {
    int step = 0;
    double load_factor = 0.0;
    StepStatus status = StepStatus::non_convergence;
    int iterations = 0;
    double residual = 0.0;
    double reference = 0.0;
    std::vector<double> residual_history;
    std::vector<bool> cholesky_ok; // per linear solve
    std::vector<double> theta;     // per assembly, when requested
    std::size_t plastic_points = 0;
    std::string message;

    bool converged() const { return status == StepStatus::converged; }
};

struct SolveHistory {
    std::vector<StepReport> steps;  // converged steps in order
    std::vector<Vector> snapshots;  // converged face unknowns per step
    std::optional<StepReport> failure;
    int total_iterations = 0;
    double wall_time = 0.0;

    bool completed() const { return !failure.has_value(); }
    std::optional<int> failure_step() const
    {
        return failure ? std::optional<int>(failure->step) : std::nullopt;
    }
    double last_converged_load() const { return steps.empty() ? 0.0 : steps.back().load_factor; }
};

namespace detail {

template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& fn)
{
    unsigned nt = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    nt = unsigned(std::min<std::size_t>(nt, std::max<std::size_t>(1, n / 8)));
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mtx;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nt; ++t)
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n)
                    return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mtx);
                    if (!err)
                        err = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& th : pool)
        th.join();
    if (err)
        std::rethrow_exception(err);
}

inline std::vector<int> strain_rows(int dim)
{
    return dim == 3 ? std::vector<int>{0, 1, 2, 3, 4, 5} : std::vector<int>{0, 1, 3};
}

} // namespace detail

// Local tangent and residual of one cell at the current unknowns.
struct CellAssembly {
    Matrix K;
    Vector R;
    Vector internal; // sum_j w_j B_j^T sigma_j + beta S u
    std::vector<PlasticityResult> points;
    std::vector<SymTensor> strain;
    double theta = std::numeric_limits<double>::infinity();
};

// K = sum_j w_j B_j^T C_ep B_j + beta S, R = internal - f_ext. states/strain_prev
// are the committed values at the cell's behaviour points.
inline CellAssembly assemble_cell(const LocalOperatorSet& ops, const MaterialParams& mp, double beta,
                                  const MaterialState* states, const SymTensor* strain_prev, const Vector& u,
                                  const Vector& f_ext, TangentKind kind, bool want_theta = false,
                                  const Vector* u_lo = nullptr)
{
    const int d = ops.layout.dim;
    const auto rows = detail::strain_rows(d);
    const Index nloc = Index(ops.local_size);
    const Index ns = Index(rows.size());
    CellAssembly a;
    a.K = beta * ops.S;
    a.internal = beta * (ops.S * u);
    a.points.resize(ops.rule.size());
    a.strain.resize(ops.rule.size());
    Matrix B(ns, nloc);
    Matrix Cr(ns, ns);
    Vector sr(ns);
    for (std::size_t j = 0; j < ops.rule.size(); ++j) {
        const auto Bj = ops.strain_at(j);
        for (Index r = 0; r < ns; ++r)
            B.row(r) = Bj.row(rows[std::size_t(r)]);
        SymTensor eps = SymTensor::Zero();
        if (u_lo) {
            for (Index r = 0; r < ns; ++r) {
                long double acc = 0.0L;
                for (Index i = 0; i < nloc; ++i)
                    acc += static_cast<long double>(B(r, i)) *
                           (static_cast<long double>(u[i]) + static_cast<long double>((*u_lo)[i]));
                eps[rows[std::size_t(r)]] = static_cast<double>(acc);
            }
        } else {
            const Vector e = B * u;
            for (Index r = 0; r < ns; ++r)
                eps[rows[std::size_t(r)]] = e[r];
        }
        PlasticityResult pr;
        try {
            pr = plasticity_step(mp, states[j], strain_prev[j], SymTensor(eps - strain_prev[j]), kind);
        } catch (const ContractViolation& ex) {
            throw ContractViolation(std::string(ex.what()) + " (cell " + std::to_string(ops.cell) + ", point " +
                                    std::to_string(j) + ")");
        }
        for (Index r = 0; r < ns; ++r) {
            sr[r] = pr.stress[rows[std::size_t(r)]];
            for (Index c = 0; c < ns; ++c)
                Cr(r, c) = pr.tangent(rows[std::size_t(r)], rows[std::size_t(c)]);
        }
        const double w = ops.rule.weights[j];
        a.internal.noalias() += w * B.transpose() * sr;
        a.K.noalias() += w * B.transpose() * (Cr * B);
        if (want_theta)
            a.theta = std::min(a.theta, tangent_spectrum(pr.tangent)[0]);
        a.strain[j] = eps;
        a.points[j] = std::move(pr);
    }
    a.R = a.internal - f_ext;
    return a;
}

// Schur complement on the face unknowns; the cell block occupies the leading ncell rows.
struct CondensedCell {
    Matrix K_F;
    Vector R_F;
    Matrix A; // K_TT^{-1} K_TF
    Vector b; // K_TT^{-1} R_T
};

inline CondensedCell static_condense(const Matrix& K, const Vector& R, Index ncell)
{
    const Index nf = K.rows() - ncell;
    const auto KTT = K.topLeftCorner(ncell, ncell);
    const auto KTF = K.topRightCorner(ncell, nf);
    const auto KFT = K.bottomLeftCorner(nf, ncell);
    CondensedCell c;
    Eigen::LLT<Matrix> llt(KTT);
    if (llt.info() == Eigen::Success) {
        c.A = llt.solve(KTF);
        c.b = llt.solve(R.head(ncell));
    } else {
        Eigen::FullPivLU<Matrix> lu(KTT);
        if (!lu.isInvertible())
            throw NumericalError("singular cell block in static condensation");
        c.A = lu.solve(Matrix(KTF));
        c.b = lu.solve(Vector(R.head(ncell)));
    }
    c.K_F = K.bottomRightCorner(nf, nf) - KFT * c.A;
    c.K_F = 0.5 * (c.K_F + c.K_F.transpose()).eval();
    c.R_F = R.tail(nf) - KFT * c.b;
    return c;
}

// Cell increment solving K_TT du_T + K_TF du_F = -R_T.
inline Vector recover_cell(const CondensedCell& c, const Vector& du_F) { return -c.b - c.A * du_F; }

struct CoercivityReport {
    double theta = 0.0;            // min over behaviour points of the tangent's smallest eigenvalue
    double min_eigenvalue = 0.0;   // smallest eigenvalue of the condensed matrix (free rows)
    bool cholesky_ok = false;
};

class Solver {
public:
    explicit Solver(ProblemSetup setup) : setup_(std::move(setup))
    {
        setup_.validate();
        const Mesh& m = *setup_.mesh;
        const auto& L = setup_.layout;
        d_ = m.dimension();
        nf_ = Index(L.face_scalar());
        fdofs_ = Index(L.face_dofs());
        ops_.resize(m.num_cells());
        OperatorOptions oo;
        oo.behavior_order = setup_.options.behavior_order;
        detail::parallel_for(m.num_cells(), setup_.options.threads,
                             [&](std::size_t c) { ops_[c] = build_operators(m, c, L, oo); });
        qp_offset_.assign(m.num_cells() + 1, 0);
        for (std::size_t c = 0; c < m.num_cells(); ++c)
            qp_offset_[c + 1] = qp_offset_[c] + ops_[c].rule.size();
        // Face dof constraints.
        fixed_.assign(std::size_t(num_face_dofs()), 0);
        face_bc_.assign(m.num_faces(), -1);
        face_neumann_.assign(m.num_faces(), -1);
        for (std::size_t f = 0; f < m.num_faces(); ++f) {
            const Face& face = m.face(f);
            if (!face.is_boundary())
                continue;
            for (std::size_t b = 0; b < setup_.dirichlet.size(); ++b)
                if (setup_.dirichlet[b].tag == face.tag) {
                    face_bc_[f] = int(b);
                    for (int a = 0; a < d_; ++a)
                        if (setup_.dirichlet[b].components[std::size_t(a)])
                            for (Index q = 0; q < nf_; ++q)
                                fixed_[std::size_t(dof(f, a, q))] = 1;
                }
            for (std::size_t b = 0; b < setup_.neumann.size(); ++b)
                if (setup_.neumann[b].tag == face.tag)
                    face_neumann_[f] = int(b);
        }
        free_index_.assign(fixed_.size(), -1);
        for (std::size_t i = 0; i < fixed_.size(); ++i)
            if (!fixed_[i])
                free_index_[i] = num_free_++;
        if (num_free_ == 0)
            throw DomainError("no free unknowns");
        face_bases_.resize(m.num_faces());
        face_mass_llt_.resize(m.num_faces());
        for (std::size_t f = 0; f < m.num_faces(); ++f) {
            face_bases_[f] = face_basis(m, f, L.k);
            face_mass_llt_[f].compute(mass_matrix(face_bases_[f], face_quadrature(m, f, 2 * L.k)));
        }
    }

    const ProblemSetup& setup() const { return setup_; }
    const Mesh& mesh() const { return *setup_.mesh; }
    const LocalDofLayout& layout() const { return setup_.layout; }
    const std::vector<LocalOperatorSet>& operators() const { return ops_; }
    const LocalOperatorSet& operators(std::size_t cell) const { return ops_[cell]; }
    double beta() const { return 2.0 * setup_.material.mu() * setup_.beta0; }
    Index num_face_dofs() const { return Index(mesh().num_faces()) * fdofs_; }
    Index num_free_dofs() const { return num_free_; }
    std::size_t num_points() const { return qp_offset_.back(); }
    std::size_t point_offset(std::size_t cell) const { return qp_offset_[cell]; }
    Index dof(std::size_t face, int comp, Index q) const { return Index(face) * fdofs_ + comp * nf_ + q; }
    bool is_fixed(Index g) const { return fixed_[std::size_t(g)] != 0; }
    int dirichlet_of(std::size_t face) const { return face_bc_[face]; }
    int neumann_of(std::size_t face) const { return face_neumann_[face]; }
    const ScaledMonomials& face_basis_of(std::size_t face) const { return face_bases_[face]; }

    GlobalState initial_state() const
    {
        GlobalState s;
        s.faces = Vector::Zero(num_face_dofs());
        s.faces_lo = s.faces;
        s.cells.assign(mesh().num_cells(), Vector::Zero(Index(layout().cell_dofs())));
        s.cells_lo = s.cells;
        s.states.assign(num_points(), MaterialState{});
        s.strain.assign(num_points(), SymTensor::Zero());
        s.stress.assign(num_points(), SymTensor::Zero());
        return s;
    }

    // Local unknowns (cell block, then faces in cell-local order).
    Vector local_dofs(const GlobalState& s, std::size_t cell) const
    {
        const Cell& c = mesh().cell(cell);
        Vector u(Index(ops_[cell].local_size));
        const Index nc = Index(layout().cell_dofs());
        u.head(nc) = s.cells[cell];
        for (std::size_t i = 0; i < c.faces.size(); ++i)
            u.segment(nc + Index(i) * fdofs_, fdofs_) = s.faces.segment(Index(c.faces[i]) * fdofs_, fdofs_);
        return u;
    }

    Vector local_dofs_lo(const GlobalState& s, std::size_t cell) const
    {
        const Cell& c = mesh().cell(cell);
        Vector u = Vector::Zero(Index(ops_[cell].local_size));
        const Index nc = Index(layout().cell_dofs());
        if (s.cells_lo.size() == s.cells.size())
            u.head(nc) = s.cells_lo[cell];
        if (s.faces_lo.size() == s.faces.size())
            for (std::size_t i = 0; i < c.faces.size(); ++i)
                u.segment(nc + Index(i) * fdofs_, fdofs_) = s.faces_lo.segment(Index(c.faces[i]) * fdofs_, fdofs_);
        return u;
    }

    // Adds an increment to the unknowns, carrying the rounding into the remainders.
    static void add_increment(Vector& hi, Vector& lo, const Vector& du)
    {
        if (lo.size() != hi.size())
            lo = Vector::Zero(hi.size());
        for (Index i = 0; i < hi.size(); ++i) {
            const long double v = static_cast<long double>(hi[i]) + static_cast<long double>(lo[i]) + du[i];
            hi[i] = static_cast<double>(v);
            lo[i] = static_cast<double>(v - static_cast<long double>(hi[i]));
        }
    }

    // Dirichlet face unknowns set to the face projection of the data at load factor t.
    void apply_dirichlet(GlobalState& s, double t) const
    {
        const Mesh& m = mesh();
        for (std::size_t f = 0; f < m.num_faces(); ++f) {
            const int b = face_bc_[f];
            if (b < 0)
                continue;
            const auto& bc = setup_.dirichlet[std::size_t(b)];
            Vector coeff = Vector::Zero(fdofs_);
            if (bc.value) {
                const auto q = face_quadrature(m, f, 2 * layout().k + 4);
                Matrix rhs = Matrix::Zero(nf_, d_);
                for (std::size_t p = 0; p < q.size(); ++p) {
                    const Vector psi = face_bases_[f].eval(q.points[p]);
                    const Point v = bc.value(q.points[p], t);
                    for (int a = 0; a < d_; ++a)
                        rhs.col(a) += q.weights[p] * v[a] * psi;
                }
                const Matrix sol = face_mass_llt_[f].solve(rhs);
                for (int a = 0; a < d_; ++a)
                    coeff.segment(a * nf_, nf_) = sol.col(a);
            }
            for (int a = 0; a < d_; ++a)
                if (bc.components[std::size_t(a)]) {
                    s.faces.segment(dof(f, a, 0), nf_) = coeff.segment(a * nf_, nf_);
                    if (s.faces_lo.size() == s.faces.size())
                        s.faces_lo.segment(dof(f, a, 0), nf_).setZero();
                }
        }
    }

    // External loads at t: cell body-force vectors and the global face vector.
    struct ExternalLoads {
        std::vector<Vector> cells;
        Vector faces;
    };

    ExternalLoads external_loads(double t) const
    {
        const Mesh& m = mesh();
        const auto& L = layout();
        ExternalLoads ex;
        ex.cells.assign(m.num_cells(), Vector());
        ex.faces = Vector::Zero(num_face_dofs());
        const Index nc = Index(L.cell_scalar());
        detail::parallel_for(m.num_cells(), setup_.options.threads, [&](std::size_t c) {
            Vector f = Vector::Zero(Index(ops_[c].local_size));
            if (setup_.body_force) {
                const auto cb = cell_basis(m, c, L.l);
                const auto q = cell_quadrature(m, c, L.operator_order() + 2);
                for (std::size_t p = 0; p < q.size(); ++p) {
                    const Vector phi = cb.eval(q.points[p]);
                    const Point b = setup_.body_force(q.points[p], t);
                    for (int a = 0; a < d_; ++a)
                        f.segment(a * nc, nc) += q.weights[p] * b[a] * phi;
                }
            }
            ex.cells[c] = std::move(f);
        });
        for (std::size_t f = 0; f < m.num_faces(); ++f) {
            const int b = face_neumann_[f];
            if (b < 0)
                continue;
            const auto& bc = setup_.neumann[std::size_t(b)];
            const Point n = m.face(f).normal; // boundary faces: normal is outward
            const auto q = face_quadrature(m, f, 2 * L.k + 4);
            for (std::size_t p = 0; p < q.size(); ++p) {
                const Vector psi = face_bases_[f].eval(q.points[p]);
                const Point tr = bc.traction(q.points[p], n, t);
                for (int a = 0; a < d_; ++a)
                    ex.faces.segment(dof(f, a, 0), nf_) += q.weights[p] * tr[a] * psi;
            }
        }
        return ex;
    }

    // Global Newton system data for the current unknowns.
    struct Assembly {
        std::vector<CellAssembly> cells;
        std::vector<CondensedCell> condensed;
        Vector face_residual; // uncondensed face rows (all)
        double cell_residual2 = 0.0;
        double theta = std::numeric_limits<double>::infinity();
        std::size_t plastic_points = 0;
    };

    Assembly assemble(const GlobalState& s, const ExternalLoads& ex, bool condense = true, bool want_theta = false) const
    {
        const Mesh& m = mesh();
        Assembly A;
        A.cells.resize(m.num_cells());
        if (condense)
            A.condensed.resize(m.num_cells());
        const Index nc = Index(layout().cell_dofs());
        detail::parallel_for(m.num_cells(), setup_.options.threads, [&](std::size_t c) {
            const Vector u = local_dofs(s, c);
            const Vector u_lo = local_dofs_lo(s, c);
            A.cells[c] = assemble_cell(ops_[c], setup_.material, beta(), &s.states[qp_offset_[c]],
                                       &s.strain[qp_offset_[c]], u, ex.cells[c], setup_.options.tangent, want_theta,
                                       &u_lo);
            if (condense)
                A.condensed[c] = static_condense(A.cells[c].K, A.cells[c].R, nc);
        });
        A.face_residual = -ex.faces;
        for (std::size_t c = 0; c < m.num_cells(); ++c) {
            const auto& ca = A.cells[c];
            const Cell& cell = m.cell(c);
            for (std::size_t i = 0; i < cell.faces.size(); ++i)
                A.face_residual.segment(Index(cell.faces[i]) * fdofs_, fdofs_) += ca.R.segment(nc + Index(i) * fdofs_, fdofs_);
            A.cell_residual2 += ca.R.head(nc).squaredNorm();
            A.theta = std::min(A.theta, ca.theta);
            for (const auto& p : ca.points)
                A.plastic_points += p.plastic ? 1 : 0;
        }
        return A;
    }

    // Condensed sparse matrix and right-hand side on the free face unknowns.
    // `fixed_step` (all face rows) prescribes increments of the fixed unknowns.
    void condensed_system(const Assembly& A, Eigen::SparseMatrix<double>& K, Vector& rhs,
                          const Vector* fixed_step = nullptr) const
    {
        const Mesh& m = mesh();
        std::vector<Eigen::Triplet<double>> trip;
        rhs = Vector::Zero(num_free_);
        for (std::size_t c = 0; c < m.num_cells(); ++c) {
            const Cell& cell = m.cell(c);
            const auto& cc = A.condensed[c];
            const Index nl = cc.K_F.rows();
            std::vector<Index> g(static_cast<std::size_t>(nl));
            for (std::size_t i = 0; i < cell.faces.size(); ++i)
                for (Index r = 0; r < fdofs_; ++r)
                    g[i * std::size_t(fdofs_) + std::size_t(r)] = free_index_[std::size_t(Index(cell.faces[i]) * fdofs_ + r)];
            for (Index r = 0; r < nl; ++r) {
                const Index gr = g[std::size_t(r)];
                if (gr < 0)
                    continue;
                rhs[gr] -= cc.R_F[r];
                for (Index col = 0; col < nl; ++col) {
                    const Index gc = g[std::size_t(col)];
                    if (gc >= 0)
                        trip.emplace_back(gr, gc, cc.K_F(r, col));
                    else if (fixed_step)
                        rhs[gr] -= cc.K_F(r, col) *
                                   (*fixed_step)[Index(cell.faces[std::size_t(col / fdofs_)]) * fdofs_ + col % fdofs_];
                }
            }
        }
        // Neumann loads enter only the uncondensed face residual.
        // rhs = -(sum of condensed cell residuals) + external face loads, restricted to free rows.
        K.resize(num_free_, num_free_);
        K.setFromTriplets(trip.begin(), trip.end());
    }

    // One Newton correction (face increments on all face rows, zero on fixed ones).
    struct Increment {
        Vector faces;
        std::vector<Vector> cells;
        bool cholesky_ok = false;
    };

    // With `fixed_step`, the fixed unknowns move by it and the returned face
    // increment still holds zeros on fixed rows; cell increments include its effect.
    Increment solve_increment(const Assembly& A, const ExternalLoads& ex, const Vector* fixed_step = nullptr) const
    {
        Eigen::SparseMatrix<double> K;
        Vector rhs;
        condensed_system(A, K, rhs, fixed_step);
        for (Index g = 0; g < num_face_dofs(); ++g)
            if (free_index_[std::size_t(g)] >= 0)
                rhs[free_index_[std::size_t(g)]] += ex.faces[g];
        Increment inc;
        Vector x;
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
        llt.compute(K);
        if (llt.info() == Eigen::Success) {
            inc.cholesky_ok = true;
            x = llt.solve(rhs);
        } else {
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
            ldlt.compute(K);
            if (ldlt.info() != Eigen::Success)
                throw NumericalError("condensed system factorization failed");
            x = ldlt.solve(rhs);
        }
        if (!x.allFinite())
            throw NumericalError("linear solve produced non-finite values");
        inc.faces = Vector::Zero(num_face_dofs());
        for (Index g = 0; g < num_face_dofs(); ++g)
            if (free_index_[std::size_t(g)] >= 0)
                inc.faces[g] = x[free_index_[std::size_t(g)]];
        const Mesh& m = mesh();
        inc.cells.resize(m.num_cells());
        for (std::size_t c = 0; c < m.num_cells(); ++c) {
            const Cell& cell = m.cell(c);
            Vector duF(Index(cell.faces.size()) * fdofs_);
            for (std::size_t i = 0; i < cell.faces.size(); ++i)
                duF.segment(Index(i) * fdofs_, fdofs_) = inc.faces.segment(Index(cell.faces[i]) * fdofs_, fdofs_);
            if (fixed_step)
                for (std::size_t i = 0; i < cell.faces.size(); ++i)
                    for (Index r = 0; r < fdofs_; ++r) {
                        const Index gdof = Index(cell.faces[i]) * fdofs_ + r;
                        if (fixed_[std::size_t(gdof)])
                            duF[Index(i) * fdofs_ + r] = (*fixed_step)[gdof];
                    }
            inc.cells[c] = recover_cell(A.condensed[c], duF);
        }
        return inc;
    }

    // Same correction from the uncondensed (cell + face) system; verification oracle.
    Increment solve_increment_monolithic(const Assembly& A, const ExternalLoads& ex) const
    {
        const Mesh& m = mesh();
        const Index nc = Index(layout().cell_dofs());
        const Index ncells = Index(m.num_cells()) * nc;
        const Index n = ncells + num_free_;
        std::vector<Eigen::Triplet<double>> trip;
        Vector rhs = Vector::Zero(n);
        for (std::size_t c = 0; c < m.num_cells(); ++c) {
            const Cell& cell = m.cell(c);
            const auto& ca = A.cells[c];
            const Index nl = ca.K.rows();
            std::vector<Index> g(static_cast<std::size_t>(nl));
            for (Index r = 0; r < nc; ++r)
                g[std::size_t(r)] = Index(c) * nc + r;
            for (std::size_t i = 0; i < cell.faces.size(); ++i)
                for (Index r = 0; r < fdofs_; ++r) {
                    const Index fi = free_index_[std::size_t(Index(cell.faces[i]) * fdofs_ + r)];
                    g[std::size_t(nc + Index(i) * fdofs_ + r)] = fi < 0 ? -1 : ncells + fi;
                }
            for (Index r = 0; r < nl; ++r) {
                const Index gr = g[std::size_t(r)];
                if (gr < 0)
                    continue;
                rhs[gr] -= ca.R[r];
                for (Index col = 0; col < nl; ++col)
                    if (g[std::size_t(col)] >= 0)
                        trip.emplace_back(gr, g[std::size_t(col)], ca.K(r, col));
            }
        }
        for (Index gdof = 0; gdof < num_face_dofs(); ++gdof)
            if (free_index_[std::size_t(gdof)] >= 0)
                rhs[ncells + free_index_[std::size_t(gdof)]] += ex.faces[gdof];
        Eigen::SparseMatrix<double> K(n, n);
        K.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(K);
        if (lu.info() != Eigen::Success)
            throw NumericalError("monolithic factorization failed");
        const Vector x = lu.solve(rhs);
        Increment inc;
        inc.faces = Vector::Zero(num_face_dofs());
        for (Index gdof = 0; gdof < num_face_dofs(); ++gdof)
            if (free_index_[std::size_t(gdof)] >= 0)
                inc.faces[gdof] = x[ncells + free_index_[std::size_t(gdof)]];
        inc.cells.resize(m.num_cells());
        for (std::size_t c = 0; c < m.num_cells(); ++c)
            inc.cells[c] = x.segment(Index(c) * nc, nc);
        return inc;
    }

    // Newton iterations for load step `step` at load factor t. On success the
    // state holds the converged unknowns and committed internal variables;
    // on failure it is left exactly as it was.
    StepReport newton_solve_step(GlobalState& state, int step, double t) const
    {
        const auto& opt = setup_.options;
        StepReport rep;
        rep.step = step;
        rep.load_factor = t;
        GlobalState trial = state;
        apply_dirichlet(trial, t);
        // Predictor: the first iteration linearizes at the previous converged
        // unknowns and moves the Dirichlet faces inside the linear solve.
        Vector fixed_step = Vector::Zero(num_face_dofs());
        for (Index g = 0; g < num_face_dofs(); ++g)
            if (fixed_[std::size_t(g)])
                fixed_step[g] = trial.faces[g] - state.faces[g];
        try {
            const ExternalLoads ex = external_loads(t);
            double ext_norm2 = 0.0;
            for (Index g = 0; g < num_face_dofs(); ++g)
                if (!fixed_[std::size_t(g)])
                    ext_norm2 += ex.faces[g] * ex.faces[g];
            const Index nc = Index(layout().cell_dofs());
            for (const auto& f : ex.cells)
                ext_norm2 += f.head(nc).squaredNorm();
            double ref = std::sqrt(ext_norm2);
            std::optional<GlobalState> best;
            double best_res = 0.0;
            int polish_left = opt.polish_iterations;
            auto commit = [&](const GlobalState& tr, const Assembly& A) {
                GlobalState c = tr;
                for (std::size_t cell = 0; cell < mesh().num_cells(); ++cell) {
                    const auto& ca = A.cells[cell];
                    for (std::size_t j = 0; j < ca.points.size(); ++j) {
                        const std::size_t q = qp_offset_[cell] + j;
                        c.states[q] = ca.points[j].state;
                        c.stress[q] = ca.points[j].stress;
                        c.strain[q] = ca.strain[j];
                    }
                }
                c.load_factor = t;
                c.step = step;
                return c;
            };
            auto finish = [&]() {
                rep.status = StepStatus::converged;
                rep.iterations = int(rep.cholesky_ok.size());
                rep.residual = best_res;
                state = std::move(*best);
                return rep;
            };
            for (int it = 0;; ++it) {
                Assembly A = assemble(it == 0 ? state : trial, ex, true, opt.coercivity);
                double free2 = 0.0, react2 = 0.0;
                for (Index g = 0; g < num_face_dofs(); ++g) {
                    const double r = A.face_residual[g];
                    (fixed_[std::size_t(g)] ? react2 : free2) += r * r;
                }
                const double res = std::sqrt(free2 + A.cell_residual2);
                ref = std::max(ref, std::sqrt(react2));
                rep.residual_history.push_back(res);
                rep.residual = res;
                rep.reference = ref;
                if (opt.coercivity)
                    rep.theta.push_back(A.theta);
                if (!std::isfinite(res)) {
                    rep.status = StepStatus::numerical_error;
                    rep.message = "non-finite residual";
                    return rep;
                }
                if (it >= 1 && (best || res <= std::max(opt.rtol * ref, opt.atol))) {
                    if (!best || res < best_res) {
                        best = commit(trial, A);
                        best_res = res;
                        rep.plastic_points = A.plastic_points;
                    }
                    if (polish_left-- <= 0)
                        return finish();
                }
                if (!best && it >= opt.max_iterations) {
                    rep.status = StepStatus::non_convergence;
                    rep.iterations = it;
                    rep.message = "maximum Newton iterations reached";
                    return rep;
                }
                Increment inc;
                try {
                    inc = solve_increment(A, ex, it == 0 ? &fixed_step : nullptr);
                } catch (const NumericalError& e) {
                    if (best)
                        return finish();
                    rep.status = StepStatus::linear_solver_breakdown;
                    rep.iterations = it;
                    rep.message = e.what();
                    return rep;
                }
                rep.cholesky_ok.push_back(inc.cholesky_ok);
                add_increment(trial.faces, trial.faces_lo, inc.faces);
                if (trial.cells_lo.size() != trial.cells.size())
                    trial.cells_lo.assign(trial.cells.size(), Vector());
                for (std::size_t c = 0; c < mesh().num_cells(); ++c)
                    add_increment(trial.cells[c], trial.cells_lo[c], inc.cells[c]);
            }
        } catch (const NumericalError& e) {
            rep.status = StepStatus::linear_solver_breakdown;
            rep.message = e.what();
            return rep;
        }
    }

    using StepCallback = std::function<void(const GlobalState&, const StepReport&)>;

    SolveHistory run(GlobalState& state, const StepCallback& on_step = {}, bool keep_snapshots = true) const
    {
        SolveHistory h;
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t n = 0; n < setup_.load_factors.size(); ++n) {
            StepReport rep = newton_solve_step(state, int(n + 1), setup_.load_factors[n]);
            h.total_iterations += rep.iterations;
            if (!rep.converged()) {
                h.failure = rep;
                break;
            }
            if (keep_snapshots)
                h.snapshots.push_back(state.faces);
            h.steps.push_back(rep);
            if (on_step)
                on_step(state, rep);
        }
        h.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return h;
    }

    SolveHistory run(const StepCallback& on_step = {}, bool keep_snapshots = true) const
    {
        GlobalState s = initial_state();
        return run(s, on_step, keep_snapshots);
    }

    // Tangent spectrum minimum and condensed-matrix definiteness at the current state.
    CoercivityReport coercivity_diagnostic(const GlobalState& s, double t) const
    {
        GlobalState trial = s;
        apply_dirichlet(trial, t);
        const ExternalLoads ex = external_loads(t);
        const Assembly A = assemble(trial, ex, true, true);
        Eigen::SparseMatrix<double> K;
        Vector rhs;
        condensed_system(A, K, rhs);
        CoercivityReport r;
        r.theta = A.theta;
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(K);
        r.cholesky_ok = llt.info() == Eigen::Success;
        if (r.cholesky_ok) {
            // Inverse power iteration for the smallest eigenvalue.
            Vector x = Vector::Ones(K.rows()).normalized();
            double lam = 0.0;
            for (int it = 0; it < 200; ++it) {
                Vector y = llt.solve(x);
                const double ny = y.norm();
                const double next = 1.0 / ny;
                x = y / ny;
                if (std::abs(next - lam) <= 1e-10 * std::abs(next)) {
                    lam = next;
                    break;
                }
                lam = next;
            }
            r.min_eigenvalue = x.dot(K * x);
        } else {
            r.min_eigenvalue = -std::numeric_limits<double>::infinity();
        }
        return r;
    }

private:
    ProblemSetup setup_;
    int d_ = 2;
    Index nf_ = 0, fdofs_ = 0;
    std::vector<LocalOperatorSet> ops_;
    std::vector<std::size_t> qp_offset_;
    std::vector<char> fixed_;
    std::vector<Index> free_index_;
    Index num_free_ = 0;
    std::vector<int> face_bc_, face_neumann_;
    std::vector<ScaledMonomials> face_bases_;
    std::vector<Eigen::LLT<Matrix>> face_mass_llt_;
};

// Discrete tractions per cell and local face (component-major face-basis
// coefficients): T = Pi_F(Pi_Q(sigma) n) + beta M_F^{-1} (S u)|_F.
struct CellTractions {
    std::vector<Vector> faces;
};

// Cell P^k coefficients (columns: symmetric components) of the quadrature stresses.
inline Matrix stress_projection(const Solver& s, const GlobalState& st, std::size_t cell)
{
    const auto& ops = s.operators(cell);
    const int d = s.mesh().dimension();
    const Index Nk = ops.mass_k.rows();
    Eigen::LLT<Matrix> llt(ops.mass_k);
    Matrix rhs = Matrix::Zero(Nk, ops.layout.sym_size());
    Vector phi(ops.basis.size());
    for (std::size_t j = 0; j < ops.rule.size(); ++j) {
        ops.basis.eval(ops.rule.points[j], phi);
        const SymTensor& sig = st.stress[s.point_offset(cell) + j];
        for (int c = 0; c < ops.layout.sym_size(); ++c)
            rhs.col(c) += ops.rule.weights[j] * sig[symtensor::to_mandel(d, c)] * phi.head(Nk);
    }
    return llt.solve(rhs);
}

inline std::vector<CellTractions> compute_tractions(const Solver& s, const GlobalState& st)
{
    const Mesh& m = s.mesh();
    const auto& L = s.layout();
    const int d = m.dimension();
    const Index Nf = Index(L.face_scalar()), fd = Index(L.face_dofs()), nc = Index(L.cell_dofs());
    std::vector<CellTractions> out(m.num_cells());
    detail::parallel_for(m.num_cells(), s.setup().options.threads, [&](std::size_t c) {
        const auto& ops = s.operators(c);
        const Matrix coef = stress_projection(s, st, c);
        const Index Nk = coef.rows();
        const Vector Su = s.beta() * (ops.S * s.local_dofs(st, c));
        const Cell& cell = m.cell(c);
        out[c].faces.resize(cell.faces.size());
        for (std::size_t i = 0; i < cell.faces.size(); ++i) {
            const std::size_t f = cell.faces[i];
            const Point n = m.outward_normal(c, i);
            const auto& fb = s.face_basis_of(f);
            const auto q = face_quadrature(m, f, 2 * L.k);
            Matrix b = Matrix::Zero(Nf, d);
            Matrix Mf = Matrix::Zero(Nf, Nf);
            Vector phi(ops.basis.size());
            for (std::size_t p = 0; p < q.size(); ++p) {
                const Vector psi = fb.eval(q.points[p]);
                ops.basis.eval(q.points[p], phi);
                Eigen::Matrix3d sig = Eigen::Matrix3d::Zero();
                for (int cc = 0; cc < L.sym_size(); ++cc)
                    sig += phi.head(Nk).dot(coef.col(cc)) * symtensor::basis_tensor(d, cc);
                const Point sn = sig * n;
                for (int a = 0; a < d; ++a)
                    b.col(a) += q.weights[p] * sn[a] * psi;
                Mf.noalias() += q.weights[p] * psi * psi.transpose();
            }
            Eigen::LLT<Matrix> mf(Mf);
            Vector t(fd);
            const Index off = nc + Index(i) * fd;
            for (int a = 0; a < d; ++a)
                t.segment(a * Nf, Nf) = mf.solve(Vector(b.col(a) + Su.segment(off + a * Nf, Nf)));
            out[c].faces[i] = std::move(t);
        }
    });
    return out;
}

// Relative residuals of the discrete equilibrium identities. Face defects are
// measured in L2(F) and summed over faces, relative to the L2 norm of all
// cell-face tractions; the virtual-work defect is relative to the norm of the
// internal virtual work (Pi sigma, grad^s v_T) over all cells.
struct EquilibriumReport {
    double action_reaction = 0.0;
    double neumann = 0.0;
    double virtual_work = 0.0;
};

inline EquilibriumReport equilibrium_check(const Solver& s, const GlobalState& st)
{
    const Mesh& m = s.mesh();
    const auto& L = s.layout();
    const int d = m.dimension();
    const Index Nf = Index(L.face_scalar()), Nc = Index(L.cell_scalar());
    const double t = st.load_factor;
    const auto T = compute_tractions(s, st);
    auto face_norm2 = [&](std::size_t f, const Vector& coeff) {
        const auto q = face_quadrature(m, f, 2 * L.k);
        double n2 = 0.0;
        for (std::size_t p = 0; p < q.size(); ++p) {
            const Vector psi = s.face_basis_of(f).eval(q.points[p]);
            for (int a = 0; a < d; ++a) {
                const double v = psi.dot(coeff.segment(a * Nf, Nf));
                n2 += q.weights[p] * v * v;
            }
        }
        return n2;
    };
    double total2 = 0.0, ar2 = 0.0, nm2 = 0.0;
    std::vector<const Vector*> first(m.num_faces(), nullptr);
    for (std::size_t c = 0; c < m.num_cells(); ++c)
        for (std::size_t i = 0; i < m.cell(c).faces.size(); ++i) {
            const std::size_t f = m.cell(c).faces[i];
            total2 += face_norm2(f, T[c].faces[i]);
            if (m.face(f).is_boundary()) {
                const int nb = s.neumann_of(f);
                const int db = s.dirichlet_of(f);
                // Prescribed traction (zero where no load is listed) on components not pinned.
                Vector tn = Vector::Zero(Index(L.face_dofs()));
                if (nb >= 0) {
                    const auto q = face_quadrature(m, f, 2 * L.k + 4);
                    Matrix rhs = Matrix::Zero(Nf, d), Mf = Matrix::Zero(Nf, Nf);
                    for (std::size_t p = 0; p < q.size(); ++p) {
                        const Vector psi = s.face_basis_of(f).eval(q.points[p]);
                        const Point tr = s.setup().neumann[std::size_t(nb)].traction(q.points[p], m.face(f).normal, t);
                        for (int a = 0; a < d; ++a)
                            rhs.col(a) += q.weights[p] * tr[a] * psi;
                        Mf.noalias() += q.weights[p] * psi * psi.transpose();
                    }
                    const Matrix sol = Mf.llt().solve(rhs);
                    for (int a = 0; a < d; ++a)
                        tn.segment(a * Nf, Nf) = sol.col(a);
                }
                Vector diff = T[c].faces[i] - tn;
                for (int a = 0; a < d; ++a)
                    if (db >= 0 && s.setup().dirichlet[std::size_t(db)].components[std::size_t(a)])
                        diff.segment(a * Nf, Nf).setZero();
                nm2 += face_norm2(f, diff);
            } else if (!first[f]) {
                first[f] = &T[c].faces[i];
            } else {
                ar2 += face_norm2(f, *first[f] + T[c].faces[i]);
            }
        }
    EquilibriumReport rep;
    const double tnorm = std::max(std::sqrt(total2), 1e-300);
    rep.action_reaction = std::sqrt(ar2) / tnorm;
    rep.neumann = std::sqrt(nm2) / tnorm;
    // Per-cell virtual work: (Pi sigma, grad^s v)_T - (f, v)_T - sum_F (T_F, v)_F = 0 for v in P^l.
    double vw2 = 0.0, int2 = 0.0;
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
        const auto& ops = s.operators(c);
        const Matrix coef = stress_projection(s, st, c);
        const Index Nk = coef.rows();
        const auto cb = cell_basis(m, c, L.l);
        Vector lhs = Vector::Zero(d * Nc), internal = Vector::Zero(d * Nc);
        const auto q = cell_quadrature(m, c, L.operator_order() + 2);
        Vector phi(ops.basis.size());
        for (std::size_t p = 0; p < q.size(); ++p) {
            ops.basis.eval(q.points[p], phi);
            Eigen::Matrix3d sig = Eigen::Matrix3d::Zero();
            for (int cc = 0; cc < L.sym_size(); ++cc)
                sig += phi.head(Nk).dot(coef.col(cc)) * symtensor::basis_tensor(d, cc);
            const Matrix g = cb.eval_grad(q.points[p]);
            const Vector v = cb.eval(q.points[p]);
            const Point bf = s.setup().body_force ? s.setup().body_force(q.points[p], t) : Point(Point::Zero());
            for (int a = 0; a < d; ++a) {
                const Vector w = q.weights[p] * (g.leftCols(3) * sig.row(a).transpose());
                internal.segment(a * Nc, Nc) += w;
                lhs.segment(a * Nc, Nc) += w - q.weights[p] * bf[a] * v;
            }
        }
        const Cell& cell = m.cell(c);
        for (std::size_t i = 0; i < cell.faces.size(); ++i) {
            const std::size_t f = cell.faces[i];
            const auto fq = face_quadrature(m, f, L.k + L.l);
            for (std::size_t p = 0; p < fq.size(); ++p) {
                const Vector psi = s.face_basis_of(f).eval(fq.points[p]);
                const Vector v = cb.eval(fq.points[p]);
                for (int a = 0; a < d; ++a)
                    lhs.segment(a * Nc, Nc) -= fq.weights[p] * psi.dot(T[c].faces[i].segment(a * Nf, Nf)) * v;
            }
        }
        vw2 += lhs.squaredNorm();
        int2 += internal.squaredNorm();
    }
    rep.virtual_work = std::sqrt(vw2) / std::max(std::sqrt(int2), 1e-300);
    return rep;
}

inline void write_step_csv(const SolveHistory& h, std::ostream& out)
{
    out << "step,load_factor,iterations,residual,reference,status\n" << std::setprecision(17);
    for (const auto& r : h.steps)
        out << r.step << "," << r.load_factor << "," << r.iterations << "," << r.residual << "," << r.reference << ","
            << to_string(r.status) << "\n";
    if (h.failure) {
        const auto& r = *h.failure;
        out << r.step << "," << r.load_factor << "," << r.iterations << "," << r.residual << "," << r.reference << ","
            << to_string(r.status) << "\n";
    }
}

} // namespace hho
