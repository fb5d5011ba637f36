#pragma once

#include "core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace hho {

// Symmetric 3x3 tensors in the orthonormal Mandel basis, components
// (xx, yy, zz, sqrt2*xy, sqrt2*xz, sqrt2*yz).
using SymTensor = Eigen::Matrix<double, 6, 1>;
using TangentModulus = Eigen::Matrix<double, 6, 6>;

inline constexpr double sqrt2 = 1.41421356237309504880;
inline const double sqrt_3_2 = std::sqrt(1.5);

namespace mandel {

inline constexpr int row[6] = {0, 1, 2, 0, 0, 1};
inline constexpr int col[6] = {0, 1, 2, 1, 2, 2};

// Mandel indices of the plane-strain (xx, yy, xy) components.
inline constexpr int plane[3] = {0, 1, 3};

inline SymTensor identity()
{
    SymTensor m;
    m << 1, 1, 1, 0, 0, 0;
    return m;
}

inline double trace(const SymTensor& s) { return s[0] + s[1] + s[2]; }

inline SymTensor dev(const SymTensor& s)
{
    SymTensor d = s;
    const double t = trace(s) / 3.0;
    d[0] -= t;
    d[1] -= t;
    d[2] -= t;
    return d;
}

inline Eigen::Matrix3d to_matrix(const SymTensor& s)
{
    Eigen::Matrix3d m;
    m(0, 0) = s[0];
    m(1, 1) = s[1];
    m(2, 2) = s[2];
    m(0, 1) = m(1, 0) = s[3] / sqrt2;
    m(0, 2) = m(2, 0) = s[4] / sqrt2;
    m(1, 2) = m(2, 1) = s[5] / sqrt2;
    return m;
}

// Throws ContractViolation for non-symmetric or non-finite input.
inline SymTensor from_matrix(const Eigen::Matrix3d& m)
{
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (!m.allFinite())
        throw ContractViolation("tensor has non-finite entries");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-14 * scale)
        throw ContractViolation("tensor is not symmetric");
    SymTensor s;
    s << m(0, 0), m(1, 1), m(2, 2), sqrt2 * 0.5 * (m(0, 1) + m(1, 0)), sqrt2 * 0.5 * (m(0, 2) + m(2, 0)),
        sqrt2 * 0.5 * (m(1, 2) + m(2, 1));
    return s;
}

inline TangentModulus deviatoric_projector()
{
    const SymTensor m = identity();
    return TangentModulus::Identity() - m * m.transpose() / 3.0;
}

} // namespace mandel

struct MaterialParams {
    double E = 1.0;
    double nu = 0.3;
    double sigma_y0 = 1.0;
    double H = 0.0;
    double K = 0.0;

    double mu() const { return E / (2.0 * (1.0 + nu)); }
    double lambda() const { return E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)); }
    // Generalized hardening modulus dPhi/dA : d2Psi_p : dPhi/dA for von Mises.
    double Hbar() const { return H + 1.5 * K; }

    void validate() const
    {
        const double m = mu(), l = lambda();
        if (!(m > 0) || !(3 * l + 2 * m > 0) || !std::isfinite(l))
            throw DomainError("elastic moduli violate mu > 0, 3 lambda + 2 mu > 0");
        if (H < 0 || K < 0)
            throw DomainError("hardening moduli must be nonnegative");
        if (!(sigma_y0 > 0))
            throw DomainError("initial yield stress must be positive");
    }
};

struct MaterialState {
    SymTensor plastic_strain = SymTensor::Zero();
    double p = 0.0;
};

enum class TangentKind {
    continuum,  // C - 6 mu^2 / (3 mu + Hbar) N x N, evaluated at the new state
    consistent, // algorithmic linearization of the radial return
};

inline TangentModulus elastic_tangent(const MaterialParams& mp)
{
    const SymTensor m = mandel::identity();
    return 2.0 * mp.mu() * TangentModulus::Identity() + mp.lambda() * m * m.transpose();
}

inline SymTensor elastic_stress(const MaterialParams& mp, const SymTensor& eps_e)
{
    return 2.0 * mp.mu() * eps_e + mp.lambda() * mandel::trace(eps_e) * mandel::identity();
}

inline double yield_function(const MaterialParams& mp, const SymTensor& sigma, const MaterialState& st)
{
    const SymTensor xi = mandel::dev(sigma) - mp.K * st.plastic_strain;
    return sqrt_3_2 * xi.norm() - mp.sigma_y0 - mp.H * st.p;
}

struct PlasticityResult {
    MaterialState state;
    SymTensor stress = SymTensor::Zero();
    TangentModulus tangent = TangentModulus::Zero();
    bool plastic = false;
    double delta_p = 0.0;
};

// Radial return for von Mises with linear isotropic/kinematic hardening.
inline PlasticityResult plasticity_step(const MaterialParams& mp, const MaterialState& st, const SymTensor& eps,
                                        const SymTensor& deps, TangentKind kind = TangentKind::continuum)
{
    if (!eps.allFinite() || !deps.allFinite())
        throw ContractViolation("strain has non-finite entries");
    const double mu = mp.mu();
    const TangentModulus C = elastic_tangent(mp);
    PlasticityResult r;
    r.state = st;
    const SymTensor sig_tr = C * (eps + deps - st.plastic_strain);
    // Second dev() removes the trace left by cancellation in large hydrostatic stresses.
    const SymTensor xi = mandel::dev(mandel::dev(sig_tr) - mp.K * st.plastic_strain);
    const double nxi = xi.norm();
    const double phi_tr = sqrt_3_2 * nxi - mp.sigma_y0 - mp.H * st.p;
    bool elastic = phi_tr < 0;
    if (phi_tr == 0.0)
        elastic = nxi == 0.0 || sqrt_3_2 * (xi / nxi).dot(C * deps) <= 0.0;
    if (elastic) {
        r.stress = sig_tr;
        r.tangent = C;
        return r;
    }
    const SymTensor N = xi / nxi;
    const double denom = 3.0 * mu + mp.Hbar();
    const double dp = phi_tr / denom;
    r.plastic = true;
    r.delta_p = dp;
    r.state.plastic_strain = st.plastic_strain + dp * sqrt_3_2 * N;
    r.state.p = st.p + dp;
    r.stress = sig_tr - 2.0 * mu * sqrt_3_2 * dp * N;
    r.tangent = C - (6.0 * mu * mu / denom) * N * N.transpose();
    if (kind == TangentKind::consistent)
        r.tangent -= (4.0 * mu * mu * sqrt_3_2 * dp / nxi) * (mandel::deviatoric_projector() - N * N.transpose());
    return r;
}

inline PlasticityResult plasticity_step(const MaterialParams& mp, const MaterialState& st,
                                        const Eigen::Matrix3d& eps, const Eigen::Matrix3d& deps,
                                        TangentKind kind = TangentKind::continuum)
{
    return plasticity_step(mp, st, mandel::from_matrix(eps), mandel::from_matrix(deps), kind);
}

struct OracleResult {
    MaterialState state;
    SymTensor stress = SymTensor::Zero();
    bool plastic = false;
    double delta_p = 0.0;
};

// Solves the scalar consistency equation by bisection, without the closed form.
inline OracleResult oracle_step(const MaterialParams& mp, const MaterialState& st, const SymTensor& eps,
                                const SymTensor& deps)
{
    const double mu = mp.mu();
    const SymTensor sig_tr = elastic_stress(mp, eps + deps - st.plastic_strain);
    OracleResult r;
    r.state = st;
    const double phi_tr = yield_function(mp, sig_tr, st);
    if (phi_tr < 0 || (phi_tr == 0.0 && yield_function(mp, sig_tr + elastic_stress(mp, deps), st) <= 0.0)) {
        r.stress = sig_tr;
        return r;
    }
    const SymTensor xi = mandel::dev(mandel::dev(sig_tr) - mp.K * st.plastic_strain);
    const SymTensor N = xi / xi.norm();
    auto trial = [&](double dp, MaterialState& s) {
        s.plastic_strain = st.plastic_strain + dp * sqrt_3_2 * N;
        s.p = st.p + dp;
        return elastic_stress(mp, eps + deps - s.plastic_strain);
    };
    auto residual = [&](double dp) {
        MaterialState s;
        const SymTensor sig = trial(dp, s);
        return yield_function(mp, sig, s);
    };
    // Beyond xi = 0 the norm folds back; the root lies before that point.
    const double fold = xi.norm() / (sqrt_3_2 * (2.0 * mu + mp.K));
    double lo = 0.0, hi = std::min(phi_tr / (3.0 * mu) * (1.0 + 1e-12), fold);
    if (!(residual(lo) >= 0) || !(residual(hi) <= 0))
        throw NumericalError("oracle bracket failure");
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(hi, 1e-300); ++it) {
        const double mid = 0.5 * (lo + hi);
        (residual(mid) > 0 ? lo : hi) = mid;
    }
    r.delta_p = 0.5 * (lo + hi);
    r.plastic = true;
    r.stress = trial(r.delta_p, r.state);
    return r;
}

// Ascending eigenvalues of a 6x6 tangent; throws if not major-symmetric.
inline Eigen::Matrix<double, 6, 1> tangent_spectrum(const TangentModulus& C)
{
    const double scale = std::max(1e-300, C.cwiseAbs().maxCoeff());
    if ((C - C.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ContractViolation("tangent modulus lacks major symmetry");
    Eigen::SelfAdjointEigenSolver<TangentModulus> es(C, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

} // namespace hho
