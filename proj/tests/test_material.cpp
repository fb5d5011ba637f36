#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace hho;

namespace {

const MaterialParams sphere{210e3, 0.3, 240.0, 0.0, 0.0};
const MaterialParams cook{70.0, 0.4999, 0.243, 0.135, 0.0};
const MaterialParams strip{70.0, 0.3, 0.8, 10.0, 5.0};
const MaterialParams cube{200e3, 0.3, 150.0, 0.0, 0.0};

SymTensor random_sym(std::mt19937& rng, double scale)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SymTensor s;
    for (int i = 0; i < 6; ++i)
        s[i] = scale * u(rng);
    return s;
}

SymTensor uniaxial(double s)
{
    SymTensor t = SymTensor::Zero();
    t[0] = s;
    return t;
}

} // namespace

TEST(ElasticStress, Examples)
{
    const MaterialParams mp{210e3, 0.3, 240, 0, 0};
    EXPECT_EQ(elastic_stress(mp, SymTensor::Zero()).norm(), 0.0);
    const SymTensor s = elastic_stress(mp, mandel::identity());
    for (int i = 0; i < 3; ++i)
        EXPECT_NEAR(s[i], 2 * mp.mu() + 3 * mp.lambda(), 1e-9);
    const SymTensor u = elastic_stress(mp, uniaxial(1.0));
    const double lam = 210e3 * 0.3 / (1.3 * 0.4), mu = 210e3 / 2.6;
    EXPECT_NEAR(u[0], lam + 2 * mu, 1e-9);
    EXPECT_NEAR(u[1], lam, 1e-9);
    EXPECT_NEAR(u[2], lam, 1e-9);
}

TEST(Yield, Examples)
{
    const MaterialState st;
    EXPECT_DOUBLE_EQ(yield_function(sphere, SymTensor::Zero(), st), -240.0);
    EXPECT_NEAR(yield_function(sphere, 123.0 * mandel::identity(), st), -240.0, 1e-12);
    EXPECT_NEAR(yield_function(sphere, uniaxial(300.0), st), 60.0, 1e-12);
    EXPECT_NEAR(yield_function(sphere, uniaxial(-100.0), st), -140.0, 1e-12);
}

TEST(MaterialParams, Validation)
{
    EXPECT_NO_THROW(cook.validate());
    EXPECT_THROW((MaterialParams{1, 0.5, 1, 0, 0}).validate(), DomainError);
    EXPECT_THROW((MaterialParams{1, 0.3, 0, 0, 0}).validate(), DomainError);
    EXPECT_THROW((MaterialParams{1, 0.3, 1, -1, 0}).validate(), DomainError);
}

TEST(MandelBasis, Conversions)
{
    Eigen::Matrix3d m;
    m << 1, 2, 3, 2, 4, 5, 3, 5, 6;
    const SymTensor s = mandel::from_matrix(m);
    EXPECT_NEAR(s.squaredNorm(), (m.array() * m.array()).sum(), 1e-12);
    EXPECT_LT((mandel::to_matrix(s) - m).norm(), 1e-14);
    m(0, 1) = 7;
    EXPECT_THROW(mandel::from_matrix(m), ContractViolation);
    EXPECT_THROW(plasticity_step(sphere, MaterialState{}, m, Eigen::Matrix3d::Zero().eval()), ContractViolation);
}

TEST(PlasticityStep, ElasticBranch)
{
    const auto r = plasticity_step(sphere, MaterialState{}, SymTensor::Zero(), uniaxial(1e-4));
    EXPECT_FALSE(r.plastic);
    EXPECT_EQ(r.tangent, elastic_tangent(sphere));
    EXPECT_EQ(r.state.p, 0.0);
}

TEST(PlasticityStep, StripParametersMultiplier)
{
    // Uniaxial strain increment scaled so that the trial yield value is 0.1.
    const MaterialState st;
    const SymTensor dir = uniaxial(1.0);
    const double phi1 = yield_function(strip, elastic_stress(strip, dir), st) + strip.sigma_y0;
    const SymTensor de = dir * (strip.sigma_y0 + 0.1) / phi1;
    EXPECT_NEAR(yield_function(strip, elastic_stress(strip, de), st), 0.1, 1e-13);
    const auto r = plasticity_step(strip, st, SymTensor::Zero(), de);
    ASSERT_TRUE(r.plastic);
    const double expected = 0.1 / (3 * strip.mu() + strip.H + 1.5 * strip.K);
    EXPECT_NEAR(r.delta_p, expected, 1e-15);
    const auto o = oracle_step(strip, st, SymTensor::Zero(), de);
    EXPECT_NEAR(o.delta_p, expected, 1e-14);
    EXPECT_LE(std::abs(yield_function(strip, r.stress, r.state)), 1e-9 * strip.sigma_y0);
}

TEST(PlasticityStep, PerfectPlasticityLandsOnSurface)
{
    const auto r = plasticity_step(sphere, MaterialState{}, SymTensor::Zero(), uniaxial(0.01));
    ASSERT_TRUE(r.plastic);
    EXPECT_NEAR(sqrt_3_2 * mandel::dev(r.stress).norm(), 240.0, 1e-8);
}

TEST(PlasticityStep, TieWithNeutralLoadingIsElastic)
{
    // Trial stress exactly on the surface: uniaxial 240 from a deviatoric-free start.
    MaterialParams mp{1.0, 0.0, 1.0, 0.0, 0.0}; // mu = 1/2, lambda = 0: sigma = eps
    const SymTensor eps = uniaxial(1.0);
    mp.sigma_y0 = sqrt_3_2 * mandel::dev(mandel::dev(elastic_stress(mp, eps))).norm();
    // Trial state on the surface, increment pointing inward: elastic.
    const auto unload = plasticity_step(mp, MaterialState{}, uniaxial(2.0), uniaxial(-1.0));
    EXPECT_FALSE(unload.plastic);
    // Trial state on the surface, increment pointing outward: plastic with zero multiplier.
    const auto load = plasticity_step(mp, MaterialState{}, SymTensor::Zero(), eps);
    EXPECT_TRUE(load.plastic);
    EXPECT_EQ(load.delta_p, 0.0);
}

TEST(PlasticityStep, RandomInvariantsAllParameterSets)
{
    std::mt19937 rng(11);
    for (const auto& mp : {sphere, cook, strip, cube}) {
        const double ey = mp.sigma_y0 / mp.E;
        for (int i = 0; i < 500; ++i) {
            MaterialState st;
            SymTensor ep = mandel::dev(random_sym(rng, 2 * ey));
            st.plastic_strain = ep;
            st.p = std::abs(random_sym(rng, 3 * ey)[0]) + ep.norm();
            const SymTensor eps = random_sym(rng, 4 * ey), deps = random_sym(rng, 4 * ey);
            const auto r = plasticity_step(mp, st, eps, deps);
            EXPECT_LE(yield_function(mp, r.stress, r.state), 1e-9 * mp.sigma_y0);
            EXPECT_LE(std::abs(mandel::trace(r.state.plastic_strain - st.plastic_strain)), 1e-12);
            EXPECT_GE(r.delta_p, 0.0);
            if (!r.plastic)
                continue;
            EXPECT_NEAR(yield_function(mp, r.stress, r.state), 0.0, 1e-9 * mp.sigma_y0);
            const SymTensor trial = elastic_stress(mp, eps + deps - st.plastic_strain);
            EXPECT_LE(std::abs(mandel::trace(r.stress - trial)), 1e-10 * trial.norm());
            const SymTensor x0 = mandel::dev(trial) - mp.K * st.plastic_strain;
            const SymTensor x1 = mandel::dev(r.stress) - mp.K * r.state.plastic_strain;
            EXPECT_GE(x0.dot(x1) / (x0.norm() * x1.norm()), 1.0 - 1e-12);
        }
    }
}

TEST(OracleStep, AgreesWithClosedForm)
{
    std::mt19937 rng(5);
    for (const auto& mp : {sphere, cook, strip, cube}) {
        const double ey = mp.sigma_y0 / mp.E;
        for (int i = 0; i < 500; ++i) {
            MaterialState st;
            st.plastic_strain = mandel::dev(random_sym(rng, ey));
            st.p = st.plastic_strain.norm();
            const SymTensor eps = random_sym(rng, 3 * ey), deps = random_sym(rng, 3 * ey);
            const auto r = plasticity_step(mp, st, eps, deps);
            const auto o = oracle_step(mp, st, eps, deps);
            EXPECT_EQ(r.plastic, o.plastic);
            EXPECT_LE((r.stress - o.stress).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, mp.sigma_y0));
        }
    }
}

TEST(OracleStep, MonotoneLoadingKeepsPNondecreasing)
{
    MaterialState st;
    SymTensor eps = SymTensor::Zero();
    const SymTensor de = uniaxial(1e-3) + 1e-4 * mandel::identity();
    double p = 0.0;
    for (int i = 0; i < 40; ++i) {
        const auto o = oracle_step(strip, st, eps, de);
        EXPECT_GE(o.state.p, p);
        p = o.state.p;
        st = o.state;
        eps += de;
        EXPECT_LE(yield_function(strip, o.stress, st), 1e-9 * strip.sigma_y0);
    }
    EXPECT_GT(p, 0.0);
}

TEST(Tangent, ConsistentMatchesFiniteDifferences)
{
    std::mt19937 rng(3);
    for (const auto& mp : {strip, cook, sphere}) {
        const double ey = mp.sigma_y0 / mp.E;
        for (int trial = 0; trial < 20; ++trial) {
            const SymTensor eps = SymTensor::Zero();
            SymTensor deps = random_sym(rng, 3 * ey);
            deps += 3 * ey * mandel::dev(uniaxial(1.0));
            const auto r = plasticity_step(mp, MaterialState{}, eps, deps, TangentKind::consistent);
            if (!r.plastic)
                continue;
            const SymTensor eta = random_sym(rng, 1.0).normalized();
            double prev = 1e300;
            for (double h : {1e-4, 1e-5, 1e-6, 1e-7}) {
                const double hh = h * ey;
                const SymTensor fd = (plasticity_step(mp, MaterialState{}, eps, SymTensor(deps + hh * eta)).stress - r.stress) / hh;
                const double err = (fd - r.tangent * eta).norm() / (r.tangent * eta).norm();
                EXPECT_LE(err, 50.0 * h + 1e-6);
                prev = std::min(prev, err);
            }
            EXPECT_LT(prev, 1e-5);
        }
    }
}

TEST(Tangent, ContinuumMatchesFiniteDifferencesForSmallPlasticSteps)
{
    // The continuum form differs from the derivative by O(delta_p).
    const MaterialState st;
    const SymTensor dir = mandel::dev(uniaxial(1.0));
    const double e0 = strip.sigma_y0 / (sqrt_3_2 * 2 * strip.mu() * dir.norm());
    for (double over : {1e-2, 1e-4}) {
        const SymTensor deps = (1 + over) * e0 * dir;
        const auto r = plasticity_step(strip, st, SymTensor::Zero(), deps);
        ASSERT_TRUE(r.plastic);
        const SymTensor eta = (dir + 0.3 * mandel::identity()).normalized();
        const double h = 1e-9 * e0;
        const SymTensor fd = (plasticity_step(strip, st, SymTensor(SymTensor::Zero()), SymTensor(deps + h * eta)).stress - r.stress) / h;
        EXPECT_LE((fd - r.tangent * eta).norm() / (r.tangent * eta).norm(), 20 * over);
    }
}

TEST(TangentSpectrum, ElasticEigenvalues)
{
    const auto ev = tangent_spectrum(elastic_tangent(sphere));
    const double mu = sphere.mu(), lam = sphere.lambda();
    for (int i = 0; i < 5; ++i)
        EXPECT_NEAR(ev[i], 2 * mu, 1e-9 * 2 * mu);
    EXPECT_NEAR(ev[5], 3 * lam + 2 * mu, 1e-9 * (3 * lam + 2 * mu));
}

TEST(TangentSpectrum, PerfectPlasticityIsPsd)
{
    const auto r = plasticity_step(sphere, MaterialState{}, SymTensor::Zero(), uniaxial(0.01));
    ASSERT_TRUE(r.plastic);
    const auto ev = tangent_spectrum(r.tangent);
    EXPECT_GE(ev[0], -1e-9 * 2 * sphere.mu());
    EXPECT_LE(ev[0], 1e-9 * 2 * sphere.mu());
}

TEST(TangentSpectrum, HardeningRatio)
{
    // Smallest eigenvalue of the continuum tangent: 2 mu Hbar / (3 mu + Hbar).
    const auto r = plasticity_step(cook, MaterialState{}, SymTensor::Zero(), uniaxial(0.02));
    ASSERT_TRUE(r.plastic);
    const auto ev = tangent_spectrum(r.tangent);
    const double mu = cook.mu(), Hb = cook.Hbar();
    EXPECT_GT(ev[0], 0.0);
    EXPECT_NEAR(ev[0] / (2 * mu), Hb / (3 * mu + Hb), 1e-10);
}

TEST(TangentSpectrum, RejectsAsymmetric)
{
    TangentModulus C = elastic_tangent(cook);
    C(0, 3) += 1.0;
    EXPECT_THROW(tangent_spectrum(C), ContractViolation);
}

TEST(Hbar, MatchesNumericalSecondDerivative)
{
    // Hbar = dPhi/dA : d2Psi_p : dPhi/dA with Psi_p = K/2 |eps_p|^2 + H/2 p^2 and
    // A = (beta, r): dPhi/dbeta = -sqrt(3/2) N, dPhi/dr = -1.
    const SymTensor N = mandel::dev(uniaxial(1.0)).normalized();
    const double hb = strip.K * 1.5 * N.squaredNorm() + strip.H;
    EXPECT_NEAR(hb, strip.Hbar(), 1e-12);
}
