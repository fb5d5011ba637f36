#include "test_util.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hho;

namespace {

std::string temp_dir(const std::string& name)
{
    const auto p = std::filesystem::temp_directory_path() / ("hho_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

// ---------------------------------------------------------------- sphere analytic solution

TEST(SphereAnalytic, LimitLoadMatchesReferenceValue)
{
    const SphereParams sp;
    EXPECT_NEAR(limit_load(sp), 332.71, 0.01);
    EXPECT_NEAR(limit_load(sp), 2.0 * 240.0 * std::log(2.0), 1e-12);
}

TEST(SphereAnalytic, LimitLoadScalesWithYieldStressAndVanishesWithWall)
{
    SphereParams sp;
    const double p1 = limit_load(sp);
    sp.sigma_y0 *= 2.0;
    EXPECT_NEAR(limit_load(sp), 2.0 * p1, 1e-12 * p1);
    sp = SphereParams{};
    sp.r_out = sp.r_in * (1.0 + 1e-9);
    EXPECT_LT(limit_load(sp), 1e-6);
}

TEST(SphereAnalytic, InvalidGeometryIsRejected)
{
    SphereParams sp;
    sp.r_out = 50.0;
    EXPECT_THROW(limit_load(sp), DomainError);
}

TEST(SphereAnalytic, PlasticRadiusAtThreeHundred)
{
    EXPECT_NEAR(plastic_radius(SphereParams{}, 300.0), 157.56, 0.05);
}

TEST(SphereAnalytic, PlasticRadiusLimits)
{
    const SphereParams sp;
    EXPECT_EQ(plastic_radius(sp, 1e-6), sp.r_in);
    EXPECT_EQ(plastic_radius(sp, yield_onset_pressure(sp)), sp.r_in);
    EXPECT_NEAR(plastic_radius(sp, limit_load(sp) * (1 - 1e-9)), sp.r_out, 0.05);
    double prev = sp.r_in;
    for (double P = 150.0; P < 332.0; P += 10.0) {
        const double r = plastic_radius(sp, P);
        EXPECT_GT(r, prev);
        prev = r;
    }
}

TEST(SphereAnalytic, PlasticRadiusRejectsOutOfRangePressure)
{
    const SphereParams sp;
    EXPECT_THROW(plastic_radius(sp, 0.0), DomainError);
    EXPECT_THROW(plastic_radius(sp, -1.0), DomainError);
    EXPECT_THROW(plastic_radius(sp, limit_load(sp)), DomainError);
    EXPECT_THROW(plastic_radius(sp, 400.0), DomainError);
}

TEST(SphereAnalytic, StressRejectsRadiusOutsideShell)
{
    const SphereParams sp;
    EXPECT_THROW(sphere_stress(sp, 300.0, 99.0), DomainError);
    EXPECT_THROW(sphere_stress(sp, 300.0, 201.0), DomainError);
}

class SphereSelfChecks : public ::testing::TestWithParam<double> {};

TEST_P(SphereSelfChecks, BoundaryValues)
{
    const SphereParams sp;
    const double P = GetParam();
    EXPECT_NEAR(sphere_stress(sp, P, sp.r_in).rr, -P, 1e-10 * P);
    EXPECT_NEAR(sphere_stress(sp, P, sp.r_out).rr, 0.0, 1e-10 * P);
}

TEST_P(SphereSelfChecks, RadialEquilibriumByFiniteDifferences)
{
    const SphereParams sp;
    const double P = GetParam();
    const double c = plastic_radius(sp, P);
    const double h = 1e-3;
    for (int i = 1; i < 400; ++i) {
        const double r = sp.r_in + (sp.r_out - sp.r_in) * i / 400.0;
        if (std::abs(r - c) < 3 * h || r - 2 * h < sp.r_in || r + 2 * h > sp.r_out)
            continue;
        auto rr = [&](double x) { return sphere_stress(sp, P, x).rr; };
        // Fourth-order central difference.
        const double d = (-rr(r + 2 * h) + 8 * rr(r + h) - 8 * rr(r - h) + rr(r - 2 * h)) / (12 * h);
        const auto s = sphere_stress(sp, P, r);
        EXPECT_NEAR(d + 2.0 * (s.rr - s.tt) / r, 0.0, 1e-8 * P / r) << "r = " << r;
    }
}

TEST_P(SphereSelfChecks, YieldInPlasticZoneAndElasticOutside)
{
    const SphereParams sp;
    const double P = GetParam();
    const double c = plastic_radius(sp, P);
    for (int i = 0; i <= 200; ++i) {
        const double r = sp.r_in + (sp.r_out - sp.r_in) * i / 200.0;
        const auto s = sphere_stress(sp, P, r);
        if (r < c)
            EXPECT_NEAR(s.tt - s.rr, sp.sigma_y0, 1e-10 * sp.sigma_y0) << "r = " << r;
        else
            EXPECT_LE(s.tt - s.rr, sp.sigma_y0 * (1 + 1e-10)) << "r = " << r;
    }
}

TEST_P(SphereSelfChecks, ContinuityAtPlasticFront)
{
    const SphereParams sp;
    const double P = GetParam();
    const double c = plastic_radius(sp, P);
    if (c == sp.r_in)
        GTEST_SKIP() << "elastic shell";
    const auto lo = sphere_stress(sp, P, c * (1 - 1e-12));
    const auto hi = sphere_stress(sp, P, c * (1 + 1e-12));
    EXPECT_NEAR(lo.rr, hi.rr, 1e-8 * P);
    EXPECT_NEAR(lo.tt, hi.tt, 1e-8 * P);
}

INSTANTIATE_TEST_SUITE_P(Pressures, SphereSelfChecks, ::testing::Values(100.0, 200.0, 300.0, 330.0));

// ---------------------------------------------------------------- CSV / VTK output

TEST(Csv, HeaderAndFullPrecisionRoundTrip)
{
    std::ostringstream out;
    const double x = 0.1 + 0.2;
    write_csv(out, {"a", "b"}, {{x, 1.0 / 3.0}, {-1e-300, 2.0}});
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "a,b");
    std::getline(in, line);
    const auto comma = line.find(',');
    EXPECT_EQ(std::stod(line.substr(0, comma)), x);
    EXPECT_EQ(std::stod(line.substr(comma + 1)), 1.0 / 3.0);
}

TEST(Csv, RowWidthMismatchThrows)
{
    std::ostringstream out;
    EXPECT_THROW(write_csv(out, {"a", "b"}, {{1.0}}), ContractViolation);
}

TEST(Csv, UnwritablePathIsReported)
{
    try {
        write_csv("/nonexistent_dir/x.csv", {"a"}, {});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent_dir/x.csv"), std::string::npos);
    }
}

TEST(Vtk, EmptyFieldListWritesGeometryOnly)
{
    const Mesh m = generate_structured(Point(0, 0, 0), Point(1, 1, 0), {2, 2, 1}, ElementType::quad);
    std::stringstream ss;
    write_vtk(ss, m, {});
    EXPECT_EQ(ss.str().find("CELL_DATA"), std::string::npos);
    const VtkData d = read_vtk(ss);
    EXPECT_EQ(d.points.size(), m.num_vertices());
    ASSERT_EQ(d.cells.size(), m.num_cells());
    for (int t : d.types)
        EXPECT_EQ(t, vtk::quad);
    EXPECT_TRUE(d.cell_fields.empty());
}

TEST(Vtk, QuadMeshFieldsRoundTripExactly)
{
    const Mesh m = generate_structured(Point(0, 0, 0), Point(1, 1, 0), {2, 2, 1}, ElementType::quad);
    Field one{"one", 1, std::vector<double>(4, 1.0)};
    Field vec{"v", 3, {}};
    Field six{"s", 6, {}};
    for (std::size_t c = 0; c < 4; ++c) {
        vec.values.insert(vec.values.end(), {0.1 * double(c), 1.0 / 3.0, -2.0});
        for (int i = 0; i < 6; ++i)
            six.values.push_back(std::exp(double(c) + i));
    }
    Field pt{"u", 1, {}};
    for (std::size_t v = 0; v < m.num_vertices(); ++v)
        pt.values.push_back(std::sqrt(double(v)));
    std::stringstream ss;
    write_vtk(ss, m, {one, vec, six}, {pt});
    const VtkData d = read_vtk(ss);
    ASSERT_EQ(d.cell_fields.size(), 3u);
    EXPECT_EQ(d.cell_fields[0].values, one.values);
    EXPECT_EQ(d.cell_fields[1].values, vec.values);
    EXPECT_EQ(d.cell_fields[2].values, six.values);
    ASSERT_EQ(d.point_fields.size(), 1u);
    EXPECT_EQ(d.point_fields[0].values, pt.values);
    for (std::size_t v = 0; v < m.num_vertices(); ++v)
        EXPECT_EQ(d.points[v], m.vertex(v));
}

TEST(Vtk, MissizedFieldIsRejected)
{
    const Mesh m = generate_structured(Point(0, 0, 0), Point(1, 1, 0), {2, 2, 1}, ElementType::quad);
    std::stringstream ss;
    EXPECT_THROW(write_vtk(ss, m, {Field{"bad", 1, {1.0, 2.0}}}), ContractViolation);
}

TEST(Vtk, PolygonCellsUseVertexLoops)
{
    const Mesh m = agglomerate(generate_structured(Point(0, 0, 0), Point(1, 1, 0), {6, 6, 1}, ElementType::quad), 0.4, 7);
    std::stringstream ss;
    write_vtk(ss, m, {});
    const VtkData d = read_vtk(ss);
    ASSERT_EQ(d.cells.size(), m.num_cells());
    bool any_polygon = false;
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
        EXPECT_EQ(d.cells[c].size(), m.cell(c).vertices.size());
        any_polygon = any_polygon || d.types[c] == vtk::polygon;
    }
    EXPECT_TRUE(any_polygon);
}

TEST(Vtk, PolyhedronFaceStreamsMatchMeshFaces)
{
    const Mesh m = agglomerate(generate_structured(Point(0, 0, 0), Point(1, 1, 1), {3, 3, 3}, ElementType::hex), 0.4, 3);
    std::stringstream ss;
    write_vtk(ss, m, {});
    const VtkData d = read_vtk(ss);
    ASSERT_EQ(d.cells.size(), m.num_cells());
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
        ASSERT_EQ(d.types[c], vtk::polyhedron);
        const auto& s = d.cells[c];
        const Cell& cell = m.cell(c);
        ASSERT_EQ(s[0], cell.faces.size());
        std::size_t pos = 1;
        for (std::size_t i = 0; i < cell.faces.size(); ++i) {
            const auto& fv = m.face(cell.faces[i]).vertices;
            ASSERT_EQ(s[pos], fv.size());
            std::vector<std::size_t> a(s.begin() + long(pos) + 1, s.begin() + long(pos + 1 + fv.size()));
            std::vector<std::size_t> b(fv.begin(), fv.end());
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            EXPECT_EQ(a, b);
            pos += 1 + fv.size();
        }
        EXPECT_EQ(pos, s.size());
    }
}

TEST(Vtk, TetrahedraArePositivelyOriented)
{
    const Mesh m = generate_structured(Point(0, 0, 0), Point(1, 1, 1), {2, 2, 2}, ElementType::tet);
    std::stringstream ss;
    write_vtk(ss, m, {});
    const VtkData d = read_vtk(ss);
    for (std::size_t c = 0; c < d.cells.size(); ++c) {
        ASSERT_EQ(d.types[c], vtk::tetra);
        const auto& e = d.cells[c];
        const Point& p0 = d.points[e[0]];
        EXPECT_GT((d.points[e[1]] - p0).cross(d.points[e[2]] - p0).dot(d.points[e[3]] - p0), 0.0);
    }
}

TEST(Vtk, PointCloudRoundTrip)
{
    std::vector<Point> pts = {Point(0, 0, 0), Point(1, 2, 3), Point(-1, 0.5, 0)};
    Field f{"p", 1, {0.0, 1.5, 2.5}};
    std::stringstream ss;
    write_vtk_points(ss, pts, {f});
    const VtkData d = read_vtk(ss);
    EXPECT_EQ(d.points, pts);
    ASSERT_EQ(d.point_fields.size(), 1u);
    EXPECT_EQ(d.point_fields[0].values, f.values);
    for (int t : d.types)
        EXPECT_EQ(t, vtk::vertex);
}

// ---------------------------------------------------------------- benchmark setups

TEST(Benchmarks, NamesParse)
{
    for (auto k : {BenchmarkKind::sphere, BenchmarkKind::cook, BenchmarkKind::strip, BenchmarkKind::cube})
        EXPECT_EQ(parse_benchmark(to_string(k)), k);
    EXPECT_THROW(parse_benchmark("bridge"), DomainError);
}

TEST(Benchmarks, SphereMeshHasSymmetryAndLoadTags)
{
    const Mesh m = sphere_mesh();
    EXPECT_EQ(m.num_cells(), 506u);
    const auto tags = m.boundary_tags();
    for (const char* t : {"inner", "outer", "sym_x", "sym_y", "sym_z"})
        EXPECT_NE(std::find(tags.begin(), tags.end(), t), tags.end()) << t;
}

TEST(Benchmarks, ProblemsValidate)
{
    const auto sphere = sphere_problem(std::make_shared<Mesh>(sphere_mesh()));
    EXPECT_NO_THROW(sphere.validate());
    ASSERT_EQ(sphere.load_factors.size(), 35u);
    EXPECT_DOUBLE_EQ(sphere.load_factors.front(), 10.0);
    EXPECT_DOUBLE_EQ(sphere.load_factors.back(), 350.0);

    const auto cook = cook_problem(std::make_shared<Mesh>(cook_membrane_mesh(4, ElementType::quad)));
    EXPECT_NO_THROW(cook.validate());
    EXPECT_EQ(cook.load_factors.size(), 20u);

    const auto strip = strip_problem(std::make_shared<Mesh>(strip_mesh(8, 4)));
    EXPECT_NO_THROW(strip.validate());

    const auto cube = cube_problem(std::make_shared<Mesh>(cube_mesh(2)));
    EXPECT_NO_THROW(cube.validate());
    EXPECT_EQ(cube.load_factors.size(), 30u);
}

TEST(Benchmarks, CubeLoadPatchIsQuarterFootprint)
{
    const Mesh m = cube_mesh(4);
    double load = 0.0, top = 0.0;
    for (std::size_t f = 0; f < m.num_faces(); ++f) {
        const Face& face = m.face(f);
        if (face.tag == "load") {
            load += face.measure;
            EXPECT_LT(face.barycenter.x(), 5.0);
            EXPECT_LT(face.barycenter.y(), 5.0);
        }
        if (face.tag == "top")
            top += face.measure;
    }
    EXPECT_NEAR(load, 25.0, 1e-12);
    EXPECT_NEAR(top, 75.0, 1e-12);
}

// ---------------------------------------------------------------- post-processing

namespace {

// Unit square with the affine field u(x) = g x + c imposed on the whole boundary.
struct AffinePatch {
    Eigen::Matrix3d g;
    Point c;
    std::unique_ptr<Solver> solver;
    GlobalState state;

    explicit AffinePatch(ElementType type = ElementType::quad, int n = 3)
    {
        g << 0.01, 0.02, 0, -0.005, 0.015, 0, 0, 0, 0;
        c = Point(0.1, -0.2, 0);
        ProblemSetup s;
        s.mesh = std::make_shared<Mesh>(generate_structured(Point(0, 0, 0), Point(1, 1, 0), {n, n, 1}, type));
        s.layout = LocalDofLayout(2, 1, 1);
        s.material.E = 1.0;
        s.material.nu = 0.3;
        s.material.sigma_y0 = 1e30;
        for (const auto& t : s.mesh->boundary_tags())
            s.dirichlet.push_back({t, {true, true, true}, [g = g, c = c](const Point& x, double) { return Point(g * x + c); }});
        s.load_factors = {1.0};
        solver = std::make_unique<Solver>(s);
        state = solver->initial_state();
        if (!solver->run(state, {}, false).completed())
            throw NumericalError("patch solve failed");
    }

    Point exact(const Point& x) const { return g * x + c; }
};

} // namespace

TEST(PostProcessing, ProbeReproducesAffineField)
{
    const AffinePatch p;
    for (const Point& x : {Point(0, 0, 0), Point(1.0 / 3.0, 0.5, 0), Point(0.5, 1.0 / 3.0, 0), Point(1, 1, 0),
                           Point(1, 0.25, 0)})
        EXPECT_LT((probe_displacement(*p.solver, p.state.faces, x) - p.exact(x)).norm(), 1e-12) << x.transpose();
    EXPECT_THROW(probe_displacement(*p.solver, p.state.faces, Point(0.5, 0.5, 0)), DomainError);
}

TEST(PostProcessing, VertexDisplacementsReproduceAffineField)
{
    const AffinePatch p(ElementType::triangle, 4);
    const auto u = vertex_displacements(*p.solver, p.state);
    for (std::size_t v = 0; v < u.size(); ++v)
        EXPECT_LT((u[v] - p.exact(p.solver->mesh().vertex(v))).norm(), 1e-12);
}

TEST(PostProcessing, MeanNormalDisplacementOfAffineField)
{
    const AffinePatch p;
    // u . n on x = 1 is g00 + g01 y + c0, averaged over y in [0, 1].
    EXPECT_NEAR(mean_normal_displacement(*p.solver, p.state.faces, "xmax"), 0.01 + 0.01 + 0.1, 1e-12);
    EXPECT_THROW(mean_normal_displacement(*p.solver, p.state.faces, "nope"), DomainError);
}

TEST(PostProcessing, CellMeansOfUniformStressTrace)
{
    const AffinePatch p;
    const auto tr = cell_mean_trace(*p.solver, p.state);
    const MaterialParams& mp = p.solver->setup().material;
    // Plane strain: tr sigma = (3 lambda + 2 mu) tr eps.
    const double expect = (3 * mp.lambda() + 2 * mp.mu()) * (0.01 + 0.015);
    for (double t : tr)
        EXPECT_NEAR(t, expect, 1e-12);
    for (double v : cell_mean_plastic_strain(*p.solver, p.state))
        EXPECT_EQ(v, 0.0);
}

TEST(PostProcessing, SphereRmsErrorOfExactAndScaledClouds)
{
    const SphereParams sp;
    SphereCloud exact, scaled;
    for (int i = 0; i <= 100; ++i) {
        const double r = sp.r_in + i;
        const auto s = sphere_stress(sp, 300.0, r);
        exact.r.push_back(r);
        exact.rr.push_back(s.rr);
        exact.tt.push_back(s.tt);
        scaled.r.push_back(r);
        scaled.rr.push_back(1.02 * s.rr);
        scaled.tt.push_back(1.02 * s.tt);
    }
    EXPECT_LT(sphere_rms_error(exact, sp, 300.0), 1e-15);
    EXPECT_NEAR(sphere_rms_error(scaled, sp, 300.0), 0.02, 1e-12);
    EXPECT_NEAR(cloud_rms_difference(scaled, exact), 0.02, 1e-12);
}

TEST(PostProcessing, SphereRmsExcludesBandAroundFront)
{
    const SphereParams sp;
    const double rp = plastic_radius(sp, 300.0);
    SphereCloud cl;
    for (double r : {110.0, rp - 2.0, rp + 4.9, 190.0}) {
        const auto s = sphere_stress(sp, 300.0, r);
        const bool near = std::abs(r - rp) < 5.0;
        cl.r.push_back(r);
        cl.rr.push_back(s.rr + (near ? 1000.0 : 0.0));
        cl.tt.push_back(s.tt);
    }
    EXPECT_LT(sphere_rms_error(cl, sp, 300.0), 1e-15);
}

TEST(PostProcessing, OscillationWitnessSeparatesSmoothAndCheckerboardFields)
{
    const Mesh m = generate_structured(Point(0, 0, 0), Point(1, 1, 0), {16, 16, 1}, ElementType::quad);
    std::vector<double> smooth, checker;
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
        const Point& x = m.cell(c).barycenter;
        smooth.push_back(std::sin(2 * x.x()) + x.y() * x.y());
        const int i = int(x.x() * 16), j = int(x.y() * 16);
        checker.push_back(smooth.back() + ((i + j) % 2 ? 0.5 : -0.5));
    }
    const auto s = trace_oscillation(m, smooth);
    EXPECT_EQ(s.count, 0u);
    EXPECT_TRUE(s.pass);
    const auto c = trace_oscillation(m, checker);
    EXPECT_GT(c.count, 100u);
    EXPECT_FALSE(c.pass);
}

TEST(PostProcessing, OscillationWitnessIgnoresDiagonalValley)
{
    // |x - y| has a one-cell-wide valley along the mesh diagonal: every valley
    // cell is below its face neighbours, but no neighbour is a maximum.
    const Mesh m = generate_structured(Point(0, 0, 0), Point(1, 1, 0), {16, 16, 1}, ElementType::quad);
    std::vector<double> valley;
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
        const Point& x = m.cell(c).barycenter;
        valley.push_back(std::abs(x.x() - x.y()) + 0.1 * x.x());
    }
    const auto r = trace_oscillation(m, valley);
    EXPECT_EQ(r.count, 0u);
    EXPECT_TRUE(r.pass);
}

TEST(PostProcessing, OscillationWitnessCountsLocalCheckerboardPatch)
{
    const Mesh m = generate_structured(Point(0, 0, 0), Point(1, 1, 0), {16, 16, 1}, ElementType::quad);
    std::vector<double> v;
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
        const Point& x = m.cell(c).barycenter;
        const int i = int(x.x() * 16), j = int(x.y() * 16);
        const bool patch = i >= 6 && i < 10 && j >= 6 && j < 10;
        v.push_back(x.x() + (patch ? ((i + j) % 2 ? 0.3 : -0.3) : 0.0));
    }
    const auto r = trace_oscillation(m, v);
    EXPECT_EQ(r.count, 16u);
    EXPECT_FALSE(r.pass);
}

// ---------------------------------------------------------------- convergence study

TEST(ConvergenceStudy, LeastSquaresRateOfExactPowerLaw)
{
    std::vector<ConvergenceLevel> lv;
    for (int n : {4, 8, 16})
        lv.push_back({n, 1.0 / n, 0, 3.0 * std::pow(1.0 / n, 2.5)});
    EXPECT_NEAR(least_squares_rate(lv), 2.5, 1e-12);
}

TEST(ConvergenceStudy, ManufacturedBodyForcesMatchFiniteDifferences)
{
    MaterialParams mp;
    mp.E = 3.0;
    mp.nu = 0.35;
    const double h = 1e-4;
    const Point x(0.3, 0.7, 0);
    for (const auto& ms : {solenoidal_solution(), polynomial_trig_solution()}) {
        // -div sigma with sigma = lambda tr(eps) I + 2 mu eps, by central differences of grad.
        auto sigma = [&](const Point& p) {
            const Eigen::Matrix3d g = ms.grad(p);
            const Eigen::Matrix3d e = 0.5 * (g + g.transpose());
            return Eigen::Matrix3d(mp.lambda() * e.trace() * Eigen::Matrix3d::Identity() + 2 * mp.mu() * e);
        };
        Point div = Point::Zero();
        for (int j = 0; j < 2; ++j) {
            Point dx = Point::Zero();
            dx[j] = h;
            div += (sigma(x + dx) - sigma(x - dx)).col(j) / (2 * h);
        }
        EXPECT_LT((ms.body_force(x, mp) + div).norm(), 1e-6);
        // grad against finite differences of u.
        for (int j = 0; j < 2; ++j) {
            Point dx = Point::Zero();
            dx[j] = h;
            const Point du = (ms.u(x + dx) - ms.u(x - dx)) / (2 * h);
            EXPECT_LT((du - ms.grad(x).col(j)).norm(), 1e-7);
        }
    }
}

TEST(ConvergenceStudy, LowestOrderRateAndIncompressibleRobustness)
{
    const auto ms = solenoidal_solution();
    const auto a = convergence_study(ms, 1, 1, ElementType::triangle, 0.3, {4, 8, 16});
    const auto b = convergence_study(ms, 1, 1, ElementType::triangle, 0.49999, {4, 8, 16});
    EXPECT_GE(a.rate, 1.8);
    for (std::size_t i = 0; i < a.levels.size(); ++i)
        EXPECT_LE(b.levels[i].error, 2.0 * a.levels[i].error);
}

TEST(ConvergenceStudy, CompressibleFieldConverges)
{
    const auto t = convergence_study(polynomial_trig_solution(), 1, 1, ElementType::quad, 0.3, {4, 8, 16});
    EXPECT_GE(t.rate, 1.8);
}

// ---------------------------------------------------------------- benchmark runs

TEST(RunBenchmark, CookWritesOutputsReproducibly)
{
    BenchmarkOptions o;
    o.steps = 3;
    const auto mesh = std::make_shared<Mesh>(cook_membrane_mesh(4, ElementType::quad));
    const std::string d1 = temp_dir("cook1"), d2 = temp_dir("cook2");
    const auto r1 = run_benchmark(BenchmarkKind::cook, mesh, o, d1, true);
    const auto r2 = run_benchmark(BenchmarkKind::cook, mesh, o, d2, true);
    EXPECT_TRUE(r1.history.completed());
    EXPECT_FALSE(r1.limit_load_reached);
    ASSERT_EQ(r1.files.size(), 6u);
    for (std::size_t i = 0; i < r1.files.size(); ++i) {
        EXPECT_TRUE(std::filesystem::exists(r1.files[i]));
        EXPECT_EQ(slurp(r1.files[i]), slurp(r2.files[i])) << r1.files[i];
    }
    const std::string curve = slurp(d1 + "/cook_load_curve.csv");
    EXPECT_EQ(curve.substr(0, curve.find('\n')), "step,load_factor,force,uy_A,iterations");
    EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 4);
    const VtkData v = read_vtk(d1 + "/cook_fields.vtk");
    EXPECT_EQ(v.cells.size(), mesh->num_cells());
    ASSERT_EQ(v.point_fields.size(), 1u);
    EXPECT_EQ(v.point_fields[0].name, "displacement");
}

TEST(RunBenchmark, StripPlasticStrainPeaksAtHole)
{
    BenchmarkOptions o;
    o.k = 2;
    o.steps = 10;
    const auto r = run_benchmark(BenchmarkKind::strip, std::make_shared<Mesh>(strip_mesh(8, 4)), o);
    ASSERT_TRUE(r.history.completed());
    EXPECT_GT(r.summary.at("max_p"), 0.0);
    EXPECT_EQ(r.summary.at("max_p_at_hole"), 1.0);
}

TEST(RunBenchmark, CubeCoarseRunCompletes)
{
    BenchmarkOptions o;
    o.steps = 5;
    const auto r = run_benchmark(BenchmarkKind::cube, std::make_shared<Mesh>(cube_mesh(2)), o);
    EXPECT_TRUE(r.history.completed());
    EXPECT_GT(r.summary.at("final_mean_load_uz"), 0.0);
}
