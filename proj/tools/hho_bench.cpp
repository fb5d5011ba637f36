// Command-line front end. Exit codes: 0 success, 2 limit load reached, 1 error.

#include <hho/config.hpp>
#include <hho/hho.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace hho;

constexpr int exit_ok = 0, exit_error = 1, exit_limit = 2;

void print_history(const SolveHistory& h)
{
    std::printf("steps converged: %zu, Newton iterations: %d, last converged load factor: %.10g\n", h.steps.size(),
                h.total_iterations, h.last_converged_load());
    if (h.failure)
        std::printf("step %d (load factor %.10g) did not converge: %s (residual %.3e)\n", h.failure->step,
                    h.failure->load_factor, to_string(h.failure->status), h.failure->residual);
}

struct BenchArgs {
    std::string name;
    int k = 1, l = -1, steps = -1, n = 0, na = 0, nr = 0;
    double beta0 = 1.0, agglomerate = 0.0;
    unsigned seed = 42, threads = 0;
    std::string mesh, element, out, tangent = "consistent";
    bool vtk = false;
};

Mesh bench_mesh(BenchmarkKind kind, const BenchArgs& a)
{
    Mesh m;
    if (!a.mesh.empty()) {
        m = import_mesh(a.mesh);
    } else {
        switch (kind) {
        case BenchmarkKind::sphere: m = sphere_mesh(); break;
        case BenchmarkKind::cook:
            m = cook_membrane_mesh(a.n > 0 ? a.n : 16, a.element.empty() ? ElementType::quad : parse_element_type(a.element));
            break;
        case BenchmarkKind::strip:
            m = strip_mesh(a.na > 0 ? a.na : 16, a.nr > 0 ? a.nr : 8,
                           a.element.empty() ? ElementType::triangle : parse_element_type(a.element));
            break;
        case BenchmarkKind::cube:
            m = cube_mesh(a.n > 0 ? a.n : 4, a.element.empty() ? ElementType::hex : parse_element_type(a.element));
            break;
        }
    }
    if (a.agglomerate > 0)
        m = agglomerate(m, a.agglomerate, a.seed);
    return m;
}

TangentKind parse_tangent(const std::string& s)
{
    if (s == "consistent")
        return TangentKind::consistent;
    if (s == "continuum")
        return TangentKind::continuum;
    throw DomainError("tangent must be 'consistent' or 'continuum'");
}

int cmd_bench(const BenchArgs& a)
{
    const BenchmarkKind kind = parse_benchmark(a.name);
    auto mesh = std::make_shared<const Mesh>(bench_mesh(kind, a));
    BenchmarkOptions o;
    o.k = a.k;
    o.l = a.l;
    o.beta0 = a.beta0;
    o.steps = a.steps;
    o.solver.threads = a.threads;
    o.solver.tangent = parse_tangent(a.tangent);
    std::printf("%s: %zu cells, k = %d, l = %d, beta0 = %g\n", to_string(kind), mesh->num_cells(), o.k,
                o.l < 0 ? o.k : o.l, o.beta0);
    const auto res = run_benchmark(kind, mesh, o, a.out, a.vtk);
    print_history(res.history);
    for (const auto& [key, v] : res.summary)
        std::printf("  %-30s %.10g\n", key.c_str(), v);
    for (const auto& f : res.files)
        std::printf("wrote %s\n", f.c_str());
    return res.limit_load_reached ? exit_limit : exit_ok;
}

int cmd_run(const std::string& path)
{
    const RunConfig c = load_run_config(path);
    const auto res = run_config(c);
    print_history(res.history);
    for (const auto& f : res.files)
        std::printf("wrote %s\n", f.c_str());
    return res.history.completed() ? exit_ok : exit_limit;
}

struct MeshGenArgs {
    std::string type = "box", element, out, format;
    std::vector<double> lower{0, 0}, upper{1, 1};
    std::vector<int> divisions{4, 4};
    int n = 8, na = 16, nr = 8;
};

int cmd_mesh_gen(const MeshGenArgs& a)
{
    MeshSpec s;
    s.generator = a.type;
    const bool three = a.type == "cube" || a.type == "sphere" || a.lower.size() == 3;
    s.element = a.element.empty() ? (a.type == "strip" ? ElementType::triangle : three ? ElementType::hex : ElementType::quad)
                                  : parse_element_type(a.element);
    if (a.lower.size() != a.upper.size() || a.lower.size() != a.divisions.size() || a.lower.size() < 2 ||
        a.lower.size() > 3)
        throw DomainError("--lower, --upper and --divisions need 2 or 3 entries each");
    for (std::size_t i = 0; i < a.lower.size(); ++i) {
        s.lower[i] = a.lower[i];
        s.upper[i] = a.upper[i];
        s.divisions[i] = a.divisions[i];
    }
    s.n = a.n;
    s.na = a.na;
    s.nr = a.nr;
    const Mesh m = build_mesh(s);
    export_mesh(m, a.out, a.format.empty() ? guess_mesh_format(a.out) : parse_mesh_format(a.format));
    std::printf("wrote %s: %zu cells, %zu faces\n", a.out.c_str(), m.num_cells(), m.num_faces());
    return exit_ok;
}

int cmd_mesh_validate(const std::string& path)
{
    const Mesh m = import_mesh(path);
    const auto r = validate(m);
    std::printf("%s: dimension %d, %zu cells, %zu faces, %zu vertices\n", path.c_str(), m.dimension(), m.num_cells(),
                m.num_faces(), m.num_vertices());
    for (const auto& c : r.checks) {
        std::printf("  %-16s %s", c.name.c_str(), c.pass ? "pass" : "FAIL");
        for (std::size_t i = 0; i < std::min<std::size_t>(c.offenders.size(), 10); ++i)
            std::printf(" %zu", c.offenders[i]);
        if (c.offenders.size() > 10)
            std::printf(" ... (%zu total)", c.offenders.size());
        std::printf("\n");
    }
    std::printf("  shape regularity (max h_T / rho_T): %.4g\n", r.shape_regularity);
    return r.ok() ? exit_ok : exit_error;
}

struct StudyArgs {
    int k = 1;
    std::string element = "triangle";
    std::vector<int> levels{4, 8, 16, 32};
    int n = 16;
    std::string out;
};

int cmd_study_convergence(const StudyArgs& a)
{
    const ElementType type = parse_element_type(a.element);
    std::vector<std::vector<double>> rows;
    ConvergenceTable ref;
    for (double nu : {0.3, 0.49999}) {
        const auto t = convergence_study(solenoidal_solution(), a.k, a.k, type, nu, a.levels);
        std::printf("k = %d, %s, nu = %g: rate %.3f\n", a.k, a.element.c_str(), nu, t.rate);
        for (std::size_t i = 0; i < t.levels.size(); ++i) {
            const auto& lv = t.levels[i];
            std::printf("  n = %3d  h = %.4e  dofs = %7zu  error = %.6e\n", lv.n, lv.h, std::size_t(lv.dofs), lv.error);
            rows.push_back({nu, double(lv.n), lv.h, double(lv.dofs), lv.error});
        }
        if (nu == 0.3)
            ref = t;
        else
            for (std::size_t i = 0; i < t.levels.size(); ++i)
                std::printf("  n = %3d  error ratio (nu = 0.49999 / nu = 0.3) = %.4f\n", t.levels[i].n,
                            t.levels[i].error / ref.levels[i].error);
    }
    if (!a.out.empty()) {
        std::filesystem::create_directories(a.out);
        write_csv(a.out + "/convergence.csv", {"nu", "n", "h", "dofs", "energy_error"}, rows);
    }
    return exit_ok;
}

int cmd_study_variants(const StudyArgs& a)
{
    auto mesh = std::make_shared<const Mesh>(sphere_mesh());
    const SphereParams sp;
    std::vector<SphereCloud> clouds;
    std::vector<std::vector<double>> rows;
    for (int l : {1, 2, 3}) {
        BenchmarkOptions o;
        o.k = 2;
        o.l = l;
        const Solver sol(sphere_problem(mesh, o, 300.0));
        GlobalState st = sol.initial_state();
        const auto h = sol.run(st, {}, false);
        if (!h.completed())
            throw Error("HHO(2;" + std::to_string(l) + ") did not reach P = 300");
        clouds.push_back(sphere_cloud(sol, st));
        const double e = sphere_rms_error(clouds.back(), sp, 300.0);
        std::printf("HHO(2;%d): RMS error vs analytic at P = 300: %.4f, Newton iterations %d\n", l, e,
                    h.total_iterations);
        rows.push_back({double(l), e, double(h.total_iterations)});
    }
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            std::printf("HHO(2;%d) vs HHO(2;%d): RMS difference %.4f\n", i + 1, j + 1,
                        cloud_rms_difference(clouds[std::size_t(i)], clouds[std::size_t(j)]));
    if (!a.out.empty()) {
        std::filesystem::create_directories(a.out);
        write_csv(a.out + "/variants.csv", {"l", "rms_error_300", "iterations"}, rows);
    }
    return exit_ok;
}

int cmd_study_beta0(const StudyArgs& a)
{
    auto mesh = std::make_shared<const Mesh>(cook_membrane_mesh(a.n, ElementType::quad));
    std::vector<std::vector<double>> rows;
    bool all = true;
    for (double b : {0.01, 0.1, 1.0, 10.0, 100.0, 1000.0}) {
        BenchmarkOptions o;
        o.k = a.k;
        o.beta0 = b;
        const Solver sol(cook_problem(mesh, o));
        GlobalState st = sol.initial_state();
        const auto h = sol.run(st, {}, false);
        const double uy = probe_displacement(sol, st.faces, Point(48, 60, 0)).y();
        std::printf("beta0 = %-7g converged %-3s  Newton iterations %4d  uy(A) = %.6f\n", b,
                    h.completed() ? "yes" : "no", h.total_iterations, uy);
        rows.push_back({b, h.completed() ? 1.0 : 0.0, double(h.total_iterations), uy});
        all = all && h.completed();
    }
    if (!a.out.empty()) {
        std::filesystem::create_directories(a.out);
        write_csv(a.out + "/beta0.csv", {"beta0", "converged", "iterations", "uy_A"}, rows);
    }
    return all ? exit_ok : exit_limit;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"HHO solver for small-strain plasticity on polyhedral meshes"};
    app.require_subcommand(1);

    std::string config;
    auto* run = app.add_subcommand("run", "Run a problem described by a JSON config file");
    run->add_option("config", config, "Config file")->required();

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Run a reference benchmark (sphere, cook, strip, cube)");
    bench->add_option("name", ba.name, "Benchmark name")->required();
    bench->add_option("--k", ba.k, "Face degree")->capture_default_str();
    bench->add_option("--l", ba.l, "Cell degree (default k)");
    bench->add_option("--beta0", ba.beta0, "Stabilization parameter")->capture_default_str();
    bench->add_option("--steps", ba.steps, "Number of load steps (default per benchmark)");
    bench->add_option("--mesh", ba.mesh, "Mesh file replacing the generated mesh");
    bench->add_option("--n", ba.n, "Divisions per side (cook, cube)");
    bench->add_option("--na", ba.na, "Angular divisions (strip)");
    bench->add_option("--nr", ba.nr, "Radial divisions (strip)");
    bench->add_option("--element", ba.element, "Element type of the generated mesh");
    bench->add_option("--agglomerate", ba.agglomerate, "Merge fraction applied to the mesh");
    bench->add_option("--seed", ba.seed, "Agglomeration seed")->capture_default_str();
    bench->add_option("--tangent", ba.tangent, "consistent or continuum")->capture_default_str();
    bench->add_option("--threads", ba.threads, "Worker threads (0: all cores)");
    bench->add_option("--out", ba.out, "Output directory");
    bench->add_flag("--vtk", ba.vtk, "Write VTK fields");

    auto* mesh = app.add_subcommand("mesh", "Mesh utilities");
    mesh->require_subcommand(1);
    MeshGenArgs ga;
    auto* gen = mesh->add_subcommand("gen", "Generate a mesh (box, cook, strip, cube, sphere)");
    gen->add_option("type", ga.type, "Generator")->required();
    gen->add_option("-o,--out", ga.out, "Output file")->required();
    gen->add_option("--element", ga.element, "triangle, quad, tet or hex");
    gen->add_option("--lower", ga.lower, "Box lower corner")->expected(2, 3);
    gen->add_option("--upper", ga.upper, "Box upper corner")->expected(2, 3);
    gen->add_option("--divisions", ga.divisions, "Box divisions per axis")->expected(2, 3);
    gen->add_option("--n", ga.n, "Divisions per side (cook, cube)");
    gen->add_option("--na", ga.na, "Angular divisions (strip)");
    gen->add_option("--nr", ga.nr, "Radial divisions (strip)");
    gen->add_option("--format", ga.format, "native or gmsh (default from extension)");

    std::string in_path, out_path, format;
    double fraction = 0.3, amplitude = 0.0;
    unsigned seed = 42;
    auto* agg = mesh->add_subcommand("agglomerate", "Merge pairs of neighbouring cells");
    agg->add_option("input", in_path, "Input mesh")->required();
    agg->add_option("-o,--out", out_path, "Output mesh")->required();
    agg->add_option("--fraction", fraction, "Merge fraction in [0, 0.5]")->capture_default_str();
    agg->add_option("--seed", seed, "Random seed")->capture_default_str();
    agg->add_option("--perturb", amplitude, "Random move of interior nodes applied first (2D)");

    auto* val = mesh->add_subcommand("validate", "Check mesh admissibility");
    val->add_option("input", in_path, "Mesh file")->required();

    std::string from, to;
    auto* conv = mesh->add_subcommand("convert", "Convert between native and gmsh formats");
    conv->add_option("input", in_path, "Input mesh")->required();
    conv->add_option("output", out_path, "Output mesh")->required();
    conv->add_option("--from", from, "Input format (default from extension)");
    conv->add_option("--to", to, "Output format (default from extension)");

    StudyArgs sa;
    auto* study = app.add_subcommand("study", "Parameter studies");
    study->require_subcommand(1);
    auto* sconv = study->add_subcommand("convergence", "Manufactured-solution energy-error rates");
    sconv->add_option("--k", sa.k, "Face degree")->capture_default_str();
    sconv->add_option("--element", sa.element, "triangle or quad")->capture_default_str();
    sconv->add_option("--levels", sa.levels, "Divisions per side for each level");
    sconv->add_option("--out", sa.out, "Output directory");
    auto* svar = study->add_subcommand("variants", "HHO(2;l) sphere stress clouds for l = 1, 2, 3");
    svar->add_option("--out", sa.out, "Output directory");
    auto* sbeta = study->add_subcommand("beta0", "Stabilization parameter sweep on the Cook membrane");
    sbeta->add_option("--k", sa.k, "Face degree")->capture_default_str();
    sbeta->add_option("--n", sa.n, "Divisions per side")->capture_default_str();
    sbeta->add_option("--out", sa.out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_error;
    }

    try {
        if (*run)
            return cmd_run(config);
        if (*bench)
            return cmd_bench(ba);
        if (*gen)
            return cmd_mesh_gen(ga);
        if (*agg) {
            Mesh m = import_mesh(in_path);
            if (amplitude > 0)
                m = perturb_nodes(m, amplitude, seed);
            const Mesh a = agglomerate(m, fraction, seed);
            export_mesh(a, out_path, guess_mesh_format(out_path));
            std::printf("wrote %s: %zu cells (from %zu)\n", out_path.c_str(), a.num_cells(), m.num_cells());
            return exit_ok;
        }
        if (*val)
            return cmd_mesh_validate(in_path);
        if (*conv) {
            const Mesh m = from.empty() ? import_mesh(in_path) : import_mesh(in_path, parse_mesh_format(from));
            export_mesh(m, out_path, to.empty() ? guess_mesh_format(out_path) : parse_mesh_format(to));
            std::printf("wrote %s\n", out_path.c_str());
            return exit_ok;
        }
        if (*sconv)
            return cmd_study_convergence(sa);
        if (*svar)
            return cmd_study_variants(sa);
        if (*sbeta)
            return cmd_study_beta0(sa);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_error;
    }
    return exit_error;
}
