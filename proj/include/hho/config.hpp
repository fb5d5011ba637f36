#pragma once

// JSON run configuration: mesh source, layout, material, boundary table,
// load steps, solver and output options. Errors carry the JSON path of the
// offending value (syntax errors: line and column).

#include "benchmarks.hpp"
#include "expression.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace hho {

class ConfigError : public ParseError {
public:
    ConfigError(const std::string& path, const std::string& what, std::size_t line = 0, const std::string& file = "")
        : ParseError((file.empty() ? "" : file + ": ") + (path.empty() ? what : path + ": " + what), line),
          path_(path), detail_(what)
    {
    }
    const std::string& path() const { return path_; }
    const std::string& detail() const { return detail_; }

private:
    std::string path_;
    std::string detail_;
};

struct MeshSpec {
    std::string generator;  // box, cook, strip, cube, sphere; empty when loading a file
    std::string file;
    std::string format;     // empty: guessed from the extension
    ElementType element = ElementType::quad;
    std::array<double, 3> lower{0, 0, 0}, upper{1, 1, 0};
    std::array<int, 3> divisions{4, 4, 1};
    int n = 8;
    int na = 16, nr = 8;
    double agglomerate = 0.0;
    unsigned agglomerate_seed = 1;
    double perturb = 0.0;
    unsigned perturb_seed = 1;
};

struct BoundarySpec {
    enum class Kind { dirichlet, traction, pressure };
    std::string tag;
    Kind kind = Kind::dirichlet;
    std::array<bool, 3> components{true, true, true};
    std::vector<Expression> value; // one per component; one scalar for pressure
};

struct OutputSpec {
    std::string directory;
    std::string prefix = "run";
    bool vtk = false;
    std::vector<Point> probes;
};

struct RunConfig {
    MeshSpec mesh;
    int k = 1;
    int l = -1;
    MaterialParams material;
    std::vector<BoundarySpec> boundary;
    std::vector<Expression> body_force;
    std::vector<double> load_factors{1.0};
    double beta0 = 1.0;
    SolverOptions solver;
    OutputSpec output;
};

namespace config_detail {

using json = nlohmann::json;

inline std::string child(const std::string& path, const std::string& key) { return path + "." + key; }
inline std::string child(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed)
{
    if (!j.is_object())
        throw ConfigError(path, "expected an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || key == a;
        if (!ok)
            throw ConfigError(child(path, key), "unknown key");
    }
}

inline double number(const json& j, const std::string& path)
{
    if (!j.is_number())
        throw ConfigError(path, "expected a number");
    return j.get<double>();
}

inline int integer(const json& j, const std::string& path)
{
    if (!j.is_number_integer())
        throw ConfigError(path, "expected an integer");
    return j.get<int>();
}

inline unsigned seed(const json& j, const std::string& path)
{
    const int s = integer(j, path);
    if (s < 0)
        throw ConfigError(path, "seed must be nonnegative");
    return unsigned(s);
}

inline std::string string(const json& j, const std::string& path)
{
    if (!j.is_string())
        throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

inline bool boolean(const json& j, const std::string& path)
{
    if (!j.is_boolean())
        throw ConfigError(path, "expected true or false");
    return j.get<bool>();
}

// Numbers are constants; strings use the arithmetic grammar in x, y, z, t.
inline Expression expression(const json& j, const std::string& path)
{
    if (j.is_number())
        return Expression(j.get<double>());
    if (!j.is_string())
        throw ConfigError(path, "expected a number or an expression string");
    try {
        return Expression::parse(j.get<std::string>());
    } catch (const ParseError& e) {
        throw ConfigError(path, e.what());
    }
}

inline std::array<double, 3> point(const json& j, const std::string& path)
{
    if (!j.is_array() || j.size() < 2 || j.size() > 3)
        throw ConfigError(path, "expected 2 or 3 coordinates");
    std::array<double, 3> p{0, 0, 0};
    for (std::size_t i = 0; i < j.size(); ++i)
        p[i] = number(j[i], child(path, i));
    return p;
}

template <typename F>
auto located(const std::string& path, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(path, e.what());
    }
}

inline MeshSpec parse_mesh(const json& j, const std::string& path, const std::filesystem::path& base)
{
    only_keys(j, path, {"generator", "file", "format", "element", "lower", "upper", "divisions", "n", "na", "nr",
                        "agglomerate", "perturb"});
    MeshSpec m;
    if (j.contains("file") == j.contains("generator"))
        throw ConfigError(path, "exactly one of 'generator' and 'file' is required");
    if (j.contains("file")) {
        std::filesystem::path f = string(j["file"], child(path, "file"));
        m.file = (f.is_relative() ? base / f : f).string();
        if (j.contains("format")) {
            m.format = string(j["format"], child(path, "format"));
            located(child(path, "format"), [&] { return parse_mesh_format(m.format); });
        }
    } else {
        m.generator = string(j["generator"], child(path, "generator"));
        static const std::set<std::string> known{"box", "cook", "strip", "cube", "sphere"};
        if (!known.count(m.generator))
            throw ConfigError(child(path, "generator"), "unknown generator '" + m.generator + "'");
    }
    const bool three = m.generator == "cube" || m.generator == "sphere";
    m.element = m.generator == "strip" ? ElementType::triangle : three ? ElementType::hex : ElementType::quad;
    if (j.contains("element"))
        m.element = located(child(path, "element"),
                            [&] { return parse_element_type(string(j["element"], child(path, "element"))); });
    if (j.contains("lower"))
        m.lower = point(j["lower"], child(path, "lower"));
    if (j.contains("upper"))
        m.upper = point(j["upper"], child(path, "upper"));
    if (j.contains("divisions")) {
        const auto& d = j["divisions"];
        const std::string dp = child(path, "divisions");
        if (!d.is_array() || d.size() < 2 || d.size() > 3)
            throw ConfigError(dp, "expected 2 or 3 integers");
        for (std::size_t i = 0; i < d.size(); ++i)
            m.divisions[i] = integer(d[i], child(dp, i));
    }
    if (j.contains("n"))
        m.n = integer(j["n"], child(path, "n"));
    if (j.contains("na"))
        m.na = integer(j["na"], child(path, "na"));
    if (j.contains("nr"))
        m.nr = integer(j["nr"], child(path, "nr"));
    if (j.contains("agglomerate")) {
        const std::string ap = child(path, "agglomerate");
        only_keys(j["agglomerate"], ap, {"fraction", "seed"});
        if (!j["agglomerate"].contains("fraction"))
            throw ConfigError(ap, "missing 'fraction'");
        m.agglomerate = number(j["agglomerate"]["fraction"], child(ap, "fraction"));
        if (m.agglomerate < 0 || m.agglomerate > 0.5)
            throw ConfigError(child(ap, "fraction"), "merge fraction must lie in [0, 0.5]");
        if (j["agglomerate"].contains("seed"))
            m.agglomerate_seed = seed(j["agglomerate"]["seed"], child(ap, "seed"));
    }
    if (j.contains("perturb")) {
        const std::string pp = child(path, "perturb");
        only_keys(j["perturb"], pp, {"amplitude", "seed"});
        if (!j["perturb"].contains("amplitude"))
            throw ConfigError(pp, "missing 'amplitude'");
        m.perturb = number(j["perturb"]["amplitude"], child(pp, "amplitude"));
        if (m.perturb < 0)
            throw ConfigError(child(pp, "amplitude"), "amplitude must be nonnegative");
        if (j["perturb"].contains("seed"))
            m.perturb_seed = seed(j["perturb"]["seed"], child(pp, "seed"));
    }
    return m;
}

inline std::array<bool, 3> components(const json& j, const std::string& path)
{
    if (!j.is_array() || j.empty())
        throw ConfigError(path, "expected a nonempty list of components (\"x\", \"y\", \"z\")");
    std::array<bool, 3> c{false, false, false};
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string s = string(j[i], child(path, i));
        if (s != "x" && s != "y" && s != "z")
            throw ConfigError(child(path, i), "component must be x, y or z");
        c[std::size_t(s[0] - 'x')] = true;
    }
    return c;
}

inline std::vector<Expression> vector_value(const json& j, const std::string& path)
{
    if (!j.is_array() || j.size() < 2 || j.size() > 3)
        throw ConfigError(path, "expected a list of 2 or 3 expressions");
    std::vector<Expression> v;
    for (std::size_t i = 0; i < j.size(); ++i)
        v.push_back(expression(j[i], child(path, i)));
    return v;
}

inline BoundarySpec parse_boundary(const json& j, const std::string& path)
{
    only_keys(j, path, {"tag", "type", "components", "value"});
    BoundarySpec b;
    if (!j.contains("tag"))
        throw ConfigError(path, "missing 'tag'");
    b.tag = string(j["tag"], child(path, "tag"));
    if (!j.contains("type"))
        throw ConfigError(path, "missing 'type'");
    const std::string type = string(j["type"], child(path, "type"));
    if (type == "dirichlet")
        b.kind = BoundarySpec::Kind::dirichlet;
    else if (type == "traction")
        b.kind = BoundarySpec::Kind::traction;
    else if (type == "pressure")
        b.kind = BoundarySpec::Kind::pressure;
    else
        throw ConfigError(child(path, "type"), "unknown boundary type '" + type + "' (dirichlet, traction, pressure)");
    if (j.contains("components")) {
        if (b.kind != BoundarySpec::Kind::dirichlet)
            throw ConfigError(child(path, "components"), "components apply to dirichlet conditions only");
        b.components = components(j["components"], child(path, "components"));
    }
    if (b.kind == BoundarySpec::Kind::pressure) {
        if (!j.contains("value"))
            throw ConfigError(path, "missing 'value'");
        b.value = {expression(j["value"], child(path, "value"))};
    } else if (j.contains("value")) {
        b.value = vector_value(j["value"], child(path, "value"));
    } else if (b.kind == BoundarySpec::Kind::traction) {
        throw ConfigError(path, "missing 'value'");
    }
    return b;
}

inline std::vector<double> parse_steps(const json& j, const std::string& path)
{
    if (j.is_number_integer()) {
        const int n = j.get<int>();
        if (n < 1)
            throw ConfigError(path, "number of steps must be positive");
        return ProblemSetup::uniform_steps(n);
    }
    if (j.is_object()) {
        only_keys(j, path, {"count", "end"});
        if (!j.contains("count"))
            throw ConfigError(path, "missing 'count'");
        const int n = integer(j["count"], child(path, "count"));
        if (n < 1)
            throw ConfigError(child(path, "count"), "number of steps must be positive");
        const double end = j.contains("end") ? number(j["end"], child(path, "end")) : 1.0;
        return ProblemSetup::uniform_steps(n, end);
    }
    if (j.is_array() && !j.empty()) {
        std::vector<double> t;
        for (std::size_t i = 0; i < j.size(); ++i) {
            t.push_back(number(j[i], child(path, i)));
            if (i > 0 && !(t[i] > t[i - 1]))
                throw ConfigError(child(path, i), "load factors must increase");
        }
        return t;
    }
    throw ConfigError(path, "expected a step count, {count, end} or a list of load factors");
}

inline SolverOptions parse_solver(const json& j, const std::string& path)
{
    only_keys(j, path, {"rtol", "atol", "max_iterations", "tangent", "threads", "behavior_order", "polish_iterations"});
    SolverOptions o;
    if (j.contains("rtol"))
        o.rtol = number(j["rtol"], child(path, "rtol"));
    if (j.contains("atol"))
        o.atol = number(j["atol"], child(path, "atol"));
    if (!(o.rtol > 0) || !(o.atol >= 0))
        throw ConfigError(path, "tolerances must be positive");
    if (j.contains("max_iterations")) {
        o.max_iterations = integer(j["max_iterations"], child(path, "max_iterations"));
        if (o.max_iterations < 1)
            throw ConfigError(child(path, "max_iterations"), "must be at least 1");
    }
    if (j.contains("tangent")) {
        const std::string s = string(j["tangent"], child(path, "tangent"));
        if (s == "consistent")
            o.tangent = TangentKind::consistent;
        else if (s == "continuum")
            o.tangent = TangentKind::continuum;
        else
            throw ConfigError(child(path, "tangent"), "tangent must be 'consistent' or 'continuum'");
    }
    if (j.contains("threads")) {
        const int t = integer(j["threads"], child(path, "threads"));
        if (t < 0)
            throw ConfigError(child(path, "threads"), "must be nonnegative");
        o.threads = unsigned(t);
    }
    if (j.contains("behavior_order"))
        o.behavior_order = integer(j["behavior_order"], child(path, "behavior_order"));
    if (j.contains("polish_iterations"))
        o.polish_iterations = integer(j["polish_iterations"], child(path, "polish_iterations"));
    return o;
}

inline MaterialParams parse_material(const json& j, const std::string& path)
{
    only_keys(j, path, {"E", "nu", "sigma_y0", "H", "K"});
    MaterialParams m;
    for (const char* key : {"E", "nu", "sigma_y0"})
        if (!j.contains(key))
            throw ConfigError(path, std::string("missing '") + key + "'");
    m.E = number(j["E"], child(path, "E"));
    m.nu = number(j["nu"], child(path, "nu"));
    m.sigma_y0 = number(j["sigma_y0"], child(path, "sigma_y0"));
    if (j.contains("H"))
        m.H = number(j["H"], child(path, "H"));
    if (j.contains("K"))
        m.K = number(j["K"], child(path, "K"));
    located(path, [&] { m.validate(); return 0; });
    return m;
}

inline OutputSpec parse_output(const json& j, const std::string& path, const std::filesystem::path& base)
{
    only_keys(j, path, {"directory", "prefix", "vtk", "probes"});
    OutputSpec o;
    if (j.contains("directory")) {
        std::filesystem::path d = string(j["directory"], child(path, "directory"));
        o.directory = (d.is_relative() ? base / d : d).string();
    }
    if (j.contains("prefix"))
        o.prefix = string(j["prefix"], child(path, "prefix"));
    if (j.contains("vtk"))
        o.vtk = boolean(j["vtk"], child(path, "vtk"));
    if (j.contains("probes")) {
        const auto& p = j["probes"];
        if (!p.is_array())
            throw ConfigError(child(path, "probes"), "expected a list of points");
        for (std::size_t i = 0; i < p.size(); ++i) {
            const auto c = point(p[i], child(child(path, "probes"), i));
            o.probes.emplace_back(c[0], c[1], c[2]);
        }
    }
    return o;
}

// 1-based line and column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte)
{
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

} // namespace config_detail

// Relative mesh and output paths resolve against base_dir.
inline RunConfig parse_run_config(const std::string& text, const std::string& base_dir = ".")
{
    using namespace config_detail;
    json j;
    try {
        j = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        // The reported byte is one past the offending character.
        const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        std::string msg = e.what();
        const auto pos = msg.find("syntax error");
        throw ConfigError("", "invalid JSON at column " + std::to_string(col) + ": " +
                                  (pos == std::string::npos ? msg : msg.substr(pos)),
                          line);
    }
    const std::string root = "$";
    only_keys(j, root, {"mesh", "k", "l", "material", "boundary", "body_force", "steps", "beta0", "solver", "output"});
    for (const char* key : {"mesh", "material", "boundary"})
        if (!j.contains(key))
            throw ConfigError(root, std::string("missing '") + key + "'");
    const std::filesystem::path base(base_dir);
    RunConfig c;
    c.mesh = parse_mesh(j["mesh"], child(root, "mesh"), base);
    if (j.contains("k"))
        c.k = integer(j["k"], child(root, "k"));
    if (c.k < 1)
        throw ConfigError(child(root, "k"), "face degree k must be >= 1");
    c.l = j.contains("l") ? integer(j["l"], child(root, "l")) : c.k;
    if (c.l < c.k - 1 || c.l > c.k + 1)
        throw ConfigError(child(root, "l"), "cell degree l must lie in {k-1, k, k+1}");
    if (c.k == 1 && c.l == 0)
        throw ConfigError(child(root, "l"), "(k, l) = (1, 0) does not control rigid-body motions");
    c.material = parse_material(j["material"], child(root, "material"));
    const auto& bj = j["boundary"];
    if (!bj.is_array() || bj.empty())
        throw ConfigError(child(root, "boundary"), "expected a nonempty list of boundary conditions");
    bool dirichlet = false;
    for (std::size_t i = 0; i < bj.size(); ++i) {
        c.boundary.push_back(parse_boundary(bj[i], child(child(root, "boundary"), i)));
        dirichlet = dirichlet || c.boundary.back().kind == BoundarySpec::Kind::dirichlet;
    }
    if (!dirichlet)
        throw ConfigError(child(root, "boundary"), "at least one dirichlet condition is required");
    if (j.contains("body_force"))
        c.body_force = vector_value(j["body_force"], child(root, "body_force"));
    if (j.contains("steps"))
        c.load_factors = parse_steps(j["steps"], child(root, "steps"));
    if (j.contains("beta0")) {
        c.beta0 = number(j["beta0"], child(root, "beta0"));
        if (!(c.beta0 > 0))
            throw ConfigError(child(root, "beta0"), "beta0 must be positive");
    }
    if (j.contains("solver"))
        c.solver = parse_solver(j["solver"], child(root, "solver"));
    if (j.contains("output"))
        c.output = parse_output(j["output"], child(root, "output"), base);
    return c;
}

inline RunConfig load_run_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto parent = std::filesystem::path(path).parent_path();
    try {
        return parse_run_config(ss.str(), parent.empty() ? "." : parent.string());
    } catch (const ConfigError& e) {
        throw ConfigError(e.path(), e.detail(), e.line(), path);
    }
}

inline Mesh build_mesh(const MeshSpec& s)
{
    Mesh m;
    if (!s.file.empty()) {
        m = s.format.empty() ? import_mesh(s.file) : import_mesh(s.file, parse_mesh_format(s.format));
    } else if (s.generator == "box") {
        m = generate_structured(Point(s.lower[0], s.lower[1], s.lower[2]), Point(s.upper[0], s.upper[1], s.upper[2]),
                                s.divisions, s.element);
    } else if (s.generator == "cook") {
        m = cook_membrane_mesh(s.n, s.element);
    } else if (s.generator == "strip") {
        m = strip_mesh(s.na, s.nr, s.element);
    } else if (s.generator == "cube") {
        m = cube_mesh(s.n, s.element);
    } else if (s.generator == "sphere") {
        m = sphere_mesh();
    } else {
        throw DomainError("unknown mesh generator '" + s.generator + "'");
    }
    if (s.perturb > 0)
        m = perturb_nodes(m, s.perturb, s.perturb_seed);
    if (s.agglomerate > 0)
        m = agglomerate(m, s.agglomerate, s.agglomerate_seed);
    return m;
}

// Builds and validates the problem; tag and dimension errors name the config entry.
inline ProblemSetup build_problem(const RunConfig& c, std::shared_ptr<const Mesh> mesh)
{
    using config_detail::child;
    ProblemSetup s;
    const int d = mesh->dimension();
    s.mesh = mesh;
    s.layout = LocalDofLayout(d, c.k, c.l < 0 ? c.k : c.l);
    s.material = c.material;
    s.beta0 = c.beta0;
    s.load_factors = c.load_factors;
    s.options = c.solver;
    const auto tags = mesh->boundary_tags();
    auto vec = [d](const std::vector<Expression>& e, const std::string& path) {
        if (int(e.size()) != d)
            throw ConfigError(path, "expected " + std::to_string(d) + " components for a " + std::to_string(d) +
                                        "D mesh");
        return [e](const Point& x, double t) {
            Point v = Point::Zero();
            for (std::size_t i = 0; i < e.size(); ++i)
                v[Index(i)] = e[i](x, t);
            return v;
        };
    };
    for (std::size_t i = 0; i < c.boundary.size(); ++i) {
        const auto& b = c.boundary[i];
        const std::string path = child("$.boundary", i);
        if (!tags.count(b.tag)) {
            std::string known;
            for (const auto& t : tags)
                known += (known.empty() ? "" : ", ") + t;
            throw ConfigError(child(path, "tag"), "tag '" + b.tag + "' is not on the mesh boundary (" + known + ")");
        }
        switch (b.kind) {
        case BoundarySpec::Kind::dirichlet: {
            DirichletBC bc{b.tag, b.components, {}};
            if (d == 2 && b.components[2])
                bc.components[2] = false;
            if (!b.value.empty())
                bc.value = vec(b.value, child(path, "value"));
            s.dirichlet.push_back(bc);
            break;
        }
        case BoundarySpec::Kind::traction: {
            auto f = vec(b.value, child(path, "value"));
            s.neumann.push_back({b.tag, [f](const Point& x, const Point&, double t) { return f(x, t); }});
            break;
        }
        case BoundarySpec::Kind::pressure: {
            const Expression p = b.value.front();
            s.neumann.push_back(NeumannBC::pressure(b.tag, [p](const Point& x, double t) { return p(x, t); }));
            break;
        }
        }
    }
    if (!c.body_force.empty())
        s.body_force = vec(c.body_force, "$.body_force");
    config_detail::located("$", [&] { s.validate(); return 0; });
    return s;
}

struct RunResult {
    SolveHistory history;
    std::vector<std::string> files;
};

// Runs a configured problem; writes <prefix>_load_curve.csv (probe
// displacements per step), _steps.csv, _stress_cloud.csv and optional VTK.
inline RunResult run_config(const RunConfig& c)
{
    auto mesh = std::make_shared<const Mesh>(build_mesh(c.mesh));
    const ProblemSetup setup = build_problem(c, mesh);
    const Solver sol(setup);
    const int d = mesh->dimension();
    GlobalState st = sol.initial_state();
    std::vector<std::string> header{"step", "load_factor"};
    for (std::size_t p = 0; p < c.output.probes.size(); ++p)
        for (int a = 0; a < d; ++a)
            header.push_back("u" + std::string(1, char('x' + a)) + "_" + std::to_string(p));
    header.push_back("iterations");
    header.push_back("residual");
    // Probes are checked before solving so a typo fails fast.
    for (std::size_t p = 0; p < c.output.probes.size(); ++p)
        config_detail::located(config_detail::child("$.output.probes", p), [&] { return probe_displacement(sol, st.faces, c.output.probes[p]); });
    std::vector<std::vector<double>> rows;
    auto on_step = [&](const GlobalState& g, const StepReport& r) {
        std::vector<double> row{double(r.step), r.load_factor};
        for (const auto& x : c.output.probes) {
            const Point u = probe_displacement(sol, g.faces, x);
            for (int a = 0; a < d; ++a)
                row.push_back(u[a]);
        }
        row.push_back(double(r.iterations));
        row.push_back(r.residual);
        rows.push_back(std::move(row));
    };
    RunResult res;
    res.history = sol.run(st, on_step, false);
    if (c.output.directory.empty())
        return res;
    std::filesystem::create_directories(c.output.directory);
    const std::string prefix = c.output.directory + "/" + c.output.prefix + "_";
    write_csv(prefix + "load_curve.csv", header, rows);
    res.files.push_back(prefix + "load_curve.csv");
    {
        auto out = open_output(prefix + "steps.csv");
        write_step_csv(res.history, out);
        res.files.push_back(prefix + "steps.csv");
    }
    const auto pts = behaviour_points(sol);
    std::vector<std::vector<double>> cloud;
    for (std::size_t q = 0; q < pts.size(); ++q)
        cloud.push_back({pts[q].x(), pts[q].y(), pts[q].z(), mandel::trace(st.stress[q]), st.states[q].p});
    write_csv(prefix + "stress_cloud.csv", {"x", "y", "z", "trace", "p"}, cloud);
    res.files.push_back(prefix + "stress_cloud.csv");
    if (c.output.vtk) {
        Field disp{"displacement", 3, {}};
        for (const auto& p : vertex_displacements(sol, st))
            disp.values.insert(disp.values.end(), {p.x(), p.y(), p.z()});
        write_vtk(*mesh, {{"p", 1, cell_mean_plastic_strain(sol, st)}, {"trace_sigma", 1, cell_mean_trace(sol, st)}},
                  prefix + "fields.vtk", {disp});
        res.files.push_back(prefix + "fields.vtk");
    }
    return res;
}

} // namespace hho
