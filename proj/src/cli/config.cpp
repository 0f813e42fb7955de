#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "orliczfb/cli.hpp"
#include "orliczfb/field_io.hpp"
#include "orliczfb/numerics.hpp"

namespace orliczfb::cli {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>> kKnownKeys = {
    {"gfunction", {"family", "p", "a", "b", "c", "a1", "a2", "s", "c1", "expr"}},
    {"problem", {"lambda"}},
    {"grid", {"nx", "ny", "Lx", "Ly"}},
    {"phi0", {"preset", "a", "value", "file"}},
    {"solve",
     {"restarts", "seed", "max_iters", "energy_tol", "stall_window", "step_rule", "eps_schedule", "eta",
      "zero_threshold", "perturbation", "residual_tol", "refine"}},
    {"oracle1d", {"a", "b", "L", "n"}},
    {"verify",
     {"mode", "gamma", "c_min", "C_max", "density_c", "tau", "residual_tol", "perimeter_c", "perimeter_C", "radii",
      "max_radius", "qu_radius", "flatness_radii"}},
    {"blowup", {"x0", "rho", "m"}},
    {"output", {"dir"}},
};

class Section {
public:
    Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

    bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

    std::string text(const std::string& key) const { return tree_->get<std::string>(key); }

    double number(const std::string& key) const {
        const std::string t = text(key);
        try {
            std::size_t used = 0;
            const double v = std::stod(t, &used);
            if (used == t.size() && std::isfinite(v)) return v;
        } catch (const std::exception&) {
        }
        throw ConfigError(where(key) + ": expected a number, got '" + t + "'");
    }

    long integer(const std::string& key) const {
        const double v = number(key);
        if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError(where(key) + ": expected an integer");
        return static_cast<long>(v);
    }

    std::vector<double> list(const std::string& key) const {
        std::string t = text(key);
        for (char& ch : t) {
            if (ch == ',') ch = ' ';
        }
        std::istringstream in(t);
        std::vector<double> out;
        std::string tok;
        while (in >> tok) {
            try {
                std::size_t used = 0;
                const double v = std::stod(tok, &used);
                if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
                out.push_back(v);
            } catch (const std::exception&) {
                throw ConfigError(where(key) + ": bad list entry '" + tok + "'");
            }
        }
        return out;
    }

    void number_if(const std::string& key, double& target) const {
        if (has(key)) target = number(key);
    }

    std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

private:
    std::string name_;
    const pt::ptree* tree_;
};

GFunction parse_gfunction(const Section& s) {
    if (s.has("expr")) return GFunction::parse(s.text("expr"));
    if (!s.has("family")) throw ConfigError("[gfunction] needs 'family' or 'expr'");
    const std::string family = s.text("family");
    auto need = [&](const char* key) {
        if (!s.has(key)) throw ConfigError("[gfunction] family " + family + " needs '" + key + "'");
        return s.number(key);
    };
    if (family == "power") return GFunction::power(need("p"));
    if (family == "powerlog") return GFunction::power_log(need("a"), need("b"), need("c"));
    if (family == "spliced") {
        return GFunction::spliced(need("a1"), need("a2"), need("s"), s.has("c1") ? s.number("c1") : 1.0);
    }
    throw ConfigError("[gfunction] unknown family '" + family + "' (power, powerlog, spliced, or use expr)");
}

}  // namespace

RunConfig parse_config(std::istream& in) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const auto& [name, sub] : tree) {
        const auto known = kKnownKeys.find(name);
        if (sub.empty() || known == kKnownKeys.end()) {
            throw ConfigError("config: unknown section or top-level key '" + name + "'");
        }
        for (const auto& [key, value] : sub) {
            if (!known->second.count(key)) throw ConfigError("config: unknown key '" + key + "' in [" + name + "]");
        }
    }
    auto section = [&](const std::string& name) {
        const auto it = tree.find(name);
        return Section(name, it == tree.not_found() ? nullptr : &it->second);
    };

    RunConfig cfg;
    try {
        if (const Section s = section("gfunction"); s.has("family") || s.has("expr")) cfg.gfunction = parse_gfunction(s);

        const Section problem = section("problem");
        problem.number_if("lambda", cfg.lambda);
        if (!(cfg.lambda >= 0.0)) throw ConfigError("[problem] lambda must be >= 0");

        const Section grid = section("grid");
        if (grid.has("nx")) cfg.grid.nx = static_cast<int>(grid.integer("nx"));
        if (grid.has("ny")) cfg.grid.ny = static_cast<int>(grid.integer("ny"));
        grid.number_if("Lx", cfg.grid.Lx);
        grid.number_if("Ly", cfg.grid.Ly);
        if (cfg.grid.nx < 2 || cfg.grid.ny < 1 || !(cfg.grid.Lx > 0.0) || (cfg.grid.ny > 1 && !(cfg.grid.Ly > 0.0))) {
            throw ConfigError("[grid] needs nx >= 2, ny >= 1, Lx > 0 and Ly > 0");
        }

        const Section phi0 = section("phi0");
        if (phi0.has("preset")) {
            const std::string p = phi0.text("preset");
            if (p == "strip") {
                cfg.phi0.kind = Phi0Kind::Strip;
            } else if (p == "constant-left") {
                cfg.phi0.kind = Phi0Kind::ConstantLeft;
            } else if (p == "zero") {
                cfg.phi0.kind = Phi0Kind::Zero;
            } else if (p == "file") {
                cfg.phi0.kind = Phi0Kind::File;
            } else {
                throw ConfigError("[phi0] unknown preset '" + p + "'");
            }
        }
        phi0.number_if("a", cfg.phi0.a);
        phi0.number_if("value", cfg.phi0.value);
        if (phi0.has("file")) cfg.phi0.file = phi0.text("file");
        if (!(cfg.phi0.a >= 0.0) || !(cfg.phi0.value >= 0.0)) throw ConfigError("[phi0] a and value must be >= 0");
        if (cfg.phi0.kind == Phi0Kind::File) {
            if (cfg.phi0.file.empty()) throw ConfigError("[phi0] preset file needs 'file'");
            if (!std::ifstream(cfg.phi0.file)) throw ConfigError("[phi0] file not found: " + cfg.phi0.file);
        }

        const Section solve = section("solve");
        if (solve.has("restarts")) cfg.solve.restarts = static_cast<int>(solve.integer("restarts"));
        if (solve.has("seed")) cfg.solve.seed = static_cast<std::uint64_t>(solve.integer("seed"));
        if (solve.has("max_iters")) cfg.solve.max_iters = static_cast<int>(solve.integer("max_iters"));
        if (solve.has("stall_window")) cfg.solve.stall_window = static_cast<int>(solve.integer("stall_window"));
        solve.number_if("energy_tol", cfg.solve.energy_tol);
        solve.number_if("eta", cfg.solve.eta);
        solve.number_if("perturbation", cfg.solve.perturbation);
        solve.number_if("residual_tol", cfg.solve.residual_tol);
        if (solve.has("zero_threshold")) cfg.solve.zero_threshold = solve.number("zero_threshold");
        if (solve.has("eps_schedule")) cfg.solve.eps_schedule = solve.list("eps_schedule");
        if (solve.has("step_rule")) {
            const std::string r = solve.text("step_rule");
            if (r == "bb") {
                cfg.solve.step_rule = StepRule::BarzilaiBorwein;
            } else if (r == "armijo") {
                cfg.solve.step_rule = StepRule::Armijo;
            } else {
                throw ConfigError("[solve] step_rule must be bb or armijo");
            }
        }
        if (solve.has("refine")) {
            for (double v : solve.list("refine")) {
                if (v != std::floor(v) || v < 2) throw ConfigError("[solve] refine entries must be integers >= 2");
                cfg.refine.push_back(static_cast<int>(v));
            }
        }
        if (cfg.solve.restarts < 0 || cfg.solve.max_iters < 1 || cfg.solve.stall_window < 1) {
            throw ConfigError("[solve] restarts >= 0, max_iters >= 1 and stall_window >= 1 required");
        }

        const Section o = section("oracle1d");
        o.number_if("a", cfg.oracle1d.a);
        o.number_if("b", cfg.oracle1d.b);
        o.number_if("L", cfg.oracle1d.L);
        if (o.has("n")) cfg.oracle1d.n = static_cast<int>(o.integer("n"));

        const Section v = section("verify");
        if (v.has("mode")) {
            const std::string m = v.text("mode");
            if (m == "minimizer") {
                cfg.verify.mode = VerifyMode::Minimizer;
            } else if (m == "weak") {
                cfg.verify.mode = VerifyMode::Weak;
            } else {
                throw ConfigError("[verify] mode must be minimizer or weak");
            }
        }
        v.number_if("gamma", cfg.verify.gamma);
        v.number_if("c_min", cfg.verify.c_min);
        v.number_if("C_max", cfg.verify.C_max);
        v.number_if("density_c", cfg.verify.density_c);
        v.number_if("tau", cfg.verify.tau);
        v.number_if("residual_tol", cfg.verify.residual_tol);
        v.number_if("perimeter_c", cfg.verify.perimeter_c);
        v.number_if("perimeter_C", cfg.verify.perimeter_C);
        v.number_if("max_radius", cfg.verify.max_radius);
        v.number_if("qu_radius", cfg.verify.qu_radius);
        if (v.has("radii")) cfg.verify.radii = v.list("radii");
        if (v.has("flatness_radii")) cfg.verify.flatness_radii = v.list("flatness_radii");
        if (!(cfg.verify.gamma > 1.0)) throw ConfigError("[verify] gamma must be > 1");

        const Section b = section("blowup");
        if (b.has("x0")) {
            const auto x = b.list("x0");
            if (x.size() != 2) throw ConfigError("[blowup] x0 needs two coordinates");
            cfg.blowup.x0 = Point2{x[0], x[1]};
        }
        if (b.has("rho")) cfg.blowup.rho = b.list("rho");
        if (b.has("m")) cfg.blowup.m = static_cast<int>(b.integer("m"));

        if (const Section out = section("output"); out.has("dir")) cfg.out_dir = out.text("dir");
    } catch (const DomainError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_config(in);
}

std::shared_ptr<const Grid> build_grid(const RunConfig& cfg) {
    const Grid base = Grid::rectangle(cfg.grid.nx, cfg.grid.ny, cfg.grid.Lx, cfg.grid.Ly);
    switch (cfg.phi0.kind) {
        case Phi0Kind::Strip: {
            if (!cfg.gfunction) throw ConfigError("strip preset needs a [gfunction] block");
            const double s = cfg.lambda > 0.0 ? lambda_star(*cfg.gfunction, cfg.lambda) : 1.0;
            const double a = cfg.phi0.a;
            return std::make_shared<const Grid>(base.with_dirichlet([=](double x, double) { return std::max(0.0, a - s * x); }));
        }
        case Phi0Kind::ConstantLeft: {
            const double v = cfg.phi0.value;
            return std::make_shared<const Grid>(base.with_dirichlet([=](double x, double) { return x == 0.0 ? v : 0.0; }));
        }
        case Phi0Kind::Zero:
            return std::make_shared<const Grid>(base);
        case Phi0Kind::File: {
            const Field data = read_field(cfg.phi0.file);
            if (data.grid().nx() != base.nx() || data.grid().ny() != base.ny()) {
                throw ConfigError("[phi0] file grid " + std::to_string(data.grid().nx()) + "x" +
                                  std::to_string(data.grid().ny()) + " does not match [grid]");
            }
            return std::make_shared<const Grid>(base.with_dirichlet_values(data.values()));
        }
    }
    throw ConfigError("unknown phi0 preset");
}

std::shared_ptr<const Grid> build_grid(const RunConfig& cfg, int cells) {
    RunConfig c = cfg;
    c.grid.nx = static_cast<int>(std::lround(cells * cfg.grid.Lx)) + 1;
    c.grid.ny = cfg.grid.ny == 1 ? 1 : static_cast<int>(std::lround(cells * cfg.grid.Ly)) + 1;
    return build_grid(c);
}

}  // namespace orliczfb::cli
