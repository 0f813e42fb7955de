#include "orliczfb/gfunction.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "orliczfb/numerics.hpp"

namespace orliczfb {

namespace detail {

class GNode {
public:
    GNode(double delta, double g0) : delta_(delta), g0_(g0) {}
    virtual ~GNode() = default;

    virtual Family family() const = 0;
    virtual double g(double t) const = 0;
    virtual double dg(double t) const = 0;
    virtual std::optional<double> closed_primitive(double) const { return std::nullopt; }
    virtual std::string describe() const = 0;
    virtual std::vector<double> breakpoints() const { return {}; }

    double delta() const { return delta_; }
    double g0() const { return g0_; }

private:
    double delta_;
    double g0_;
};

}  // namespace detail

namespace {

std::string fmt_num(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw DomainError(msg);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

class PowerNode final : public detail::GNode {
public:
    explicit PowerNode(double p) : GNode(p - 1.0, p - 1.0), p_(p) {}
    Family family() const override { return Family::Power; }
    double g(double t) const override {
        if (p_ == 2.0) return t;
        if (p_ == 3.0) return t * t;
        return std::pow(t, p_ - 1.0);
    }
    double dg(double t) const override {
        if (p_ == 2.0) return 1.0;
        if (p_ == 3.0) return 2.0 * t;
        return (p_ - 1.0) * std::pow(t, p_ - 2.0);
    }
    std::optional<double> closed_primitive(double t) const override {
        if (p_ == 2.0) return 0.5 * t * t;
        if (p_ == 3.0) return t * t * t / 3.0;
        return std::pow(t, p_) / p_;
    }
    std::string describe() const override { return "power(" + fmt_num(p_) + ")"; }

private:
    double p_;
};

class PowerLogNode final : public detail::GNode {
public:
    PowerLogNode(double a, double b, double c) : GNode(a, a + 1.0), a_(a), b_(b), c_(c) {}
    Family family() const override { return Family::PowerLog; }
    double g(double t) const override { return std::pow(t, a_) * log_term(t); }
    double dg(double t) const override {
        return a_ * std::pow(t, a_ - 1.0) * log_term(t) + std::pow(t, a_) * b_ / (b_ * t + c_);
    }
    std::string describe() const override {
        return "powerlog(" + fmt_num(a_) + "," + fmt_num(b_) + "," + fmt_num(c_) + ")";
    }

private:
    // log(b t + c) = log(c) + log1p(b t / c), accurate as t -> 0 when c = 1
    double log_term(double t) const { return std::log(c_) + std::log1p(b_ * t / c_); }
    double a_, b_, c_;
};

class SplicedNode final : public detail::GNode {
public:
    SplicedNode(double a1, double a2, double s, double c1)
        : GNode(std::min(a1, a2), std::max(a1, a2)), a1_(a1), a2_(a2), s_(s), c1_(c1) {
        // value and slope continuity at s
        c2_ = c1 * a1 * std::pow(s, a1 - a2) / a2;
        d_ = c1 * std::pow(s, a1) - c2_ * std::pow(s, a2);
    }
    Family family() const override { return Family::Spliced; }
    double g(double t) const override {
        if (t <= s_) return c1_ * std::pow(t, a1_);
        return c2_ * std::pow(t, a2_) + d_;
    }
    double dg(double t) const override {
        if (t <= s_) return c1_ * a1_ * std::pow(t, a1_ - 1.0);
        return c2_ * a2_ * std::pow(t, a2_ - 1.0);
    }
    std::string describe() const override {
        return "spliced(" + fmt_num(a1_) + "," + fmt_num(a2_) + "," + fmt_num(s_) + "," + fmt_num(c1_) + ")";
    }
    std::vector<double> breakpoints() const override { return {s_}; }

private:
    double a1_, a2_, s_, c1_;
    double c2_ = 0.0, d_ = 0.0;
};

using NodePtr = std::shared_ptr<const detail::GNode>;

class SumNode final : public detail::GNode {
public:
    SumNode(std::vector<std::pair<double, NodePtr>> terms, double delta, double g0)
        : GNode(delta, g0), terms_(std::move(terms)) {}
    Family family() const override { return Family::Sum; }
    double g(double t) const override {
        double acc = 0.0;
        for (const auto& [w, n] : terms_) acc += w * n->g(t);
        return acc;
    }
    double dg(double t) const override {
        double acc = 0.0;
        for (const auto& [w, n] : terms_) acc += w * n->dg(t);
        return acc;
    }
    std::string describe() const override {
        std::string out = "sum(";
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            if (i) out += ",";
            out += fmt_num(terms_[i].first) + ":" + terms_[i].second->describe();
        }
        return out + ")";
    }
    std::vector<double> breakpoints() const override {
        std::vector<double> out;
        for (const auto& term : terms_) {
            auto b = term.second->breakpoints();
            out.insert(out.end(), b.begin(), b.end());
        }
        return out;
    }

private:
    std::vector<std::pair<double, NodePtr>> terms_;
};

class ProductNode final : public detail::GNode {
public:
    ProductNode(NodePtr a, NodePtr b)
        : GNode(a->delta() + b->delta(), a->g0() + b->g0()), a_(std::move(a)), b_(std::move(b)) {}
    Family family() const override { return Family::Product; }
    double g(double t) const override { return a_->g(t) * b_->g(t); }
    double dg(double t) const override { return a_->dg(t) * b_->g(t) + a_->g(t) * b_->dg(t); }
    std::string describe() const override {
        return "product(" + a_->describe() + "," + b_->describe() + ")";
    }
    std::vector<double> breakpoints() const override {
        auto out = a_->breakpoints();
        auto b = b_->breakpoints();
        out.insert(out.end(), b.begin(), b.end());
        return out;
    }

private:
    NodePtr a_, b_;
};

class ComposeNode final : public detail::GNode {
public:
    ComposeNode(NodePtr outer, NodePtr inner)
        : GNode(outer->delta() * inner->delta(), outer->g0() * inner->g0()),
          outer_(std::move(outer)),
          inner_(std::move(inner)) {}
    Family family() const override { return Family::Compose; }
    double g(double t) const override { return outer_->g(inner_->g(t)); }
    double dg(double t) const override { return outer_->dg(inner_->g(t)) * inner_->dg(t); }
    std::string describe() const override {
        return "compose(" + outer_->describe() + "," + inner_->describe() + ")";
    }
    std::vector<double> breakpoints() const override { return inner_->breakpoints(); }

private:
    NodePtr outer_, inner_;
};

// Recursive-descent parser for the describe() grammar.
class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    GFunction parse_all() {
        GFunction f = parse_function();
        skip_ws();
        if (pos_ != text_.size()) fail("trailing characters");
        return f;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw DomainError("gfunction parse error at offset " + std::to_string(pos_) + ": " + what +
                          " in '" + text_ + "'");
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    std::string identifier() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (start == pos_) fail("expected family name");
        std::string id = text_.substr(start, pos_ - start);
        std::transform(id.begin(), id.end(), id.begin(), [](unsigned char ch) { return std::tolower(ch); });
        return id;
    }

    double number() {
        skip_ws();
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        double v = 0.0;
        auto res = std::from_chars(begin, end, v);
        if (res.ec != std::errc()) fail("expected number");
        pos_ += static_cast<std::size_t>(res.ptr - begin);
        return v;
    }

    std::vector<double> numbers() {
        std::vector<double> out;
        expect('(');
        if (accept(')')) return out;
        do {
            out.push_back(number());
        } while (accept(','));
        expect(')');
        return out;
    }

    GFunction parse_function() {
        const std::string id = identifier();
        if (id == "power") {
            auto v = numbers();
            if (v.size() != 1) fail("power takes 1 parameter");
            return GFunction::power(v[0]);
        }
        if (id == "powerlog") {
            auto v = numbers();
            if (v.size() != 3) fail("powerlog takes 3 parameters");
            return GFunction::power_log(v[0], v[1], v[2]);
        }
        if (id == "spliced") {
            auto v = numbers();
            if (v.size() != 3 && v.size() != 4) fail("spliced takes 3 or 4 parameters");
            return GFunction::spliced(v[0], v[1], v[2], v.size() == 4 ? v[3] : 1.0);
        }
        if (id == "sum") {
            std::vector<std::pair<double, GFunction>> terms;
            expect('(');
            do {
                const double w = number();
                expect(':');
                terms.emplace_back(w, parse_function());
            } while (accept(','));
            expect(')');
            return GFunction::sum(std::move(terms));
        }
        if (id == "product" || id == "compose") {
            expect('(');
            GFunction a = parse_function();
            expect(',');
            GFunction b = parse_function();
            expect(')');
            return id == "product" ? GFunction::product(a, b) : GFunction::compose(a, b);
        }
        fail("unknown family '" + id + "'");
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

double relative_slack(double lhs, double rhs) {
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    if (scale == 0.0) return 0.0;
    return (rhs - lhs) / scale;
}

QuadratureOptions relative_quadrature() {
    QuadratureOptions q;
    q.abs_tol = 0.0;
    q.rel_tol = 1e-10;
    return q;
}

// int_0^x h for every x in `args` (any order), integrating cumulatively over the
// sorted, de-duplicated arguments with `cuts` inserted as extra segment ends.
std::vector<double> primitive_many(const std::function<double(double)>& h, std::span<const double> args,
                                   const std::vector<double>& cuts) {
    std::vector<double> pts;
    pts.reserve(args.size() + cuts.size());
    double max_arg = 0.0;
    for (double x : args) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("primitive: argument must be finite and >= 0");
        if (x > 0.0) pts.push_back(x);
        max_arg = std::max(max_arg, x);
    }
    for (double c : cuts) {
        if (c > 0.0 && c < max_arg) pts.push_back(c);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::vector<double> acc = cumulative_integrals(h, pts, relative_quadrature());
    std::vector<double> out(args.size(), 0.0);
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == 0.0) continue;
        const auto it = std::lower_bound(pts.begin(), pts.end(), args[i]);
        out[i] = acc[static_cast<std::size_t>(it - pts.begin())];
    }
    return out;
}

}  // namespace

GFunction::GFunction(std::shared_ptr<const detail::GNode> node) : node_(std::move(node)) {}

GFunction GFunction::power(double p) {
    require(std::isfinite(p) && p > 1.0, "power: p must be > 1");
    return GFunction(std::make_shared<PowerNode>(p));
}

GFunction GFunction::power_log(double a, double b, double c) {
    require(finite_positive(a) && finite_positive(b), "powerlog: a and b must be > 0");
    require(std::isfinite(c) && c >= 1.0, "powerlog: c must be >= 1 so that g >= 0");
    return GFunction(std::make_shared<PowerLogNode>(a, b, c));
}

GFunction GFunction::spliced(double a1, double a2, double s, double c1) {
    require(finite_positive(a1) && finite_positive(a2), "spliced: exponents must be > 0");
    require(finite_positive(s) && finite_positive(c1), "spliced: s and c1 must be > 0");
    return GFunction(std::make_shared<SplicedNode>(a1, a2, s, c1));
}

GFunction GFunction::sum(std::vector<std::pair<double, GFunction>> terms) {
    require(!terms.empty(), "sum: at least one term required");
    std::vector<std::pair<double, NodePtr>> nodes;
    double delta = std::numeric_limits<double>::infinity();
    double g0 = 0.0;
    for (auto& [w, f] : terms) {
        require(finite_positive(w), "sum: weights must be > 0");
        delta = std::min(delta, f.delta());
        g0 = std::max(g0, f.g0());
        nodes.emplace_back(w, f.node_);
    }
    return GFunction(std::make_shared<SumNode>(std::move(nodes), delta, g0));
}

GFunction GFunction::product(GFunction first, GFunction second) {
    return GFunction(std::make_shared<ProductNode>(first.node_, second.node_));
}

GFunction GFunction::compose(GFunction outer, GFunction inner) {
    return GFunction(std::make_shared<ComposeNode>(outer.node_, inner.node_));
}

GFunction GFunction::parse(const std::string& text) { return Parser(text).parse_all(); }

Family GFunction::family() const { return node_->family(); }
double GFunction::delta() const { return node_->delta(); }
double GFunction::g0() const { return node_->g0(); }

double GFunction::g(double t) const {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("g: argument must be finite and >= 0");
    return node_->g(t);
}

double GFunction::dg(double t) const {
    if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("g': argument must be finite and > 0");
    return node_->dg(t);
}

double GFunction::flux_coefficient(double t) const {
    if (!(t > 0.0)) throw DomainError("F: argument must be > 0");
    return node_->g(t) / t;
}

bool GFunction::has_closed_form_primitive() const { return node_->closed_primitive(1.0).has_value(); }

double GFunction::G(double t) const {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("G: argument must be finite and >= 0");
    if (t == 0.0) return 0.0;
    if (auto closed = node_->closed_primitive(t)) return *closed;

    const detail::GNode& node = *node_;
    auto integrand = [&node](double x) { return node.g(x); };
    const QuadratureOptions q = relative_quadrature();

    std::vector<double> cuts;
    for (double b : node.breakpoints()) {
        if (b > 0.0 && b < t) cuts.push_back(b);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    if (cuts.empty()) return integrate_from_origin(integrand, t, q);

    double total = integrate_from_origin(integrand, cuts.front(), q);
    cuts.push_back(t);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const QuadratureResult r = integrate_simpson(integrand, cuts[i], cuts[i + 1], q);
        if (!r.converged) throw NumericalError("G: quadrature did not converge", r.error_estimate);
        total += r.value;
    }
    return total;
}

std::string GFunction::describe() const { return node_->describe(); }

std::vector<double> GFunction::breakpoints() const { return node_->breakpoints(); }

double eval_g(const GFunction& f, double t) { return f.g(t); }

std::vector<double> eval_G_many(const GFunction& f, std::span<const double> ts) {
    if (f.has_closed_form_primitive()) {
        std::vector<double> out(ts.size());
        for (std::size_t i = 0; i < ts.size(); ++i) out[i] = f.G(ts[i]);
        return out;
    }
    return primitive_many([&f](double x) { return f.g(x); }, ts, f.breakpoints());
}

std::vector<double> conjugate_Gtilde_many(const GFunction& f, std::span<const double> ys) {
    return primitive_many([&f](double y) { return g_inverse(f, y); }, ys, {});
}

double eval_G(const GFunction& f, double t) { return f.G(t); }

std::vector<double> log_grid(double lo, double hi, int n) {
    if (!(lo > 0.0 && hi > lo) || n < 2) throw DomainError("log_grid: need 0 < lo < hi and n >= 2");
    std::vector<double> out(static_cast<std::size_t>(n));
    const double llo = std::log(lo);
    const double lhi = std::log(hi);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::exp(llo + (lhi - llo) * i / (n - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

ConditionCheck check_condition(const GFunction& f, double tmin, double tmax, int n) {
    ConditionCheck out;
    out.delta_emp = std::numeric_limits<double>::infinity();
    out.g0_emp = -std::numeric_limits<double>::infinity();
    for (double t : log_grid(tmin, tmax, n)) {
        const double ratio = t * f.dg(t) / f.g(t);
        if (!std::isfinite(ratio)) {
            out.non_finite_at = t;
            out.bracketed = false;
            return out;
        }
        out.delta_emp = std::min(out.delta_emp, ratio);
        out.g0_emp = std::max(out.g0_emp, ratio);
    }
    constexpr double slack = 1e-9;
    out.bracketed = f.delta() * (1.0 - slack) <= out.delta_emp && out.g0_emp <= f.g0() * (1.0 + slack);
    return out;
}

double g_inverse(const GFunction& f, double y) {
    if (!(y >= 0.0) || !std::isfinite(y)) throw DomainError("g_inverse: argument must be finite and >= 0");
    if (y == 0.0) return 0.0;

    // Scaling bounds of g^{-1} around t = 1 give a certified starting bracket.
    const double s = y / f.g(1.0);
    const double e_lo = 1.0 / f.g0();
    const double e_hi = 1.0 / f.delta();
    double lo = std::min(std::pow(s, e_lo), std::pow(s, e_hi)) * (1.0 - 1e-9);
    double hi = std::max(std::pow(s, e_lo), std::pow(s, e_hi)) * (1.0 + 1e-9);
    if (!(lo > 0.0) || !std::isfinite(lo)) lo = std::numeric_limits<double>::min();
    if (!std::isfinite(hi)) hi = std::numeric_limits<double>::max();
    while (f.g(lo) > y && lo > std::numeric_limits<double>::min()) lo *= 0.5;
    while (f.g(hi) < y && hi < std::numeric_limits<double>::max() / 2) hi *= 2.0;

    RootOptions ro;
    ro.rel_tol = 1e-14;
    return find_root_increasing([&](double t) { return f.g(t) - y; }, lo, hi, ro);
}

double conjugate_Gtilde(const GFunction& f, double y) {
    if (!(y >= 0.0) || !std::isfinite(y)) throw DomainError("G~: argument must be finite and >= 0");
    if (y == 0.0) return 0.0;
    return integrate_from_origin([&f](double x) { return g_inverse(f, x); }, y, relative_quadrature());
}

double conjugate_identity_defect(const GFunction& f, double t) {
    if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("conjugate identity: t must be > 0");
    const double gt = f.g(t);
    return conjugate_Gtilde(f, gt) + f.G(t) - t * gt;
}

double bernoulli_phi(const GFunction& f, double s) { return s * f.g(s) - f.G(s); }

double lambda_star(const GFunction& f, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("lambda_star: lambda must be >= 0");
    if (lambda == 0.0) return 0.0;
    if (f.family() == Family::Power) {
        const double p = f.delta() + 1.0;
        return std::pow(lambda * p / (p - 1.0), 1.0 / p);
    }
    auto phi = [&](double s) { return bernoulli_phi(f, s) - lambda; };
    double lo = 0.0;
    double hi = 1.0;
    while (phi(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
    }
    if (lo == 0.0) {
        // tighten from below so the relative tolerance is reached quickly
        double probe = 0.5 * hi;
        while (probe > std::numeric_limits<double>::min() && phi(probe) > 0.0) {
            hi = probe;
            probe *= 0.5;
        }
        lo = probe;
    }
    RootOptions ro;
    ro.rel_tol = 1e-13;
    return find_root_increasing(phi, lo, hi, ro);
}

double InequalityReport::worst_slack() const {
    double w = std::numeric_limits<double>::infinity();
    for (const auto& c : checks) w = std::min(w, c.worst_slack);
    return w;
}

const InequalityCheck* InequalityReport::find(const std::string& name) const {
    for (const auto& c : checks) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

InequalityReport inequality_suite(const GFunction& f, std::span<const double> t_grid,
                                  std::span<const double> s_grid) {
    const double delta = f.delta();
    const double g0 = f.g0();
    const std::size_t nt = t_grid.size();

    struct Sample {
        double t, g, G, ginv, Gt, Gt_of_g;
    };
    for (double t : t_grid) {
        if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("inequality_suite: grid must be positive");
    }
    for (double sc : s_grid) {
        if (!(sc > 0.0) || !std::isfinite(sc)) throw DomainError("inequality_suite: s-grid must be positive");
    }

    // Every argument at which G or G~ is needed, evaluated in one cumulative sweep each.
    std::vector<double> G_args(t_grid.begin(), t_grid.end());
    std::vector<double> Gt_args(t_grid.begin(), t_grid.end());
    std::vector<double> g_vals(nt);
    for (std::size_t i = 0; i < nt; ++i) {
        g_vals[i] = f.g(t_grid[i]);
        Gt_args.push_back(g_vals[i]);
    }
    for (double sc : s_grid) {
        for (double t : t_grid) {
            G_args.push_back(sc * t);
            Gt_args.push_back(sc * t);
        }
    }
    for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t j = i; j < nt; ++j) G_args.push_back(t_grid[i] + t_grid[j]);
    }
    const std::vector<double> G_vals = eval_G_many(f, G_args);
    const std::vector<double> Gt_vals = conjugate_Gtilde_many(f, Gt_args);
    std::size_t G_next = nt;
    std::size_t Gt_next = 2 * nt;

    std::vector<Sample> at(nt);
    for (std::size_t i = 0; i < nt; ++i) {
        Sample& s = at[i];
        s.t = t_grid[i];
        s.g = g_vals[i];
        s.G = G_vals[i];
        s.ginv = g_inverse(f, s.t);
        s.Gt = Gt_vals[i];
        s.Gt_of_g = Gt_vals[nt + i];
    }

    InequalityReport report;
    report.checks.reserve(32);  // references handed out below must stay valid
    auto check = [&](const std::string& name) -> InequalityCheck& {
        report.checks.push_back({name, std::numeric_limits<double>::infinity(), 0.0, 0.0, 0});
        return report.checks.back();
    };
    auto record = [](InequalityCheck& c, double lhs, double rhs, double x, double y) {
        const double sl = relative_slack(lhs, rhs);
        ++c.evaluations;
        if (sl < c.worst_slack) {
            c.worst_slack = sl;
            c.at_first = x;
            c.at_second = y;
        }
    };
    auto mn = [](double s, double e1, double e2) { return std::min(std::pow(s, e1), std::pow(s, e2)); };
    auto mx = [](double s, double e1, double e2) { return std::max(std::pow(s, e1), std::pow(s, e2)); };

    // single-argument bounds
    {
        InequalityCheck& g3_lo = check("g3_lower");
        InequalityCheck& g3_hi = check("g3_upper");
        InequalityCheck& gt2_lo = check("gt2_lower");
        InequalityCheck& gt2_hi = check("gt2_upper");
        InequalityCheck& gt4 = check("gt4");
        InequalityCheck& ident = check("conjugate_identity");
        InequalityCheck& cond = check("condition");
        for (const Sample& s : at) {
            record(g3_lo, s.t * s.g / (1.0 + g0), s.G, s.t, 0.0);
            record(g3_hi, s.G, s.t * s.g, s.t, 0.0);
            record(gt2_lo, delta * s.t * s.ginv / (1.0 + delta), s.Gt, s.t, 0.0);
            record(gt2_hi, s.Gt, s.t * s.ginv, s.t, 0.0);
            record(gt4, s.Gt_of_g, g0 * s.G, s.t, 0.0);
            const double tg = s.t * s.g;
            const double defect = s.Gt_of_g + s.G - tg;
            ++ident.evaluations;
            const double sl = tg > 0.0 ? -std::abs(defect) / tg : 0.0;
            if (sl < ident.worst_slack) {
                ident.worst_slack = sl;
                ident.at_first = s.t;
            }
            const double ratio = s.t * f.dg(s.t) / s.g;
            record(cond, delta, ratio, s.t, 0.0);
            record(cond, ratio, g0, s.t, 0.0);
        }
    }

    // scaling bounds on the (s, t) product grid
    {
        InequalityCheck& g1_lo = check("g1_lower");
        InequalityCheck& g1_hi = check("g1_upper");
        InequalityCheck& G1_lo = check("G1_lower");
        InequalityCheck& G1_hi = check("G1_upper");
        InequalityCheck& gt1_lo = check("gt1_lower");
        InequalityCheck& gt1_hi = check("gt1_upper");
        InequalityCheck& Gt1_lo = check("Gt1_lower");
        InequalityCheck& Gt1_hi = check("Gt1_upper");
        for (double sc : s_grid) {
            for (const Sample& s : at) {
                const double st = sc * s.t;
                const double g_st = f.g(st);
                record(g1_lo, mn(sc, delta, g0) * s.g, g_st, sc, s.t);
                record(g1_hi, g_st, mx(sc, delta, g0) * s.g, sc, s.t);
                const double G_st = G_vals[G_next++];
                record(G1_lo, mn(sc, delta + 1.0, g0 + 1.0) * s.G / (1.0 + g0), G_st, sc, s.t);
                record(G1_hi, G_st, (1.0 + g0) * mx(sc, delta + 1.0, g0 + 1.0) * s.G, sc, s.t);
                const double ginv_st = g_inverse(f, st);
                record(gt1_lo, mn(sc, 1.0 / delta, 1.0 / g0) * s.ginv, ginv_st, sc, s.t);
                record(gt1_hi, ginv_st, mx(sc, 1.0 / delta, 1.0 / g0) * s.ginv, sc, s.t);
                const double Gt_st = Gt_vals[Gt_next++];
                const double e1 = 1.0 + 1.0 / delta;
                const double e2 = 1.0 + 1.0 / g0;
                record(Gt1_lo, delta / (1.0 + delta) * mn(sc, e1, e2) * s.Gt, Gt_st, sc, s.t);
                record(Gt1_hi, Gt_st, (1.0 + delta) / delta * mx(sc, e1, e2) * s.Gt, sc, s.t);
            }
        }
    }

    // two-argument inequalities on the (a, b) grid
    {
        InequalityCheck& G2 = check("G2");
        InequalityCheck& young = check("gt3_young");
        InequalityCheck& young_eps = check("gt3_epsilon");
        const double eps = 0.5;
        const double eps_prime = std::pow(eps / (1.0 + g0), 1.0 / (1.0 + delta));
        const double c_eps = (1.0 + delta) / delta * std::pow(eps_prime, -(1.0 + 1.0 / delta));
        const double g2_const = std::pow(2.0, g0) * (1.0 + g0);
        for (std::size_t i = 0; i < nt; ++i) {
            for (std::size_t j = 0; j < nt; ++j) {
                const Sample& a = at[i];
                const Sample& b = at[j];
                if (j >= i) record(G2, G_vals[G_next++], g2_const * (a.G + b.G), a.t, b.t);
                record(young, a.t * b.t, a.G + b.Gt, a.t, b.t);
                record(young_eps, a.t * b.t, eps * a.G + c_eps * b.Gt, a.t, b.t);
            }
        }
    }
    return report;
}

LuxemburgResult luxemburg_norm(const GFunction& f, std::span<const double> values,
                               std::span<const double> measures) {
    if (values.size() != measures.size()) throw DomainError("luxemburg_norm: size mismatch");
    LuxemburgResult out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(measures[i] >= 0.0) || !std::isfinite(values[i])) {
            throw DomainError("luxemburg_norm: measures must be >= 0 and values finite");
        }
        out.modular += measures[i] * f.G(std::abs(values[i]));
    }
    if (out.modular == 0.0) return out;

    const double scaled = 2.0 * (1.0 + f.g0()) * out.modular;
    out.structural_bound =
        std::max(std::pow(scaled, 1.0 / (1.0 + f.delta())), std::pow(scaled, 1.0 / (1.0 + f.g0())));

    auto modular_at = [&](double k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) acc += measures[i] * f.G(std::abs(values[i]) / k);
        return acc;
    };
    double hi = out.structural_bound;
    while (modular_at(hi) > 1.0) hi *= 2.0;
    double lo = 0.5 * hi;
    while (modular_at(lo) <= 1.0) {
        hi = lo;
        lo *= 0.5;
    }
    // bisection in log k; the modular is strictly decreasing in k
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (modular_at(mid) > 1.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    out.norm = 0.5 * (lo + hi);
    return out;
}

}  // namespace orliczfb
