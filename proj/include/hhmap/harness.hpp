#pragma once

// Experiments tying the solver, measures and boundary machinery to the
// quantitative statements they are meant to exhibit: the explicit constants,
// rho(R) scans, boundary and interior estimates at the achieved rho,
// uniqueness probes and the parabolic counterexample.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hhmap/boundary.hpp"
#include "hhmap/solver.hpp"

namespace hhmap {

// ---------------------------------------------------------------- records

struct Check {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    bool pass = false;
};

struct ExperimentRecord {
    std::string name;
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
    std::string csv_header;
    std::vector<std::string> csv_rows;
    std::vector<Check> checks;

    void check(const std::string& what, double value, double bound, bool pass) {
        checks.push_back({what, value, bound, pass});
    }
    bool pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
    }
};

// FNV-1a over the sorted "key=value\n" lines
inline std::uint64_t config_hash(const std::map<std::string, std::string>& config) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& [k, v] : config)
        for (char ch : k + "=" + v + "\n") {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ull;
        }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* d = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[i] = d[v & 15];
    return s;
}

// One JSON object per check: experiment, assertion, value, bound, pass.
inline void write_jsonl(std::ostream& os, const ExperimentRecord& r) {
    for (const auto& c : r.checks) {
        nlohmann::json j;
        j["experiment"] = r.name;
        j["assertion"] = c.name;
        j["value"] = c.value;
        j["bound"] = c.bound;
        j["pass"] = c.pass;
        j["seed"] = r.seed;
        os << j.dump() << '\n';
    }
}

inline void write_record_csv(std::ostream& os, const ExperimentRecord& r) {
    os << "# experiment=" << r.name << " config_hash=" << hex64(config_hash(r.config)) << " seed=" << r.seed << '\n';
    os << r.csv_header << '\n';
    for (const auto& row : r.csv_rows) os << row << '\n';
}

inline std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

// ---------------------------------------------------------------- constants

struct ConstantInputs {
    double a = 1.0, b = 1.0;
    double c = 1.0, C = 0.0;  // derivative bound and additive QI constant
    int k = 2, k_target = 2;
    double A = 1.0;           // Gromov product distortion
    double M = 2 * pi, N = 1.0;
    double C1 = 1.0, C2 = 1.0;  // property C constants (coarse case)
};

// Thresholds are kept as logarithms where they overflow a double.
struct QIConstants {
    double eps0 = 0.0;
    double theta0 = 0.0;
    double ell0_bounds[3]{};  // strict lower bounds from the three conditions
    long long ell0 = 0;
    double rho1 = 0.0;        // a rho > 8 k b c^2 ell0
    double rho2 = 0.0;        // 2^7 (a rho)^2 / sinh(a rho / 2) < theta0
    double log_rho3 = 0.0;    // rho > 4 c ell0 M (2^10 e^{b ell0} k)^N
    double log_rho_min() const { return std::max({std::log(rho1), std::log(rho2), log_rho3}); }
};

struct CoarseConstants {
    double alpha = 0.0, nu_alpha = 0.0, nu = 0.0, beta = 0.0;
    double C3 = 0.0, C4 = 0.0;
    long long n0 = 0;
    double log_theta0 = 0.0;  // theta0 = e^{-2 n0 b c} / 2
    double ell0_bounds[3]{};
    long long ell0 = 0;
    double rho1 = 0.0, rho2 = 0.0, log_rho3 = 0.0;
    double log_rho_min() const { return std::max({std::log(rho1), std::log(rho2), log_rho3}); }
};

struct PaperConstants {
    ConstantInputs in;
    QIConstants qi;
    CoarseConstants coarse;
    double N0 = 0.0;  // 100^k
};

namespace detail {

// smallest x > argmax of 2^7 x^2 / sinh(x/2) with the value below e^{log_theta}
inline double rho2_threshold(double log_theta) {
    const auto logg = [](double x) {
        const double ls = x / 2 > 30 ? x / 2 - std::log(2.0) : std::log(std::sinh(x / 2));
        return 7 * std::log(2.0) + 2 * std::log(x) - ls;
    };
    double lo = 4.0, hi = 8.0;  // the maximum sits near x = 3.83
    while (logg(hi) >= log_theta) hi *= 2;
    if (logg(lo) < log_theta) return lo;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (logg(mid) >= log_theta ? lo : hi) = mid;
    }
    return hi;
}

inline long long smallest_integer_above(double x) { return static_cast<long long>(std::floor(x)) + 1; }

}  // namespace detail

inline constexpr double ell0_limit = 1e6;

inline PaperConstants compute_constants(const ConstantInputs& in) {
    if (!(in.a > 0) || !(in.b >= in.a)) throw usage_error("constants: need 0 < a <= b");
    if (!(in.c >= 1) || !(in.C >= 0)) throw usage_error("constants: need c >= 1 and C >= 0");
    if (in.k < 1 || in.k_target < 1) throw usage_error("constants: dimensions must be >= 1");
    if (!(in.A >= 0) || !(in.M >= 1) || !(in.N >= 1)) throw usage_error("constants: need A >= 0, M >= 1, N >= 1");
    if (!(in.C1 > 0) || !(in.C2 > 0)) throw usage_error("constants: C1, C2 must be positive");
    const double a = in.a, b = in.b, c = in.c;
    PaperConstants P;
    P.in = in;
    P.N0 = std::pow(100.0, in.k);

    QIConstants& q = P.qi;
    q.eps0 = std::pow(3 * c * c * in.M, -in.N);
    const double log_theta0 = -b * in.A + (b * c / a) * std::log(q.eps0 / 4);
    q.theta0 = std::exp(log_theta0);
    q.ell0_bounds[0] = 1 / b;
    q.ell0_bounds[1] = (in.A + 1 / b) * c / sqr(std::sin(q.eps0 / 2));
    q.ell0_bounds[2] = (4 * c / a) * (std::log(16.0) + a * in.C / 2 - log_theta0);
    const double qmax = *std::max_element(q.ell0_bounds, q.ell0_bounds + 3);
    if (!(qmax < ell0_limit)) throw numeric_error("constants: no ell0 below 1e6 (quasi-isometric case)");
    q.ell0 = detail::smallest_integer_above(qmax);
    q.rho1 = 8 * in.k * b * c * c * q.ell0 / a;
    q.rho2 = detail::rho2_threshold(log_theta0) / a;
    q.log_rho3 = std::log(4 * c * q.ell0 * in.M) + in.N * (10 * std::log(2.0) + b * q.ell0 + std::log(in.k));

    CoarseConstants& g = P.coarse;
    g.alpha = a / (2 * b * in.k_target * in.N);
    g.nu_alpha = b * in.k_target * g.alpha / a;
    g.nu = 2 * g.nu_alpha;
    g.beta = beta_alpha(g.alpha, c);
    g.C3 = c3_constant(in.C1, in.C2, g.nu, g.nu_alpha, a);
    g.C4 = g.C3 / (1 - std::exp(-g.beta * b * in.k_target));
    const double n0_angle = 4 * std::exp(2 * a * c) / (1 - std::exp(-a * g.beta));
    const double n0_mass = std::log(8 * c * in.M * g.C4 / g.alpha) / (a * g.alpha);
    g.n0 = std::max<long long>(1, static_cast<long long>(std::ceil(std::max(n0_angle, n0_mass) - 1e-12)));
    g.log_theta0 = -2.0 * g.n0 * b * c - std::log(2.0);
    g.ell0_bounds[0] = 1 / b;
    g.ell0_bounds[1] = 4.0 * g.n0 * c / g.alpha;
    g.ell0_bounds[2] = (4 / (a * g.alpha)) * (std::log(16.0) - g.log_theta0);
    const double gmax = *std::max_element(g.ell0_bounds, g.ell0_bounds + 3);
    if (!(gmax < ell0_limit)) throw numeric_error("constants: no ell0 below 1e6 (coarse case)");
    g.ell0 = detail::smallest_integer_above(gmax);
    g.rho1 = 8 * in.k * b * c * c * g.ell0 / a;
    g.rho2 = detail::rho2_threshold(g.log_theta0) / a;
    g.log_rho3 = std::log(4 * c * g.ell0 * in.M) + in.N * (10 * std::log(2.0) + b * g.ell0 + std::log(in.k));
    return P;
}

// ---------------------------------------------------------------- derivative bound

// max over the points of the operator norm of Df (central differences of
// log_{f(x)} f(exp_x(+-h e_i)) in an orthonormal frame); surface sources.
inline double derivative_bound_fd(const MapSpec& f, const std::vector<Point>& points, double h = 1e-5) {
    const ModelSpace& X = f.source;
    double best = 0.0;
    for (const Point& x : points) {
        const Point y = eval_map(f, x);
        Tangent g[2];
        for (int e = 0; e < 2; ++e) {
            const Tangent u = unit_direction(X, x, e * pi / 2);
            const Tangent p = log_map(f.target, y, eval_map(f, exp_map(X, x, u, h)));
            const Tangent m = log_map(f.target, y, eval_map(f, exp_map(X, x, u, -h)));
            g[e] = (p - m) / (2 * h);
        }
        const double g11 = metric_inner(f.target, y, g[0], g[0]), g22 = metric_inner(f.target, y, g[1], g[1]);
        const double g12 = metric_inner(f.target, y, g[0], g[1]);
        const double tr = g11 + g22, det = g11 * g22 - g12 * g12;
        best = std::max(best, std::sqrt(std::max(0.0, 0.5 * (tr + std::sqrt(std::max(0.0, tr * tr - 4 * det))))));
    }
    return best;
}

// ---------------------------------------------------------------- rho scans

struct RhoScanOptions {
    std::vector<double> R_list{4, 5, 6, 7, 8};
    double rings_per_unit = 4.0;  // n_r = max(8, rings_per_unit R)
    int n_theta = 32;
    double max_arc = 0.5;
    SolveOptions solve;
};

struct RhoPoint {
    double R = 0.0;
    double rho = std::numeric_limits<double>::quiet_NaN();
    int argmax = 0;
    bool converged = false;
    double residual = 0.0;
    int iterations = 0;
    int nodes = 0;
    std::string failure;
};

struct RhoScan {
    std::vector<RhoPoint> points;
    std::vector<SolveResult> solutions;  // converged runs only, in order

    bool all_converged() const {
        return std::all_of(points.begin(), points.end(), [](const RhoPoint& p) { return p.converged; });
    }
    // max / min of rho over the points with index >= from (1 when all vanish)
    double plateau(std::size_t from = 0) const {
        double mx = 0.0, mn = std::numeric_limits<double>::infinity();
        for (std::size_t i = from; i < points.size(); ++i) {
            mx = std::max(mx, points[i].rho);
            mn = std::min(mn, points[i].rho);
        }
        if (mx < 1e-12) return 1.0;
        return mx / mn;
    }
    double plateau_last_half() const { return plateau(points.size() / 2); }
    bool monotone() const {
        for (std::size_t i = 1; i < points.size(); ++i)
            if (!(points[i].rho > points[i - 1].rho)) return false;
        return true;
    }
    double ratio(double R_hi, double R_lo) const {
        double hi = NAN, lo = NAN;
        for (const auto& p : points) {
            if (p.R == R_hi) hi = p.rho;
            if (p.R == R_lo) lo = p.rho;
        }
        return hi / lo;
    }
};

inline std::shared_ptr<const Mesh> scan_mesh(const ModelSpace& X, double R, const RhoScanOptions& o) {
    const int n_r = std::max(8, static_cast<int>(std::lround(o.rings_per_unit * R)));
    return build_polar_mesh(X, R, n_r, o.n_theta, o.max_arc);
}

inline RhoScan rho_scan(const MapSpec& f, const RhoScanOptions& o = {}) {
    if (o.R_list.empty()) throw usage_error("rho_scan: empty R list");
    RhoScan scan;
    for (double R : o.R_list) {
        RhoPoint p;
        p.R = R;
        const auto mesh = scan_mesh(f.source, R, o);
        p.nodes = mesh->size();
        try {
            SolveResult res = solve_dirichlet(f, mesh, o.solve);
            p.converged = res.converged;
            p.residual = res.tension_residual_sup;
            p.iterations = res.iterations;
            const auto sd = sup_distance(res.map, f);
            p.rho = sd.rho;
            p.argmax = sd.node;
            if (res.converged) scan.solutions.push_back(std::move(res));
        } catch (const numeric_error& e) {
            p.failure = e.what();
        }
        scan.points.push_back(p);
    }
    return scan;
}

// ---------------------------------------------------------------- boundary estimate

struct BoundaryEstimateReport {
    double slope = 0.0;       // 3 k b c^2 / a
    double max_excess = 0.0;  // max of d(h(x), f(x)) - slope d(x, boundary)
    std::vector<int> violations;
    int nodes = 0;
    bool pass() const { return violations.empty(); }
};

inline BoundaryEstimateReport boundary_estimate_check(const DiscreteMap& h, const MapSpec& f, int k, double a,
                                                      double b, double c, double slack = 1e-3) {
    const Mesh& m = *h.mesh;
    BoundaryEstimateReport r;
    r.slope = 3 * k * b * c * c / a;
    r.max_excess = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m.size(); ++i) {
        const double lhs = dist(h.target, h.values[i], eval_map(f, m.nodes[i]));
        const double ex = lhs - r.slope * (m.R - m.s[i]);
        r.max_excess = std::max(r.max_excess, ex);
        if (ex > slack) r.violations.push_back(i);
        ++r.nodes;
    }
    return r;
}

// ---------------------------------------------------------------- Cheng's estimate

struct ChengReport {
    double bound = 0.0;  // 2^5 k (1 + b r) / r R0
    double max_norm = 0.0;
    int samples = 0;
    int violations = 0;
    bool pass() const { return violations == 0; }
};

inline double cheng_bound(int k, double b, double r, double R0) { return 32.0 * k * (1 + b * r) / r * R0; }

// ||Dh|| at nodes z with B(z, r) inside the mesh, against Cheng's bound. The
// image of each B(z, r) (its nodes) must lie in B(h(z), R0).
inline ChengReport cheng_check(const DiscreteMap& h, double R0, double r, int k, double b) {
    if (!(r > 0) || !(R0 > 0)) throw usage_error("cheng_check: need r > 0 and R0 > 0");
    const Mesh& m = *h.mesh;
    ChengReport rep;
    rep.bound = cheng_bound(k, b, r, R0);
    for (int z = 0; z < m.size(); ++z) {
        if (m.boundary[z] || m.s[z] + r >= m.R) continue;
        for (int w = 0; w < m.size(); ++w)
            if (dist(m.space, m.nodes[z], m.nodes[w]) <= r && dist(h.target, h.values[z], h.values[w]) > R0)
                throw usage_error("cheng_check: image of B(z, r) leaves B(h(z), R0) at node " + std::to_string(z));
        const double n = jacobian_norm(h, z);
        rep.max_norm = std::max(rep.max_norm, n);
        ++rep.samples;
        if (n > rep.bound) ++rep.violations;
    }
    return rep;
}

// ---------------------------------------------------------------- interior lemmas

struct InteriorOptions {
    double ell0 = 0.25;
    int sphere_samples = 256;
    int ball_radii = 4;  // concentric sample spheres at ell0 j / ball_radii
};

struct InteriorReport {
    int x = 0;          // argmax node
    double rho = 0.0;
    double ell0 = 0.0;
    double c = 0.0;
    std::vector<Check> checks;
    double sigma_U = 0.0;
    bool pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& ch) { return ch.pass; });
    }
    const Check& get(const std::string& name) const {
        for (const auto& ch : checks)
            if (ch.name == name) return ch;
        throw usage_error("InteriorReport: no check named " + name);
    }
};

// Evaluates the interior inequalities at the achieved rho on samples of
// S(x, ell0) and B(x, ell0), x the argmax of d(h, f), y = f(x),
// rho_h = d(y, h(.)), U = {z in S(x, ell0) : rho_h(z) >= rho - ell0 / (2c)}.
// sigma is the harmonic measure of the sphere seen from its centre (uniform
// for surfaces). Angle bounds at or above pi are reported as inactive.
inline InteriorReport interior_check(const DiscreteMap& h, const MapSpec& f, const PaperConstants& P, double c,
                                     const InteriorOptions& o = {}) {
    const Mesh& m = *h.mesh;
    if (m.space.dim() != 2) throw usage_error("interior_check: surface sources only");
    if (!(o.ell0 > 0) || o.sphere_samples < 8 || o.ball_radii < 1) throw usage_error("interior_check: bad options");
    const auto sd = sup_distance(h, f);
    InteriorReport r;
    r.x = sd.node;
    r.rho = sd.rho;
    r.ell0 = o.ell0;
    r.c = c;
    const Point& x = m.nodes[r.x];
    if (!(m.s[r.x] + o.ell0 < m.R))
        throw usage_error("interior_check: S(x, ell0) leaves the mesh (increase R or lower ell0)");
    const double a = P.in.a;
    const MapSpec H = as_map_spec(h, "h_R");
    const ModelSpace& Y = h.target;
    const Point y = eval_map(f, x), hx = h.values[r.x];
    const int S = o.sphere_samples;

    double worst41 = -INFINITY, worst46 = INFINITY;
    for (int j = 1; j <= o.ball_radii; ++j) {
        const double t = o.ell0 * j / o.ball_radii;
        for (int i = 0; i < S; ++i) {
            const Point z = exp_map(m.space, x, unit_direction(m.space, x, 2 * pi * i / S), t);
            const double rh = dist(Y, y, eval_map(H, z));
            worst41 = std::max(worst41, rh - (r.rho + c * o.ell0));
            worst46 = std::min(worst46, rh - r.rho / 2);
        }
    }
    worst41 = std::max(worst41, dist(Y, y, hx) - (r.rho + c * o.ell0));
    worst46 = std::min(worst46, dist(Y, y, hx) - r.rho / 2);

    std::vector<Point> fz(S), hz(S);
    std::vector<char> inU(S, 0);
    int nU = 0;
    for (int i = 0; i < S; ++i) {
        const Point z = exp_map(m.space, x, unit_direction(m.space, x, 2 * pi * i / S), o.ell0);
        fz[i] = eval_map(f, z);
        hz[i] = eval_map(H, z);
        inU[i] = dist(Y, y, hz[i]) >= r.rho - o.ell0 / (2 * c);
        nU += inU[i];
    }
    r.sigma_U = static_cast<double>(nU) / S;

    const double b44 = 4 * std::exp(a * P.in.C / 2) * std::exp(-a * o.ell0 / (4 * c));
    const double b45 = 32 * sqr(a * r.rho) / std::sinh(a * r.rho / 2);
    double max44 = 0.0, max45 = 0.0, max48 = 0.0;
    long long tri = 0;
    for (int i = 0; i < S; ++i) {
        const double t45 = angle_at(Y, y, hz[i], hx);
        max45 = std::max(max45, t45);
        if (!inU[i]) continue;
        const double t44 = angle_at(Y, y, fz[i], hz[i]);
        max44 = std::max(max44, t44);
        if (angle_at(Y, y, fz[i], hx) > t44 + t45 + 1e-12) ++tri;
        for (int j = i + 1; j < S; ++j)
            if (inU[j]) max48 = std::max(max48, angle_at(Y, y, fz[i], fz[j]));
    }
    // the triangle inequality is checked on every sphere sample
    for (int i = 0; i < S; ++i)
        if (!inU[i] && angle_at(Y, y, fz[i], hx) > angle_at(Y, y, fz[i], hz[i]) + angle_at(Y, y, hz[i], hx) + 1e-12)
            ++tri;

    r.checks.push_back({"rho_h <= rho + c ell0 on B(x, ell0)", worst41, 0.0, worst41 <= 1e-9});
    r.checks.push_back({"sigma(U) >= 1/(3c^2)", r.sigma_U, 1 / (3 * c * c), r.sigma_U >= 1 / (3 * c * c)});
    r.checks.push_back({"rho_h >= rho/2 on B(x, ell0)", worst46, 0.0, worst46 >= -1e-9});
    r.checks.push_back({"angle(f(z), h(z)) on U", max44, b44, max44 <= b44});
    r.checks.push_back({"angle(h(z), h(x)) on S(x, ell0)", max45, b45, max45 <= b45});
    r.checks.push_back({"max angle(f(z1), f(z2)) on U vs theta0", max48, P.qi.theta0, max48 >= P.qi.theta0});
    r.checks.push_back({"angle triangle inequality violations", static_cast<double>(tri), 0.0, tri == 0});
    return r;
}

// ---------------------------------------------------------------- uniqueness

struct UniquenessReport {
    double sup_distance = 0.0;      // max over nodes of d(h0, h1)
    double boundary_max = 0.0;      // max on boundary nodes
    double interior_max = 0.0;
    SubharmonicReport subharmonic;
    double tol = 0.0;
    bool both_converged = true;
    bool pass() const {
        return both_converged && sup_distance <= 10 * tol && subharmonic.pass() &&
               interior_max <= boundary_max + 10 * tol;
    }
};

inline UniquenessReport compare_solutions(const DiscreteMap& h0, const DiscreteMap& h1, double tol,
                                          double subharmonic_tol) {
    if (h0.mesh != h1.mesh) throw usage_error("compare_solutions: maps on different meshes");
    const Mesh& m = *h0.mesh;
    UniquenessReport r;
    r.tol = tol;
    const auto d = distance_field(h0, h1);
    for (int i = 0; i < m.size(); ++i) {
        r.sup_distance = std::max(r.sup_distance, d[i]);
        (m.boundary[i] ? r.boundary_max : r.interior_max) = std::max(m.boundary[i] ? r.boundary_max : r.interior_max, d[i]);
    }
    r.subharmonic = check_subharmonic(m, d, subharmonic_tol);
    return r;
}

// Solves from the boundary map and from a constant start; the two solutions
// must agree to 10 tol and their distance field be subharmonic.
inline UniquenessReport uniqueness_probe(const MapSpec& f, std::shared_ptr<const Mesh> mesh, const SolveOptions& opt,
                                         double subharmonic_tol = 1e-3) {
    const SolveResult a = solve_dirichlet(f, mesh, opt, InitKind::boundary_map);
    const SolveResult b = solve_dirichlet(f, mesh, opt, InitKind::constant);
    UniquenessReport r = compare_solutions(a.map, b.map, opt.tol, subharmonic_tol);
    r.both_converged = a.converged && b.converged;
    return r;
}

// ---------------------------------------------------------------- counterexample

struct CounterexampleOptions {
    RhoScanOptions scan;  // for the parabolic map
    std::vector<int> residual_rings{16, 32, 64};
    double residual_R = 1.0;
    std::uint64_t seed = 1;
};

inline double ode_residual_sup(const std::vector<double>& as, int samples, double v_max) {
    double worst = 0.0;
    for (double a : as)
        for (int i = 1; i <= samples; ++i) {
            const double v = v_max * i / samples;
            const double g = std::sinh(a * v) / a, g1 = std::cosh(a * v), g2 = a * std::sinh(a * v);
            worst = std::max(worst, std::abs(g * g2 - g1 * g1 + 1));
        }
    return worst;
}

// tension residual sup of h_a (a = 1) on meshes of radius R with n_theta = 2 n_r
inline std::vector<double> h_a_residuals(double R, const std::vector<int>& rings) {
    std::vector<double> out;
    const MapSpec ha = sinh_family_map(1.0);
    for (int n : rings) out.push_back(tension_residual_sup(sample_map(ha, build_polar_mesh(ha.source, R, n, 2 * n))));
    return out;
}

inline ExperimentRecord counterexample_lab(const CounterexampleOptions& o = {}) {
    ExperimentRecord rec;
    rec.name = "counterexample";
    rec.seed = o.seed;
    rec.csv_header = "R,rho,converged";
    const ModelSpace H2 = make_space(Model::halfplane2);

    const double ode = ode_residual_sup({0.5, 1.0}, 100, 3.0);
    rec.check("ode g g'' - g'^2 + 1 for g = sinh(a v)/a", ode, 1e-12, ode < 1e-12);

    const auto res = h_a_residuals(o.residual_R, o.residual_rings);
    double worst_ratio = INFINITY;
    for (std::size_t i = 1; i < res.size(); ++i) worst_ratio = std::min(worst_ratio, res[i - 1] / res[i]);
    rec.check("h_a tension residual ratio per mesh doubling", worst_ratio, 3.5, worst_ratio >= 3.5);

    Rng rng(derive_seed(o.seed, 11));
    double worst_G = 0.0;
    const Point O = origin(H2);
    for (int i = 0; i < 100; ++i) {
        const Point p = random_point(H2, rng, 3.0);
        const double lap = laplace_beltrami_fd(
            H2, [&](const Point& q) { return 2.0 * std::log(std::cosh(dist(H2, O, q) / 2.0)); }, p);
        worst_G = std::max(worst_G, std::abs(lap - 1.0));
    }
    rec.check("|Laplacian of 2 log cosh(d/2) - 1|", worst_G, 1e-3, worst_G <= 1e-3);

    const RhoScan scan = rho_scan(parabolic_sq_map(), o.scan);
    for (const auto& p : scan.points) rec.csv_rows.push_back(fmt(p.R) + "," + fmt(p.rho) + "," + (p.converged ? "1" : "0"));
    const double R_lo = o.scan.R_list.front(), R_hi = o.scan.R_list.back();
    const double growth = scan.ratio(R_hi, R_lo);
    rec.check("parabolic rho scan converged", scan.all_converged(), 1, scan.all_converged());
    rec.check("parabolic rho monotone in R", scan.monotone(), 1, scan.monotone());
    rec.check("parabolic rho(R_max)/rho(R_min)", growth, 1.5, growth >= 1.5);

    double beta0 = 0.0, betainf = 0.0;
    const MapSpec f0 = f_beta_map(0.0), fbig = f_beta_map(1e12), finf = f_beta_map(INFINITY);
    for (int i = 0; i < 100; ++i) {
        const Point p = random_point(H2, rng, 3.0);
        beta0 = std::max(beta0, norm(eval_map(f0, p) - p));
        betainf = std::max(betainf, dist(H2, eval_map(fbig, p), eval_map(finf, p)));
    }
    rec.check("f_beta at beta = 0 is the identity", beta0, 1e-15, beta0 <= 1e-15);
    rec.check("f_beta -> (0, v^2) as beta -> inf", betainf, 1e-6, betainf <= 1e-6);
    return rec;
}

}  // namespace hhmap
