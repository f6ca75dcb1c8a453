#pragma once

// Command-line front end. A run merges defaults, an optional `key = value`
// config file and `--key value` flags (later wins), validates every value,
// dispatches one experiment and writes its CSV and JSON-lines record.
//
// Exit codes: 0 all assertions hold, 1 an assertion failed, 2 usage error,
// 3 numeric error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "hhmap/verify.hpp"

namespace hhmap::cli {

enum class Kind { real, integer, choice, text, radii, unsigned64 };

struct KeySpec {
    std::string name;
    std::string fallback;
    std::string help;
    Kind kind = Kind::real;
    double lo = -INFINITY, hi = INFINITY;  // inclusive range for real and integer keys
    std::vector<std::string> choices;
};

// clang-format off
inline const std::vector<KeySpec>& key_table() {
    static const std::vector<KeySpec> keys = {
        // space
        {"model", "halfplane2", "model space for frostman: disk2, halfplane2 or halfspace3", Kind::choice, 0, 0, {"disk2", "halfplane2", "halfspace3"}},
        {"a", "1", "curvature bound: sectional curvature <= -a^2", Kind::real, 1e-6, 100, {}},
        {"b", "1", "curvature bound: sectional curvature >= -b^2", Kind::real, 1e-6, 100, {}},
        // map
        {"map", "scale", "boundary map from the catalog (see below)", Kind::choice, 0, 0, {}},
        {"su", "2", "scale: horizontal factor", Kind::real, 1e-6, 1e6, {}},
        {"sv", "1", "scale: vertical factor", Kind::real, 1e-6, 1e6, {}},
        {"map_a", "1", "sinh_family: parameter a", Kind::real, 0, 50, {}},
        {"beta", "0", "f_beta: parameter beta (inf allowed)", Kind::real, 0, INFINITY, {}},
        {"plateau", "0.05", "spiral_embedding: level of phi1 = min(t, plateau)", Kind::real, 1e-6, 2, {}},
        {"t_max", "2", "spiral_embedding: extent of the phi1 table", Kind::real, 1e-3, 100, {}},
        {"phi1_table", "", "spiral_embedding: CSV file of t,phi rows (overrides plateau)", Kind::text, 0, 0, {}},
        // mesh
        {"R", "4", "radius, a list 4,5,6 or a range 4..8 (step R_step)", Kind::radii, 0, 0, {}},
        {"R_step", "1", "step for R ranges", Kind::real, 1e-3, 100, {}},
        {"n_r", "0", "rings of the polar mesh; 0 selects max(8, 4R)", Kind::integer, 0, 4096, {}},
        {"n_theta", "32", "angular nodes per ring (even, >= 16)", Kind::integer, 16, 8192, {}},
        {"max_arc", "0.5", "largest arc between neighbouring nodes on a ring", Kind::real, 1e-3, INFINITY, {}},
        // solver
        {"tol", "1e-8", "tension residual tolerance", Kind::real, 1e-14, 1e-2, {}},
        {"max_iter", "500", "Newton step limit", Kind::integer, 1, 100000, {}},
        {"init", "boundary_map", "initialisation: boundary_map or constant", Kind::choice, 0, 0, {"boundary_map", "constant"}},
        {"expect", "none", "rho-scan assertion: none, plateau or growth", Kind::choice, 0, 0, {"none", "plateau", "growth"}},
        {"plateau_max", "1.1", "rho-scan: largest admissible max/min of rho", Kind::real, 1, 1e6, {}},
        {"growth_min", "1.5", "rho-scan: smallest admissible rho(R_max)/rho(R_min)", Kind::real, 0, 1e6, {}},
        // constants
        {"c", "1", "derivative (Lipschitz) constant of the boundary map", Kind::real, 1, 1e6, {}},
        {"C", "0", "additive quasi-isometry constant", Kind::real, 0, 1e6, {}},
        {"k", "2", "source dimension", Kind::integer, 1, 16, {}},
        {"k_target", "2", "target dimension", Kind::integer, 1, 16, {}},
        {"A", "1", "Gromov product distortion", Kind::real, 0, 1e9, {}},
        {"M", "6.283185307179586", "Frostman constant M", Kind::real, 1, 1e9, {}},
        {"N", "1", "Frostman exponent N", Kind::real, 1, 1e3, {}},
        {"C1", "1", "property C constant C1", Kind::real, 1e-12, 1e12, {}},
        {"C2", "1", "property C constant C2", Kind::real, 1e-12, 1e12, {}},
        // smoothing
        {"smooth_r", "0", "flattening radius; 0 picks it from the chart constants", Kind::real, 0, 10, {}},
        {"smooth_safety", "16", "safety factor for the automatic radius", Kind::real, 1, 1e6, {}},
        {"node_spacing", "0.2", "node spacing in units of the radius", Kind::real, 0.01, 1, {}},
        // boundary probes
        {"x0_u", "0", "base point, first coordinate", Kind::real, -1e6, 1e6, {}},
        {"x0_v", "1", "base point, second coordinate (> 0)", Kind::real, 1e-12, 1e12, {}},
        {"directions", "64", "number of equally spaced ray directions", Kind::integer, 1, 1 << 20, {}},
        {"n_max", "64", "ray horizon", Kind::integer, 1, 100000, {}},
        {"n0", "8", "start of the speed window", Kind::integer, 1, 100000, {}},
        {"alpha", "0.5", "speed threshold of the exceptional sets", Kind::real, 0, 1e6, {}},
        // harmonic measure
        {"sphere_r", "1", "radius of the sphere S(x0, r)", Kind::real, 1e-6, 30, {}},
        {"probe_dist", "0", "distance of the start point from the centre", Kind::real, 0, 30, {}},
        {"probe_angle", "0", "direction of the start point", Kind::real, -1e3, 1e3, {}},
        {"walkers", "100000", "Monte Carlo walkers", Kind::integer, 1, 1e9, {}},
        {"bins", "16", "histogram bins (power of two)", Kind::integer, 1, 1 << 16, {}},
        // verify
        {"criteria", "all", "acceptance criteria to run: all or a list such as 1,4,9", Kind::text, 0, 0, {}},
        // run
        {"seed", "1", "seed for every stochastic step", Kind::unsigned64, 0, 0, {}},
        {"threads", "1", "worker thread cap", Kind::integer, 1, 1024, {}},
        {"output_dir", "hhmap_out", "output directory (HH_OUTPUT_DIR overrides)", Kind::text, 0, 0, {}},
    };
    return keys;
}
// clang-format on

inline const KeySpec& key_spec(const std::string& name) {
    for (const auto& k : key_table())
        if (k.name == name) return k;
    throw usage_error("unknown config key '" + name + "'");
}

inline double parse_real(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || std::isnan(v))
        throw usage_error("config key '" + key + "': '" + text + "' is not a number");
    return v;
}

// "4", "4,5,6" or "4..8" with the given step
inline std::vector<double> parse_radii(const std::string& text, double step) {
    std::vector<double> out;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const double lo = parse_real("R", text.substr(0, dots)), hi = parse_real("R", text.substr(dots + 2));
        if (!(hi >= lo)) throw usage_error("config key 'R': empty range " + text);
        const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
        for (int i = 0; i <= n; ++i) out.push_back(lo + i * step);
    } else {
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_real("R", item));
    }
    if (out.empty()) throw usage_error("config key 'R': no radius given");
    for (double R : out)
        if (!(R > 0 && R <= 20)) throw usage_error("config key 'R': radii must lie in (0, 20]");
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

class Config {
public:
    Config() {
        for (const auto& k : key_table()) values_[k.name] = k.fallback;
    }

    void set(const std::string& key, const std::string& value) {
        key_spec(key);
        values_[key] = trim(value);
    }

    // `key = value` lines; `#` starts a comment
    void merge_text(const std::string& text, const std::string& origin = "config") {
        std::istringstream in(text);
        std::string line;
        int no = 0;
        while (std::getline(in, line)) {
            ++no;
            line = trim(line.substr(0, line.find('#')));
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw usage_error(origin + ":" + std::to_string(no) + ": expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            try {
                set(key, line.substr(eq + 1));
            } catch (const usage_error& e) {
                throw usage_error(origin + ":" + std::to_string(no) + ": " + e.what());
            }
        }
    }

    void merge_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw usage_error("cannot read config file '" + path + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        merge_text(ss.str(), path);
    }

    void validate() const {
        for (const auto& k : key_table()) {
            const std::string& v = values_.at(k.name);
            switch (k.kind) {
                case Kind::real: {
                    const double x = parse_real(k.name, v);
                    if (!(x >= k.lo && x <= k.hi))
                        throw usage_error("config key '" + k.name + "' = " + v + " outside [" + fmt(k.lo) + ", " +
                                          fmt(k.hi) + "]");
                    break;
                }
                case Kind::integer: {
                    const double x = parse_real(k.name, v);
                    if (x != std::floor(x) || !(x >= k.lo && x <= k.hi))
                        throw usage_error("config key '" + k.name + "' = " + v + " must be an integer in [" +
                                          fmt(k.lo) + ", " + fmt(k.hi) + "]");
                    break;
                }
                case Kind::unsigned64:
                    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos || v.size() > 19)
                        throw usage_error("config key '" + k.name + "' = " + v + " is not an unsigned integer");
                    break;
                case Kind::choice: {
                    const auto& ch = k.name == "map" ? catalog_names() : k.choices;
                    if (std::find(ch.begin(), ch.end(), v) == ch.end())
                        throw usage_error("config key '" + k.name + "' = " + v + " is not one of the allowed values");
                    break;
                }
                case Kind::radii:
                    parse_radii(v, real("R_step"));
                    break;
                case Kind::text:
                    break;
            }
        }
        if (integer("n_theta") % 2) throw usage_error("config key 'n_theta' must be even");
        if (integer("bins") & (integer("bins") - 1)) throw usage_error("config key 'bins' must be a power of two");
        if (real("b") < real("a")) throw usage_error("config keys: need a <= b");
    }

    const std::string& text(const std::string& key) const {
        key_spec(key);
        return values_.at(key);
    }
    double real(const std::string& key) const { return parse_real(key, text(key)); }
    int integer(const std::string& key) const { return static_cast<int>(real(key)); }
    std::uint64_t seed() const { return std::stoull(text("seed")); }
    std::vector<double> radii() const { return parse_radii(text("R"), real("R_step")); }
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------- experiments

inline Phi1Table read_phi1_table(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw usage_error("cannot read phi1 table '" + path + "'");
    Phi1Table tab;
    std::string line;
    while (std::getline(f, line)) {
        line = trim(line.substr(0, line.find('#')));
        if (line.empty() || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw usage_error("phi1 table rows must be 't,phi'");
        tab.t.push_back(parse_real("phi1_table", trim(line.substr(0, comma))));
        tab.phi.push_back(parse_real("phi1_table", trim(line.substr(comma + 1))));
    }
    tab.validate();
    return tab;
}

inline MapSpec config_map(const Config& cfg) {
    const std::string name = cfg.text("map");
    if (name == "spiral_embedding" && !cfg.text("phi1_table").empty())
        return build_coarse_embedding(read_phi1_table(cfg.text("phi1_table"))).map;
    return make_catalog_map(name, {{"su", cfg.real("su")},
                                   {"sv", cfg.real("sv")},
                                   {"a", cfg.real("map_a")},
                                   {"beta", cfg.real("beta")},
                                   {"plateau", cfg.real("plateau")},
                                   {"t_max", cfg.real("t_max")}});
}

inline SolveOptions config_solve(const Config& cfg) {
    SolveOptions o;
    o.tol = cfg.real("tol");
    o.max_iter = cfg.integer("max_iter");
    return o;
}

inline std::shared_ptr<const Mesh> config_mesh(const Config& cfg, const ModelSpace& X, double R) {
    const int n_r = cfg.integer("n_r") > 0 ? cfg.integer("n_r") : std::max(8, static_cast<int>(std::lround(4 * R)));
    return build_polar_mesh(X, R, n_r, cfg.integer("n_theta"), cfg.real("max_arc"));
}

inline ExperimentRecord run_solve(const Config& cfg, std::ostream& out) {
    ExperimentRecord rec;
    rec.name = "solve";
    const MapSpec f = config_map(cfg);
    const auto radii = cfg.radii();
    if (radii.size() != 1) throw usage_error("solve takes a single radius R");
    const auto mesh = config_mesh(cfg, f.source, radii[0]);
    const InitKind init = cfg.text("init") == "constant" ? InitKind::constant : InitKind::boundary_map;
    const SolveResult res = solve_dirichlet(f, mesh, config_solve(cfg), init);
    const auto sd = sup_distance(res.map, f);
    rec.csv_header = "node,s,boundary,x_u,x_v,h_u,h_v,d_hf";
    for (int i = 0; i < mesh->size(); ++i) {
        const Point& x = mesh->nodes[i];
        const Point& y = res.map.values[i];
        rec.csv_rows.push_back(std::to_string(i) + "," + fmt(mesh->s[i]) + "," + (mesh->boundary[i] ? "1" : "0") + "," +
                               fmt(x[0]) + "," + fmt(x[1]) + "," + fmt(y[0]) + "," + fmt(y[1]) + "," +
                               fmt(dist(res.map.target, y, eval_map(f, x))));
    }
    rec.check("solver converged (tension residual sup)", res.tension_residual_sup, cfg.real("tol"), res.converged);
    const auto be = boundary_estimate_check(res.map, f, cfg.integer("k"), cfg.real("a"), cfg.real("b"), cfg.real("c"));
    rec.check("boundary estimate d(h, f) <= 3kbc^2/a d(x, boundary) + 1e-3", be.max_excess, 1e-3, be.pass());
    out << "map " << f.name << "  R " << radii[0] << "  nodes " << mesh->size() << "  iterations " << res.iterations
        << "\nrho = sup d(h_R, f) = " << fmt(sd.rho) << " at node " << sd.node << "\nenergy " << fmt(res.energy) << '\n';
    return rec;
}

inline ExperimentRecord run_rho_scan(const Config& cfg, std::ostream& out) {
    ExperimentRecord rec;
    rec.name = "rho_scan";
    const MapSpec f = config_map(cfg);
    RhoScanOptions o;
    o.R_list = cfg.radii();
    o.n_theta = cfg.integer("n_theta");
    o.max_arc = cfg.real("max_arc");
    o.solve = config_solve(cfg);
    RhoScan scan;
    if (cfg.integer("n_r") > 0) {
        // fixed ring count for every radius
        for (double R : o.R_list) {
            RhoScanOptions one = o;
            one.R_list = {R};
            one.rings_per_unit = cfg.integer("n_r") / R;
            RhoScan s = rho_scan(f, one);
            scan.points.push_back(s.points[0]);
        }
    } else {
        scan = rho_scan(f, o);
    }
    rec.csv_header = "R,rho,converged,residual,iterations,nodes";
    for (const auto& p : scan.points) {
        rec.csv_rows.push_back(fmt(p.R) + "," + fmt(p.rho) + "," + (p.converged ? "1" : "0") + "," + fmt(p.residual) +
                               "," + std::to_string(p.iterations) + "," + std::to_string(p.nodes));
        out << "R " << p.R << "  rho " << fmt(p.rho) << (p.converged ? "" : "  (not converged: " + p.failure + ")") << '\n';
    }
    rec.check("all solves converged", scan.all_converged(), 1, scan.all_converged());
    out << "plateau max/min " << fmt(scan.plateau()) << "  last half " << fmt(scan.plateau_last_half()) << '\n';
    const std::string expect = cfg.text("expect");
    if (expect == "plateau")
        rec.check("plateau max/min of rho", scan.plateau(), cfg.real("plateau_max"), scan.plateau() <= cfg.real("plateau_max"));
    if (expect == "growth") {
        const double g = scan.points.back().rho / scan.points.front().rho;
        rec.check("rho monotone in R", scan.monotone(), 1, scan.monotone());
        rec.check("rho(R_max)/rho(R_min)", g, cfg.real("growth_min"), g >= cfg.real("growth_min"));
    }
    return rec;
}

inline ExperimentRecord run_smooth(const Config& cfg, std::ostream& out) {
    ExperimentRecord rec;
    rec.name = "smooth";
    SmoothOptions o;
    o.r = cfg.real("smooth_r");
    o.safety = cfg.real("smooth_safety");
    o.node_spacing = cfg.real("node_spacing");
    o.seed = cfg.seed();
    const SmoothResult res = smooth_pipeline(config_map(cfg), o);
    const SmoothReport& rep = res.report;
    rec.csv_header = "node_id,d_offset,fd_Df,fd_D2f";
    for (const auto& row : rep.rows)
        rec.csv_rows.push_back(std::to_string(row.node_id) + "," + fmt(row.offset) + "," + fmt(row.d1) + "," + fmt(row.d2));
    rec.check("net covers the region", rep.covered, 1, rep.covered);
    rec.check("colour classes within the packing bound", rep.class_count, static_cast<double>(rep.class_bound),
              rep.class_count <= rep.class_bound);
    rec.check("Lipschitz constant of the mollified map", rep.lip_mollified, rep.lip_bound_mollified,
              rep.lip_mollified <= rep.lip_bound_mollified);
    out << "radius " << fmt(rep.r) << "  net " << rep.net_size << "  classes " << rep.class_count << "\nmax offset "
        << fmt(rep.max_offset) << "  max |Df| " << fmt(rep.max_d1) << "  max |D2f| " << fmt(rep.max_d2) << "  M_r "
        << fmt(rep.M_r) << '\n';
    return rec;
}

inline ExperimentRecord run_boundary_map(const Config& cfg, std::ostream& out) {
    ExperimentRecord rec;
    rec.name = "boundary_map";
    const MapSpec f = config_map(cfg);
    const Point x0{cfg.real("x0_u"), cfg.real("x0_v"), 0.0};
    const int n = cfg.integer("directions"), n_max = cfg.integer("n_max"), n0 = cfg.integer("n0");
    if (n0 > n_max) throw usage_error("boundary-map: n0 must not exceed n_max");
    std::vector<ProbeRow> rows(n);
    detail::parallel_for(n, cfg.integer("threads"), [&](int i) {
        RayProbe p = probe_ray(f, x0, 2 * pi * i / n, n_max, n0, cfg.real("alpha"));
        rows[i] = probe_row(p, cfg.real("a"), cfg.real("c"));
    });
    rec.csv_header = "angle,speed_hat,inA,boundary_angle";
    int in_A = 0, located = 0;
    for (const auto& r : rows) {
        rec.csv_rows.push_back(fmt(r.angle) + "," + fmt(r.speed_hat) + "," + (r.in_A ? "1" : "0") + "," +
                               fmt(r.boundary_angle));
        in_A += r.in_A;
        located += !std::isnan(r.boundary_angle);
    }
    rec.check("directions probed", n, n, true);
    out << n << " directions, " << in_A << " in A(x0, alpha, n0), boundary point located on " << located << '\n';
    return rec;
}

inline ExperimentRecord run_frostman(const Config& cfg, std::ostream& out) {
    ExperimentRecord rec;
    rec.name = "frostman";
    const ModelSpace X = make_space(parse_model(cfg.text("model")), cfg.real("a"));
    const Point x = origin(X);
    Tangent dir{std::cos(cfg.real("probe_angle")), std::sin(cfg.real("probe_angle")), 0.0};
    dir = dir / metric_norm(X, x, dir);
    const double pd = cfg.real("probe_dist"), r = cfg.real("sphere_r");
    if (!(pd < r)) throw usage_error("frostman: probe_dist must be smaller than sphere_r");
    const Point probe = pd > 0 ? exp_map(X, x, dir, pd) : x;
    HarmonicOptions ho;
    ho.bins = cfg.integer("bins");
    ho.threads = cfg.integer("threads");
    const auto e = harmonic_measure_mc(X, x, r, probe, cfg.integer("walkers"), cfg.seed(), ho);
    const FrostmanEstimate fr = frostman_fit(e);
    rec.csv_header = "bin,mass";
    for (int b = 0; b < e.bins; ++b) rec.csv_rows.push_back(std::to_string(b) + "," + fmt(e.hist[b]));
    double worst_lo = 0.0, worst_hi = 0.0;
    for (std::size_t j = 0; j < fr.thetas.size(); ++j) {
        worst_lo = std::max(worst_lo, std::pow(fr.thetas[j], fr.N) / fr.M - fr.lower[j]);
        worst_hi = std::max(worst_hi, fr.upper[j] - fr.M * std::pow(fr.thetas[j], 1 / fr.N));
    }
    rec.check("cone mass >= theta^N / M", worst_lo, 1e-12, worst_lo <= 1e-12);
    rec.check("cone mass <= M theta^(1/N)", worst_hi, 1e-12, worst_hi <= 1e-12);
    if (X.dim() == 2 && pd == 0.0) {
        const double chi2 = chi_square(e, std::vector<double>(e.bins, 1.0 / e.bins));
        const double bound = (e.bins - 1) + 3 * std::sqrt(2.0 * (e.bins - 1));
        rec.check("chi^2 of the centre measure vs uniform", chi2, bound, chi2 < bound);
    }
    out << "Frostman fit M = " << fmt(fr.M) << "  N = " << fmt(fr.N) << (e.approximate ? "  (approximate walk)" : "")
        << '\n';
    return rec;
}

inline ExperimentRecord run_counterexample(const Config& cfg, std::ostream& out) {
    CounterexampleOptions o;
    o.seed = cfg.seed();
    o.scan.R_list = cfg.radii();
    o.scan.n_theta = cfg.integer("n_theta");
    o.scan.max_arc = cfg.real("max_arc");
    o.scan.solve = config_solve(cfg);
    if (o.scan.R_list.size() < 2) throw usage_error("counterexample needs at least two radii");
    ExperimentRecord rec = counterexample_lab(o);
    for (const auto& c : rec.checks)
        out << (c.pass ? "ok     " : "FAILED ") << c.name << ": " << fmt(c.value) << " vs " << fmt(c.bound) << '\n';
    return rec;
}

inline ExperimentRecord run_constants(const Config& cfg, std::ostream& out) {
    ExperimentRecord rec;
    rec.name = "constants";
    ConstantInputs in;
    in.a = cfg.real("a");
    in.b = cfg.real("b");
    in.c = cfg.real("c");
    in.C = cfg.real("C");
    in.k = cfg.integer("k");
    in.k_target = cfg.integer("k_target");
    in.A = cfg.real("A");
    in.M = cfg.real("M");
    in.N = cfg.real("N");
    in.C1 = cfg.real("C1");
    in.C2 = cfg.real("C2");
    const PaperConstants P = compute_constants(in);
    const std::vector<std::pair<std::string, double>> rows = {
        {"eps0", P.qi.eps0},
        {"theta0", P.qi.theta0},
        {"ell0", static_cast<double>(P.qi.ell0)},
        {"rho1", P.qi.rho1},
        {"rho2", P.qi.rho2},
        {"log_rho3", P.qi.log_rho3},
        {"N0", P.N0},
        {"coarse_alpha", P.coarse.alpha},
        {"coarse_nu_alpha", P.coarse.nu_alpha},
        {"coarse_nu", P.coarse.nu},
        {"coarse_beta", P.coarse.beta},
        {"coarse_C3", P.coarse.C3},
        {"coarse_C4", P.coarse.C4},
        {"coarse_n0", static_cast<double>(P.coarse.n0)},
        {"coarse_log_theta0", P.coarse.log_theta0},
        {"coarse_ell0", static_cast<double>(P.coarse.ell0)},
        {"coarse_rho1", P.coarse.rho1},
        {"coarse_rho2", P.coarse.rho2},
        {"coarse_log_rho3", P.coarse.log_rho3},
    };
    rec.csv_header = "name,value";
    for (const auto& [k, v] : rows) {
        rec.csv_rows.push_back(k + "," + fmt(v));
        out << k << " = " << fmt(v) << '\n';
    }
    return rec;
}

inline std::vector<int> parse_criteria(const std::string& text) {
    std::vector<int> ids;
    if (text == "all") {
        for (int i = 1; i <= 11; ++i) ids.push_back(i);
        return ids;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const double v = parse_real("criteria", trim(item));
        if (v != std::floor(v) || v < 1 || v > 11) throw usage_error("config key 'criteria': ids run from 1 to 11");
        ids.push_back(static_cast<int>(v));
    }
    if (ids.empty()) throw usage_error("config key 'criteria': empty list");
    return ids;
}

inline ExperimentRecord run_verify(const Config& cfg, std::ostream& out) {
    ExperimentRecord rec;
    rec.name = "verify";
    VerifyOptions vo;
    vo.seed = cfg.seed();
    vo.threads = cfg.integer("threads");
    const auto ids = parse_criteria(cfg.text("criteria"));
    rec.csv_header = "criterion,title,pass,seconds";
    for (const auto& spec : acceptance_criteria()) {
        if (std::find(ids.begin(), ids.end(), spec.id) == ids.end()) continue;
        const CriterionResult r = run_criterion(spec, vo);
        out << (r.pass() ? "PASS" : "FAIL") << " criterion " << r.id << ": " << r.title << '\n';
        if (!r.error.empty()) out << "    error: " << r.error << '\n';
        for (const auto& c : r.record.checks) {
            rec.check("criterion " + std::to_string(r.id) + ": " + c.name, c.value, c.bound, c.pass);
            if (!c.pass) out << "    failed: " << c.name << " (" << fmt(c.value) << " vs " << fmt(c.bound) << ")\n";
        }
        if (!r.error.empty()) rec.check("criterion " + std::to_string(r.id) + " ran", 0, 1, false);
        rec.csv_rows.push_back(std::to_string(r.id) + ",\"" + r.title + "\"," + (r.pass() ? "1" : "0") + "," + fmt(r.seconds));
    }
    return rec;
}

// ---------------------------------------------------------------- dispatch

struct Subcommand {
    const char* name;
    const char* help;
    std::vector<std::string> keys;
    ExperimentRecord (*run)(const Config&, std::ostream&);
    std::map<std::string, std::string> defaults = {};  // overrides of the global defaults
};

inline const std::vector<Subcommand>& subcommands() {
    static const std::vector<std::string> map_keys = {"map", "su", "sv", "map_a", "beta", "plateau", "t_max", "phi1_table"};
    static const std::vector<std::string> mesh_keys = {"R", "R_step", "n_r", "n_theta", "max_arc", "tol", "max_iter"};
    const auto join = [](std::initializer_list<std::vector<std::string>> parts) {
        std::vector<std::string> out;
        for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
        return out;
    };
    static const std::vector<Subcommand> subs = {
        {"solve", "solve the Dirichlet problem for one radius and write the nodal solution",
         join({map_keys, mesh_keys, {"init", "a", "b", "c", "k"}}), run_solve},
        {"rho-scan", "rho(R) = sup d(h_R, f) over a list of radii",
         join({map_keys, mesh_keys, {"expect", "plateau_max", "growth_min"}}), run_rho_scan},
        {"smooth", "smooth a rough map and report derivative bounds",
         join({map_keys, {"smooth_r", "smooth_safety", "node_spacing"}}), run_smooth},
        {"boundary-map", "probe rays from x0: speed, exceptional sets, boundary points",
         join({map_keys, {"x0_u", "x0_v", "directions", "n_max", "n0", "alpha", "a", "c"}}), run_boundary_map},
        {"frostman", "harmonic measure of a sphere and its Frostman constants",
         {"model", "a", "sphere_r", "probe_dist", "probe_angle", "walkers", "bins"}, run_frostman},
        {"counterexample", "the parabolic map (u, v + v^2): ODE, residual order, rho growth, f_beta limits",
         {"R", "R_step", "n_theta", "max_arc", "tol", "max_iter"}, run_counterexample, {{"R", "4..8"}}},
        {"constants", "explicit constants eps0, theta0, ell0, rho thresholds (quasi-isometric and coarse cases)",
         {"a", "b", "c", "C", "k", "k_target", "A", "M", "N", "C1", "C2"}, run_constants},
        {"verify", "run the acceptance battery", {"criteria"}, run_verify},
    };
    return subs;
}

inline std::string catalog_help() {
    return "Maps (all on the unit upper half-plane):\n"
           "  identity                       (u,v) -> (u,v)\n"
           "  scale            su, sv        (u,v) -> (su u, sv v)\n"
           "  parabolic_sq                   (u,v) -> (u, v + v^2)\n"
           "  sinh_family      map_a         (u,v) -> (u, sinh(a v)/a)\n"
           "  f_beta           beta          (u,v) -> (u/(1+beta), (v + beta v^2)/(1+beta)); beta = inf gives (0, v^2)\n"
           "  constant                       (u,v) -> (0, 1)\n"
           "  spiral_embedding plateau, t_max, phi1_table\n"
           "                                 coarse embedding built from phi1 = min(t, plateau) or a t,phi CSV table\n"
           "Config files hold 'key = value' lines with '#' comments; flags override the file.\n"
           "Exit codes: 0 all assertions hold, 1 assertion failure, 2 usage error, 3 numeric error.\n"
           "HH_OUTPUT_DIR overrides output_dir.\n";
}

inline void write_outputs(const ExperimentRecord& rec, const std::string& dir, std::ostream& out) {
    std::filesystem::create_directories(dir);
    const std::string base = (std::filesystem::path(dir) / rec.name).string();
    {
        std::ofstream csv(base + ".csv");
        write_record_csv(csv, rec);
        if (!csv) throw usage_error("cannot write " + base + ".csv");
    }
    std::ofstream js(base + ".jsonl");
    write_jsonl(js, rec);
    out << "wrote " << base << ".csv and " << base << ".jsonl\n";
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Harmonic maps between hyperbolic spaces: numerical experiments", "hhmap"};
    app.require_subcommand(1);
    app.footer(catalog_help());
    std::map<std::string, std::map<std::string, std::string>> flag_values;
    std::map<std::string, std::string> config_paths;
    std::vector<std::pair<CLI::App*, const Subcommand*>> subs;
    for (const auto& sc : subcommands()) {
        CLI::App* sub = app.add_subcommand(sc.name, sc.help);
        sub->add_option("--config", config_paths[sc.name], "key = value config file");
        std::vector<std::string> keys = sc.keys;
        for (const char* common : {"seed", "threads", "output_dir"}) keys.push_back(common);
        for (const auto& key : keys) {
            const KeySpec& k = key_spec(key);
            const auto over = sc.defaults.find(key);
            sub->add_option("--" + key, flag_values[sc.name][key], k.help)
                ->default_str(over == sc.defaults.end() ? k.fallback : over->second);
        }
        subs.push_back({sub, &sc});
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    try {
        for (const auto& [sub, sc] : subs) {
            if (!sub->parsed()) continue;
            Config cfg;
            for (const auto& [key, value] : sc->defaults) cfg.set(key, value);
            if (!config_paths[sc->name].empty()) cfg.merge_file(config_paths[sc->name]);
            for (const auto& [key, value] : flag_values[sc->name])
                if (sub->get_option("--" + key)->count() > 0) cfg.set(key, value);
            if (const char* env = std::getenv("HH_OUTPUT_DIR"); env && *env) cfg.set("output_dir", env);
            cfg.validate();
            ExperimentRecord rec = sc->run(cfg, out);
            rec.config = cfg.values();
            // run plumbing does not change results and stays out of the config hash
            rec.config.erase("threads");
            rec.config.erase("output_dir");
            rec.seed = cfg.seed();
            write_outputs(rec, cfg.text("output_dir"), out);
            const bool pass = rec.pass();
            for (const auto& c : rec.checks)
                if (!c.pass) err << "assertion failed: " << c.name << " (value " << fmt(c.value) << ", bound " << fmt(c.bound) << ")\n";
            out << (pass ? "all assertions hold" : "assertion failure") << '\n';
            return pass ? 0 : 1;
        }
    } catch (const usage_error& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const range_error& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const numeric_error& e) {
        err << "numeric error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}

}  // namespace hhmap::cli
