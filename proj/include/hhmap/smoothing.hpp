#pragma once

// Smoothing of rough Lipschitz maps: barycentric mollification followed by
// iterated local flattening in almost-linear charts of the target.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <vector>

#include "hhmap/maps.hpp"

namespace hhmap {

// ---------------------------------------------------------------- cutoff

// Quintic smoothstep cutoff: 1 on [-1/2, 1/2], 0 outside (-1, 1).
struct Cutoff {
    static constexpr double plateau = 0.5;
    static constexpr double support = 1.0;

    double operator()(double t) const {
        const double u = (std::abs(t) - plateau) / (support - plateau);
        if (u <= 0.0) return 1.0;
        if (u >= 1.0) return 0.0;
        return 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
    }
    double derivative(double t) const {
        const double u = (std::abs(t) - plateau) / (support - plateau);
        if (u <= 0.0 || u >= 1.0) return 0.0;
        const double d = -30.0 * u * u * (1.0 - u) * (1.0 - u) / (support - plateau);
        return t < 0 ? -d : d;
    }
    double second_derivative(double t) const {
        const double u = (std::abs(t) - plateau) / (support - plateau);
        if (u <= 0.0 || u >= 1.0) return 0.0;
        return -60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / sqr(support - plateau);
    }
    // attained at u = 1/2
    static constexpr double max_derivative = 15.0 / 8.0 / (support - plateau);
};

// ---------------------------------------------------------------- barycenters

struct WeightedPoint {
    Point y;
    double w;
};

inline double total_mass(const std::vector<WeightedPoint>& mu) {
    double m = 0.0;
    for (const auto& a : mu) m += a.w;
    return m;
}

// Q_mu(y) = sum w d(y, z)^2
inline double q_functional(const ModelSpace& Y, const std::vector<WeightedPoint>& mu, const Point& y) {
    double q = 0.0;
    for (const auto& a : mu) q += a.w * sqr(dist(Y, y, a.y));
    return q;
}

struct KarcherOptions {
    double tol = 1e-10;
    int max_iter = 200;
};

struct KarcherResult {
    Point y;
    int iterations = 0;
    double grad_norm = 0.0;  // |grad Q_mu| in the metric
};

inline KarcherResult karcher_mean(const ModelSpace& Y, const std::vector<WeightedPoint>& mu, const Point& init,
                                  const KarcherOptions& opt = {}) {
    if (mu.empty()) throw usage_error("center_of_mass: empty measure");
    const double m = total_mass(mu);
    if (!(m > 0.0)) throw usage_error("center_of_mass: total mass must be positive");
    KarcherResult r{init, 0, 0.0};
    for (r.iterations = 1; r.iterations <= opt.max_iter; ++r.iterations) {
        Tangent s{0.0, 0.0, 0.0};
        double hbar = 0.0;  // upper bound for the Hessian of Q_mu / 2m
        for (const auto& a : mu) {
            const Tangent l = log_map(Y, r.y, a.y);
            const double ad = Y.a * metric_norm(Y, r.y, l);
            s = s + a.w * l;
            hbar += a.w * (ad < 1e-8 ? 1.0 : ad / std::tanh(ad));
        }
        s = s / m;
        hbar /= m;
        const double step = metric_norm(Y, r.y, s);
        r.grad_norm = 2.0 * m * step;
        // optimal fixed step for Hessian spectrum in [1, hbar]
        r.y = exp_map(Y, r.y, s, 2.0 / (1.0 + hbar));
        if (!contains(Y, r.y)) throw numeric_error("center_of_mass: iterate left the model");
        if (step < 0.5 * opt.tol) return r;
    }
    throw numeric_error("center_of_mass: no convergence after " + std::to_string(opt.max_iter) +
                        " iterations, gradient norm " + std::to_string(r.grad_norm));
}

inline Point center_of_mass(const ModelSpace& Y, const std::vector<WeightedPoint>& mu,
                            const KarcherOptions& opt = {}) {
    if (mu.empty()) throw usage_error("center_of_mass: empty measure");
    const auto heaviest = std::max_element(mu.begin(), mu.end(), [](auto& p, auto& q) { return p.w < q.w; });
    return karcher_mean(Y, mu, heaviest->y, opt).y;
}

// ---------------------------------------------------------------- local measures

namespace detail {

// Gauss-Legendre nodes and weights on [-1, 1].
inline std::vector<std::pair<double, double>> gauss_legendre(int n) {
    std::vector<std::pair<double, double>> out(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        out[i] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
    }
    return out;
}

// Orthonormal frame of T_p X in model coordinates.
inline std::vector<Tangent> orthonormal_frame(const ModelSpace& X, const Point& p) {
    const double l = conformal_factor(X, p);
    std::vector<Tangent> e;
    for (int i = 0; i < X.dim(); ++i) {
        Tangent v{0.0, 0.0, 0.0};
        v[i] = 1.0 / l;
        e.push_back(v);
    }
    return e;
}

}  // namespace detail

struct QuadratureNode {
    double r;       // geodesic radius
    double theta;   // polar angle
    double weight;  // chi(r) times the volume element
};

// Geodesic polar quadrature of chi(d(x, .)) dvol on B(x, 1) for a surface:
// Gauss-Legendre on [0, 1/2] and [1/2, 1] (n_r/2 each), uniform in angle.
inline std::vector<QuadratureNode> local_quadrature(const ModelSpace& X, int n_r = 16, int n_theta = 32) {
    if (X.dim() != 2) throw usage_error("local_quadrature: source must be a surface");
    if (n_r < 2 || n_r % 2 || n_theta < 4) throw usage_error("local_quadrature: bad grid size");
    const Cutoff chi;
    const auto gl = detail::gauss_legendre(n_r / 2);
    std::vector<QuadratureNode> q;
    for (int half = 0; half < 2; ++half) {
        const double lo = 0.5 * half, hi = lo + 0.5;
        for (const auto& [t, w] : gl) {
            const double r = lo + (hi - lo) * (t + 1.0) / 2.0;
            const double wr = w * (hi - lo) / 2.0 * chi(r) * std::sinh(X.a * r) / X.a;
            if (wr == 0.0) continue;
            for (int j = 0; j < n_theta; ++j) q.push_back({r, 2.0 * pi * j / n_theta, wr * 2.0 * pi / n_theta});
        }
    }
    return q;
}

// Bishop bounds for the local measure mass.
inline double mass_lower(const ModelSpace& X) { return ball_volume(X, 0.5); }
inline double mass_upper(const ModelSpace& X) { return ball_volume(X, 1.0); }

// mu_x = f_* (chi(d(x, .)) dvol) as weighted atoms.
inline std::vector<WeightedPoint> local_measure(const MapSpec& f, const Point& x,
                                                const std::vector<QuadratureNode>& quad) {
    const auto e = detail::orthonormal_frame(f.source, x);
    std::vector<WeightedPoint> mu;
    mu.reserve(quad.size());
    for (const auto& q : quad) {
        const Tangent v = q.r * (std::cos(q.theta) * e[0] + std::sin(q.theta) * e[1]);
        mu.push_back({eval_map(f, exp_map(f.source, x, v)), q.weight});
    }
    return mu;
}

// f~(x) = center of mass of mu_x.
inline MapSpec mollify(const MapSpec& f, int n_r = 16, int n_theta = 32, const KarcherOptions& opt = {}) {
    auto quad = std::make_shared<const std::vector<QuadratureNode>>(local_quadrature(f.source, n_r, n_theta));
    double mass = 0.0;
    for (const auto& q : *quad) mass += q.weight;
    if (mass < 0.5 * mass_lower(f.source)) throw numeric_error("mollify: quadrature mass underflow");
    MapSpec g = f;
    g.kind = "sampled";
    g.name = "mollified_" + f.name;
    g.fn = [f, quad, opt](const Point& x) {
        const auto mu = local_measure(f, x, *quad);
        return karcher_mean(f.target, mu, eval_map(f, x), opt).y;
    };
    return g;
}

// Lipschitz bound 16 (2c + C) M0 / m0 for the mollified map.
inline double mollified_lipschitz_bound(const ModelSpace& X, double c, double C) {
    return 16.0 * (2.0 * c + C) * mass_upper(X) / mass_lower(X);
}

// ---------------------------------------------------------------- separated nets

// Greedy maximal sep-separated subset, in input order.
inline std::vector<int> separated_subset(const ModelSpace& X, const std::vector<Point>& pts,
                                         const std::vector<int>& candidates, double sep) {
    std::vector<int> kept;
    for (int i : candidates) {
        bool ok = true;
        for (int j : kept)
            if (dist(X, pts[i], pts[j]) < sep) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(i);
    }
    return kept;
}

struct NetPartition {
    std::vector<int> net;                   // maximal r/2-separated subset of the nodes
    std::vector<std::vector<int>> classes;  // 2r-separated, partition of net
    long long bound = 0;                    // N0 = 100^k
};

inline NetPartition greedy_separated_nets(const ModelSpace& X, const std::vector<Point>& nodes, double r) {
    if (!(r > 0)) throw usage_error("greedy_separated_nets: radius must be positive");
    NetPartition p;
    std::vector<int> all(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i) all[i] = static_cast<int>(i);
    p.net = separated_subset(X, nodes, all, 0.5 * r);
    p.bound = 1;
    for (int i = 0; i < X.dim(); ++i) p.bound *= 100;
    std::vector<int> rest = p.net;
    while (!rest.empty()) {
        auto cls = separated_subset(X, nodes, rest, 2.0 * r);
        std::vector<int> next;
        std::set_difference(rest.begin(), rest.end(), cls.begin(), cls.end(), std::back_inserter(next));
        p.classes.push_back(std::move(cls));
        rest = std::move(next);
    }
    return p;
}

// Geodesic polar grid of B(centre, R) with spacing about h.
inline std::vector<Point> ball_nodes(const ModelSpace& X, const Point& centre, double R, double h) {
    if (X.dim() != 2) throw usage_error("ball_nodes: source must be a surface");
    const auto e = detail::orthonormal_frame(X, centre);
    std::vector<Point> out{centre};
    const int n_r = std::max(1, static_cast<int>(std::ceil(R / h)));
    for (int i = 1; i <= n_r; ++i) {
        const double s = R * i / n_r;
        const int n_t = std::max(6, static_cast<int>(std::ceil(2 * pi * std::sinh(X.a * s) / X.a / h)));
        for (int j = 0; j < n_t; ++j) {
            const double th = 2 * pi * (j + 0.5 * (i % 2)) / n_t;
            out.push_back(exp_map(X, centre, s * (std::cos(th) * e[0] + std::sin(th) * e[1])));
        }
    }
    return out;
}

// ---------------------------------------------------------------- almost-linear charts

// Phi_y(z) = (d(z, y_i) - 1)_i with y_i = exp_y(-e_i).
class AlmostLinearChart {
public:
    AlmostLinearChart(const ModelSpace& Y, const Point& y) : Y_(Y), y_(y), e_(detail::orthonormal_frame(Y, y)) {
        for (const auto& e : e_) anchors_.push_back(exp_map(Y, y, -1.0 * e));
    }

    const Point& centre() const { return y_; }
    int dim() const { return Y_.dim(); }

    Vec forward(const Point& z) const {
        Vec u{0.0, 0.0, 0.0};
        for (int i = 0; i < dim(); ++i) u[i] = dist(Y_, z, anchors_[i]) - 1.0;
        return u;
    }

    // Rows: metric-orthonormal components of grad d(., y_i) at z.
    Eigen::MatrixXd jacobian_orthonormal(const Point& z) const {
        const int k = dim();
        const double l = conformal_factor(Y_, z);
        Eigen::MatrixXd J(k, k);
        for (int i = 0; i < k; ++i) {
            const Tangent g = log_map(Y_, z, anchors_[i]);
            const double n = metric_norm(Y_, z, g);
            for (int j = 0; j < k; ++j) J(i, j) = -l * g[j] / n;
        }
        return J;
    }

    Point inverse(const Vec& u) const {
        const int k = dim();
        Tangent v{0.0, 0.0, 0.0};
        for (int i = 0; i < k; ++i) v = v + u[i] * e_[i];
        Point z = exp_map(Y_, y_, v);
        for (int it = 0; it < 50; ++it) {
            const Vec F = forward(z);
            Eigen::VectorXd res(k);
            for (int i = 0; i < k; ++i) res(i) = u[i] - F[i];
            if (res.lpNorm<Eigen::Infinity>() < 1e-14) return z;
            // coordinate Jacobian is lambda times the orthonormal one
            const Eigen::VectorXd d = jacobian_orthonormal(z).partialPivLu().solve(res) / conformal_factor(Y_, z);
            Point zn = z;
            for (int i = 0; i < k; ++i) zn[i] += d(i);
            if (!contains(Y_, zn)) throw numeric_error("chart inverse: Newton step left the model");
            z = zn;
        }
        if (norm(forward(z) - u) < 1e-10) return z;
        throw numeric_error("chart inverse: Newton did not converge");
    }

private:
    ModelSpace Y_;
    Point y_;
    std::vector<Tangent> e_;
    std::vector<Point> anchors_;
};

struct ChartConstants {
    double r0;
    double c0;
};

// c0 bounds |D Phi|, |D Phi^-1|, |D^2 Phi| and |D^2 Phi^-1| on B(y, r0), by
// sampling the singular values of D Phi; |D^2 d| <= a coth(a (1 - r0)).
inline ChartConstants chart_constants(const ModelSpace& Y, double r0 = 0.1, int samples = 2000,
                                      std::uint64_t seed = 17) {
    if (!(r0 > 0 && r0 < 1)) throw usage_error("chart_constants: r0 must lie in (0, 1)");
    const Point y = origin(Y);
    const AlmostLinearChart chart(Y, y);
    Rng rng(seed);
    double smax = 0.0, smin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        const double rad = r0 * std::pow(uniform01(rng), 1.0 / Y.dim());
        const Point z = exp_map(Y, y, random_unit(Y, y, rng), rad);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(chart.jacobian_orthonormal(z));
        smax = std::max(smax, svd.singularValues()(0));
        smin = std::min(smin, svd.singularValues()(Y.dim() - 1));
    }
    const double hess = Y.a / std::tanh(Y.a * (1.0 - r0)) * std::sqrt(static_cast<double>(Y.dim()));
    const double inv_hess = hess * std::pow(1.0 / smin, 3);
    return {r0, std::max({smax, 1.0 / smin, hess, inv_hess})};
}

// ---------------------------------------------------------------- local flattening

namespace detail {

// g_{r,x}(z) from the value g(z), with y = g(x) and its chart.
inline Point flatten_value(const ModelSpace& X, const Point& x, double r, const AlmostLinearChart& chart,
                           const Point& z, const Point& gz) {
    const double d = dist(X, z, x);
    if (d >= r) return gz;
    if (d <= 0.5 * r) return chart.centre();
    const double s = 1.0 - Cutoff{}(d / r);
    return chart.inverse(s * chart.forward(gz));
}

}  // namespace detail

// Sampled Lipschitz constant of g on B(x, r).
inline double local_lipschitz(const MapSpec& g, const Point& x, double r, int samples = 200, std::uint64_t seed = 3) {
    Rng rng(seed);
    double L = 0.0;
    for (int i = 0; i < samples; ++i) {
        const Point z = exp_map(g.source, x, random_unit(g.source, x, rng), r * std::sqrt(uniform01(rng)));
        const double h = uniform(rng, 0.02, 0.25) * r;
        const Point zp = exp_map(g.source, z, random_unit(g.source, z, rng), h);
        L = std::max(L, dist(g.target, eval_map(g, z), eval_map(g, zp)) / dist(g.source, z, zp));
    }
    return L;
}

inline MapSpec flatten_local(const MapSpec& g, const Point& x, double r, const ChartConstants& cc) {
    if (!(r > 0 && r < cc.r0)) throw usage_error("flatten_local: need 0 < r < r0");
    const double L = local_lipschitz(g, x, r);
    if (!(L < cc.r0 / (sqr(cc.c0) * r)))
        throw usage_error("flatten_local: Lipschitz constant " + std::to_string(L) + " violates Lip(g) < r0/(c0^2 r)");
    auto chart = std::make_shared<const AlmostLinearChart>(g.target, eval_map(g, x));
    MapSpec out = g;
    out.kind = "sampled";
    out.name = "flattened_" + g.name;
    const ModelSpace X = g.source;
    out.fn = [g, x, r, chart, X](const Point& z) {
        return dist(X, z, x) >= r ? eval_map(g, z) : detail::flatten_value(X, x, r, *chart, z, eval_map(g, z));
    };
    return out;
}

// ---------------------------------------------------------------- derivative estimates

struct Derivatives {
    double d1;  // operator norm of Dg
    double d2;  // norm of D^2 g over unit directions
};

// Central differences along source geodesics, read in normal coordinates at
// g(z). Needs g at the 9 points of stencil_points(z, h).
inline std::vector<Point> stencil_points(const ModelSpace& X, const Point& z, double h) {
    const auto e = detail::orthonormal_frame(X, z);
    const double s = 1.0 / std::sqrt(2.0);
    const std::vector<Tangent> dirs = {e[0], e[1], s * (e[0] + e[1]), s * (e[0] - e[1])};
    std::vector<Point> out{z};
    for (const auto& v : dirs) {
        out.push_back(exp_map(X, z, v, h));
        out.push_back(exp_map(X, z, v, -h));
    }
    return out;
}

inline Derivatives derivatives_from_stencil(const ModelSpace& Y, const std::vector<Point>& gv, double h) {
    const Point& y = gv[0];
    std::array<Tangent, 4> first{}, second{};
    for (int k = 0; k < 4; ++k) {
        const Tangent p = log_map(Y, y, gv[1 + 2 * k]);
        const Tangent m = log_map(Y, y, gv[2 + 2 * k]);
        first[k] = (p - m) / (2.0 * h);
        second[k] = (p + m) / (h * h);
    }
    const auto ip = [&](const Tangent& u, const Tangent& v) { return metric_inner(Y, y, u, v); };
    // Gram matrix of Dg(e1), Dg(e2)
    const double g11 = ip(first[0], first[0]), g22 = ip(first[1], first[1]), g12 = ip(first[0], first[1]);
    const double tr = g11 + g22, det = g11 * g22 - g12 * g12;
    const double d1 = std::sqrt(std::max(0.0, 0.5 * (tr + std::sqrt(std::max(0.0, tr * tr - 4 * det)))));
    const Tangent mixed = 0.5 * (second[2] - second[3]);
    const double d2 = std::sqrt(ip(second[0], second[0]) + ip(second[1], second[1]) + 2 * ip(mixed, mixed));
    return {d1, d2};
}

inline Derivatives fd_derivatives(const MapSpec& g, const Point& z, double h) {
    std::vector<Point> gv;
    for (const auto& p : stencil_points(g.source, z, h)) gv.push_back(eval_map(g, p));
    return derivatives_from_stencil(g.target, gv, h);
}

// ---------------------------------------------------------------- pipeline

struct SmoothOptions {
    double r = 0.0;  // flattening radius; 0 selects r0 / (c0^2 Lip(f~) safety)
    double safety = 16.0;
    // region, report disc, node spacing and FD step in units of r
    double region = 6.0;
    double report_radius = 3.0;
    double node_spacing = 0.2;
    double fd_step = 0.02;
    int lip_pairs = 400;
    double r0 = 0.1;  // chart radius
    int quad_r = 16;
    int quad_theta = 32;
    double karcher_tol = 1e-13;
    std::uint64_t seed = 1;
};

struct SmoothNodeRow {
    int node_id;
    Point x;
    double offset;  // d(f~(x), f(x))
    double d1;
    double d2;
};

struct SmoothReport {
    ChartConstants chart{};
    double r = 0.0;
    int net_size = 0;
    int class_count = 0;
    long long class_bound = 0;
    bool covered = false;                 // every node within r/2 of a net point
    double lip_mollified = 0.0;
    double lip_bound_mollified = 0.0;     // 16 (2c + C) M0 / m0 with c = sampled Lip(f), C = 0
    std::vector<double> lip_per_sweep;    // sampled Lip(f_i), i = 0..N
    double max_lip_growth = 0.0;          // max Lip(f_i) / Lip(f_{i-1})
    double M_r = 0.0;                     // fitted second-derivative constant
    double max_offset = 0.0;
    double max_d1 = 0.0;
    double max_d2 = 0.0;
    std::vector<SmoothNodeRow> rows;
};

struct SmoothResult {
    MapSpec map;
    SmoothReport report;
};

namespace detail {

struct FlattenClass {
    std::vector<Point> centres;
    std::vector<std::shared_ptr<const AlmostLinearChart>> charts;
};

inline Point apply_class(const ModelSpace& X, double r, const FlattenClass& cls, const Point& z, const Point& gz) {
    for (size_t c = 0; c < cls.centres.size(); ++c)
        if (dist(X, z, cls.centres[c]) < r) return flatten_value(X, cls.centres[c], r, *cls.charts[c], z, gz);
    return gz;
}

inline Point apply_class_chain(const ModelSpace& X, double r, const std::vector<FlattenClass>& classes,
                               const Point& z, Point gz) {
    for (const auto& cls : classes) gz = apply_class(X, r, cls, z, gz);
    return gz;
}

}  // namespace detail

inline SmoothResult smooth_pipeline(const MapSpec& f, const SmoothOptions& opt = {}) {
    const ModelSpace& X = f.source;
    const ModelSpace& Y = f.target;
    if (X.dim() != 2) throw usage_error("smooth_pipeline: source must be a surface");
    if (!(opt.r >= 0 && opt.safety >= 1 && opt.region > 1 && opt.report_radius > 0 && opt.node_spacing > 0 &&
          opt.fd_step > 0))
        throw usage_error("smooth_pipeline: bad options");
    SmoothResult res;
    SmoothReport& rep = res.report;
    rep.chart = chart_constants(Y, opt.r0);
    const double c0 = rep.chart.c0;

    const MapSpec f0 = mollify(f, opt.quad_r, opt.quad_theta, {opt.karcher_tol, 200});
    const Point o = origin(X);
    double r = opt.r;
    if (r == 0.0) {
        const double L = local_lipschitz(f0, o, 1.0, 200, opt.seed);
        r = rep.chart.r0 / (sqr(c0) * std::max(1.0, L) * opt.safety);
    }
    rep.r = r;
    const double fd = opt.fd_step * r, report_radius = opt.report_radius * r;
    const std::vector<Point> nodes = ball_nodes(X, o, opt.region * r, opt.node_spacing * r);
    const NetPartition part = greedy_separated_nets(X, nodes, r);
    rep.net_size = static_cast<int>(part.net.size());
    rep.class_count = static_cast<int>(part.classes.size());
    rep.class_bound = part.bound;
    rep.covered = true;
    for (const auto& z : nodes) {
        bool in = false;
        for (int j : part.net)
            if (dist(X, z, nodes[j]) < 0.5 * r) {
                in = true;
                break;
            }
        rep.covered = rep.covered && in;
    }

    // evaluation set: report nodes with their stencils, then Lipschitz pairs
    std::vector<Point> report_nodes;
    for (const auto& z : nodes)
        if (dist(X, z, o) <= report_radius) report_nodes.push_back(z);
    std::vector<Point> P;
    for (const auto& z : report_nodes)
        for (const auto& p : stencil_points(X, z, fd)) P.push_back(p);
    const size_t pair_start = P.size();
    Rng rng(opt.seed);
    for (int i = 0; i < opt.lip_pairs; ++i) {
        const Point z = exp_map(X, o, random_unit(X, o, rng), report_radius * std::sqrt(uniform01(rng)));
        P.push_back(z);
        P.push_back(exp_map(X, z, random_unit(X, z, rng), uniform(rng, 0.05, 0.5) * r));
    }
    std::vector<Point> orig(P.size()), val(P.size());
    for (size_t i = 0; i < P.size(); ++i) {
        orig[i] = eval_map(f, P[i]);
        val[i] = eval_map(f0, P[i]);
    }
    const auto sampled_lip = [&](const std::vector<Point>& v) {
        double L = 0.0;
        for (size_t i = pair_start; i < P.size(); i += 2)
            L = std::max(L, dist(Y, v[i], v[i + 1]) / dist(X, P[i], P[i + 1]));
        return L;
    };
    const auto stencil_derivs = [&](const std::vector<Point>& v, size_t n) {
        return derivatives_from_stencil(Y, std::vector<Point>(v.begin() + 9 * n, v.begin() + 9 * n + 9),
                                        fd);
    };

    double lip_f = 0.0;
    for (size_t i = pair_start; i < P.size(); i += 2)
        lip_f = std::max(lip_f, dist(Y, orig[i], orig[i + 1]) / dist(X, P[i], P[i + 1]));
    rep.lip_mollified = sampled_lip(val);
    rep.lip_bound_mollified = mollified_lipschitz_bound(X, std::max(1.0, lip_f), 0.0);
    rep.lip_per_sweep.push_back(rep.lip_mollified);

    auto classes = std::make_shared<std::vector<detail::FlattenClass>>();
    for (const auto& idx : part.classes) {
        const double L = rep.lip_per_sweep.back();
        if (!(L < rep.chart.r0 / (sqr(c0) * r)))
            throw usage_error("smooth_pipeline: sampled Lip " + std::to_string(L) +
                              " violates Lip < r0/(c0^2 r); decrease r");
        detail::FlattenClass cls;
        for (int j : idx) {
            const Point& x = nodes[j];
            const Point y = detail::apply_class_chain(X, r, *classes, x, eval_map(f0, x));
            cls.centres.push_back(x);
            cls.charts.push_back(std::make_shared<const AlmostLinearChart>(Y, y));
        }
        std::vector<Point> next(P.size());
        for (size_t i = 0; i < P.size(); ++i) next[i] = detail::apply_class(X, r, cls, P[i], val[i]);
        // M_r fit on report nodes inside the flattened annuli
        for (size_t n = 0; n < report_nodes.size(); ++n) {
            bool annulus = false;
            for (const auto& x : cls.centres) {
                const double d = dist(X, report_nodes[n], x);
                if (d > 0.5 * r && d < r) annulus = true;
            }
            if (!annulus) continue;
            const double before = stencil_derivs(val, n).d2;
            const double after = stencil_derivs(next, n).d2;
            rep.M_r = std::max(rep.M_r, after / (before + L * L + 1.0));
        }
        val = std::move(next);
        const double Ln = sampled_lip(val);
        rep.max_lip_growth = std::max(rep.max_lip_growth, Ln / L);
        rep.lip_per_sweep.push_back(Ln);
        classes->push_back(std::move(cls));
    }

    for (size_t n = 0; n < report_nodes.size(); ++n) {
        const Derivatives dv = stencil_derivs(val, n);
        const double off = dist(Y, val[9 * n], orig[9 * n]);
        rep.rows.push_back({static_cast<int>(n), report_nodes[n], off, dv.d1, dv.d2});
        rep.max_offset = std::max(rep.max_offset, off);
        rep.max_d1 = std::max(rep.max_d1, dv.d1);
        rep.max_d2 = std::max(rep.max_d2, dv.d2);
    }

    res.map = f0;
    res.map.name = "smoothed_" + f.name;
    res.map.fn = [f0, classes, r, X](const Point& z) {
        return detail::apply_class_chain(X, r, *classes, z, eval_map(f0, z));
    };
    return res;
}

inline void write_smoothing_csv(std::ostream& os, const SmoothReport& rep) {
    os << "node_id,d_offset,fd_Df,fd_D2f\n";
    os.precision(17);
    for (const auto& row : rep.rows) os << row.node_id << ',' << row.offset << ',' << row.d1 << ',' << row.d2 << '\n';
}

}  // namespace hhmap
