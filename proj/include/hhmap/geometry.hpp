#pragma once

// Closed-form geometry of constant-curvature hyperbolic models.
//
// Conventions:
//   disk2       Poincare disk, metric (2/(a(1-|z|^2)))^2 |dz|^2
//   halfplane2  upper half-plane, metric |dz|^2/(a y)^2, height in slot 1
//   halfspace3  upper half-space, metric |dz|^2/(a y)^2, height in slot 2
// Curvature is -a^2. Geodesics in coordinates do not depend on a, so all
// exponential/log maps are computed at unit curvature after moving the base
// point to a reference point by an exact isometry.

#include <algorithm>
#include <complex>
#include <string>

#include "hhmap/core.hpp"

namespace hhmap {

enum class Model { disk2, halfplane2, halfspace3 };

struct ModelSpace {
    Model model = Model::halfplane2;
    double a = 1.0;

    int dim() const { return model == Model::halfspace3 ? 3 : 2; }
    int height_index() const { return dim() - 1; }
    bool operator==(const ModelSpace&) const = default;
};

inline ModelSpace make_space(Model m, double a = 1.0) {
    if (!(a > 0.0) || !std::isfinite(a)) throw usage_error("curvature scale a must be positive");
    return ModelSpace{m, a};
}

inline std::string model_name(Model m) {
    switch (m) {
        case Model::disk2: return "disk2";
        case Model::halfplane2: return "halfplane2";
        case Model::halfspace3: return "halfspace3";
    }
    return "?";
}

inline Model parse_model(const std::string& s) {
    if (s == "disk2" || s == "disk") return Model::disk2;
    if (s == "halfplane2" || s == "halfplane") return Model::halfplane2;
    if (s == "halfspace3" || s == "halfspace") return Model::halfspace3;
    throw usage_error("unknown model '" + s + "'");
}

// Reference point: disk center or (0,...,0,1).
inline Point origin(const ModelSpace& X) {
    if (X.model == Model::disk2) return {0.0, 0.0, 0.0};
    Point o{0.0, 0.0, 0.0};
    o[X.height_index()] = 1.0;
    return o;
}

inline bool contains(const ModelSpace& X, const Point& p) {
    for (double c : p)
        if (!std::isfinite(c)) return false;
    if (X.model == Model::disk2) return p[0] * p[0] + p[1] * p[1] < 1.0 && p[2] == 0.0;
    if (X.model == Model::halfplane2 && p[2] != 0.0) return false;
    return p[X.height_index()] > 0.0;
}

// lambda with g = lambda^2 |dx|^2
inline double conformal_factor(const ModelSpace& X, const Point& p) {
    if (X.model == Model::disk2) return 2.0 / (X.a * (1.0 - (p[0] * p[0] + p[1] * p[1])));
    return 1.0 / (X.a * p[X.height_index()]);
}

inline double metric_inner(const ModelSpace& X, const Point& p, const Tangent& u, const Tangent& v) {
    return sqr(conformal_factor(X, p)) * dot(u, v);
}

inline double metric_norm(const ModelSpace& X, const Point& p, const Tangent& v) {
    return conformal_factor(X, p) * norm(v);
}

namespace detail {

using cplx = std::complex<double>;

inline cplx to_c(const Vec& v) { return {v[0], v[1]}; }
inline Vec from_c(cplx z) { return {z.real(), z.imag(), 0.0}; }

// unit-curvature exp at the half-space reference point; w uses the Euclidean
// norm (the metric is Euclidean there)
inline Point hs_exp_ref(const Vec& w, int k) {
    const int n_ = k - 1;
    double wh2 = 0.0;
    for (int i = 0; i < n_; ++i) wh2 += w[i] * w[i];
    const double wk = w[n_];
    const double n = std::sqrt(wh2 + wk * wk);
    if (n == 0.0) {
        Point o{0.0, 0.0, 0.0};
        o[n_] = 1.0;
        return o;
    }
    const double sh = std::sinh(n);
    double den;
    if (wk >= 0.0)
        den = std::exp(-n) + sh * wh2 / (n * (n + wk));
    else
        den = std::cosh(n) - sh * wk / n;
    const double y = 1.0 / den;
    Point q{0.0, 0.0, 0.0};
    for (int i = 0; i < n_; ++i) q[i] = sh * w[i] / n * y;
    q[n_] = y;
    return q;
}

inline double hs_dist_unit(const Point& p, const Point& q, int k) {
    const int h = k - 1;
    // scaled so that heights near e^{+-700} neither overflow nor underflow
    const double chord = std::hypot(p[0] - q[0], p[1] - q[1], p[2] - q[2]);
    return 2.0 * std::asinh(chord / (2.0 * std::sqrt(p[h]) * std::sqrt(q[h])));
}

inline Tangent hs_log_ref(const Point& q, int k) {
    const int n_ = k - 1;
    const double y = q[n_];
    double x2 = 0.0;
    for (int i = 0; i < n_; ++i) x2 += q[i] * q[i];
    Tangent u{0.0, 0.0, 0.0};
    for (int i = 0; i < n_; ++i) u[i] = q[i] / y;
    u[n_] = (x2 + (y - 1.0) * (y + 1.0)) / (2.0 * y);
    const double un = std::hypot(u[0], u[1], u[2]);  // components reach 1/y
    if (un == 0.0) return {0.0, 0.0, 0.0};
    Point o{0.0, 0.0, 0.0};
    o[n_] = 1.0;
    const double d = hs_dist_unit(o, q, k);
    return (d / un) * u;
}

inline Point hs_normalize(const Point& p, const Point& q, int k) {
    const int h = k - 1;
    Point r{0.0, 0.0, 0.0};
    for (int i = 0; i < h; ++i) r[i] = (q[i] - p[i]) / p[h];
    r[h] = q[h] / p[h];
    return r;
}

inline Point hs_denormalize(const Point& p, const Point& r, int k) {
    const int h = k - 1;
    Point q{0.0, 0.0, 0.0};
    for (int i = 0; i < h; ++i) q[i] = p[i] + p[h] * r[i];
    q[h] = p[h] * r[h];
    return q;
}

inline cplx mobius_to0(cplx p, cplx z) { return (z - p) / (1.0 - std::conj(p) * z); }
inline cplx mobius_from0(cplx p, cplx w) { return (w + p) / (1.0 + std::conj(p) * w); }

inline double disk_dist_unit(const Point& p, const Point& q) {
    const double qp = (1.0 - (p[0] * p[0] + p[1] * p[1])) * (1.0 - (q[0] * q[0] + q[1] * q[1]));
    return 2.0 * std::asinh(norm(p - q) / std::sqrt(qp));
}

inline Point disk_exp_unit(const Point& p, const Tangent& v) {
    const cplx pc = to_c(p);
    const cplx w = to_c(v) / (1.0 - std::norm(pc));
    const double n = std::abs(w);
    if (n == 0.0) return p;
    const cplx z0 = std::tanh(n) * (w / n);
    return from_c(mobius_from0(pc, z0));
}

inline Tangent disk_log_unit(const Point& p, const Point& q) {
    const cplx pc = to_c(p);
    const cplx w = mobius_to0(pc, to_c(q));
    const double r = std::abs(w);
    if (r == 0.0) return {0.0, 0.0, 0.0};
    const double d = disk_dist_unit(p, q);
    return from_c((1.0 - std::norm(pc)) * (0.5 * d) * (w / r));
}

// Hyperboloid image (X0, spatial...) of a point already moved so that the
// base point is the reference point; returns spatial part and X0.
inline double hyperboloid_ref(const ModelSpace& X, const Point& r, Vec& spatial) {
    if (X.model == Model::disk2) {
        const double r2 = r[0] * r[0] + r[1] * r[1];
        const double q = 1.0 - r2;
        spatial = {2.0 * r[0] / q, 2.0 * r[1] / q, 0.0};
        return (1.0 + r2) / q;
    }
    const int h = X.height_index();
    const double y = r[h];
    double s = 0.0;
    for (int i = 0; i < h; ++i) s += r[i] * r[i];
    spatial = {0.0, 0.0, 0.0};
    for (int i = 0; i < h; ++i) spatial[i] = r[i] / y;
    spatial[h] = (s + (y - 1.0) * (y + 1.0)) / (2.0 * y);
    return (s + y * y + 1.0) / (2.0 * y);
}

// Move q into the frame where p is the reference point; tangent vectors at p
// are scaled by tangent_scale to the reference frame (unit-curvature metric
// at the reference point is Euclidean up to the factor hyperboloid_scale).
inline Point to_ref(const ModelSpace& X, const Point& p, const Point& q) {
    if (X.model == Model::disk2) return from_c(mobius_to0(to_c(p), to_c(q)));
    return hs_normalize(p, q, X.dim());
}

inline double tangent_scale(const ModelSpace& X, const Point& p) {
    if (X.model == Model::disk2) return 1.0 / (1.0 - (p[0] * p[0] + p[1] * p[1]));
    return 1.0 / p[X.height_index()];
}

// Differential of the coordinate-to-hyperboloid map at the reference point.
inline double hyperboloid_scale(const ModelSpace& X) { return X.model == Model::disk2 ? 2.0 : 1.0; }

}  // namespace detail

inline double dist(const ModelSpace& X, const Point& p, const Point& q) {
    if (X.model == Model::disk2) return detail::disk_dist_unit(p, q) / X.a;
    return detail::hs_dist_unit(p, q, X.dim()) / X.a;
}

// exp_p(t v); geodesics in coordinates are independent of a.
inline Point exp_map(const ModelSpace& X, const Point& p, const Tangent& v, double t = 1.0) {
    const Tangent w = t * v;
    if (X.model == Model::disk2) return detail::disk_exp_unit(p, w);
    const int k = X.dim();
    const Point r = detail::hs_exp_ref(w / p[k - 1], k);
    return detail::hs_denormalize(p, r, k);
}

inline Tangent log_map(const ModelSpace& X, const Point& p, const Point& q) {
    if (X.model == Model::disk2) return detail::disk_log_unit(p, q);
    const int k = X.dim();
    return p[k - 1] * detail::hs_log_ref(detail::hs_normalize(p, q, k), k);
}

inline Point geodesic_midpoint(const ModelSpace& X, const Point& p, const Point& q) {
    return exp_map(X, p, log_map(X, p, q), 0.5);
}

// Point at fraction t of the geodesic segment from p to q.
inline Point geodesic_lerp(const ModelSpace& X, const Point& p, const Point& q, double t) {
    return exp_map(X, p, log_map(X, p, q), t);
}

inline double gromov_product(const ModelSpace& X, const Point& x0, const Point& x1, const Point& x2) {
    const double g = 0.5 * (dist(X, x0, x1) + dist(X, x0, x2) - dist(X, x1, x2));
    return std::max(0.0, g);
}

// Legs shorter than this give angle 0 by convention.
inline constexpr double degenerate_leg = 1e-8;

inline double angle_at(const ModelSpace& X, const Point& x0, const Point& x1, const Point& x2) {
    if (dist(X, x0, x1) < degenerate_leg || dist(X, x0, x2) < degenerate_leg) return 0.0;
    return vec_angle(log_map(X, x0, x1), log_map(X, x0, x2));
}

using Mat3 = std::array<std::array<double, 3>, 3>;

// Hessian of d(x0, .) at z as a bilinear form in model coordinates:
// a coth(a d) (g - Dd (x) Dd).
inline Mat3 hessian_dist(const ModelSpace& X, const Point& x0, const Point& z) {
    const double d = dist(X, x0, z);
    if (d < degenerate_leg) throw usage_error("hessian_dist: z coincides with x0");
    const double lam2 = sqr(conformal_factor(X, z));
    const Tangent e = (-1.0 / d) * log_map(X, z, x0);
    const double s = X.a / std::tanh(X.a * d);
    Mat3 H{};
    const int k = X.dim();
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) H[i][j] = s * ((i == j ? lam2 : 0.0) - lam2 * lam2 * e[i] * e[j]);
    return H;
}

inline double bilinear(const Mat3& H, const Tangent& u, const Tangent& v) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s += H[i][j] * u[i] * v[j];
    return s;
}

// Second difference of d(x0, .) along the geodesic through z with velocity v.
inline double hessian_dist_fd(const ModelSpace& X, const Point& x0, const Point& z, const Tangent& v,
                              double h = 1e-4) {
    const double dp = dist(X, x0, exp_map(X, z, v, h));
    const double dm = dist(X, x0, exp_map(X, z, v, -h));
    return (dp - 2.0 * dist(X, x0, z) + dm) / (h * h);
}

// Laplace-Beltrami by central differences in model coordinates:
// lambda^-2 (sum f_ii + (k-2) grad(log lambda) . grad f). The first-order
// term vanishes in dimension 2.
template <class F>
double laplace_beltrami_fd(const ModelSpace& X, F&& f, const Point& p, double h = 1e-4) {
    const double f0 = f(p);
    double s = 0.0;
    for (int i = 0; i < X.dim(); ++i) {
        Point pp = p, pm = p;
        pp[i] += h;
        pm[i] -= h;
        if (!contains(X, pp) || !contains(X, pm)) throw usage_error("laplace_beltrami_fd: stencil leaves the model");
        const double fp = f(pp), fm = f(pm);
        s += (fp - 2.0 * f0 + fm) / (h * h);
        if (X.dim() > 2 && i == X.height_index()) s -= (X.dim() - 2) * (fp - fm) / (2.0 * h) / p[i];
    }
    return s / sqr(conformal_factor(X, p));
}

inline double ball_volume(const ModelSpace& X, double r) {
    if (!(r > 0.0)) throw usage_error("ball_volume: radius must be positive");
    const double a = X.a;
    if (X.dim() == 2) return 2.0 * pi / (a * a) * (std::cosh(a * r) - 1.0);
    return pi / (a * a * a) * (std::sinh(2.0 * a * r) - 2.0 * a * r);
}

inline double sphere_area(const ModelSpace& X, double r) {
    const double s = std::sinh(X.a * r) / X.a;
    return X.dim() == 2 ? 2.0 * pi * s : 4.0 * pi * s * s;
}

struct Geodesic {
    Point base{};
    Tangent dir{};  // unit in the model metric
};

inline Geodesic make_geodesic(const ModelSpace& X, const Point& base, const Tangent& v) {
    const double n = metric_norm(X, base, v);
    if (!(n > 0.0)) throw usage_error("make_geodesic: zero direction");
    return {base, v / n};
}

inline Point geodesic_point(const ModelSpace& X, const Geodesic& g, double t) {
    return exp_map(X, g.base, g.dir, t);
}

struct Projection {
    Point foot{};
    double t = 0.0;         // arclength parameter of the foot along the geodesic
    double distance = 0.0;  // d(y, geodesic)
};

inline Projection project_to_geodesic(const ModelSpace& X, const Point& y, const Geodesic& g) {
    const Point r = detail::to_ref(X, g.base, y);
    Vec Ys{};
    const double Y0 = detail::hyperboloid_ref(X, r, Ys);
    Vec W = (detail::tangent_scale(X, g.base) * detail::hyperboloid_scale(X)) * g.dir;
    W = W / norm(W);
    const double c = dot(Ys, W);
    const double tau = std::atanh(std::clamp(c / Y0, -1.0, 1.0));
    Projection out;
    out.t = tau / X.a;
    out.foot = geodesic_point(X, g, out.t);
    out.distance = std::acosh(std::max(1.0, std::sqrt(std::max(0.0, Y0 * Y0 - c * c)))) / X.a;
    return out;
}

// Norm of the differential of the projection at y, by central differences
// along a metric-orthonormal frame.
inline double projection_contraction_fd(const ModelSpace& X, const Point& y, const Geodesic& g,
                                        double h = 1e-5) {
    const double lam = conformal_factor(X, y);
    double s = 0.0;
    for (int i = 0; i < X.dim(); ++i) {
        Tangent e{0.0, 0.0, 0.0};
        e[i] = 1.0 / lam;
        const double tp = project_to_geodesic(X, exp_map(X, y, e, h), g).t;
        const double tm = project_to_geodesic(X, exp_map(X, y, e, -h), g).t;
        s += sqr((tp - tm) / (2.0 * h));
    }
    return std::sqrt(s);
}

inline double angle_comparison_floor(double b, double R) {
    if (!(b > 0.0) || !(R >= 0.0)) throw usage_error("angle_comparison_floor: need b > 0, R >= 0");
    return std::atan(1.0 / std::cosh(b * R));
}

// Isometry disk -> half-plane sending 0 to (0,1); inverse below.
inline Point disk_to_halfplane(const Point& z) {
    const std::complex<double> zc{z[0], z[1]};
    const std::complex<double> w = std::complex<double>(0.0, 1.0) * (1.0 + zc) / (1.0 - zc);
    return {w.real(), w.imag(), 0.0};
}

inline Point halfplane_to_disk(const Point& w) {
    const std::complex<double> wc{w[0], w[1]};
    const std::complex<double> i{0.0, 1.0};
    const std::complex<double> z = (wc - i) / (wc + i);
    return {z.real(), z.imag(), 0.0};
}

// Uniformly random metric-unit direction at p.
inline Tangent random_unit(const ModelSpace& X, const Point& p, Rng& rng) {
    Tangent v{0.0, 0.0, 0.0};
    double n = 0.0;
    while (n < 1e-12) {
        for (int i = 0; i < X.dim(); ++i) v[i] = normal01(rng);
        n = norm(v);
    }
    return v / metric_norm(X, p, v);
}

// Random point at distance uniform in [0, rmax] from the reference point.
inline Point random_point(const ModelSpace& X, Rng& rng, double rmax) {
    const Point o = origin(X);
    return exp_map(X, o, random_unit(X, o, rng), uniform(rng, 0.0, rmax));
}

}  // namespace hhmap
