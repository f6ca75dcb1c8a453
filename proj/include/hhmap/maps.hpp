#pragma once

// Maps between model spaces: the analytic catalog, sample-based
// quasi-isometry diagnostics, and the spiral coarse embedding H^2 -> H^3.

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hhmap/geometry.hpp"

namespace hhmap {

struct MapSpec {
    std::string kind = "analytic";  // "analytic" or "sampled"
    std::string name;
    std::map<std::string, double> params;
    ModelSpace source;
    ModelSpace target;
    std::function<Point(const Point&)> fn;
};

inline Point eval_map(const MapSpec& f, const Point& x) {
    if (!contains(f.source, x)) throw range_error("eval_map: point outside the source model");
    const Point y = f.fn(x);
    if (!contains(f.target, y)) throw numeric_error("eval_map(" + f.name + "): image outside the target model");
    return y;
}

inline double param(const MapSpec& f, const std::string& key, double fallback) {
    auto it = f.params.find(key);
    return it == f.params.end() ? fallback : it->second;
}

// ---------------------------------------------------------------- catalog

inline MapSpec identity_map(const ModelSpace& X) {
    return {"analytic", "identity", {}, X, X, [](const Point& x) { return x; }};
}

inline MapSpec constant_map(const ModelSpace& X, const ModelSpace& Y, const Point& y0) {
    return {"analytic", "constant", {}, X, Y, [y0](const Point&) { return y0; }};
}

// (u,v) -> (su u, sv v) on the half-plane; su = sv is an isometry.
inline MapSpec scale_map(double su, double sv) {
    if (!(su > 0) || !(sv > 0)) throw usage_error("scale: factors must be positive");
    const ModelSpace H2 = make_space(Model::halfplane2);
    return {"analytic", "scale", {{"su", su}, {"sv", sv}}, H2, H2,
            [su, sv](const Point& x) { return Point{su * x[0], sv * x[1], 0.0}; }};
}

// (u,v) -> (u, v + v^2), 2-Lipschitz
inline MapSpec parabolic_sq_map() {
    const ModelSpace H2 = make_space(Model::halfplane2);
    return {"analytic", "parabolic_sq", {}, H2, H2,
            [](const Point& x) { return Point{x[0], x[1] + x[1] * x[1], 0.0}; }};
}

// (u,v) -> (u, sinh(a v)/a); a = 0 is the identity
inline MapSpec sinh_family_map(double a) {
    if (!(a >= 0)) throw usage_error("sinh_family: parameter must be >= 0");
    const ModelSpace H2 = make_space(Model::halfplane2);
    return {"analytic", "sinh_family", {{"a", a}}, H2, H2, [a](const Point& x) {
                return Point{x[0], a == 0.0 ? x[1] : std::sinh(a * x[1]) / a, 0.0};
            }};
}

// (u,v) -> (u/(1+b), (v + b v^2)/(1+b)); b = +inf gives (0, v^2)
inline MapSpec f_beta_map(double beta) {
    if (!(beta >= 0)) throw usage_error("f_beta: beta must be >= 0");
    const ModelSpace H2 = make_space(Model::halfplane2);
    return {"analytic", "f_beta", {{"beta", beta}}, H2, H2, [beta](const Point& x) {
                if (std::isinf(beta)) return Point{0.0, x[1] * x[1], 0.0};
                return Point{x[0] / (1 + beta), (x[1] + beta * x[1] * x[1]) / (1 + beta), 0.0};
            }};
}

// ------------------------------------------------------ pair sampling

struct PointPair {
    Point x, xp;
};

struct PointTriple {
    Point x0, x1, x2;
};

// Pairs around the reference point: base points in B(O, R_max), partners at
// log-uniform distances in [0.1, 2 R_max] along uniform directions. With
// cusp = true (half-plane sources only) a quarter of the pairs sit at
// heights e^{+-R_max} with horizontal offsets, where parabolic maps degenerate.
inline std::vector<PointPair> sample_pairs(const ModelSpace& X, Rng& rng, int n, double R_max, bool cusp = false) {
    if (n <= 0) throw usage_error("sample_pairs: n must be positive");
    std::vector<PointPair> out;
    out.reserve(n);
    const double lo = std::log(0.1), hi = std::log(2.0 * R_max);
    for (int i = 0; i < n; ++i) {
        if (cusp && X.model == Model::halfplane2 && i % 4 == 3) {
            const double side = (i / 4) % 2 ? 1.0 : -1.0;
            const double v = std::exp(side * uniform(rng, 0.5, 1.0) * R_max);
            const double dd = std::exp(uniform(rng, lo, hi));
            const Point x{uniform(rng, -1, 1) * v, v, 0.0};
            // horizontal offset giving source distance dd
            const double du = 2.0 * v * std::sinh(dd / 2.0);
            out.push_back({x, {x[0] + du, v, 0.0}});
            continue;
        }
        const Point x = random_point(X, rng, R_max);
        const double d = std::exp(uniform(rng, lo, hi));
        out.push_back({x, exp_map(X, x, random_unit(X, x, rng), d)});
    }
    return out;
}

inline std::vector<PointTriple> sample_triples(const ModelSpace& X, Rng& rng, int n, double R_max) {
    std::vector<PointTriple> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i)
        out.push_back({random_point(X, rng, R_max), random_point(X, rng, R_max), random_point(X, rng, R_max)});
    return out;
}

// ------------------------------------------------------ QI diagnostics

enum class MapClass { quasi_isometric, coarse, weakly_coarse, rough_lipschitz_only };

inline std::string class_name(MapClass c) {
    switch (c) {
        case MapClass::quasi_isometric: return "quasi_isometric";
        case MapClass::coarse: return "coarse";
        case MapClass::weakly_coarse: return "weakly_coarse";
        case MapClass::rough_lipschitz_only: return "rough_lipschitz_only";
    }
    return "?";
}

struct QIReport {
    double c_hat = 1.0;
    double C_hat = 0.0;
    double A_hat = 0.0;
    std::vector<std::pair<double, double>> phi1_samples;  // (distance, lower envelope of image distance)
    MapClass classification = MapClass::rough_lipschitz_only;
    std::string sample_description;
};

struct QIOptions {
    double C_qi_max = 3.0;   // additive constant above which the lower bound is deemed failed
    double c0 = 1.0;         // weak-coarseness probe level
    int phi1_bins = 24;
};

namespace detail {

struct DistPair {
    double d, D;
};

inline std::vector<DistPair> pair_distances(const MapSpec& f, const std::vector<PointPair>& pairs) {
    std::vector<DistPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs)
        out.push_back({dist(f.source, p.x, p.xp), dist(f.target, eval_map(f, p.x), eval_map(f, p.xp))});
    return out;
}

// Non-decreasing lower envelope of image distance against log-binned source distance.
inline std::vector<std::pair<double, double>> phi1_envelope(const std::vector<DistPair>& dp, int bins) {
    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
    for (const auto& p : dp)
        if (p.d > 0) dmin = std::min(dmin, p.d), dmax = std::max(dmax, p.d);
    std::vector<std::pair<double, double>> env;
    if (!(dmax > dmin)) return env;
    const double l0 = std::log(dmin), l1 = std::log(dmax);
    std::vector<double> lo(bins, std::numeric_limits<double>::infinity());
    for (const auto& p : dp) {
        if (!(p.d > 0)) continue;
        int b = static_cast<int>((std::log(p.d) - l0) / (l1 - l0) * bins);
        b = std::clamp(b, 0, bins - 1);
        lo[b] = std::min(lo[b], p.D);
    }
    double run = std::numeric_limits<double>::infinity();
    for (int b = bins - 1; b >= 0; --b) {
        run = std::min(run, lo[b]);
        lo[b] = run;
    }
    for (int b = 0; b < bins; ++b)
        if (std::isfinite(lo[b])) env.emplace_back(std::exp(l0 + (l1 - l0) * b / bins), lo[b]);
    return env;
}

}  // namespace detail

struct WeakCoarse {
    bool is_weak = false;
    double C0_hat = 0.0;
};

// C0_hat = largest source distance among pairs whose images are within c0.
// The sample is deemed unbounded (C0 = inf) once that reaches half the
// largest sampled source distance.
inline WeakCoarse check_weak_coarse(const MapSpec& f, const std::vector<PointPair>& pairs, double c0) {
    if (!(c0 > 0)) throw usage_error("check_weak_coarse: c0 must be positive");
    double c0hat = 0.0, dmax = 0.0;
    for (const auto& p : detail::pair_distances(f, pairs)) {
        dmax = std::max(dmax, p.d);
        if (p.D <= c0) c0hat = std::max(c0hat, p.d);
    }
    if (c0hat >= 0.5 * dmax && dmax > 0) return {false, std::numeric_limits<double>::infinity()};
    return {true, c0hat};
}

// c_hat: sampled Lipschitz constant at scales >= 0.1 (never below 1);
// C_hat: smallest additive constant for which both quasi-isometry
// inequalities hold with c_hat on the sample.
inline QIReport estimate_qi_constants(const MapSpec& f, const std::vector<PointPair>& pairs,
                                      const QIOptions& opt = {}) {
    if (pairs.empty()) throw usage_error("estimate_qi_constants: empty sample");
    const auto dp = detail::pair_distances(f, pairs);
    QIReport r;
    double c = 1.0;
    for (const auto& p : dp)
        if (p.d >= 0.1 - 1e-12) c = std::max(c, p.D / p.d);
    double C = 0.0;
    for (const auto& p : dp) C = std::max({C, p.D - c * p.d, p.d / c - p.D});
    r.c_hat = c;
    r.C_hat = C;
    r.phi1_samples = detail::phi1_envelope(dp, opt.phi1_bins);
    r.sample_description = std::to_string(pairs.size()) + " pairs";
    if (C <= opt.C_qi_max) {
        r.classification = MapClass::quasi_isometric;
    } else {
        const WeakCoarse w = check_weak_coarse(f, pairs, opt.c0);
        const auto& env = r.phi1_samples;
        const bool growing = env.size() >= 2 && env.back().second > env[env.size() / 2].second + 0.5;
        if (w.is_weak && growing)
            r.classification = MapClass::coarse;
        else if (w.is_weak)
            r.classification = MapClass::weakly_coarse;
        else
            r.classification = MapClass::rough_lipschitz_only;
    }
    return r;
}

// Smallest A with c^-1 (x1|x2)_{x0} - A <= (f x1|f x2)_{f x0} <= c (x1|x2)_{x0} + A.
inline double estimate_gromov_distortion(const MapSpec& f, const std::vector<PointTriple>& triples, double c_hat) {
    double A = 0.0;
    for (const auto& t : triples) {
        const double g = gromov_product(f.source, t.x0, t.x1, t.x2);
        const double gf = gromov_product(f.target, eval_map(f, t.x0), eval_map(f, t.x1), eval_map(f, t.x2));
        A = std::max({A, gf - c_hat * g, g / c_hat - gf});
    }
    return A;
}

// ---------------------------------------------- spiral coarse embedding

// Prescribed lower modulus as a table t_i -> phi_i, linearly interpolated,
// constant beyond the last node.
struct Phi1Table {
    std::vector<double> t, phi;

    double operator()(double s) const {
        if (s <= t.front()) return phi.front();
        if (s >= t.back()) return phi.back();
        auto it = std::upper_bound(t.begin(), t.end(), s);
        const std::size_t j = static_cast<std::size_t>(it - t.begin());
        const double w = (s - t[j - 1]) / (t[j] - t[j - 1]);
        return (1 - w) * phi[j - 1] + w * phi[j];
    }

    void validate() const {
        if (t.size() < 2 || t.size() != phi.size()) throw usage_error("phi1 table needs >= 2 matching nodes");
        if (t.front() != 0.0 || phi.front() != 0.0) throw usage_error("phi1 table must start at (0,0)");
        for (std::size_t i = 1; i < t.size(); ++i) {
            if (!(t[i] > t[i - 1])) throw usage_error("phi1 table abscissae must increase");
            const double slope = (phi[i] - phi[i - 1]) / (t[i] - t[i - 1]);
            if (slope < -1e-12) throw usage_error("phi1 must be non-decreasing");
            if (slope > 1.0 + 1e-9) throw usage_error("phi1 must be 1-Lipschitz");
        }
    }
};

inline Phi1Table phi1_from_function(const std::function<double(double)>& g, double t_max, int n = 256) {
    Phi1Table tab;
    for (int i = 0; i <= n; ++i) {
        const double s = t_max * i / n;
        tab.t.push_back(s);
        tab.phi.push_back(g(s));
    }
    tab.phi[0] = 0.0;
    return tab;
}

// Unit-speed C^1 curve f0 in the half-plane with f0(0) = (0,1).
// Two families:
//   hypercycle(eps): equidistant at distance eps from a geodesic, chord
//                    cosh(L) = cosh^2(eps) cosh(t/cosh eps) - sinh^2(eps)
//   spiral(delta):   double spiral centred at f0(0) with polar angle
//                    2 pi r / delta, so the radius advances by delta per
//                    turn; arclength ds/dr = sqrt(1 + (2 pi sinh r / delta)^2).
//                    The arm for s < 0 is the other arm rotated by pi.
class PlaneCurve {
public:
    static PlaneCurve hypercycle(double eps) {
        PlaneCurve c;
        c.spiral_ = false;
        c.eps_ = eps;
        return c;
    }

    static PlaneCurve spiral(double delta, double s_max = 1024.0, double dr = 1e-3) {
        if (!(delta > 0)) throw usage_error("spiral: radial advance must be positive");
        PlaneCurve c;
        c.spiral_ = true;
        c.delta_ = delta;
        c.dr_ = dr;
        c.s_max_ = s_max;
        c.S_.push_back(0.0);
        while (c.S_.back() < s_max) {
            const double r0 = (c.S_.size() - 1) * dr;
            c.S_.push_back(c.S_.back() +
                           dr / 6.0 * (c.speed(r0) + 4 * c.speed(r0 + dr / 2) + c.speed(r0 + dr)));
        }
        return c;
    }

    bool is_spiral() const { return spiral_; }
    double parameter() const { return spiral_ ? delta_ : eps_; }
    double s_max() const { return spiral_ ? s_max_ : std::numeric_limits<double>::infinity(); }

    // distance from f0(0) along the spiral arm
    double radius(double s) const {
        s = std::abs(s);
        if (s == 0.0) return 0.0;
        const auto it = std::upper_bound(S_.begin(), S_.end(), s);
        int i = static_cast<int>(it - S_.begin()) - 1;
        i = std::clamp(i, 0, static_cast<int>(S_.size()) - 2);
        double r = (i + (s - S_[i]) / (S_[i + 1] - S_[i])) * dr_;
        for (int k = 0; k < 8; ++k) r -= (arclength(r, i) - s) / speed(r);
        return r;
    }

    Point operator()(double s) const {
        if (!spiral_) {
            const double ce = std::cosh(eps_);
            const double k = std::exp(s / ce);
            // Fermi coordinates (s/cosh eps, eps) about the imaginary axis, moved so f0(0) = (0,1)
            return {(k - 1.0) * std::tanh(eps_) * ce, k, 0.0};
        }
        if (std::abs(s) > s_max_) throw range_error("spiral curve evaluated beyond its integrated range");
        const double r = radius(s);
        std::complex<double> z = std::tanh(r / 2) * std::polar(1.0, 2 * pi * r / delta_);
        if (s < 0) z = -z;
        return disk_to_halfplane({z.real(), z.imag(), 0.0});
    }

private:
    bool spiral_ = false;
    double eps_ = 0.0, delta_ = 0.0, dr_ = 1e-3, s_max_ = 0.0;
    std::vector<double> S_;  // arclength at r = i dr

    double speed(double r) const { return std::sqrt(1.0 + sqr(2 * pi * std::sinh(r) / delta_)); }
    // cubic Hermite interpolant of the arclength on cell i
    double arclength(double r, int i) const {
        const double h = dr_, t = r / h - i;
        const double m0 = speed(i * h) * h, m1 = speed((i + 1) * h) * h;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * S_[i] + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * S_[i + 1] +
               (t3 - t2) * m1;
    }
};

// min over s in [s_lo, s_hi] of d(f0(s+t), f0(s)), sampled
inline double min_chord(const PlaneCurve& f0, double t, double s_lo, double s_hi, int n) {
    const ModelSpace H2 = make_space(Model::halfplane2);
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) {
        const double s = s_lo + (s_hi - s_lo) * i / n;
        m = std::min(m, dist(H2, f0(s + t), f0(s)));
    }
    return m;
}

// Non-decreasing lower modulus of f0 on [0, t_max], sampled on nt points.
inline std::vector<std::pair<double, double>> curve_lower_modulus(const PlaneCurve& f0, double t_max, int nt = 64,
                                                                   double s_span = 200.0, int ns = 4000) {
    std::vector<std::pair<double, double>> out(nt + 1);
    for (int i = 0; i <= nt; ++i) {
        const double t = t_max * i / nt;
        out[i] = {t, i == 0 ? 0.0 : min_chord(f0, t, -s_span, s_span, ns)};
    }
    for (int i = nt - 1; i >= 0; --i) out[i].second = std::min(out[i].second, out[i + 1].second);
    return out;
}

struct CoarseEmbedding {
    MapSpec map;
    std::shared_ptr<const PlaneCurve> curve;
    Phi1Table phi1;
    double fitted_level = 0.0;  // modulus level the curve was fitted to
};

// f(exp(t n_s)) = exp(t n_{f0(s)}): Fermi coordinates (s,t) about the
// imaginary axis of the source half-plane, target plane {x2 = 0} of the
// half-space with unit normal e2. The result is a local isometry.
inline MapSpec coarse_embedding_from_curve(std::shared_ptr<const PlaneCurve> f0) {
    const ModelSpace H2 = make_space(Model::halfplane2), H3 = make_space(Model::halfspace3);
    return {"analytic", "spiral_embedding", {{f0->is_spiral() ? "delta" : "eps", f0->parameter()}}, H2, H3,
            [f0](const Point& x) {
                const double s = 0.5 * std::log(x[0] * x[0] + x[1] * x[1]);
                const double t = std::asinh(x[0] / x[1]);
                const Point P = (*f0)(s);
                return Point{P[0], P[1] * std::tanh(t), P[1] / std::cosh(t)};
            }};
}

// Fits the curve family to the prescribed modulus by bisection:
// a plateau (flat last half of the table) selects the spiral with its radial
// advance matched to the plateau level; otherwise the hypercycle with its
// chord matched at the last table node.
inline CoarseEmbedding build_coarse_embedding(const Phi1Table& phi1, double tol = 1e-2) {
    phi1.validate();
    const double t_last = phi1.t.back();
    const double level_last = phi1.phi.back();
    const bool plateau = level_last - phi1(0.5 * t_last) < tol;
    CoarseEmbedding out;
    out.phi1 = phi1;
    if (!plateau) {
        // chord of the hypercycle at t_last decreases in eps
        auto chord = [&](double eps) {
            const double ce = std::cosh(eps), se = std::sinh(eps);
            return std::acosh(ce * ce * std::cosh(t_last / ce) - se * se);
        };
        double lo = 0.0, hi = 20.0;
        if (chord(lo) <= level_last + tol) hi = 0.0;
        for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
            const double mid = 0.5 * (lo + hi);
            (chord(mid) > level_last ? lo : hi) = mid;
        }
        out.curve = std::make_shared<PlaneCurve>(PlaneCurve::hypercycle(hi));
        out.fitted_level = chord(hi);
    } else {
        auto level = [&](double delta) {
            const PlaneCurve c = PlaneCurve::spiral(delta, 64.0);
            const auto env = curve_lower_modulus(c, 8.0, 48, 40.0, 1600);
            return env.back().second;
        };
        double lo = 1e-3, hi = 2.0;
        for (int it = 0; it < 40 && hi - lo > 0.25 * tol; ++it) {
            const double mid = 0.5 * (lo + hi);
            (level(mid) < level_last ? lo : hi) = mid;
        }
        const double delta = 0.5 * (lo + hi);
        out.curve = std::make_shared<PlaneCurve>(PlaneCurve::spiral(delta));
        out.fitted_level = level(delta);
    }
    out.map = coarse_embedding_from_curve(out.curve);
    return out;
}

// ---------------------------------------------------------- registry

inline MapSpec make_catalog_map(const std::string& name, const std::map<std::string, double>& p = {}) {
    auto get = [&](const std::string& k, double fallback) {
        auto it = p.find(k);
        return it == p.end() ? fallback : it->second;
    };
    if (name == "identity") return identity_map(make_space(Model::halfplane2));
    if (name == "scale") return scale_map(get("su", 2.0), get("sv", 2.0));
    if (name == "parabolic_sq") return parabolic_sq_map();
    if (name == "sinh_family") return sinh_family_map(get("a", 1.0));
    if (name == "f_beta") return f_beta_map(get("beta", 0.0));
    if (name == "constant")
        return constant_map(make_space(Model::halfplane2), make_space(Model::halfplane2), {0.0, 1.0, 0.0});
    if (name == "spiral_embedding") {
        const double level = get("plateau", 0.05);
        const double tmax = get("t_max", 2.0);
        Phi1Table tab = phi1_from_function([&](double t) { return std::min(t, level); }, tmax, 64);
        return build_coarse_embedding(tab).map;
    }
    throw usage_error("unknown map '" + name + "'");
}

inline std::vector<std::string> catalog_names() {
    return {"identity", "scale", "parabolic_sq", "sinh_family", "f_beta", "constant", "spiral_embedding"};
}

}  // namespace hhmap
