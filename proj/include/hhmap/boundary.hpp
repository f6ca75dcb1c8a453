#pragma once

// Boundary behaviour of maps between hyperbolic spaces seen from a base point:
// ray probes, exceptional direction sets A_{x0,alpha}(n0) and their content,
// covering counts for property C, fibre pairs, and limit directions.
//
// Directions at x0 are angles in [0, 2 pi); angle t is the unit tangent
// (cos t, sin t) / lambda(x0). Every asymptotic set is replaced by its finite
// horizon surrogate with integer samples n = 1..n_max.

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "hhmap/maps.hpp"
#include "hhmap/measures.hpp"

namespace hhmap {

inline Tangent unit_direction(const ModelSpace& X, const Point& x0, double angle) {
    if (X.dim() != 2) throw usage_error("unit_direction: surface sources only");
    const double l = conformal_factor(X, x0);
    return {std::cos(angle) / l, std::sin(angle) / l, 0.0};
}

namespace detail {

// f(exp_{x0}(t v)) with failures tagged by t
inline Point eval_along(const MapSpec& f, const Point& x0, const Tangent& v, double t) {
    const std::string at = " (ray parameter " + std::to_string(t) + ")";
    try {
        return eval_map(f, exp_map(f.source, x0, v, t));
    } catch (const range_error& e) {
        throw range_error(e.what() + at);
    } catch (const numeric_error& e) {
        throw numeric_error(e.what() + at);
    } catch (const usage_error& e) {
        throw usage_error(e.what() + at);
    }
}

template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    const int T = std::clamp(threads, 1, std::max(1, n));
    if (T == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> err(T);
    std::vector<std::thread> pool;
    for (int t = 0; t < T; ++t)
        pool.emplace_back([&, t] {
            try {
                for (int i = t; i < n; i += T) fn(i);
            } catch (...) {
                err[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : err)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

// ---------------------------------------------------------------- ray probes

struct RaySample {
    int n;
    Point image;
    double dist;  // d(f(x0), f(xi_n))
};

struct RayProbe {
    double angle = 0.0;
    Tangent direction{};
    Point x0{}, y0{};
    ModelSpace target;
    std::vector<RaySample> samples;  // n = 1..n_max
    int n_max = 0;
    int n0 = 1;
    double alpha = 0.0;
    double speed_hat = 0.0;  // min over n >= n0 of dist / n
    bool in_A = false;       // dist <= n alpha for some n in [n0, n_max]
    bool boundary_found = false;
};

inline double speed_hat(const RayProbe& p, int n0) {
    if (n0 < 1 || n0 > p.n_max) throw usage_error("speed_hat: need 1 <= n0 <= n_max");
    double s = std::numeric_limits<double>::infinity();
    for (int n = n0; n <= p.n_max; ++n) s = std::min(s, p.samples[n - 1].dist / n);
    return s;
}

inline bool in_A(const RayProbe& p, double alpha, int n0) {
    if (n0 < 1 || n0 > p.n_max) throw usage_error("in_A: need 1 <= n0 <= n_max");
    for (int n = n0; n <= p.n_max; ++n)
        if (p.samples[n - 1].dist <= n * alpha) return true;
    return false;
}

inline RayProbe probe_ray(const MapSpec& f, const Point& x0, double angle, int n_max = 64, int n0 = 1,
                          double alpha = 0.0) {
    if (n_max < 1 || n0 < 1 || n0 > n_max) throw usage_error("probe_ray: need 1 <= n0 <= n_max");
    if (!(alpha >= 0)) throw usage_error("probe_ray: alpha must be >= 0");
    RayProbe p;
    p.angle = angle;
    p.direction = unit_direction(f.source, x0, angle);
    p.x0 = x0;
    p.y0 = eval_map(f, x0);
    p.target = f.target;
    p.n_max = n_max;
    p.n0 = n0;
    p.alpha = alpha;
    p.samples.reserve(n_max);
    for (int n = 1; n <= n_max; ++n) {
        const Point y = detail::eval_along(f, x0, p.direction, n);
        p.samples.push_back({n, y, dist(f.target, p.y0, y)});
    }
    p.speed_hat = speed_hat(p, n0);
    p.in_A = in_A(p, alpha, n0);
    return p;
}

// ---------------------------------------------------------------- boundary points

struct BoundaryPoint {
    Tangent direction{};  // unit coordinate vector along log_{y0} f(xi_{n_max})
    double angle = 0.0;   // polar angle of direction (first two coordinates)
    std::vector<double> step_angles;  // theta_{y0}(y_n, y_{n+1}), n = n0..n_max-1
    double worst_tail_ratio = 0.0;    // max over m of tail variation / tail bound
};

struct BoundaryPointResult {
    std::optional<BoundaryPoint> point;
    std::string diagnostics;
    explicit operator bool() const { return point.has_value(); }
};

// Sum over n >= m of 4 e^{ac/2} e^{-a alpha n}
inline double angle_tail_bound(double a, double c, double alpha, int m) {
    return 4.0 * std::exp(a * c / 2 - a * alpha * m) / (1.0 - std::exp(-a * alpha));
}

// Limit direction of f along the probed ray. Requires speed_hat >= alpha > 0;
// the tail variation of the step angles from every m in [n0, n_max) must stay
// below the geometric tail bound, c being the rough Lipschitz constant of f.
inline BoundaryPointResult boundary_point(RayProbe& probe, double a, double c) {
    if (!(probe.alpha > 0)) throw usage_error("boundary_point: probe alpha must be positive");
    if (!(probe.speed_hat >= probe.alpha))
        throw usage_error("boundary_point: probe escapes slower than alpha (speed_hat " +
                          std::to_string(probe.speed_hat) + ")");
    if (!(a > 0) || !(c > 0)) throw usage_error("boundary_point: a and c must be positive");
    const ModelSpace& Y = probe.target;
    BoundaryPoint bp;
    for (int n = probe.n0; n < probe.n_max; ++n)
        bp.step_angles.push_back(angle_at(Y, probe.y0, probe.samples[n - 1].image, probe.samples[n].image));
    BoundaryPointResult res;
    double tail = 0.0;
    for (int m = probe.n_max - 1; m >= probe.n0; --m) {
        tail += bp.step_angles[m - probe.n0];
        const double ratio = tail / angle_tail_bound(a, c, probe.alpha, m);
        bp.worst_tail_ratio = std::max(bp.worst_tail_ratio, ratio);
        if (ratio > 1.0 && res.diagnostics.empty())
            res.diagnostics = "tail angle variation " + std::to_string(tail) + " from n=" + std::to_string(m) +
                              " exceeds the bound " + std::to_string(angle_tail_bound(a, c, probe.alpha, m)) +
                              " at horizon " + std::to_string(probe.n_max);
    }
    if (!res.diagnostics.empty()) return res;
    const Tangent u = log_map(Y, probe.y0, probe.samples.back().image);
    bp.direction = u / norm(u);
    bp.angle = std::atan2(bp.direction[1], bp.direction[0]);
    probe.boundary_found = true;
    res.point = bp;
    return res;
}

// ---------------------------------------------------------------- arc covers

namespace detail {

// Components on the circle; the last may wrap past 2 pi.
inline std::vector<Arc> circle_components(const std::vector<Arc>& arcs) {
    auto A = normalize_arcs(arcs);
    if (A.size() >= 2 && A.front().lo <= 0.0 && A.back().hi >= 2 * pi) {
        A.back().hi = 2 * pi + A.front().hi;
        A.erase(A.begin());
    }
    return A;
}

// Union of the grid cells [t_i - h/2, t_i + h/2] of member directions.
inline std::vector<Arc> cell_arcs(const std::vector<char>& member) {
    const int m = static_cast<int>(member.size());
    const double h = 2 * pi / m;
    std::vector<Arc> out;
    for (int i = 0; i < m; ++i)
        if (member[i]) {
            const double lo = (i - 0.5) * h;
            out.push_back({lo < 0 ? lo + 2 * pi : lo, (lo < 0 ? lo + 2 * pi : lo) + h});
        }
    return out;
}

}  // namespace detail

// Minimal number of closed arcs of radius delta (length 2 delta) covering a
// finite union of arcs: greedy from each component start, best start wins.
inline long long min_arc_cover(const std::vector<Arc>& arcs, double delta) {
    if (!(delta > 0)) throw usage_error("min_arc_cover: delta must be positive");
    const auto C = detail::circle_components(arcs);
    if (C.empty()) return 0;
    const double L = 2 * delta;
    const auto pieces = [&](double len) { return static_cast<long long>(std::ceil(len / L - 1e-12)); };
    if (C.size() == 1 && C[0].hi - C[0].lo >= 2 * pi) return pieces(2 * pi);
    const std::size_t k = C.size();
    long long best = std::numeric_limits<long long>::max();
    for (std::size_t i = 0; i < k; ++i) {
        long long count = 0;
        double covered = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k && count < best; ++j) {
            const std::size_t q = (i + j) % k;
            const double shift = q < i ? 2 * pi : 0.0;
            const double lo = C[q].lo + shift, hi = C[q].hi + shift;
            if (hi <= covered) continue;
            const double start = std::max(lo, covered);
            const long long add = std::max<long long>(1, pieces(hi - start));
            count += add;
            covered = start + add * L;
        }
        best = std::min(best, count);
    }
    return best;
}

// Membership of the grid directions in {xi : d(y0, f(xi_r)) <= alpha r}.
inline std::vector<char> sublevel_directions(const MapSpec& f, const Point& x0, const Point& y0, double alpha,
                                             double r, int grid, int threads = 1) {
    std::vector<char> member(grid, 0);
    detail::parallel_for(grid, threads, [&](int i) {
        const Tangent v = unit_direction(f.source, x0, 2 * pi * i / grid);
        member[i] = dist(f.target, y0, detail::eval_along(f, x0, v, r)) <= alpha * r;
    });
    return member;
}

// Number of radius-delta arcs needed to cover the sampled set
// A_{x0,y0,alpha,r} = {xi : d(y0, f(xi_r)) <= alpha r}.
inline long long property_c_cover_count(const MapSpec& f, const Point& x0, const Point& y0, double alpha, double r,
                                        double delta, int grid = 1 << 14, int threads = 1) {
    if (grid < 8) throw usage_error("property_c_cover_count: grid too small");
    if (!(2 * pi / grid < delta / 4))
        throw usage_error("property_c_cover_count: grid spacing must be below delta/4");
    if (!(r > 0) || !(alpha >= 0)) throw usage_error("property_c_cover_count: need r > 0, alpha >= 0");
    return min_arc_cover(detail::cell_arcs(sublevel_directions(f, x0, y0, alpha, r, grid, threads)), delta);
}

// Covering constants fitted on r_train: C1 = max count e^{-b k' alpha r} with
// balls of radius C2 e^{-a r}; C2 is picked from a dyadic ladder to minimise
// C1 C2^nu (the combination entering the content bound). The fit is then
// tested on r_test.
struct PropertyCFit {
    double C1 = 0.0, C2 = 1.0;
    std::vector<double> r;
    std::vector<long long> counts;  // at the chosen C2
    std::vector<double> bounds;     // C1 e^{b k' alpha r}
    std::vector<char> train;        // 1 for training radii
    double worst_test_ratio = 0.0;  // max count / bound over r_test
    bool test_pass() const { return worst_test_ratio <= 1.0; }
};

struct CurvatureData {
    double a = 1.0, b = 1.0;
    int k_target = 2;  // k' = dim Y
};

inline double nu_alpha(const CurvatureData& K, double alpha) { return K.b * K.k_target * alpha / K.a; }

inline PropertyCFit fit_property_c(const MapSpec& f, const Point& x0, double alpha, const CurvatureData& K,
                                   const std::vector<double>& r_train, const std::vector<double>& r_test, double nu,
                                   int grid = 1 << 14, int threads = 1) {
    if (r_train.empty()) throw usage_error("fit_property_c: empty training range");
    const Point y0 = eval_map(f, x0);
    std::vector<double> rs = r_train;
    rs.insert(rs.end(), r_test.begin(), r_test.end());
    std::vector<std::vector<Arc>> sets;
    for (double r : rs) sets.push_back(detail::cell_arcs(sublevel_directions(f, x0, y0, alpha, r, grid, threads)));
    const double r_max = *std::max_element(rs.begin(), rs.end());
    PropertyCFit best;
    double best_obj = std::numeric_limits<double>::infinity();
    bool any = false;
    for (int j : {0, 1, -1, 2, -2, 3, -3, 4, -4}) {
        const double C2 = std::ldexp(1.0, j);
        if (!(2 * pi / grid < C2 * std::exp(-K.a * r_max) / 4)) continue;
        PropertyCFit fit;
        fit.C2 = C2;
        fit.r = rs;
        for (std::size_t i = 0; i < rs.size(); ++i) {
            fit.counts.push_back(min_arc_cover(sets[i], C2 * std::exp(-K.a * rs[i])));
            fit.train.push_back(i < r_train.size());
            if (i < r_train.size())
                fit.C1 = std::max(fit.C1, fit.counts[i] * std::exp(-K.b * K.k_target * alpha * rs[i]));
        }
        const double obj = fit.C1 * std::pow(C2, nu);
        if (obj < best_obj) {
            best_obj = obj;
            best = fit;
            any = true;
        }
    }
    if (!any) throw usage_error("fit_property_c: grid too coarse for the requested radii");
    for (std::size_t i = 0; i < rs.size(); ++i) {
        best.bounds.push_back(best.C1 * std::exp(K.b * K.k_target * alpha * rs[i]));
        if (!best.train[i])
            best.worst_test_ratio = std::max(best.worst_test_ratio,
                                             best.bounds[i] > 0 ? best.counts[i] / best.bounds[i]
                                                                : (best.counts[i] > 0 ? INFINITY : 0.0));
    }
    return best;
}

// ---------------------------------------------------------------- exceptional sets

// Distances d(f(x0), f(xi_n)) for a uniform grid of directions, n = 1..n_max.
struct DirectionScan {
    MapSpec f;
    Point x0{}, y0{};
    int n_max = 0;
    std::vector<double> angles;
    std::vector<double> d;  // row i holds the n_max distances of direction i

    int size() const { return static_cast<int>(angles.size()); }
    double at(int i, int n) const { return d[static_cast<std::size_t>(i) * n_max + (n - 1)]; }
};

inline DirectionScan scan_directions(const MapSpec& f, const Point& x0, int grid = 1 << 14, int n_max = 64,
                                     int threads = 1) {
    if (grid < 8 || n_max < 1) throw usage_error("scan_directions: need grid >= 8 and n_max >= 1");
    DirectionScan s;
    s.f = f;
    s.x0 = x0;
    s.y0 = eval_map(f, x0);
    s.n_max = n_max;
    s.angles.resize(grid);
    s.d.resize(static_cast<std::size_t>(grid) * n_max);
    detail::parallel_for(grid, threads, [&](int i) {
        s.angles[i] = 2 * pi * i / grid;
        const Tangent v = unit_direction(f.source, x0, s.angles[i]);
        for (int n = 1; n <= n_max; ++n)
            s.d[static_cast<std::size_t>(i) * n_max + (n - 1)] = dist(f.target, s.y0, detail::eval_along(f, x0, v, n));
    });
    return s;
}

inline double scan_speed_hat(const DirectionScan& s, int i, int n0) {
    double v = std::numeric_limits<double>::infinity();
    for (int n = n0; n <= s.n_max; ++n) v = std::min(v, s.at(i, n) / n);
    return v;
}

// Grid directions in A_{x0,alpha}(n0).
inline std::vector<char> grid_membership(const DirectionScan& s, double alpha, int n0) {
    if (n0 < 1 || n0 > s.n_max) throw usage_error("grid_membership: need 1 <= n0 <= n_max");
    std::vector<char> in(s.size(), 0);
    for (int i = 0; i < s.size(); ++i)
        for (int n = n0; n <= s.n_max && !in[i]; ++n) in[i] = s.at(i, n) <= n * alpha;
    return in;
}

namespace detail {

inline bool ray_in_A(const MapSpec& f, const Point& x0, const Point& y0, double angle, double alpha, int n0,
                     int n_max) {
    const Tangent v = unit_direction(f.source, x0, angle);
    for (int n = n0; n <= n_max; ++n)
        if (dist(f.target, y0, eval_along(f, x0, v, n)) <= n * alpha) return true;
    return false;
}

}  // namespace detail

// Arcs of the sampled A_{x0,alpha}(n0). Grid neighbours with different
// membership have the transition located by bisection; components narrower
// than the grid spacing that miss every grid point are not seen.
inline std::vector<Arc> exceptional_arcs(const DirectionScan& s, double alpha, int n0, int bisections = 40) {
    if (n0 < 1 || n0 > s.n_max) throw usage_error("exceptional_arcs: need 1 <= n0 <= n_max");
    const int m = s.size();
    const std::vector<char> in = grid_membership(s, alpha, n0);
    if (std::all_of(in.begin(), in.end(), [](char c) { return c != 0; })) return {{0.0, 2 * pi}};
    const double h = 2 * pi / m;
    // transition between direction i and i+1, as an absolute angle in [t_i, t_i + h]
    const auto transition = [&](int i) {
        const bool left = in[i];
        double lo = s.angles[i], hi = s.angles[i] + h;
        for (int k = 0; k < bisections; ++k) {
            const double mid = 0.5 * (lo + hi);
            (detail::ray_in_A(s.f, s.x0, s.y0, mid, alpha, n0, s.n_max) == left ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    std::vector<Arc> arcs;
    for (int i = 0; i < m; ++i) {
        if (!in[i] || in[(i + m - 1) % m]) continue;  // i starts a run
        int j = i;
        while (in[(j + 1) % m]) ++j;
        double lo = transition((i + m - 1) % m);
        if (i == 0) lo -= 2 * pi;  // predecessor is the last grid direction
        const double hi = transition(j % m) + 2 * pi * (j / m);
        arcs.push_back({lo, hi});
    }
    return normalize_arcs(arcs);
}

// C_{3,alpha,nu} = C1 C2^nu / (1 - e^{-a (nu - nu_alpha)})
inline double c3_constant(double C1, double C2, double nu, double nu_a, double a) {
    if (!(nu > nu_a)) throw usage_error("c3_constant: need nu > nu_alpha");
    return C1 * std::pow(C2, nu) / (1.0 - std::exp(-a * (nu - nu_a)));
}

struct ContentRow {
    int n0 = 0;
    double nu = 0.0;
    double content = 0.0;  // dyadic cover value of H^nu_inf of the sampled set
    double bound = 0.0;    // C3 e^{-a (nu - nu_alpha) n0}
    double length = 0.0;   // total arc length of the sampled set
};

inline ContentRow exceptional_set_content(const DirectionScan& s, double alpha, int n0, double nu,
                                          const CurvatureData& K, double C1, double C2) {
    const double na = nu_alpha(K, alpha);
    if (!(nu > na)) throw usage_error("exceptional_set_content: need nu > nu_alpha = " + std::to_string(na));
    const auto arcs = exceptional_arcs(s, alpha, n0);
    ContentRow row;
    row.n0 = n0;
    row.nu = nu;
    row.content = arcs.empty() ? 0.0 : hausdorff_content(arcs, nu, 30);
    row.bound = c3_constant(C1, C2, nu, na, K.a) * std::exp(-K.a * (nu - na) * n0);
    row.length = arcs_length(arcs);
    return row;
}

inline ContentRow exceptional_set_content(const MapSpec& f, const Point& x0, double alpha, int n0, double nu,
                                          const CurvatureData& K, double C1, double C2, int grid = 1 << 14,
                                          int n_max = 64) {
    if (!(nu > nu_alpha(K, alpha))) throw usage_error("exceptional_set_content: need nu > nu_alpha");
    return exceptional_set_content(scan_directions(f, x0, grid, n_max), alpha, n0, nu, K, C1, C2);
}

// Least-squares slope of log(content) against n0 over rows with content > 0.
inline double log_linear_slope(const std::vector<ContentRow>& rows) {
    std::vector<double> xs, ys;
    for (const auto& r : rows)
        if (r.content > 0) {
            xs.push_back(r.n0);
            ys.push_back(std::log(r.content));
        }
    if (xs.size() < 2) throw usage_error("log_linear_slope: fewer than 2 nonzero rows");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// sigma(A) against M C3 e^{-a (nu - nu_alpha) n0} for an (M, nu)-Frostman
// measure sigma given by an estimate at x0 in the same angle convention.
struct FrostmanTransfer {
    double sigma = 0.0;
    double bound = 0.0;
    bool pass() const { return sigma <= bound; }
};

inline FrostmanTransfer frostman_transfer(const std::vector<Arc>& arcs, const HarmonicMeasureEstimate& e, double M,
                                          double C3, double nu, double nu_a, double a, int n0) {
    return {measure_of_arcs(e, arcs), M * C3 * std::exp(-a * (nu - nu_a) * n0)};
}

// ---------------------------------------------------------------- fibres

inline double beta_alpha(double alpha, double c) { return alpha * alpha / (2 * alpha + c); }

// smallest admissible n0 >= 4 e^{2ac} / (1 - e^{-a beta})
inline int fiber_n0(double a, double c, double beta) {
    return static_cast<int>(std::ceil(4.0 * std::exp(2 * a * c) / (1.0 - std::exp(-a * beta)) - 1e-12));
}

inline double angle_floor(double b, double c, int n0) { return 0.5 * std::exp(-2.0 * n0 * b * c); }

struct FiberPairReport {
    bool in_B = false;
    double beta = 0.0;
    double ell0 = 0.0;            // 4 n0 c / alpha
    double floor = 0.0;           // e^{-2 n0 b c} / 2
    double min_angle = 0.0;       // over sampled n, p >= ell0 (pi when none sampled)
    long long pairs_checked = 0;  // (n, p) pairs with n, p >= ell0
    long long violations = 0;     // angles below the floor, counted when not in B
};

namespace detail {

inline std::vector<Tangent> unit_logs(const RayProbe& p) {
    std::vector<Tangent> out;
    for (const auto& s : p.samples) {
        const Tangent u = log_map(p.target, p.y0, s.image);
        const double l = norm(u);
        out.push_back(l > 0 ? u / l : Tangent{0, 0, 0});
    }
    return out;
}

}  // namespace detail

inline FiberPairReport classify_fiber_pair(const RayProbe& xi, const RayProbe& eta, double alpha, int n0,
                                           const CurvatureData& K, double c) {
    if (!(alpha > 0) || !(c > 0)) throw usage_error("classify_fiber_pair: alpha and c must be positive");
    if (xi.n_max != eta.n_max || dist(xi.target, xi.y0, eta.y0) > 1e-12)
        throw usage_error("classify_fiber_pair: probes must share base point and horizon");
    FiberPairReport r;
    r.beta = beta_alpha(alpha, c);
    if (n0 < fiber_n0(K.a, c, r.beta))
        throw usage_error("classify_fiber_pair: n0 below 4e^{2ac}/(1-e^{-a beta}) = " +
                          std::to_string(fiber_n0(K.a, c, r.beta)));
    if (n0 > xi.n_max) throw usage_error("classify_fiber_pair: n0 beyond the probe horizon");
    if (in_A(xi, alpha, n0) || in_A(eta, alpha, n0))
        throw usage_error("classify_fiber_pair: both directions must lie outside A_{x0,alpha}(n0)");
    const ModelSpace& Y = xi.target;
    const int N = xi.n_max;
    for (int n = n0; n <= N && !r.in_B; ++n)
        for (int p = n0; p <= N; ++p)
            if (dist(Y, xi.samples[n - 1].image, eta.samples[p - 1].image) <= (n + p) * r.beta) {
                r.in_B = true;
                break;
            }
    r.ell0 = 4.0 * n0 * c / alpha;
    r.floor = angle_floor(K.b, c, n0);
    r.min_angle = pi;
    const int start = static_cast<int>(std::ceil(r.ell0 - 1e-12));
    if (start <= N) {
        const auto U = detail::unit_logs(xi), V = detail::unit_logs(eta);
        for (int n = start; n <= N; ++n)
            for (int p = start; p <= N; ++p) {
                const double t = vec_angle(U[n - 1], V[p - 1]);
                r.min_angle = std::min(r.min_angle, t);
                ++r.pairs_checked;
                if (!r.in_B && t < r.floor) ++r.violations;
            }
    }
    return r;
}

// Direct check of the angle lemma on two sequences with y_0 = z_0: under
// steps <= c, d(y0, y_n) >= n alpha, d(y0, z_p) >= p alpha and
// d(y_n, z_p) >= (n + p) beta for n, p >= n0, every angle at y0 between y_n
// and z_p with n, p >= 4 n0 c / alpha is at least e^{-2 n0 b c} / 2.
struct AngleLemmaReport {
    int n0 = 0;
    double ell0 = 0.0;
    double floor = 0.0;
    bool hypotheses_hold = false;
    std::string failed_hypothesis;
    double min_angle = pi;
    long long pairs = 0;
    long long violations = 0;
};

inline AngleLemmaReport check_angle_lemma(const ModelSpace& Y, const std::vector<Point>& ys,
                                          const std::vector<Point>& zs, const CurvatureData& K, double c,
                                          double alpha, double beta) {
    if (!(c >= alpha && alpha >= beta && beta > 0)) throw usage_error("check_angle_lemma: need c >= alpha >= beta > 0");
    if (ys.empty() || zs.empty() || dist(Y, ys[0], zs[0]) > 1e-12)
        throw usage_error("check_angle_lemma: sequences must start at the same point");
    AngleLemmaReport r;
    r.n0 = fiber_n0(K.a, c, beta);
    r.ell0 = 4.0 * r.n0 * c / alpha;
    r.floor = angle_floor(K.b, c, r.n0);
    const int N = static_cast<int>(ys.size()) - 1, P = static_cast<int>(zs.size()) - 1;
    const int start = static_cast<int>(std::ceil(r.ell0 - 1e-12));
    if (N < start || P < start) throw usage_error("check_angle_lemma: sequences shorter than ell0");
    const Point& y0 = ys[0];
    const double slack = 1e-9;
    const auto fail = [&](const std::string& why) {
        r.failed_hypothesis = why;
        return r;
    };
    for (int n = 0; n < N; ++n)
        if (dist(Y, ys[n], ys[n + 1]) > c + slack) return fail("step of y exceeds c at n=" + std::to_string(n));
    for (int p = 0; p < P; ++p)
        if (dist(Y, zs[p], zs[p + 1]) > c + slack) return fail("step of z exceeds c at p=" + std::to_string(p));
    for (int n = r.n0; n <= N; ++n)
        if (dist(Y, y0, ys[n]) < n * alpha - slack) return fail("y slower than alpha at n=" + std::to_string(n));
    for (int p = r.n0; p <= P; ++p)
        if (dist(Y, y0, zs[p]) < p * alpha - slack) return fail("z slower than alpha at p=" + std::to_string(p));
    for (int n = r.n0; n <= N; ++n)
        for (int p = r.n0; p <= P; ++p)
            if (dist(Y, ys[n], zs[p]) < (n + p) * beta - slack)
                return fail("d(y_n, z_p) below (n+p) beta at n=" + std::to_string(n) + ", p=" + std::to_string(p));
    r.hypotheses_hold = true;
    std::vector<Tangent> U, V;
    for (int n = start; n <= N; ++n) U.push_back(log_map(Y, y0, ys[n]));
    for (int p = start; p <= P; ++p) V.push_back(log_map(Y, y0, zs[p]));
    for (const auto& u : U)
        for (const auto& v : V) {
            const double t = vec_angle(u, v);
            r.min_angle = std::min(r.min_angle, t);
            ++r.pairs;
            if (t < r.floor) ++r.violations;
        }
    return r;
}

// Quasi-geodesic sequence in the half-plane from y0 towards the boundary
// point infinity (or 0): y_n sits at distance speed n along the geodesic and is
// pushed off it perpendicularly by w_n, w_n uniform in [-wobble, wobble].
// Rays to 0 and infinity keep full relative precision in coordinates, which
// generic directions lose beyond distance ~35.
inline std::vector<Point> wobbly_ray(const Point& y0, bool toward_zero, double speed, double wobble, int len,
                                     Rng& rng) {
    const auto inv = [](const Point& z) {  // z -> -1/z swaps 0 and infinity
        const double r = std::hypot(z[0], z[1]);
        return Point{-z[0] / r / r, z[1] / r / r, 0.0};
    };
    const Point b = toward_zero ? inv(y0) : y0;
    std::vector<Point> out{y0};
    for (int n = 1; n <= len; ++n) {
        const double h = b[1] * std::exp(speed * n), w = uniform(rng, -wobble, wobble);
        const Point p{b[0] + h * std::tanh(w), h / std::cosh(w), 0.0};
        out.push_back(toward_zero ? inv(p) : p);
    }
    return out;
}

// ---------------------------------------------------------------- CSV

struct ProbeRow {
    double angle;
    double speed_hat;
    bool in_A;
    double boundary_angle;  // NaN when no boundary point was certified
};

inline ProbeRow probe_row(RayProbe& p, double a, double c) {
    double ba = std::numeric_limits<double>::quiet_NaN();
    if (p.alpha > 0 && p.speed_hat >= p.alpha) {
        const auto bp = boundary_point(p, a, c);
        if (bp) ba = bp.point->angle;
    }
    return {p.angle, p.speed_hat, p.in_A, ba};
}

inline void write_probe_csv(std::ostream& os, const std::vector<ProbeRow>& rows) {
    os << "angle,speed_hat,inA,boundary_angle\n";
    os.precision(17);
    for (const auto& r : rows) os << r.angle << ',' << r.speed_hat << ',' << (r.in_A ? 1 : 0) << ',' << r.boundary_angle << '\n';
}

inline void write_content_csv(std::ostream& os, const std::vector<ContentRow>& rows) {
    os << "n0,nu,content,paper_bound\n";
    os.precision(17);
    for (const auto& r : rows) os << r.n0 << ',' << r.nu << ',' << r.content << ',' << r.bound << '\n';
}

}  // namespace hhmap
