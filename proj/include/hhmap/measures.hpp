#pragma once

// Harmonic measure on geodesic spheres, Frostman fits, and Hausdorff content
// and box-counting dimension for finite unions of arcs of directions.

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>
#include <thread>
#include <vector>

#include "hhmap/geometry.hpp"

namespace hhmap {

// ---------------------------------------------------------------- disk frame

// Conformal chart of a surface sending x to 0 in the unit disk; directions at
// x are the disk angles up to a fixed rotation (and reflection).
class DiskFrame {
public:
    DiskFrame(const ModelSpace& X, const Point& x) : X_(X), x_(x) {
        if (X.dim() != 2) throw usage_error("DiskFrame: surfaces only");
        xd_ = X.model == Model::disk2 ? x : halfplane_to_disk(x);
        const double l = conformal_factor(X, x);
        const double e = 1e-3;
        const auto arg = [&](const Tangent& v) { return std::arg(to_disk(exp_map(X, x, v / l, e))); };
        rot_ = arg({1, 0, 0});
        const double a2 = std::remainder(arg({0, 1, 0}) - rot_, 2 * pi);
        flip_ = a2 < 0;
    }

    std::complex<double> to_disk(const Point& p) const {
        const Point d = X_.model == Model::disk2 ? p : halfplane_to_disk(p);
        return detail::mobius_to0(detail::to_c(xd_), detail::to_c(d));
    }
    Point from_disk(std::complex<double> w) const {
        const Point d = detail::from_c(detail::mobius_from0(detail::to_c(xd_), w));
        return X_.model == Model::disk2 ? d : disk_to_halfplane(d);
    }
    // direction angle at x in [0, 2 pi) of the disk angle phi
    double direction(double phi) const {
        const double t = flip_ ? rot_ - phi : phi - rot_;
        return wrap(t);
    }
    double disk_angle(double theta) const { return flip_ ? rot_ - theta : theta + rot_; }
    // Euclidean radius of S(x, r) in the disk picture
    double disk_radius(double r) const { return std::tanh(X_.a * r / 2.0); }

    static double wrap(double t) {
        t = std::fmod(t, 2 * pi);
        return t < 0 ? t + 2 * pi : t;
    }

private:
    ModelSpace X_;
    Point x_, xd_;
    double rot_ = 0.0;
    bool flip_ = false;
};

// ---------------------------------------------------------------- harmonic measure

struct HarmonicMeasureEstimate {
    Point x;
    double r = 0.0;
    Point probe;
    int bins = 16;
    std::vector<double> hist;     // mass per direction bin [2 pi j / bins, 2 pi (j+1) / bins)
    std::vector<double> angles;   // exit directions at x
    long long samples = 0;
    std::uint64_t seed = 0;
    bool exact_uniform = false;   // probe at the centre of a surface sphere
    bool approximate = false;     // geodesic random walk (3D)
};

namespace detail {

// counter-based stream: one splitmix64 output per draw
struct Stream {
    std::uint64_t key, ctr = 0;
    double next() { return static_cast<double>(derive_seed(key, ctr++) >> 11) * 0x1.0p-53; }
};

}  // namespace detail

struct HarmonicOptions {
    int bins = 16;
    double shell = 1e-6;      // walk-on-spheres stop distance, relative to the radius
    double step = 1e-2;       // 3D geodesic walk step
    int threads = 1;
};

// Exit distribution on S(x, r) of Brownian motion started at probe.
inline HarmonicMeasureEstimate harmonic_measure_mc(const ModelSpace& X, const Point& x, double r, const Point& probe,
                                                   long long n, std::uint64_t seed, const HarmonicOptions& opt = {}) {
    if (!(r > 0) || n <= 0) throw usage_error("harmonic_measure_mc: need r > 0 and n > 0");
    if (opt.bins < 1 || (opt.bins & (opt.bins - 1))) throw usage_error("harmonic_measure_mc: bins must be a power of two");
    if (!(dist(X, x, probe) < r)) throw usage_error("harmonic_measure_mc: probe must lie inside B(x, r)");
    HarmonicMeasureEstimate est;
    est.x = x;
    est.r = r;
    est.probe = probe;
    est.bins = opt.bins;
    est.samples = n;
    est.seed = seed;
    est.angles.resize(n);
    const int T = std::max(1, opt.threads);

    if (X.dim() == 2) {
        const DiskFrame frame(X, x);
        const double rho = frame.disk_radius(r);
        const std::complex<double> w0 = frame.to_disk(probe);
        est.exact_uniform = std::abs(w0) == 0.0;
        auto work = [&](long long lo, long long hi) {
            for (long long i = lo; i < hi; ++i) {
                detail::Stream s{derive_seed(seed, static_cast<std::uint64_t>(i))};
                std::complex<double> w = w0;
                for (;;) {
                    const double R = rho - std::abs(w);
                    if (R < opt.shell * rho) break;
                    w += std::polar(R, 2 * pi * s.next());
                }
                est.angles[i] = frame.direction(std::arg(w));
            }
        };
        std::vector<std::thread> pool;
        for (int t = 0; t < T; ++t) pool.emplace_back(work, n * t / T, n * (t + 1) / T);
        for (auto& th : pool) th.join();
    } else {
        // geodesic random walk: exit polar angle from the height axis at x
        est.approximate = true;
        auto work = [&](long long lo, long long hi) {
            for (long long i = lo; i < hi; ++i) {
                detail::Stream s{derive_seed(seed, static_cast<std::uint64_t>(i))};
                Point p = probe;
                while (dist(X, x, p) < r) {
                    const double u = 2 * s.next() - 1, ph = 2 * pi * s.next();
                    const double q = std::sqrt(1 - u * u);
                    const Tangent v{q * std::cos(ph), q * std::sin(ph), u};
                    p = exp_map(X, p, v / metric_norm(X, p, v), opt.step);
                }
                const Tangent l = log_map(X, x, p);
                est.angles[i] = std::acos(std::clamp(l[2] / norm(l), -1.0, 1.0));
            }
        };
        std::vector<std::thread> pool;
        for (int t = 0; t < T; ++t) pool.emplace_back(work, n * t / T, n * (t + 1) / T);
        for (auto& th : pool) th.join();
    }

    std::vector<long long> counts(opt.bins, 0);
    for (double a : est.angles) {
        int b;
        if (X.dim() == 2)
            b = static_cast<int>(a / (2 * pi) * opt.bins);
        else  // bins uniform in cos of the polar angle
            b = static_cast<int>((1.0 - std::cos(a)) / 2.0 * opt.bins);
        ++counts[std::clamp(b, 0, opt.bins - 1)];
    }
    est.hist.resize(opt.bins);
    for (int b = 0; b < opt.bins; ++b) est.hist[b] = static_cast<double>(counts[b]) / n;
    return est;
}

// Euclidean Poisson kernel of the disk of radius rho at w, integrated over
// the disk-angle interval [p0, p1] by composite Gauss-Legendre.
inline double poisson_arc_mass(std::complex<double> w, double rho, double p0, double p1) {
    static const double gx[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                 -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                 0.7966664774136267,  0.9602898564975363};
    static const double gw[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                                 0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
    const int panels = 256;
    const double h = (p1 - p0) / panels;
    const double num = rho * rho - std::norm(w);
    double s = 0.0;
    for (int k = 0; k < panels; ++k)
        for (int j = 0; j < 8; ++j) {
            const double phi = p0 + h * (k + 0.5 + 0.5 * gx[j]);
            s += 0.5 * h * gw[j] * num / std::norm(std::polar(rho, phi) - w);
        }
    return s / (2 * pi);
}

// Exact bin masses of the harmonic measure (surfaces).
inline std::vector<double> poisson_bin_masses(const ModelSpace& X, const Point& x, double r, const Point& probe,
                                              int bins) {
    const DiskFrame frame(X, x);
    const double rho = frame.disk_radius(r);
    const std::complex<double> w = frame.to_disk(probe);
    std::vector<double> out(bins);
    for (int b = 0; b < bins; ++b) {
        double p0 = frame.disk_angle(2 * pi * b / bins), p1 = frame.disk_angle(2 * pi * (b + 1) / bins);
        if (p1 < p0) std::swap(p0, p1);
        out[b] = poisson_arc_mass(w, rho, p0, p1);
    }
    return out;
}

// Chi-square statistic of the histogram against expected bin masses.
inline double chi_square(const HarmonicMeasureEstimate& e, const std::vector<double>& expected) {
    double c = 0.0;
    for (int b = 0; b < e.bins; ++b) c += sqr(e.hist[b] - expected[b]) * e.samples / expected[b];
    return c;
}

inline void write_histogram_csv(std::ostream& os, const HarmonicMeasureEstimate& e) {
    os << "bin_lo,bin_hi,mass\n";
    os.precision(17);
    for (int b = 0; b < e.bins; ++b)
        os << 2 * pi * b / e.bins << ',' << 2 * pi * (b + 1) / e.bins << ',' << e.hist[b] << '\n';
}

// ---------------------------------------------------------------- arcs

// Closed arc [lo, hi] of directions with 0 <= lo <= hi <= 2 pi.
struct Arc {
    double lo;
    double hi;
};

// Sorted, merged, wrap-split arc list.
inline std::vector<Arc> normalize_arcs(std::vector<Arc> arcs) {
    std::vector<Arc> split;
    for (auto a : arcs) {
        if (a.hi < a.lo) throw usage_error("arc with hi < lo");
        if (a.hi - a.lo >= 2 * pi) return {{0.0, 2 * pi}};
        const double lo = DiskFrame::wrap(a.lo), hi = lo + (a.hi - a.lo);
        if (hi > 2 * pi) {
            split.push_back({lo, 2 * pi});
            split.push_back({0.0, hi - 2 * pi});
        } else {
            split.push_back({lo, hi});
        }
    }
    std::sort(split.begin(), split.end(), [](const Arc& p, const Arc& q) { return p.lo < q.lo; });
    std::vector<Arc> out;
    for (const auto& a : split) {
        if (!out.empty() && a.lo <= out.back().hi)
            out.back().hi = std::max(out.back().hi, a.hi);
        else
            out.push_back(a);
    }
    return out;
}

inline double arcs_length(const std::vector<Arc>& arcs) {
    double s = 0.0;
    for (const auto& a : normalize_arcs(arcs)) s += a.hi - a.lo;
    return s;
}

// Fraction of the estimate's exit directions inside the arcs.
inline double measure_of_arcs(const HarmonicMeasureEstimate& e, const std::vector<Arc>& arcs) {
    if (e.exact_uniform) return arcs_length(arcs) / (2 * pi);
    const auto A = normalize_arcs(arcs);
    long long c = 0;
    for (double t : e.angles)
        for (const auto& a : A)
            if (t >= a.lo && t <= a.hi) {
                ++c;
                break;
            }
    return static_cast<double>(c) / e.samples;
}

// ---------------------------------------------------------------- Frostman fit

struct FrostmanEstimate {
    double M = 1.0;
    double N = 1.0;
    std::vector<double> thetas;     // cone widths
    std::vector<double> lower;      // min over orientations of sigma(C_theta)
    std::vector<double> upper;      // max over orientations
};

// sigma of cones (arcs) of width theta, min and max over orientations
inline std::pair<double, double> cone_measure_range(const HarmonicMeasureEstimate& e, double theta,
                                                    int orientations = 64) {
    if (e.exact_uniform) return {theta / (2 * pi), theta / (2 * pi)};
    std::vector<double> a = e.angles;
    std::sort(a.begin(), a.end());
    const auto count_in = [&](double lo, double hi) {  // [lo, hi] within [0, 2 pi]
        return static_cast<long long>(std::upper_bound(a.begin(), a.end(), hi) -
                                      std::lower_bound(a.begin(), a.end(), lo));
    };
    double mn = 1.0, mx = 0.0;
    for (int k = 0; k < orientations; ++k) {
        const double lo = 2 * pi * k / orientations, hi = lo + theta;
        long long c = hi <= 2 * pi ? count_in(lo, hi) : count_in(lo, 2 * pi) + count_in(0.0, hi - 2 * pi);
        const double s = static_cast<double>(c) / e.samples;
        mn = std::min(mn, s);
        mx = std::max(mx, s);
    }
    return {mn, mx};
}

// Smallest M >= 1 (over N >= 1) with theta^N / M <= sigma(C_theta) <= M theta^(1/N)
// on the dyadic grid theta = pi 2^-j.
inline FrostmanEstimate frostman_fit(const HarmonicMeasureEstimate& e, int levels = 8, double N_max = 8.0,
                                     double N_step = 1e-3) {
    if (e.samples <= 0) throw usage_error("frostman_fit: empty estimate");
    FrostmanEstimate f;
    for (int j = 0; j < levels; ++j) {
        const double t = pi * std::ldexp(1.0, -j);
        const auto [lo, hi] = cone_measure_range(e, t);
        f.thetas.push_back(t);
        f.lower.push_back(lo);
        f.upper.push_back(hi);
    }
    f.M = std::numeric_limits<double>::infinity();
    for (double N = 1.0; N <= N_max + 1e-12; N += N_step) {
        double M = 1.0;
        for (size_t j = 0; j < f.thetas.size(); ++j) {
            M = std::max(M, f.lower[j] > 0 ? std::pow(f.thetas[j], N) / f.lower[j]
                                           : std::numeric_limits<double>::infinity());
            M = std::max(M, f.upper[j] / std::pow(f.thetas[j], 1.0 / N));
        }
        if (M < f.M) {
            f.M = M;
            f.N = N;
        }
    }
    return f;
}

// ---------------------------------------------------------------- Hausdorff content

namespace detail {

// hull length of A within [lo, hi]
inline double hull_in(const std::vector<Arc>& A, double lo, double hi) {
    double a = std::numeric_limits<double>::infinity(), b = -a;
    for (const auto& x : A) {
        if (x.hi < lo || x.lo > hi) continue;
        a = std::min(a, std::max(x.lo, lo));
        b = std::max(b, std::min(x.hi, hi));
    }
    return b >= a ? b - a : -1.0;
}

inline double content_rec(const std::vector<Arc>& A, double lo, double hi, double nu, int depth) {
    const double h = hull_in(A, lo, hi);
    if (h < 0) return 0.0;
    const double whole = std::pow(std::min(h, pi), nu);
    if (depth == 0 || h == 0.0) return whole;
    const double mid = 0.5 * (lo + hi);
    std::vector<Arc> sub;
    for (const auto& x : A)
        if (!(x.hi < lo || x.lo > hi)) sub.push_back(x);
    return std::min(whole, content_rec(sub, lo, mid, nu, depth - 1) + content_rec(sub, mid, hi, nu, depth - 1));
}

}  // namespace detail

// Dyadic cover value of H^nu_inf for an arc set (an upper bound on the content);
// the diameter of an arc is min(length, pi).
inline double hausdorff_content(const std::vector<Arc>& arcs, double nu, int depth = 20) {
    if (!(nu > 0)) throw usage_error("hausdorff_content: nu must be positive");
    const auto A = normalize_arcs(arcs);
    if (A.empty()) return 0.0;
    return detail::content_rec(A, 0.0, 2 * pi, nu, depth);
}

// ---------------------------------------------------------------- box counting

struct BoxCount {
    double dimension = 0.0;
    std::vector<double> scales;
    std::vector<long long> counts;
    double residual = 0.0;  // rms of the log-log fit
};

// Number of intervals [k delta, (k+1) delta) meeting the arc set.
inline long long box_count(const std::vector<Arc>& A, double delta) {
    long long n = 0, last = -1;
    for (const auto& a : A) {
        long long k0 = static_cast<long long>(std::floor(a.lo / delta));
        // the point 2 pi is the point 0
        const long long k1 = std::min(static_cast<long long>(std::floor(a.hi / delta)),
                                      static_cast<long long>(std::ceil(2 * pi / delta)) - 1);
        k0 = std::max(k0, last + 1);
        if (k1 >= k0) n += k1 - k0 + 1;
        last = std::max(last, k1);
    }
    return n;
}

// Least-squares slope of log N(delta) against log(1/delta), delta = 2 pi 2^-j.
inline BoxCount boxcount_dimension(const std::vector<Arc>& arcs, int j_min, int j_max) {
    if (j_max - j_min + 1 < 4) throw usage_error("boxcount_dimension: need at least 4 scales");
    const auto A = normalize_arcs(arcs);
    BoxCount bc;
    std::vector<double> xs, ys;
    for (int j = j_min; j <= j_max; ++j) {
        const double d = 2 * pi * std::ldexp(1.0, -j);
        const long long c = box_count(A, d);
        bc.scales.push_back(d);
        bc.counts.push_back(c);
        if (c > 0) {
            xs.push_back(std::log(1.0 / d));
            ys.push_back(std::log(static_cast<double>(c)));
        }
    }
    if (xs.size() < 2) throw usage_error("boxcount_dimension: fewer than 2 nonempty scales");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    bc.dimension = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icpt = (sy - bc.dimension * sx) / n;
    for (size_t i = 0; i < xs.size(); ++i) bc.residual += sqr(ys[i] - icpt - bc.dimension * xs[i]);
    bc.residual = std::sqrt(bc.residual / n);
    return bc;
}

inline void write_boxcount_csv(std::ostream& os, const BoxCount& bc) {
    os << "scale,count\n";
    os.precision(17);
    for (size_t i = 0; i < bc.scales.size(); ++i) os << bc.scales[i] << ',' << bc.counts[i] << '\n';
}

// Middle-thirds Cantor set of the given level inside [lo, hi].
inline std::vector<Arc> cantor_arcs(double lo, double hi, int level) {
    std::vector<Arc> a{{lo, hi}};
    for (int l = 0; l < level; ++l) {
        std::vector<Arc> n;
        for (const auto& x : a) {
            const double t = (x.hi - x.lo) / 3.0;
            n.push_back({x.lo, x.lo + t});
            n.push_back({x.hi - t, x.hi});
        }
        a = std::move(n);
    }
    return a;
}

}  // namespace hhmap
