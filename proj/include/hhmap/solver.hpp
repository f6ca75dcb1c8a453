#pragma once

// Dirichlet problem for harmonic maps from a geodesic ball of a hyperbolic
// surface into the half-plane or half-space: polar mesh, tension field,
// semi-implicit heat flow, and geodesic interpolation of solutions.

#include <Eigen/Sparse>
#include <Eigen/UmfPackSupport>
#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hhmap/maps.hpp"

namespace hhmap {

// Finite-difference weights for derivatives 0..m at z from nodes x (Fornberg).
inline std::vector<std::vector<double>> fornberg_weights(double z, const std::vector<double>& x, int m) {
    const int n = static_cast<int>(x.size()) - 1;
    std::vector<std::vector<double>> c(m + 1, std::vector<double>(n + 1, 0.0));
    double c1 = 1.0, c4 = x[0] - z;
    c[0][0] = 1.0;
    for (int i = 1; i <= n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - z;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    return c;
}

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Geodesic polar grid of B(O, R): node 0 is O; ring i carries ring_count[i]
// nodes at distance i R / n_r, equally spaced in angle from direction 0. Ring
// counts are n_theta 2^b, doubled outward until the arc spacing is at most
// max_arc (rings 1, 2 keep n_theta). Operators act on node values: lap is
// Laplace-Beltrami, grad[0], grad[1] are derivatives along an orthonormal
// frame (radial/angular on rings, coordinate axes at O).
struct Mesh {
    ModelSpace space;
    Point centre;
    double R = 0.0;
    int n_r = 0, n_theta = 0;
    double max_arc = 0.0;
    double ds = 0.0;
    std::vector<int> ring_count, ring_start;
    std::vector<Point> nodes;
    std::vector<double> s, theta;
    std::vector<bool> boundary;
    std::vector<double> conformal;   // lambda at the node
    std::vector<double> weight;      // area quadrature
    SpMat lap;
    SpMat grad[2];

    int size() const { return static_cast<int>(nodes.size()); }
    double dtheta(int ring) const { return 2 * pi / ring_count[ring]; }
    // ring < 0 is ring -ring in the opposite direction
    int index(int ring, int j) const {
        if (ring == 0) return 0;
        if (ring < 0) {
            ring = -ring;
            j += ring_count[ring] / 2;
        }
        const int c = ring_count[ring];
        j = ((j % c) + c) % c;
        return ring_start[ring] + j;
    }
    int ring_of(int node) const {
        return static_cast<int>(std::upper_bound(ring_start.begin(), ring_start.end(), node) - ring_start.begin()) - 1;
    }
    // node weights reproducing the value on ring `ring` at angle phi
    // (exact on grid angles, 6-point periodic Lagrange otherwise)
    std::vector<std::pair<int, double>> ring_sample(int ring, double phi) const {
        if (ring == 0) return {{0, 1.0}};
        if (ring < 0) {
            ring = -ring;
            phi += pi;
        }
        const double u = phi / dtheta(ring);
        const double r = std::round(u);
        if (std::abs(u - r) < 1e-9) return {{index(ring, static_cast<int>(r)), 1.0}};
        const int j0 = static_cast<int>(std::floor(u));
        std::vector<double> xs;
        for (int o = -2; o <= 3; ++o) xs.push_back(j0 + o);
        const auto w = fornberg_weights(u, xs, 0);
        std::vector<std::pair<int, double>> out;
        for (int o = 0; o < 6; ++o) out.emplace_back(index(ring, j0 - 2 + o), w[0][o]);
        return out;
    }
};

inline std::shared_ptr<const Mesh> build_polar_mesh(const ModelSpace& X, double R, int n_r, int n_theta,
                                                    double max_arc = std::numeric_limits<double>::infinity()) {
    if (X.dim() != 2) throw usage_error("build_polar_mesh: source must be a surface");
    if (!(R > 0) || !std::isfinite(R) || n_r < 8 || n_theta < 16 || n_theta % 2 || !(max_arc > 0))
        throw usage_error("build_polar_mesh: need R > 0, n_r >= 8, even n_theta >= 16, max_arc > 0");
    auto M = std::make_shared<Mesh>();
    Mesh& m = *M;
    m.space = X;
    m.centre = origin(X);
    m.R = R;
    m.n_r = n_r;
    m.n_theta = n_theta;
    m.max_arc = max_arc;
    m.ds = R / n_r;
    const double a = X.a;
    const double l0 = conformal_factor(X, m.centre);
    const auto S = [a](double s) { return std::sinh(a * s) / a; };
    m.ring_count.assign(n_r + 1, 1);
    m.ring_start.assign(n_r + 1, 0);
    int N = 1;
    for (int i = 1; i <= n_r; ++i) {
        int c = std::max(n_theta, i > 1 ? m.ring_count[i - 1] : n_theta);
        if (i > 2)
            while (2 * pi * S(i * m.ds) / c > max_arc) {
                if (c > (1 << 24)) throw usage_error("build_polar_mesh: max_arc too small for R");
                c *= 2;
            }
        m.ring_count[i] = c;
        m.ring_start[i] = N;
        N += c;
    }
    m.nodes.resize(N);
    m.s.assign(N, 0.0);
    m.theta.assign(N, 0.0);
    m.boundary.assign(N, false);
    m.conformal.resize(N);
    m.weight.resize(N);
    m.nodes[0] = m.centre;
    m.weight[0] = 2 * pi / (a * a) * (std::cosh(a * m.ds / 2) - 1);
    for (int i = 1; i <= n_r; ++i)
        for (int j = 0; j < m.ring_count[i]; ++j) {
            const int k = m.index(i, j);
            m.s[k] = i * m.ds;
            m.theta[k] = j * m.dtheta(i);
            m.nodes[k] = exp_map(X, m.centre, Tangent{std::cos(m.theta[k]), std::sin(m.theta[k]), 0.0} / l0, m.s[k]);
            m.boundary[k] = i == n_r;
            m.weight[k] = (i == n_r ? 0.5 : 1.0) * S(m.s[k]) * m.ds * m.dtheta(i);
        }
    for (int k = 0; k < N; ++k) m.conformal[k] = conformal_factor(X, m.nodes[k]);

    using Trip = Eigen::Triplet<double>;
    std::vector<Trip> tl, tg0, tg1;
    const double h = m.ds;
    // centre: lines through O in directions theta_k, k < n_theta / 2
    {
        const double d1[5] = {1, -8, 0, 8, -1}, d2[5] = {-1, 16, -30, 16, -1};
        const int half = n_theta / 2;
        for (int k = 0; k < half; ++k) {
            const double c = std::cos(k * m.dtheta(1)), sn = std::sin(k * m.dtheta(1));
            for (int o = -2; o <= 2; ++o) {
                const int node = m.index(o, k);
                tl.emplace_back(0, node, 2.0 / half * d2[o + 2] / (12 * h * h));
                tg0.emplace_back(0, node, 2.0 / half * c * d1[o + 2] / (12 * h));
                tg1.emplace_back(0, node, 2.0 / half * sn * d1[o + 2] / (12 * h));
            }
        }
    }
    const double a1[5] = {1, -8, 0, 8, -1}, a2[5] = {-1, 16, -30, 16, -1};
    for (int i = 1; i < n_r; ++i) {
        // centred 5-point rows; the last interior ring uses 6 points, one-sided
        const int lo = i + 2 <= n_r ? i - 2 : i - 4;
        const int np = i + 2 <= n_r ? 5 : 6;
        std::vector<double> xs;
        for (int o = 0; o < np; ++o) xs.push_back((lo + o) * h);
        const auto w = fornberg_weights(i * h, xs, 2);
        const double sa = S(i * h);
        const double cth = a / std::tanh(a * i * h);
        const double dth = m.dtheta(i);
        for (int j = 0; j < m.ring_count[i]; ++j) {
            const int row = m.index(i, j);
            for (int o = 0; o < np; ++o)
                for (const auto& [node, c] : m.ring_sample(lo + o, j * dth)) {
                    tl.emplace_back(row, node, c * (w[2][o] + cth * w[1][o]));
                    tg0.emplace_back(row, node, c * w[1][o]);
                }
            for (int o = -2; o <= 2; ++o) {
                const int node = m.index(i, j + o);
                tl.emplace_back(row, node, a2[o + 2] / (12 * dth * dth * sa * sa));
                tg1.emplace_back(row, node, a1[o + 2] / (12 * dth * sa));
            }
        }
    }
    m.lap.resize(N, N);
    m.grad[0].resize(N, N);
    m.grad[1].resize(N, N);
    m.lap.setFromTriplets(tl.begin(), tl.end());
    m.grad[0].setFromTriplets(tg0.begin(), tg0.end());
    m.grad[1].setFromTriplets(tg1.begin(), tg1.end());
    return M;
}

// Stencil rows applied as sum_j w_ij (u_j - u_i): constants map to exactly 0.
inline Eigen::MatrixXd apply_stencil(const SpMat& A, const Eigen::MatrixXd& U) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(U.rows(), U.cols());
    for (int i = 0; i < A.outerSize(); ++i)
        for (SpMat::InnerIterator it(A, i); it; ++it)
            if (it.col() != i) out.row(i) += it.value() * (U.row(it.col()) - U.row(i));
    return out;
}

// Mesh Laplacian of a scalar field (zero on boundary nodes).
inline std::vector<double> mesh_laplacian(const Mesh& m, const std::vector<double>& u) {
    const Eigen::MatrixXd L = apply_stencil(m.lap, Eigen::Map<const Eigen::VectorXd>(u.data(), u.size()));
    return {L.data(), L.data() + L.size()};
}

// ---------------------------------------------------------------- discrete maps

struct DiscreteMap {
    std::shared_ptr<const Mesh> mesh;
    ModelSpace target;
    std::vector<Point> values;
};

inline DiscreteMap sample_map(const MapSpec& f, std::shared_ptr<const Mesh> mesh) {
    DiscreteMap h{mesh, f.target, {}};
    h.values.reserve(mesh->size());
    for (const auto& x : mesh->nodes) h.values.push_back(eval_map(f, x));
    return h;
}

namespace detail {

inline Eigen::MatrixXd coords(const DiscreteMap& h) {
    Eigen::MatrixXd Y(h.values.size(), h.target.dim());
    for (size_t i = 0; i < h.values.size(); ++i)
        for (int c = 0; c < h.target.dim(); ++c) Y(i, c) = h.values[i][c];
    return Y;
}

}  // namespace detail

struct TensionData {
    std::vector<Tangent> tau;      // coordinate components, zero on boundary nodes
    std::vector<double> norm;      // target-metric norm
    std::vector<double> energy_density;
};

// tau^k = Lap h^k - (1/y)(2 A^{kn} - delta_{kn} tr A), A = sum_e dh(e) (x) dh(e)
inline TensionData tension_data(const DiscreteMap& h) {
    const Mesh& m = *h.mesh;
    const int k = h.target.dim(), n = k - 1;
    const Eigen::MatrixXd Y = detail::coords(h);
    const Eigen::MatrixXd LY = apply_stencil(m.lap, Y), G0 = apply_stencil(m.grad[0], Y),
                          G1 = apply_stencil(m.grad[1], Y);
    TensionData t;
    t.tau.assign(m.size(), Tangent{0, 0, 0});
    t.norm.assign(m.size(), 0.0);
    t.energy_density.assign(m.size(), 0.0);
    for (int i = 0; i < m.size(); ++i) {
        const double y = h.values[i][n];
        const double lam2 = 1.0 / sqr(h.target.a * y);
        double tr = 0.0;
        for (int c = 0; c < k; ++c) tr += G0(i, c) * G0(i, c) + G1(i, c) * G1(i, c);
        t.energy_density[i] = lam2 * tr;
        if (m.boundary[i]) continue;
        Tangent v{0, 0, 0};
        for (int c = 0; c < k; ++c) {
            const double Acn = G0(i, c) * G0(i, n) + G1(i, c) * G1(i, n);
            v[c] = LY(i, c) - (2 * Acn - (c == n ? tr : 0.0)) / y;
        }
        t.tau[i] = v;
        t.norm[i] = metric_norm(h.target, h.values[i], v);
    }
    return t;
}

inline Tangent tension_field(const DiscreteMap& h, int node) {
    if (node < 0 || node >= h.mesh->size()) throw usage_error("tension_field: node out of range");
    if (h.mesh->boundary[node]) throw usage_error("tension_field: boundary node");
    return tension_data(h).tau[node];
}

inline double tension_residual_sup(const DiscreteMap& h) {
    const auto t = tension_data(h);
    return *std::max_element(t.norm.begin(), t.norm.end());
}

// E = 1/2 sum w |Dh|^2
inline double energy(const DiscreteMap& h) {
    const auto t = tension_data(h);
    double e = 0.0;
    for (int i = 0; i < h.mesh->size(); ++i) e += 0.5 * h.mesh->weight[i] * t.energy_density[i];
    return e;
}

// ---------------------------------------------------------------- Dirichlet solve

struct SolveOptions {
    double tol = 1e-8;
    int max_iter = 500;
    double dt0 = 1.0;
    double dt_max = 1e12;
    double dt_min = 1e-10;
    double min_height = 1e-12;
    std::ostream* trace = nullptr;  // one line per step
};

struct SolveResult {
    DiscreteMap map;
    double tension_residual_sup = 0.0;
    double energy = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> energy_history;  // initial value, then one per accepted step
    std::vector<double> dt_history;      // pseudo-time step of each accepted step
    int rejected = 0;
};


namespace detail {

// d tau / d h at interior rows and columns, row/column index = pos * k + component
inline Eigen::SparseMatrix<double> tension_jacobian(const DiscreteMap& h, const std::vector<int>& interior,
                                                    const std::vector<int>& pos) {
    const Mesh& m = *h.mesh;
    const int k = h.target.dim(), n = k - 1;
    const Eigen::MatrixXd Y = coords(h);
    const Eigen::MatrixXd G[2] = {apply_stencil(m.grad[0], Y), apply_stencil(m.grad[1], Y)};
    std::vector<Eigen::Triplet<double>> t;
    const int NI = static_cast<int>(interior.size());
    for (int r = 0; r < NI; ++r) {
        const int i = interior[r];
        const double y = h.values[i][n];
        for (SpMat::InnerIterator it(m.lap, i); it; ++it)
            if (pos[it.col()] >= 0)
                for (int c = 0; c < k; ++c) t.emplace_back(r * k + c, pos[it.col()] * k + c, it.value());
        for (int e = 0; e < 2; ++e)
            for (SpMat::InnerIterator it(m.grad[e], i); it; ++it) {
                if (pos[it.col()] < 0) continue;
                const double w = it.value();
                for (int c = 0; c < k; ++c)
                    for (int d = 0; d < k; ++d) {
                        const double dA = w * ((c == d ? G[e](i, n) : 0.0) + (d == n ? G[e](i, c) : 0.0));
                        const double dtr = c == n ? 2 * w * G[e](i, d) : 0.0;
                        const double v = -(2 * dA - dtr) / y;
                        if (v != 0.0) t.emplace_back(r * k + c, pos[it.col()] * k + d, v);
                    }
            }
        double tr = 0.0;
        for (int c = 0; c < k; ++c) tr += G[0](i, c) * G[0](i, c) + G[1](i, c) * G[1](i, c);
        for (int c = 0; c < k; ++c) {
            const double Acn = G[0](i, c) * G[0](i, n) + G[1](i, c) * G[1](i, n);
            t.emplace_back(r * k + c, r * k + n, (2 * Acn - (c == n ? tr : 0.0)) / (y * y));
        }
    }
    Eigen::SparseMatrix<double> J(NI * k, NI * k);
    J.setFromTriplets(t.begin(), t.end());
    return J;
}

}  // namespace detail

namespace detail {

// Damped heat flow in pseudo-time: (I/dt - D tau) delta = tau(h), h <- exp_h(delta),
// boundary nodes fixed to f. Small dt is the explicit flow h <- exp_h(dt tau);
// dt grows by 4 on steps that lower the tension merit sum w |tau|^2 or the
// energy and shrinks by 4 otherwise.
inline SolveResult heat_flow(const MapSpec& f, DiscreteMap start, const SolveOptions& opt) {
    const Mesh& m = *start.mesh;
    SolveResult res;
    res.map = std::move(start);
    const int k = f.target.dim(), n = k - 1;
    for (int i = 0; i < m.size(); ++i)
        if (m.boundary[i]) res.map.values[i] = eval_map(f, m.nodes[i]);

    std::vector<int> interior, pos(m.size(), -1);
    for (int i = 0; i < m.size(); ++i)
        if (!m.boundary[i]) {
            pos[i] = static_cast<int>(interior.size());
            interior.push_back(i);
        }
    const int NI = static_cast<int>(interior.size());
    Eigen::SparseMatrix<double> I(NI * k, NI * k);
    I.setIdentity();

    const auto sum_energy = [&](const TensionData& t) {
        double e = 0.0;
        for (int i = 0; i < m.size(); ++i) e += 0.5 * m.weight[i] * t.energy_density[i];
        return e;
    };
    const auto merit = [&](const TensionData& t) {
        double e = 0.0;
        for (int i = 0; i < m.size(); ++i) e += m.weight[i] * t.norm[i] * t.norm[i];
        return e;
    };
    TensionData td = tension_data(res.map);
    double E = sum_energy(td), Q = merit(td);
    double dt = opt.dt0;
    res.energy_history.push_back(E);
    std::string last_failure;
    Eigen::SparseMatrix<double> J;
    bool fresh = false;
    for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
        res.tension_residual_sup = *std::max_element(td.norm.begin(), td.norm.end());
        if (!std::isfinite(res.tension_residual_sup)) throw numeric_error("solve_dirichlet: non-finite tension");
        if (res.tension_residual_sup < opt.tol) break;
        if (dt < opt.dt_min)
            throw numeric_error("solve_dirichlet: step size underflow (dt < " + std::to_string(opt.dt_min) + ")" +
                                (last_failure.empty() ? "" : "; last failure: " + last_failure));
        if (!fresh) {
            J = detail::tension_jacobian(res.map, interior, pos);
            fresh = true;
        }
        Eigen::SparseMatrix<double> A = I / dt - J;
        A.makeCompressed();
        Eigen::UmfPackLU<Eigen::SparseMatrix<double>> lu(A);
        if (lu.info() != Eigen::Success) {
            last_failure = "singular step matrix";
            ++res.rejected;
            dt /= 4;
            continue;
        }
        Eigen::VectorXd rhs(NI * k);
        for (int r = 0; r < NI; ++r)
            for (int c = 0; c < k; ++c) rhs(r * k + c) = td.tau[interior[r]][c];
        const Eigen::VectorXd delta = lu.solve(rhs);
        DiscreteMap trial = res.map;
        bool valid = true;
        for (int r = 0; r < NI && valid; ++r) {
            Tangent v{0, 0, 0};
            for (int c = 0; c < k; ++c) v[c] = delta(r * k + c);
            const Point p = exp_map(f.target, res.map.values[interior[r]], v);
            if (!std::isfinite(p[0]) || !std::isfinite(p[n])) {
                last_failure = "iterate not finite at node " + std::to_string(interior[r]);
                valid = false;
            } else if (p[n] < opt.min_height) {
                std::ostringstream os;
                os << "target height " << p[n] << " below " << opt.min_height << " at node " << interior[r];
                last_failure = os.str();
                valid = false;
            }
            trial.values[interior[r]] = p;
        }
        if (!valid) {
            ++res.rejected;
            dt /= 4;
            continue;
        }
        TensionData tt = tension_data(trial);
        const double Et = sum_energy(tt), Qt = merit(tt);
        const bool accept = Qt < Q || Et < E - 1e-12 * std::abs(E);
        if (opt.trace)
            *opt.trace << "step " << res.iterations << " dt " << dt << " E " << Et << " Q " << Qt << " sup "
                       << *std::max_element(tt.norm.begin(), tt.norm.end()) << (accept ? " accept" : " reject")
                       << '\n';
        if (accept) {
            res.map = std::move(trial);
            td = std::move(tt);
            E = Et;
            Q = Qt;
            res.energy_history.push_back(E);
            res.dt_history.push_back(dt);
            fresh = false;
            dt = std::min(opt.dt_max, dt * 4);
        } else {
            ++res.rejected;
            dt /= 4;
        }
    }
    res.tension_residual_sup = *std::max_element(td.norm.begin(), td.norm.end());
    res.converged = res.tension_residual_sup < opt.tol;
    res.energy = E;
    return res;
}

}  // namespace detail

enum class InitKind { boundary_map, constant };

// Dirichlet problem h = f on the boundary ring. The constant initialisation
// starts from h = f(O) everywhere and reaches f by continuation in the
// boundary data y_lambda(x) = geodesic point at lambda from f(O) to f(x).
inline SolveResult solve_dirichlet(const MapSpec& f, std::shared_ptr<const Mesh> mesh, const SolveOptions& opt = {},
                                   InitKind init = InitKind::boundary_map) {
    const Mesh& m = *mesh;
    if (f.source.model != m.space.model || f.source.a != m.space.a)
        throw usage_error("solve_dirichlet: map source differs from the mesh space");
    if (f.target.model == Model::disk2) throw usage_error("solve_dirichlet: target must be a half-plane or half-space");
    if (!(opt.tol > 0) || opt.max_iter < 0) throw usage_error("solve_dirichlet: need tol > 0, max_iter >= 0");
    DiscreteMap start = sample_map(f, mesh);
    const int n = f.target.dim() - 1;
    for (int i = 0; i < m.size(); ++i)
        if (m.boundary[i] && !(start.values[i][n] > 0 && std::isfinite(start.values[i][0])))
            throw usage_error("solve_dirichlet: boundary value outside the target at node " + std::to_string(i));
    if (init == InitKind::boundary_map) return detail::heat_flow(f, std::move(start), opt);

    const Point c = start.values[0];
    std::fill(start.values.begin(), start.values.end(), c);
    double lambda = 0.0, step = 0.25;
    int iterations = 0, rejected = 0;
    std::vector<double> energies;
    while (true) {
        const double next = std::min(1.0, lambda + step);
        MapSpec g = f;
        g.fn = [f, c, next](const Point& x) { return geodesic_lerp(f.target, c, eval_map(f, x), next); };
        SolveOptions o = opt;
        o.dt_min = std::max(opt.dt_min, 1e-4);  // fail fast, the continuation step shrinks instead
        if (next < 1.0) o.tol = std::max(opt.tol, 1e-3);
        bool ok = false;
        SolveResult r;
        try {
            r = detail::heat_flow(g, start, o);
            ok = r.converged;
        } catch (const numeric_error&) {
        }
        if (opt.trace) *opt.trace << "continuation lambda " << next << (ok ? " ok" : " failed") << '\n';
        if (ok) {
            iterations += r.iterations;
            rejected += r.rejected;
            energies.insert(energies.end(), r.energy_history.begin(), r.energy_history.end());
            if (next == 1.0) {
                r.iterations = iterations;
                r.rejected = rejected;
                r.energy_history = std::move(energies);
                return r;
            }
            start = std::move(r.map);
            lambda = next;
            step = std::min(1.0, 2 * step);
        } else {
            ++rejected;
            step /= 2;
            if (step < 1e-4)
                throw numeric_error("solve_dirichlet: continuation from the constant map stalled at lambda = " +
                                    std::to_string(lambda));
        }
    }
}

// Dirichlet problem for the scalar mesh Laplacian.
inline std::vector<double> solve_scalar_dirichlet(const Mesh& m, const std::vector<double>& boundary_values) {
    std::vector<int> interior, pos(m.size(), -1);
    for (int i = 0; i < m.size(); ++i)
        if (!m.boundary[i]) {
            pos[i] = static_cast<int>(interior.size());
            interior.push_back(i);
        }
    const int NI = static_cast<int>(interior.size());
    std::vector<Eigen::Triplet<double>> lt;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(NI);
    for (int r = 0; r < NI; ++r)
        for (SpMat::InnerIterator it(m.lap, interior[r]); it; ++it) {
            if (pos[it.col()] >= 0)
                lt.emplace_back(r, pos[it.col()], it.value());
            else
                b(r) -= it.value() * boundary_values[it.col()];
        }
    Eigen::SparseMatrix<double> A(NI, NI);
    A.setFromTriplets(lt.begin(), lt.end());
    A.makeCompressed();
    Eigen::UmfPackLU<Eigen::SparseMatrix<double>> lu(A);
    if (lu.info() != Eigen::Success) throw numeric_error("solve_scalar_dirichlet: factorization failed");
    const Eigen::VectorXd u = lu.solve(b);
    std::vector<double> out = boundary_values;
    for (int r = 0; r < NI; ++r) out[interior[r]] = u(r);
    return out;
}

// ---------------------------------------------------------------- diagnostics

struct SupDistance {
    double rho = 0.0;
    int node = 0;
};

inline SupDistance sup_distance(const DiscreteMap& h, const MapSpec& f) {
    SupDistance s;
    for (int i = 0; i < h.mesh->size(); ++i) {
        const double d = dist(h.target, h.values[i], eval_map(f, h.mesh->nodes[i]));
        if (d > s.rho) s = {d, i};
    }
    return s;
}

inline std::vector<double> distance_field(const DiscreteMap& h0, const DiscreteMap& h1) {
    if (h0.mesh != h1.mesh) throw usage_error("distance_field: maps on different meshes");
    std::vector<double> d(h0.values.size());
    for (size_t i = 0; i < d.size(); ++i) d[i] = dist(h0.target, h0.values[i], h1.values[i]);
    return d;
}

struct SubharmonicReport {
    std::vector<int> negative_nodes;
    double min_laplacian = 0.0;
    bool pass() const { return negative_nodes.empty(); }
};

inline SubharmonicReport check_subharmonic(const Mesh& m, const std::vector<double>& field, double tol) {
    if (static_cast<int>(field.size()) != m.size()) throw usage_error("check_subharmonic: field size mismatch");
    SubharmonicReport r;
    const auto L = mesh_laplacian(m, field);
    r.min_laplacian = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m.size(); ++i) {
        if (m.boundary[i]) continue;
        r.min_laplacian = std::min(r.min_laplacian, L[i]);
        if (L[i] < -tol) r.negative_nodes.push_back(i);
    }
    return r;
}

// Operator norm of Dh at a node (target metric).
inline double jacobian_norm(const DiscreteMap& h, int node) {
    const Mesh& m = *h.mesh;
    const int k = h.target.dim();
    Tangent g[2]{};
    for (int e = 0; e < 2; ++e)
        for (SpMat::InnerIterator it(m.grad[e], node); it; ++it)
            for (int c = 0; c < k; ++c) g[e][c] += it.value() * (h.values[it.col()][c] - h.values[node][c]);
    const Point& y = h.values[node];
    const double g11 = metric_inner(h.target, y, g[0], g[0]), g22 = metric_inner(h.target, y, g[1], g[1]);
    const double g12 = metric_inner(h.target, y, g[0], g[1]);
    const double tr = g11 + g22, det = g11 * g22 - g12 * g12;
    return std::sqrt(std::max(0.0, 0.5 * (tr + std::sqrt(std::max(0.0, tr * tr - 4 * det)))));
}

// ---------------------------------------------------------------- interpolation

inline DiscreteMap geodesic_interpolate(const DiscreteMap& h0, const DiscreteMap& h1, double t) {
    if (h0.mesh != h1.mesh) throw usage_error("geodesic_interpolate: maps on different meshes");
    DiscreteMap h = h0;
    for (size_t i = 0; i < h.values.size(); ++i)
        h.values[i] = t == 0.0 ? h0.values[i] : t == 1.0 ? h1.values[i]
                                                           : geodesic_lerp(h0.target, h0.values[i], h1.values[i], t);
    return h;
}

// Mesh edges (radial and angular neighbours).
inline std::vector<std::pair<int, int>> mesh_edges(const Mesh& m) {
    std::vector<std::pair<int, int>> e;
    for (int j = 0; j < m.ring_count[1]; ++j) e.emplace_back(0, m.index(1, j));
    for (int i = 1; i <= m.n_r; ++i)
        for (int j = 0; j < m.ring_count[i]; ++j) {
            e.emplace_back(m.index(i, j), m.index(i, j + 1));
            if (i < m.n_r) e.emplace_back(m.index(i, j), m.index(i + 1, j * (m.ring_count[i + 1] / m.ring_count[i])));
        }
    return e;
}

struct JacobiSample {
    double phi;    // |J_V|
    double alpha;  // <J_V, tau>
    double psi;    // transverse part
};

namespace detail {

inline JacobiSample split_jacobi(const ModelSpace& Y, const Point& p, const Tangent& J, const Point& y0, const Point& y1,
                                 double t) {
    // unit tangent of the geodesic t -> h_t(x) at p
    const Tangent tau = t < 1.0 ? log_map(Y, p, y1) : -1.0 * log_map(Y, p, y0);
    const double tn = metric_norm(Y, p, tau);
    JacobiSample s;
    s.phi = metric_norm(Y, p, J);
    s.alpha = tn > 0 ? metric_inner(Y, p, J, tau) / tn : 0.0;
    s.psi = std::sqrt(std::max(0.0, s.phi * s.phi - s.alpha * s.alpha));
    return s;
}

}  // namespace detail

// J_V(t) = D h_t(V) for V the radial (e = 0) or angular (e = 1) unit vector
// at an interior node, from the mesh gradient stencil applied to h_t.
inline JacobiSample jacobi_field(const DiscreteMap& h0, const DiscreteMap& h1, int node, int e, double t) {
    const Mesh& m = *h0.mesh;
    if (m.boundary[node]) throw usage_error("jacobi_field: boundary node");
    const ModelSpace& Y = h0.target;
    const auto at = [&](int i) { return geodesic_lerp(Y, h0.values[i], h1.values[i], t); };
    const Point p = at(node);
    Tangent J{0, 0, 0};
    for (SpMat::InnerIterator it(m.grad[e], node); it; ++it)
        if (it.col() != node) J = J + it.value() * (at(static_cast<int>(it.col())) - p);
    return detail::split_jacobi(Y, p, J, h0.values[node], h1.values[node], t);
}

// Chord version across the mesh edge (x, x'): d(h_t(x), h_t(x')) / d(x, x').
inline JacobiSample jacobi_along_edge(const DiscreteMap& h0, const DiscreteMap& h1, int x, int xp, double t) {
    const ModelSpace& Y = h0.target;
    const Mesh& m = *h0.mesh;
    const double len = dist(m.space, m.nodes[x], m.nodes[xp]);
    const Point p = geodesic_lerp(Y, h0.values[x], h1.values[x], t);
    const Point q = geodesic_lerp(Y, h0.values[xp], h1.values[xp], t);
    return detail::split_jacobi(Y, p, log_map(Y, p, q) / len, h0.values[x], h1.values[x], t);
}

// ---------------------------------------------------------------- sampled maps

// Bilinear interpolation in (s, theta) of node values, in target coordinates.
inline MapSpec as_map_spec(const DiscreteMap& h, const std::string& name = "discrete") {
    auto H = std::make_shared<const DiscreteMap>(h);
    MapSpec f;
    f.kind = "sampled";
    f.name = name;
    f.source = h.mesh->space;
    f.target = h.target;
    f.fn = [H](const Point& x) {
        const Mesh& m = *H->mesh;
        const double s = dist(m.space, m.centre, x);
        if (s > m.R * (1 + 1e-12)) throw range_error("sampled map evaluated outside its mesh");
        const Tangent v = log_map(m.space, m.centre, x);
        double th = std::atan2(v[1], v[0]);
        if (th < 0) th += 2 * pi;
        const double u = std::min(s / m.ds, static_cast<double>(m.n_r));
        const int i = std::min(static_cast<int>(u), m.n_r - 1);
        const double fr = u - i;
        const auto on_ring = [&](int ring) {
            if (ring == 0) return H->values[0];
            const double w = th / m.dtheta(ring);
            const int j = static_cast<int>(w);
            const double fj = w - j;
            return (1 - fj) * H->values[m.index(ring, j)] + fj * H->values[m.index(ring, j + 1)];
        };
        const Point a = on_ring(i), b = on_ring(i + 1);
        return (1 - fr) * a + fr * b;
    };
    return f;
}

inline void write_snapshot_csv(std::ostream& os, const DiscreteMap& h) {
    const int ks = h.mesh->space.dim(), kt = h.target.dim();
    os << "node_id";
    for (int c = 0; c < ks; ++c) os << ",src_" << c;
    for (int c = 0; c < kt; ++c) os << ",tgt_" << c;
    os << '\n';
    os.precision(17);
    for (int i = 0; i < h.mesh->size(); ++i) {
        os << i;
        for (int c = 0; c < ks; ++c) os << ',' << h.mesh->nodes[i][c];
        for (int c = 0; c < kt; ++c) os << ',' << h.values[i][c];
        os << '\n';
    }
}

// ---------------------------------------------------------------- convexity helpers

// Phi_t + Phi_{1-t} <= Phi_0 + Phi_1 - 2t (Phi_0 + Phi_1 - 2 Phi_{1/2}) for t in [0, 1/2]
inline double interpolation_slack(const std::function<double(double)>& Phi, double t) {
    return Phi(0) + Phi(1) - 2 * t * (Phi(0) + Phi(1) - 2 * Phi(0.5)) - Phi(t) - Phi(1 - t);
}

// sinh-convex upper bound for psi at t
inline double sinh_convex_bound(double a, double psi0, double psi1, double t) {
    return (std::sinh(a * (1 - t)) * psi0 + std::sinh(a * t) * psi1) / std::sinh(a);
}

}  // namespace hhmap
