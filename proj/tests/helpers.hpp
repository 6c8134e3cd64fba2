#pragma once

#include "gridmit/grid.hpp"
#include "gridmit/qp.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace gridmit::testing {

inline GridCase make_twobus() {
    std::vector<Bus> buses{{.id = 1, .demand = 0.0, .gen = 1.0, .gen_max = 1.5},
                           {.id = 2, .demand = 1.0}};
    std::vector<Line> lines{{.from = 1, .to = 2, .susceptance = 1.0, .limit = 1.5}};
    return GridCase(buses, lines);
}

/// Balanced triangle: bus 1 injects 1, bus 3 draws 1.
inline GridCase make_triangle(double limit = 2.0) {
    std::vector<Bus> buses{{.id = 1, .gen = 1.0, .gen_max = 2.0},
                           {.id = 2},
                           {.id = 3, .demand = 1.0}};
    std::vector<Line> lines{{.from = 1, .to = 2, .susceptance = 1.0, .limit = limit},
                            {.from = 1, .to = 3, .susceptance = 1.0, .limit = limit},
                            {.from = 2, .to = 3, .susceptance = 1.0, .limit = limit}};
    return GridCase(buses, lines);
}

/// Random connected grid with `n` buses: spanning tree plus extra edges,
/// random susceptances, balanced random injections split into gen/demand.
inline GridCase random_grid(std::mt19937& rng, int n, double extra_edge_prob = 0.4) {
    std::uniform_real_distribution<double> unif(0.2, 2.0);
    std::uniform_real_distribution<double> prob(0.0, 1.0);
    std::vector<Line> lines;
    for (int v = 1; v < n; ++v) {
        std::uniform_int_distribution<int> pick(0, v - 1);
        lines.push_back({.from = pick(rng) + 1,
                         .to = v + 1,
                         .susceptance = unif(rng),
                         .limit = 100.0});
    }
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) {
            bool have = false;
            for (const Line& l : lines)
                have |= (l.from == u + 1 && l.to == v + 1);
            if (!have && prob(rng) < extra_edge_prob)
                lines.push_back({.from = u + 1,
                                 .to = v + 1,
                                 .susceptance = unif(rng),
                                 .limit = 100.0});
        }
    std::vector<Bus> buses;
    double net = 0.0;
    for (int v = 0; v < n; ++v) {
        Bus b;
        b.id = v + 1;
        double inj = unif(rng) - 1.1;
        if (v == n - 1) inj = -net;
        net += inj;
        if (inj >= 0.0) {
            b.gen = inj;
            b.gen_max = inj + 1.0;
        } else {
            b.demand = -inj;
        }
        b.damping = unif(rng) * 0.1;
        b.alpha_gen = unif(rng);
        buses.push_back(b);
    }
    return GridCase(buses, lines);
}

/// Dense flow oracle: theta from the Moore-Penrose pseudo-inverse of the
/// full weighted Laplacian, f = B C^T theta.
inline Vec dense_flow_oracle(const Topology& topo, const Vec& p) {
    Mat c = topo.incidence();
    Mat b = Mat::Zero(topo.line_count(), topo.line_count());
    for (int e = 0; e < topo.line_count(); ++e) b(e, e) = topo.susceptance(e);
    Mat lap = c * b * c.transpose();
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(lap);
    return b * c.transpose() * (cod.pseudoInverse() * p);
}

/// Brute-force strictly convex QP oracle: enumerate active subsets of the
/// inequality rows, solve each KKT equality system by least squares, keep
/// the best feasible point with nonnegative multipliers.
inline std::optional<Vec> brute_force_qp(const QpProblem& qp, double tol = 1e-7) {
    const int n = qp.var_count();
    const int me = static_cast<int>(qp.b.size());
    const int mi = static_cast<int>(qp.h.size());
    std::optional<Vec> best;
    double best_obj = 0.0;
    for (unsigned mask = 0; mask < (1u << mi); ++mask) {
        std::vector<int> active;
        for (int i = 0; i < mi; ++i)
            if (mask & (1u << i)) active.push_back(i);
        const int ma = static_cast<int>(active.size());
        // KKT: diag(q) x + c + A'y + Ga'z = 0; A x = b; Ga x = ha.
        Mat kkt = Mat::Zero(n + me + ma, n + me + ma);
        Vec rhs = Vec::Zero(n + me + ma);
        for (int i = 0; i < n; ++i) kkt(i, i) = qp.q[i];
        rhs.head(n) = -qp.c;
        if (me > 0) {
            kkt.block(0, n, n, me) = qp.A.transpose();
            kkt.block(n, 0, me, n) = qp.A;
            rhs.segment(n, me) = qp.b;
        }
        for (int k = 0; k < ma; ++k) {
            kkt.block(0, n + me + k, n, 1) = qp.G.row(active[k]).transpose();
            kkt.block(n + me + k, 0, 1, n) = qp.G.row(active[k]);
            rhs[n + me + k] = qp.h[active[k]];
        }
        Vec sol = kkt.completeOrthogonalDecomposition().solve(rhs);
        Vec x = sol.head(n);
        // Verify the KKT residual (the system may be inconsistent).
        if ((kkt * sol - rhs).lpNorm<Eigen::Infinity>() > tol) continue;
        bool ok = true;
        for (int k = 0; k < ma && ok; ++k) ok = sol[n + me + k] >= -tol;
        for (int i = 0; i < mi && ok; ++i) ok = qp.G.row(i).dot(x) <= qp.h[i] + tol;
        if (me > 0 && ok) ok = (qp.A * x - qp.b).lpNorm<Eigen::Infinity>() <= tol;
        if (!ok) continue;
        double obj = 0.5 * x.dot(qp.q.asDiagonal() * x) + qp.c.dot(x);
        if (!best || obj < best_obj - 1e-12) {
            best = x;
            best_obj = obj;
        }
    }
    return best;
}

}  // namespace gridmit::testing
