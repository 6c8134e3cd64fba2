#include "gridmit/kkt.hpp"

#include <algorithm>
#include <cmath>

namespace gridmit {

KktReport check_kkt(const ControlProblem& p, const ControlSolution& s) {
    KktReport report;
    if (s.status != ControlSolution::Status::Optimal) {
        report.stationarity = report.primal_feasibility = 1.0;
        return report;
    }
    const GridCase& grid = *p.grid;
    const Topology& topo = p.topology;
    const int n = grid.bus_count();
    const int m = topo.line_count();
    const bool limits = p.kind == ControllerKind::Uc;
    const Vec p0 = p.p0();
    const Vec post = p0 - s.d;

    // Flow sensitivities via the dense Moore-Penrose route.
    Mat C = topo.incidence();
    Mat B = Mat::Zero(m, m);
    for (int e = 0; e < m; ++e) B(e, e) = topo.susceptance(e);
    Mat Lap = C * B * C.transpose();
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(Lap);
    Mat F = B * C.transpose() * cod.pseudoInverse();
    Vec f = F * post;

    // Primal feasibility: flows match the stored ones, limits, ACE, boxes,
    // island balance.
    auto comps = islands(topo);
    double feas = 0.0;
    for (const auto& island : comps) {
        double sum = 0.0;
        for (int v : island) sum += post[v];
        feas = std::max(feas, std::abs(sum));
    }
    feas = std::max(feas, (f - s.flows).lpNorm<Eigen::Infinity>());
    if (limits)
        for (int e = 0; e < m; ++e)
            feas = std::max(feas, std::abs(f[e]) - topo.limit(e));
    for (int a = 0; a < p.areas.count(); ++a) {
        if (p.ace_lifted[a]) continue;
        double ace = 0.0;
        for (int e = 0; e < m; ++e) {
            int ai = p.areas.area_of[topo.from_index(e)];
            int aj = p.areas.area_of[topo.to_index(e)];
            if (ai == a && aj != a) ace += f[e];
            if (aj == a && ai != a) ace -= f[e];
        }
        feas = std::max(feas, std::abs(ace - p.ace0[a]));
    }
    for (size_t k = 0; k < p.gen_vars.size(); ++k) {
        double v = s.d_gen[p.gen_vars[k]];
        feas = std::max(feas, p.dg_lower[k] - v);
        feas = std::max(feas, v - p.dg_upper[k]);
    }
    for (size_t k = 0; k < p.load_vars.size(); ++k) {
        double v = s.d_load[p.load_vars[k]];
        feas = std::max(feas, p.dl_lower[k] - v);
        feas = std::max(feas, v - p.dl_upper[k]);
    }
    // Buses without a load variable must not shed.
    for (int j = 0; j < n; ++j) {
        bool has_load_var =
            std::find(p.load_vars.begin(), p.load_vars.end(), j) != p.load_vars.end();
        if (!has_load_var) feas = std::max(feas, std::abs(s.d_load[j]));
        bool has_gen_var =
            std::find(p.gen_vars.begin(), p.gen_vars.end(), j) != p.gen_vars.end();
        if (!has_gen_var) feas = std::max(feas, std::abs(s.d_gen[j]));
    }
    report.primal_feasibility = feas;

    // Dual feasibility.
    double dualneg = 0.0;
    auto neg = [&](const Vec& v) {
        if (v.size() > 0) dualneg = std::max(dualneg, -v.minCoeff());
    };
    if (limits) {
        neg(s.flow_upper_dual);
        neg(s.flow_lower_dual);
    }
    neg(s.dg_upper_dual);
    neg(s.dg_lower_dual);
    neg(s.dl_upper_dual);
    neg(s.dl_lower_dual);
    report.dual_feasibility = std::max(dualneg, 0.0);

    // Stationarity per variable.
    std::vector<int> island_of(n, -1);
    for (int c = 0; c < static_cast<int>(comps.size()); ++c)
        for (int v : comps[c]) island_of[v] = c;
    Vec price = Vec::Zero(n);  // sum of dual contributions through the flow map
    if (limits) {
        Vec mu = s.flow_upper_dual - s.flow_lower_dual;
        price = F.transpose() * mu;
    }
    // The island-balance multiplier is determined up to the flow-sensitivity
    // gauge, so it is eliminated here: stationarity holds iff the per-island
    // gradients (without that multiplier) are constant within each island.
    std::vector<std::vector<double>> island_grads(comps.size());
    for (size_t k = 0; k < p.gen_vars.size(); ++k) {
        int j = p.gen_vars[k];
        double g = s.d_gen[j] / grid.buses()[j].alpha_gen +
                   (p.ace_lifted[p.areas.area_of[j]] ? 0.0 : s.ace_dual[p.areas.area_of[j]]) -
                   price[j] + s.dg_upper_dual[j] - s.dg_lower_dual[j];
        island_grads[island_of[j]].push_back(g);
    }
    for (size_t k = 0; k < p.load_vars.size(); ++k) {
        int j = p.load_vars[k];
        double g = s.d_load[j] / grid.buses()[j].alpha_load +
                   (p.ace_lifted[p.areas.area_of[j]] ? 0.0 : s.ace_dual[p.areas.area_of[j]]) -
                   price[j] + s.dl_upper_dual[j] - s.dl_lower_dual[j];
        island_grads[island_of[j]].push_back(g);
    }
    double stat = 0.0;
    for (const auto& grads : island_grads) {
        if (grads.empty()) continue;
        auto [lo, hi] = std::minmax_element(grads.begin(), grads.end());
        stat = std::max(stat, (*hi - *lo) / 2.0);
    }
    report.stationarity = stat;

    // Complementary slackness.
    double comp = 0.0;
    if (limits) {
        for (int e = 0; e < m; ++e) {
            comp = std::max(comp, std::abs(s.flow_upper_dual[e] * (topo.limit(e) - f[e])));
            comp = std::max(comp, std::abs(s.flow_lower_dual[e] * (topo.limit(e) + f[e])));
        }
    }
    for (size_t k = 0; k < p.gen_vars.size(); ++k) {
        int j = p.gen_vars[k];
        comp = std::max(comp, std::abs(s.dg_upper_dual[j] * (p.dg_upper[k] - s.d_gen[j])));
        comp = std::max(comp, std::abs(s.dg_lower_dual[j] * (s.d_gen[j] - p.dg_lower[k])));
    }
    for (size_t k = 0; k < p.load_vars.size(); ++k) {
        int j = p.load_vars[k];
        comp = std::max(comp, std::abs(s.dl_upper_dual[j] * (p.dl_upper[k] - s.d_load[j])));
        comp = std::max(comp, std::abs(s.dl_lower_dual[j] * (s.d_load[j] - p.dl_lower[k])));
    }
    report.complementarity = comp;
    return report;
}

}  // namespace gridmit
