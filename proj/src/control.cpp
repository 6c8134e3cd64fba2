#include "gridmit/control.hpp"

#include "gridmit/qp.hpp"

#include <algorithm>
#include <cmath>

namespace gridmit {

AreaSet AreaSet::from_grid(const GridCase& grid) {
    AreaSet a;
    a.ids = grid.area_ids();
    a.area_of.resize(grid.bus_count());
    for (int i = 0; i < grid.bus_count(); ++i) {
        auto it = std::lower_bound(a.ids.begin(), a.ids.end(), grid.buses()[i].area);
        a.area_of[i] = static_cast<int>(it - a.ids.begin());
    }
    return a;
}

AreaSet AreaSet::from_map(const GridCase& grid, const std::map<int, int>& bus_id_to_area) {
    AreaSet a;
    for (const auto& [bus, area] : bus_id_to_area) {
        (void)bus;
        a.ids.push_back(area);
    }
    std::sort(a.ids.begin(), a.ids.end());
    a.ids.erase(std::unique(a.ids.begin(), a.ids.end()), a.ids.end());
    a.area_of.resize(grid.bus_count());
    for (int i = 0; i < grid.bus_count(); ++i) {
        auto it = bus_id_to_area.find(grid.bus_id(i));
        if (it == bus_id_to_area.end())
            throw GridError("area map misses bus " + std::to_string(grid.bus_id(i)));
        auto pos = std::lower_bound(a.ids.begin(), a.ids.end(), it->second);
        a.area_of[i] = static_cast<int>(pos - a.ids.begin());
    }
    return a;
}

AreaSet AreaSet::single(const GridCase& grid) {
    AreaSet a;
    a.ids = {1};
    a.area_of.assign(grid.bus_count(), 0);
    return a;
}

Vec area_ace(const AreaSet& areas, const Topology& topology, const Vec& flows) {
    Vec ace = Vec::Zero(areas.count());
    for (int e = 0; e < topology.line_count(); ++e) {
        int ai = areas.area_of[topology.from_index(e)];
        int aj = areas.area_of[topology.to_index(e)];
        if (ai == aj) continue;
        ace[ai] += flows[e];
        ace[aj] -= flows[e];
    }
    return ace;
}

namespace {

std::vector<int> island_of_bus(const Topology& topology, int* island_count) {
    auto comps = islands(topology);
    std::vector<int> out(topology.bus_count(), -1);
    for (int c = 0; c < static_cast<int>(comps.size()); ++c)
        for (int v : comps[c]) out[v] = c;
    *island_count = static_cast<int>(comps.size());
    return out;
}

}  // namespace

ControlProblem make_control_problem(const GridCase& grid, const Topology& topology,
                                    const Vec& gen0, const Vec& load0,
                                    const AreaSet& areas, const Vec& ace0,
                                    RelaxationLevel level, ControllerKind kind) {
    ControlProblem p;
    p.grid = &grid;
    p.topology = topology;
    p.gen0 = gen0;
    p.load0 = load0;
    p.areas = areas;
    p.ace0 = ace0;
    p.level = level;
    p.kind = kind;

    const bool shedding = level >= RelaxationLevel::L1;
    for (int j = 0; j < grid.bus_count(); ++j) {
        const Bus& bus = grid.buses()[j];
        if (bus.is_generator()) {
            p.gen_vars.push_back(j);
        }
        if (shedding && load0[j] > 0.0) {
            p.load_vars.push_back(j);
        }
    }
    p.dg_lower.resize(p.gen_vars.size());
    p.dg_upper.resize(p.gen_vars.size());
    for (size_t k = 0; k < p.gen_vars.size(); ++k) {
        const Bus& bus = grid.buses()[p.gen_vars[k]];
        double g0 = gen0[p.gen_vars[k]];
        // The nominal point d = 0 is always admissible.
        p.dg_lower[k] = std::min(0.0, g0 - bus.gen_max);
        p.dg_upper[k] = shedding ? std::max(0.0, g0) : std::max(0.0, g0 - bus.gen_min);
    }
    p.dl_lower.resize(p.load_vars.size());
    p.dl_upper.resize(p.load_vars.size());
    for (size_t k = 0; k < p.load_vars.size(); ++k) {
        p.dl_lower[k] = -load0[p.load_vars[k]];
        p.dl_upper[k] = 0.0;
    }

    // ACE rows: lifted globally at L2; per-area when the area is split across
    // islands or is alone on its island (its row degenerates to the island
    // balance condition, which is kept separately).
    int n_islands = 0;
    auto isl = island_of_bus(topology, &n_islands);
    p.ace_lifted.assign(areas.count(), false);
    std::vector<std::vector<int>> islands_of_area(areas.count());
    for (int j = 0; j < grid.bus_count(); ++j) {
        auto& v = islands_of_area[areas.area_of[j]];
        if (std::find(v.begin(), v.end(), isl[j]) == v.end()) v.push_back(isl[j]);
    }
    for (int a = 0; a < areas.count(); ++a) {
        if (level == RelaxationLevel::L2 || islands_of_area[a].size() != 1) {
            p.ace_lifted[a] = true;
            continue;
        }
        int home = islands_of_area[a][0];
        bool shared = false;
        for (int j = 0; j < grid.bus_count() && !shared; ++j)
            if (isl[j] == home && areas.area_of[j] != a) shared = true;
        if (!shared) p.ace_lifted[a] = true;
    }
    return p;
}

ControlProblem relax(const ControlProblem& problem) {
    if (problem.level == RelaxationLevel::L2) return problem;
    auto next = static_cast<RelaxationLevel>(static_cast<int>(problem.level) + 1);
    return make_control_problem(*problem.grid, problem.topology, problem.gen0,
                                problem.load0, problem.areas, problem.ace0, next,
                                problem.kind);
}

double ControlSolution::max_abs_dual() const {
    double m = 0.0;
    auto upd = [&](const Vec& v) {
        if (v.size() > 0) m = std::max(m, v.cwiseAbs().maxCoeff());
    };
    upd(ace_dual);
    upd(flow_upper_dual);
    upd(flow_lower_dual);
    upd(dg_upper_dual);
    upd(dg_lower_dual);
    upd(dl_upper_dual);
    upd(dl_lower_dual);
    return m;
}

namespace {

ControlSolution solve_control(const ControlProblem& p, bool enforce_limits) {
    const GridCase& grid = *p.grid;
    const int n = grid.bus_count();
    const int m = p.topology.line_count();
    const int ng = static_cast<int>(p.gen_vars.size());
    const int nl = static_cast<int>(p.load_vars.size());
    const int nv = ng + nl;
    const Vec p0 = p.p0();

    int n_islands = 0;
    auto isl = island_of_bus(p.topology, &n_islands);

    QpProblem qp;
    qp.q.resize(nv);
    qp.c = Vec::Zero(nv);
    for (int k = 0; k < ng; ++k) qp.q[k] = 1.0 / grid.buses()[p.gen_vars[k]].alpha_gen;
    for (int k = 0; k < nl; ++k)
        qp.q[ng + k] = 1.0 / grid.buses()[p.load_vars[k]].alpha_load;

    // Equalities: island balance, then non-lifted ACE rows.
    std::vector<int> active_areas;
    for (int a = 0; a < p.areas.count(); ++a)
        if (!p.ace_lifted[a]) active_areas.push_back(a);
    const int n_eq = n_islands + static_cast<int>(active_areas.size());
    qp.A = Mat::Zero(n_eq, nv);
    qp.b = Vec::Zero(n_eq);
    for (int k = 0; k < ng; ++k) qp.A(isl[p.gen_vars[k]], k) = 1.0;
    for (int k = 0; k < nl; ++k) qp.A(isl[p.load_vars[k]], ng + k) = 1.0;
    for (int j = 0; j < n; ++j) qp.b[isl[j]] += p0[j];
    for (size_t r = 0; r < active_areas.size(); ++r) {
        int a = active_areas[r];
        int row = n_islands + static_cast<int>(r);
        for (int k = 0; k < ng; ++k)
            if (p.areas.area_of[p.gen_vars[k]] == a) qp.A(row, k) = 1.0;
        for (int k = 0; k < nl; ++k)
            if (p.areas.area_of[p.load_vars[k]] == a) qp.A(row, ng + k) = 1.0;
        double rhs = -p.ace0[a];
        for (int j = 0; j < n; ++j)
            if (p.areas.area_of[j] == a) rhs += p0[j];
        qp.b[row] = rhs;
    }

    // Inequalities: flow limits (optional) then variable boxes.
    Mat F;
    Vec base_flow;
    const int n_flow_rows = enforce_limits ? 2 * m : 0;
    qp.G = Mat::Zero(n_flow_rows + 2 * nv, nv);
    qp.h = Vec::Zero(n_flow_rows + 2 * nv);
    if (enforce_limits) {
        F = ptdf(p.topology);
        base_flow = F * p0;
        // f = base_flow - F_v x; rows f <= pi and -f <= pi.
        for (int e = 0; e < m; ++e) {
            double pi = p.topology.limit(e);
            for (int k = 0; k < ng; ++k) {
                qp.G(e, k) = -F(e, p.gen_vars[k]);
                qp.G(m + e, k) = F(e, p.gen_vars[k]);
            }
            for (int k = 0; k < nl; ++k) {
                qp.G(e, ng + k) = -F(e, p.load_vars[k]);
                qp.G(m + e, ng + k) = F(e, p.load_vars[k]);
            }
            qp.h[e] = pi - base_flow[e];
            qp.h[m + e] = pi + base_flow[e];
        }
    }
    for (int k = 0; k < nv; ++k) {
        qp.G(n_flow_rows + 2 * k, k) = 1.0;
        qp.G(n_flow_rows + 2 * k + 1, k) = -1.0;
        double lo = k < ng ? p.dg_lower[k] : p.dl_lower[k - ng];
        double hi = k < ng ? p.dg_upper[k] : p.dl_upper[k - ng];
        qp.h[n_flow_rows + 2 * k] = hi;
        qp.h[n_flow_rows + 2 * k + 1] = -lo;
    }

    QpResult qr = solve_qp(qp);

    ControlSolution s;
    s.level = p.level;
    if (qr.status == QpStatus::Infeasible) {
        s.status = ControlSolution::Status::Infeasible;
        s.infeasibility = qr.infeasibility;
        return s;
    }

    s.status = ControlSolution::Status::Optimal;
    s.d_gen = Vec::Zero(n);
    s.d_load = Vec::Zero(n);
    for (int k = 0; k < ng; ++k) s.d_gen[p.gen_vars[k]] = qr.x[k];
    for (int k = 0; k < nl; ++k) s.d_load[p.load_vars[k]] = qr.x[ng + k];
    s.d = s.d_gen + s.d_load;
    PowerFlowState pf = dc_power_flow(p.topology, Vec(p0 - s.d), 1e-6);
    s.flows = pf.flows;
    s.angles = pf.angles;
    s.objective = qr.objective;

    s.island_dual = qr.eq_dual.head(n_islands);
    s.ace_dual = Vec::Zero(p.areas.count());
    for (size_t r = 0; r < active_areas.size(); ++r)
        s.ace_dual[active_areas[r]] = qr.eq_dual[n_islands + r];
    if (enforce_limits) {
        s.flow_upper_dual = qr.ineq_dual.segment(0, m);
        s.flow_lower_dual = qr.ineq_dual.segment(m, m);
    }
    s.dg_upper_dual = Vec::Zero(n);
    s.dg_lower_dual = Vec::Zero(n);
    s.dl_upper_dual = Vec::Zero(n);
    s.dl_lower_dual = Vec::Zero(n);
    for (int k = 0; k < nv; ++k) {
        double up = qr.ineq_dual[n_flow_rows + 2 * k];
        double lo = qr.ineq_dual[n_flow_rows + 2 * k + 1];
        if (k < ng) {
            s.dg_upper_dual[p.gen_vars[k]] = up;
            s.dg_lower_dual[p.gen_vars[k]] = lo;
        } else {
            s.dl_upper_dual[p.load_vars[k - ng]] = up;
            s.dl_lower_dual[p.load_vars[k - ng]] = lo;
        }
    }

    // Residuals recorded on the solved problem.
    Vec stat = qp.q.cwiseProduct(qr.x) + qp.c + qp.A.transpose() * qr.eq_dual +
               qp.G.transpose() * qr.ineq_dual;
    s.stationarity_residual = stat.size() ? stat.lpNorm<Eigen::Infinity>() : 0.0;
    double feas = (qp.A.rows() > 0)
                      ? (qp.A * qr.x - qp.b).lpNorm<Eigen::Infinity>()
                      : 0.0;
    double comp = 0.0;
    for (int i = 0; i < qp.G.rows(); ++i) {
        double slack = qp.h[i] - qp.G.row(i).dot(qr.x);
        feas = std::max(feas, -slack);
        comp = std::max(comp, std::abs(qr.ineq_dual[i] * slack));
    }
    s.feasibility_residual = feas;
    s.complementarity_residual = comp;
    return s;
}

}  // namespace

ControlSolution solve_uc(const ControlProblem& problem) {
    return solve_control(problem, true);
}

ControlSolution solve_agc(const ControlProblem& problem) {
    return solve_control(problem, false);
}

std::pair<ControlSolution, RelaxationLevel> mitigate(const ControlProblem& problem) {
    ControlProblem current = problem;
    while (true) {
        ControlSolution s = current.kind == ControllerKind::Uc ? solve_uc(current)
                                                               : solve_agc(current);
        if (s.status == ControlSolution::Status::Optimal)
            return {std::move(s), current.level};
        if (current.level == RelaxationLevel::L2)
            throw LadderExhausted("fully relaxed problem reported infeasible");
        current = relax(current);
    }
}

}  // namespace gridmit
