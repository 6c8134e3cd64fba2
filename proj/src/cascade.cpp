#include "gridmit/cascade.hpp"

#include "gridmit/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace gridmit {

Vec proportional_balance(const GridCase& grid, const Vec& p_prev, const Topology& topology) {
    Vec p = p_prev;
    for (const auto& island : islands(topology)) {
        double imbalance = 0.0;
        double denom = 0.0;
        for (int v : island) {
            imbalance += p_prev[v];
            const Bus& bus = grid.buses()[v];
            denom += bus.alpha_gen + bus.damping;
        }
        if (std::abs(imbalance) <= kBalanceTolerance) continue;
        if (denom <= 0.0) {
            // No responsive capacity: the island collapses to zero injections.
            for (int v : island) p[v] = 0.0;
            continue;
        }
        for (int v : island) {
            const Bus& bus = grid.buses()[v];
            p[v] -= (bus.alpha_gen + bus.damping) / denom * imbalance;
        }
    }
    return p;
}

namespace {

/// Splits a per-bus injection correction into gen/load components, assigning
/// the whole correction to the generation side so that served load is only
/// changed by rules that shed it explicitly.
BalanceOutcome split_to_generation(const Vec& gen_prev, const Vec& load_prev,
                                   const Vec& p_new) {
    BalanceOutcome out;
    out.load = load_prev;
    out.gen = p_new + load_prev;
    return out;
}

}  // namespace

BalanceOutcome ProportionalRule::rebalance(const GridCase& grid, const Topology& surviving,
                                           const Vec& gen_prev, const Vec& load_prev,
                                           const Topology&, const Vec&) {
    Vec p_prev = gen_prev - load_prev;
    Vec p_new = proportional_balance(grid, p_prev, surviving);
    BalanceOutcome out = split_to_generation(gen_prev, load_prev, p_new);
    // Collapsed islands lose their load as well.
    for (const auto& island : islands(surviving)) {
        double denom = 0.0;
        double imbalance = 0.0;
        for (int v : island) {
            const Bus& bus = grid.buses()[v];
            denom += bus.alpha_gen + bus.damping;
            imbalance += p_prev[v];
        }
        if (denom <= 0.0 && std::abs(imbalance) > kBalanceTolerance)
            for (int v : island) {
                out.gen[v] = 0.0;
                out.load[v] = 0.0;
            }
    }
    return out;
}

BalanceOutcome DroopRule::rebalance(const GridCase& grid, const Topology& surviving,
                                    const Vec& gen_prev, const Vec& load_prev,
                                    const Topology&, const Vec&) {
    Vec p_prev = gen_prev - load_prev;
    DroopEquilibrium eq = droop_equilibrium(grid, surviving, p_prev);
    Vec damping(grid.bus_count());
    for (int j = 0; j < grid.bus_count(); ++j) damping[j] = grid.buses()[j].damping;
    Vec p_new = p_prev - eq.d - damping.cwiseProduct(eq.omega);
    return split_to_generation(gen_prev, load_prev, p_new);
}

BalanceOutcome ControllerRule::rebalance(const GridCase& grid, const Topology& surviving,
                                         const Vec& gen_prev, const Vec& load_prev,
                                         const Topology& pre_topology,
                                         const Vec& flows_prev) {
    Vec ace0 = area_ace(areas_, pre_topology, flows_prev);
    ControlProblem problem = make_control_problem(grid, surviving, gen_prev, load_prev,
                                                  areas_, ace0, start_level_, kind_);
    ControlSolution first = kind_ == ControllerKind::Uc ? solve_uc(problem) : solve_agc(problem);
    ControlSolution solution = first;
    RelaxationLevel level = start_level_;
    if (first.status != ControlSolution::Status::Optimal)
        std::tie(solution, level) = mitigate(relax(problem));
    BalanceOutcome out;
    out.gen = gen_prev - solution.d_gen;
    out.load = load_prev + solution.d_load;  // d_load <= 0 sheds load
    out.diag = ControlDiag{level, first.status == ControlSolution::Status::Optimal,
                           solution.objective};
    return out;
}

CascadeTrace run_cascade(const GridCase& grid, const Topology& initial_topology,
                         const Vec& gen0, const Vec& load0,
                         const std::vector<int>& initial_failures, BalancingRule& rule,
                         int max_stages) {
    if (initial_failures.empty()) throw GridError("cascade requires at least one initial failure");
    for (int idx : initial_failures)
        if (!initial_topology.contains_line(idx))
            throw GridError("initial failure " + std::to_string(idx) +
                            " is not in service");
    CascadeTrace trace;
    Topology pre = initial_topology;
    Vec gen = gen0, load = load0;
    Vec flows_prev = dc_power_flow(pre, gen0 - load0, 1e-6).flows;
    std::vector<int> tripped = initial_failures;

    for (int k = 1; k <= max_stages; ++k) {
        StageRecord rec;
        rec.stage = k;
        rec.tripped = tripped;
        rec.surviving = pre.without(tripped);
        BalanceOutcome balanced =
            rule.rebalance(grid, rec.surviving, gen, load, pre, flows_prev);
        rec.gen = balanced.gen;
        rec.load = balanced.load;
        rec.injections = balanced.gen - balanced.load;
        rec.control = balanced.diag;
        PowerFlowState state = dc_power_flow(rec.surviving, rec.injections, 1e-6);
        rec.flows = state.flows;
        rec.overloads = check_limits(state, rec.surviving);
        trace.stages.push_back(rec);
        if (rec.overloads.empty()) {
            trace.terminal = TerminalStatus::Terminated;
            return trace;
        }
        pre = rec.surviving;
        gen = rec.gen;
        load = rec.load;
        flows_prev = rec.flows;
        tripped = rec.overloads;
    }
    trace.terminal = TerminalStatus::MaxStagesExceeded;
    return trace;
}

CascadeTrace run_cascade(const GridCase& grid, const std::vector<int>& initial_failures,
                         BalancingRule& rule, int max_stages) {
    return run_cascade(grid, Topology::full(grid), grid.nominal_generation(),
                       grid.nominal_demand(), initial_failures, rule, max_stages);
}

}  // namespace gridmit
