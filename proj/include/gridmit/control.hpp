#pragma once

#include "gridmit/grid.hpp"

#include <map>

namespace gridmit {

/// Control-area membership for the buses of a grid.
struct AreaSet {
    std::vector<int> ids;      // sorted distinct area ids
    std::vector<int> area_of;  // bus index -> position in `ids`

    int count() const { return static_cast<int>(ids.size()); }

    static AreaSet from_grid(const GridCase& grid);
    static AreaSet from_map(const GridCase& grid, const std::map<int, int>& bus_id_to_area);
    /// All buses in one area.
    static AreaSet single(const GridCase& grid);
};

/// Net tie-line export per area on the given topology, E_T C f.
Vec area_ace(const AreaSet& areas, const Topology& topology, const Vec& flows);

/// Constraint-relaxation ladder position.
///   L0: generation adjustment only.
///   L1: load shedding enabled, generation may curtail to zero.
///   L2: zero-ACE rows lifted.
enum class RelaxationLevel { L0 = 0, L1 = 1, L2 = 2 };

enum class ControllerKind { Uc, Agc };

struct LadderExhausted : GridError {
    using GridError::GridError;
};

struct ControlProblem {
    const GridCase* grid = nullptr;
    Topology topology;  // surviving lines
    Vec gen0;           // stage-entry generation per bus
    Vec load0;          // stage-entry served load per bus
    AreaSet areas;
    Vec ace0;  // per area: pre-contingency net tie export
    RelaxationLevel level = RelaxationLevel::L0;
    ControllerKind kind = ControllerKind::Uc;

    Vec p0() const { return gen0 - load0; }

    // Variable layout, fixed at build time.
    std::vector<int> gen_vars;   // bus indices carrying a d^G variable
    std::vector<int> load_vars;  // bus indices carrying a d^L variable (L1+)
    Vec dg_lower, dg_upper;      // per gen_vars entry
    Vec dl_lower, dl_upper;      // per load_vars entry
    std::vector<bool> ace_lifted;  // per area
};

ControlProblem make_control_problem(const GridCase& grid, const Topology& topology,
                                    const Vec& gen0, const Vec& load0,
                                    const AreaSet& areas, const Vec& ace0,
                                    RelaxationLevel level, ControllerKind kind);

/// Problem at the next ladder level; idempotent at L2.
ControlProblem relax(const ControlProblem& problem);

struct ControlSolution {
    enum class Status { Optimal, Infeasible };
    Status status = Status::Infeasible;
    Vec d;                      // per bus, d = d_gen + d_load
    Vec d_gen, d_load;          // per bus
    Vec flows;                  // per topology line
    Vec angles;                 // per bus
    Vec island_dual;            // per island of the surviving topology
    Vec ace_dual;               // per area; zero where lifted
    Vec flow_upper_dual;        // per topology line; empty under AGC
    Vec flow_lower_dual;
    Vec dg_upper_dual, dg_lower_dual;  // per bus; zero where no variable
    Vec dl_upper_dual, dl_lower_dual;
    double objective = 0.0;
    double infeasibility = 0.0;  // phase-one certificate when Infeasible
    double stationarity_residual = 0.0;
    double feasibility_residual = 0.0;
    double complementarity_residual = 0.0;
    RelaxationLevel level = RelaxationLevel::L0;

    double max_abs_dual() const;
};

/// Minimizer of the control cost subject to post-contingency flow physics,
/// zero area control error (unless lifted), line limits, and control bounds.
ControlSolution solve_uc(const ControlProblem& problem);

/// Same problem without the line-limit rows.
ControlSolution solve_agc(const ControlProblem& problem);

/// Solve at the problem's ladder level; on infeasibility, relax and retry up
/// to L2. The L2 problem is always feasible.
std::pair<ControlSolution, RelaxationLevel> mitigate(const ControlProblem& problem);

}  // namespace gridmit
