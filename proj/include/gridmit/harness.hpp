#pragma once

#include "gridmit/cascade.hpp"
#include "gridmit/partition.hpp"

#include <optional>
#include <string>

namespace gridmit {

inline constexpr const char* kToolVersion = "0.1.0";

struct OpfInfeasible : GridError {
    using GridError::GridError;
};
struct ZeroDemand : GridError {
    using GridError::GridError;
};

/// One of the four sweep strategies: controller x network structure.
struct Strategy {
    ControllerKind controller = ControllerKind::Uc;
    bool tree = false;  // true: operate on the tree-connected (switched) network

    std::string name() const;
    static Strategy parse(const std::string& name);
    static std::vector<Strategy> all();
};

/// Minimum-cost dispatch: min sum c_j g_j^2 over generator buses, subject to
/// power balance, line limits, and generation bounds on the given topology.
/// Returns per-bus generation.
Vec dc_opf(const GridCase& grid, const Topology& topology);

/// Line and generation limits scaled by alpha; demands unchanged.
GridCase scale_limits(const GridCase& grid, double alpha);

/// Shed load over total demand.
double llr(const Vec& pre_demand, const Vec& post_served);

/// Fraction of generators whose dispatch moved by more than `tol`.
double agr(const GridCase& grid, const Vec& gen_pre, const Vec& gen_post,
           double tol = 1e-4);

struct ScenarioResult {
    int line = -1;  // grid line index of the initial failure
    std::string strategy;
    double alpha = 1.0;
    double llr = 0.0;
    double agr = 0.0;
    int stages = 0;
    RelaxationLevel level = RelaxationLevel::L0;
    bool severe = false;   // stage-1 control problem infeasible at entry level
    bool errored = false;
    std::string error;
};

struct AggregateRow {
    std::string strategy;
    double alpha = 1.0;
    int scenarios = 0;
    int errored = 0;
    double frac_nonzero_llr = 0.0;
    double frac_nonzero_agr = 0.0;
    double mean_nonzero_llr = 0.0;  // over scenarios with nonzero LLR
    double mean_nonzero_agr = 0.0;
};

struct SweepReport {
    std::vector<ScenarioResult> scenarios;  // sorted (strategy, alpha, line)
    std::vector<AggregateRow> rows;
    std::string config_hash;
};

struct SweepOptions {
    std::vector<double> alphas = {0.5, 1.0, 1.5};
    std::vector<Strategy> strategies = Strategy::all();
    int max_stages = kDefaultMaxStages;
    int workers = 1;
    double agr_tol = 1e-4;
};

/// Every in-service line as the initial single failure, per strategy and
/// alpha. Deterministic regardless of worker count.
SweepReport run_sweep(const GridCase& grid, const Partition& partition,
                      const SweepOptions& options = {});

void write_report_json(const SweepReport& report, const std::string& path);
void write_scenarios_csv(const SweepReport& report, const std::string& path);
void write_tables_md(const SweepReport& report, const std::string& path);

/// Aggregates recomputed from the scenario list (report-algebra check).
std::vector<AggregateRow> aggregate(const std::vector<ScenarioResult>& scenarios);

}  // namespace gridmit
