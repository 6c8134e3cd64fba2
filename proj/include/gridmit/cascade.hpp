#pragma once

#include "gridmit/control.hpp"
#include "gridmit/grid.hpp"

#include <memory>
#include <optional>

namespace gridmit {

struct RuleFailure : GridError {
    using GridError::GridError;
};

/// Controller diagnostics attached to a stage when the balancing rule is
/// optimization-based.
struct ControlDiag {
    RelaxationLevel level_used = RelaxationLevel::L0;
    bool feasible_at_entry = true;  // first solve of the ladder succeeded
    double objective = 0.0;
};

struct BalanceOutcome {
    Vec gen;
    Vec load;
    std::optional<ControlDiag> diag;
};

/// Strategy producing balanced injections for the post-failure topology.
class BalancingRule {
public:
    virtual ~BalancingRule() = default;
    virtual std::string name() const = 0;
    /// `pre_topology`/`flows_prev` describe the steady state entering the
    /// stage; `surviving` is the post-failure topology.
    virtual BalanceOutcome rebalance(const GridCase& grid, const Topology& surviving,
                                     const Vec& gen_prev, const Vec& load_prev,
                                     const Topology& pre_topology,
                                     const Vec& flows_prev) = 0;
};

/// R_c: every bus absorbs a share of its island's imbalance proportional to
/// alpha_j + D_j. Connected networks are left unchanged.
class ProportionalRule : public BalancingRule {
public:
    std::string name() const override { return "proportional"; }
    BalanceOutcome rebalance(const GridCase&, const Topology&, const Vec&, const Vec&,
                             const Topology&, const Vec&) override;
};

/// Droop equilibrium of the swing dynamics; reproduces ProportionalRule.
class DroopRule : public BalancingRule {
public:
    std::string name() const override { return "droop"; }
    BalanceOutcome rebalance(const GridCase&, const Topology&, const Vec&, const Vec&,
                             const Topology&, const Vec&) override;
};

/// UC or AGC steady-state optimization with the relaxation ladder.
class ControllerRule : public BalancingRule {
public:
    ControllerRule(ControllerKind kind, AreaSet areas,
                   RelaxationLevel start_level = RelaxationLevel::L0)
        : kind_(kind), areas_(std::move(areas)), start_level_(start_level) {}
    std::string name() const override {
        return kind_ == ControllerKind::Uc ? "uc" : "agc";
    }
    BalanceOutcome rebalance(const GridCase& grid, const Topology& surviving,
                             const Vec& gen_prev, const Vec& load_prev,
                             const Topology& pre_topology, const Vec& flows_prev) override;

private:
    ControllerKind kind_;
    AreaSet areas_;
    RelaxationLevel start_level_;
};

enum class TerminalStatus { Terminated, MaxStagesExceeded };

struct StageRecord {
    int stage = 0;               // k >= 1
    std::vector<int> tripped;    // grid line indices failed entering this stage
    Topology surviving;
    Vec gen, load;               // post-balancing decomposition
    Vec injections;              // gen - load
    Vec flows;                   // per surviving line
    std::vector<int> overloads;  // grid line indices; trip set of stage k+1
    std::optional<ControlDiag> control;
};

struct CascadeTrace {
    std::vector<StageRecord> stages;
    TerminalStatus terminal = TerminalStatus::Terminated;

    const StageRecord& final_stage() const { return stages.back(); }
};

inline constexpr int kDefaultMaxStages = 100;

CascadeTrace run_cascade(const GridCase& grid, const Topology& initial_topology,
                         const Vec& gen0, const Vec& load0,
                         const std::vector<int>& initial_failures, BalancingRule& rule,
                         int max_stages = kDefaultMaxStages);

/// Convenience overload starting from the full in-service topology at the
/// grid's nominal generation and demand.
CascadeTrace run_cascade(const GridCase& grid, const std::vector<int>& initial_failures,
                         BalancingRule& rule, int max_stages = kDefaultMaxStages);

/// Spec'd proportional balancing applied to raw injections.
Vec proportional_balance(const GridCase& grid, const Vec& p_prev, const Topology& topology);

}  // namespace gridmit
