#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridmit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct GridError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Per-island power balance violated beyond tolerance.
struct UnbalancedIsland : GridError {
    UnbalancedIsland(int island, double imbalance)
        : GridError("island " + std::to_string(island) + " unbalanced by " +
                    std::to_string(imbalance) + " pu"),
          island(island),
          imbalance(imbalance) {}
    int island;
    double imbalance;
};

struct DegenerateIsland : GridError {
    DegenerateIsland(int island, double imbalance)
        : GridError("island " + std::to_string(island) +
                    " has no responsive capacity for imbalance " +
                    std::to_string(imbalance) + " pu"),
          island(island),
          imbalance(imbalance) {}
    int island;
    double imbalance;
};

struct Bus {
    int id = 0;            // external bus number
    double demand = 0.0;   // nominal load, pu
    double gen = 0.0;      // nominal generation, pu
    double gen_min = 0.0;  // dispatch lower bound, pu
    double gen_max = 0.0;  // dispatch upper bound, pu
    double damping = 0.05;   // D_j
    double inertia = 0.1;    // M_j
    double alpha_gen = 1.0;  // droop / control cost gain for generation
    double alpha_load = 0.01;  // control cost gain for load adjustment
    double cost = 1.0;         // quadratic dispatch cost coefficient
    int area = 1;

    double injection() const { return gen - demand; }
    bool is_generator() const { return gen_max > 0.0 || gen > 0.0; }
};

struct Line {
    int from = 0;  // external bus id, positive flow direction from->to
    int to = 0;
    double susceptance = 1.0;
    double limit = 1.0;  // pi_e, pu
    bool in_service = true;
};

/// Static description of the grid. Immutable after construction; the
/// constructor validates endpoint references and positivity of
/// susceptances and limits.
class GridCase {
public:
    GridCase(std::vector<Bus> buses, std::vector<Line> lines);

    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Line>& lines() const { return lines_; }
    int bus_count() const { return static_cast<int>(buses_.size()); }
    int line_count() const { return static_cast<int>(lines_.size()); }

    /// Internal index of an external bus id; throws GridError if unknown.
    int bus_index(int external_id) const;
    int bus_id(int index) const { return buses_[index].id; }

    /// Line index matching the unordered endpoint pair, if present.
    std::optional<int> find_line(int from_id, int to_id) const;

    Vec nominal_injection() const;
    Vec nominal_generation() const;
    Vec nominal_demand() const;
    double total_demand() const;

    std::vector<int> generator_buses() const;

    /// Distinct area ids, sorted.
    std::vector<int> area_ids() const;

private:
    std::vector<Bus> buses_;
    std::vector<Line> lines_;
    std::map<int, int> index_of_;
};

/// An ordered subset of in-service lines of a GridCase, together with the
/// implied oriented incidence structure.
class Topology {
public:
    static Topology full(const GridCase& grid);
    static Topology of_lines(const GridCase& grid, std::vector<int> line_indices);

    /// Topology with the given grid-line indices removed.
    Topology without(std::span<const int> removed) const;

    const GridCase& grid() const { return *grid_; }
    const std::vector<int>& line_indices() const { return lines_; }
    int bus_count() const { return grid_->bus_count(); }
    int line_count() const { return static_cast<int>(lines_.size()); }
    bool contains_line(int grid_line_index) const;
    /// Position of a grid line inside this topology, or -1.
    int position_of(int grid_line_index) const;

    /// From/to bus indices and susceptance of topology-local line e.
    int from_index(int e) const { return from_[e]; }
    int to_index(int e) const { return to_[e]; }
    double susceptance(int e) const { return b_[e]; }
    double limit(int e) const { return grid_->lines()[lines_[e]].limit; }

    /// Dense node-edge incidence matrix (+1 at from, -1 at to).
    Mat incidence() const;

    /// Empty topology bound to no grid; placeholder until assigned.
    Topology() = default;

private:
    const GridCase* grid_ = nullptr;
    std::vector<int> lines_;  // grid line indices
    std::vector<int> from_, to_;
    Vec b_;
    std::vector<int> position_;  // grid line index -> local position or -1
};

struct PowerFlowState {
    Vec flows;   // per topology-local line, pu
    Vec angles;  // per bus, rad; reference bus (lowest id per island) at 0
};

/// Connected components of the topology, as sorted bus-index lists,
/// ordered by smallest member.
std::vector<std::vector<int>> islands(const Topology& topology);

inline constexpr double kBalanceTolerance = 1e-9;
inline constexpr double kFlowResidualTolerance = 1e-8;

/// Solves p = C f, f = B C^T theta. Throws UnbalancedIsland when some
/// island's injections do not sum to zero within tolerance.
PowerFlowState dc_power_flow(const Topology& topology, const Vec& injections,
                             double balance_tol = kBalanceTolerance);

/// Minimum-norm-style solve of (C B C^T) theta = rhs, per island, with the
/// lowest-id bus of each island grounded at zero.
Vec laplacian_pinv_solve(const Topology& topology, const Vec& rhs,
                         double balance_tol = kBalanceTolerance);

/// Grid-line indices of strictly overloaded lines, sorted.
std::vector<int> check_limits(const PowerFlowState& state, const Topology& topology);

/// Dense flow-sensitivity matrix F (m x n): f = F p for balanced p.
Mat ptdf(const Topology& topology);

}  // namespace gridmit
