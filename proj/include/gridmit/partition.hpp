#pragma once

#include "gridmit/grid.hpp"

namespace gridmit {

struct PartitionBroken : GridError {
    using GridError::GridError;
};

struct NoSpanningTree : GridError {
    using GridError::GridError;
};

struct DisconnectedInput : GridError {
    using GridError::GridError;
};

/// A disjoint cover of the buses into connected control areas.
struct Partition {
    std::vector<int> area_of;       // bus index -> area id (1-based, dense)
    std::vector<int> switched_off;  // grid line indices removed to tree-connect areas

    int area_count() const;
    std::vector<int> area_sizes() const;  // sorted descending
    /// Bus indices of one area.
    std::vector<int> members(int area) const;

    /// Checks disjoint cover and per-area induced connectivity on `topology`.
    void validate(const Topology& topology) const;
};

/// Newman modularity of the partition on the (unweighted) topology graph.
double modularity(const Topology& topology, const std::vector<int>& area_of);

/// Two-area split maximizing modularity via the leading eigenvector of the
/// modularity matrix, with a connectivity-repair pass. Deterministic: the
/// lowest-id bus lands in area 1.
Partition modularity_bisect(const Topology& topology);

/// Grid-line indices of topology lines whose endpoints lie in different
/// areas, sorted.
std::vector<int> tie_lines(const Topology& topology, const Partition& partition);

/// Max loading ratio max_e |f_e| / pi_e on the network with `switched_off`
/// removed. Throws PartitionBroken if removal disconnects an area internally.
double congestion_level(const Topology& topology, const Vec& injections,
                        const Partition& partition,
                        const std::vector<int>& switched_off);

struct SwitchingResult {
    std::vector<int> switched_off;  // grid line indices, sorted
    double gamma = 0.0;
    bool exhaustive = true;  // false when a greedy tree was used
};

/// Minimum-congestion tie-line switching over spanning trees of the reduced
/// area graph. Exhaustive up to 1e5 candidate trees, greedy max-|f0| beyond.
SwitchingResult optimal_switching(const Topology& topology, const Vec& injections,
                                  const Partition& partition);

/// Two-area heuristic: keep the tie line carrying the largest nominal
/// absolute flow, switch off the rest.
std::vector<int> keep_largest_flow(const Topology& topology, const Vec& injections,
                                   const Partition& partition);

/// Area ids touched by an endpoint of any failed line.
std::vector<int> associated_areas(const std::vector<int>& failed_lines,
                                  const Topology& topology, const Partition& partition);

}  // namespace gridmit
