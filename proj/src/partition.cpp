#include "gridmit/partition.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace gridmit {

namespace {

/// Connected components of the subgraph induced by `keep` on the topology
/// lines, restricted to buses with keep[v] true.
std::vector<std::vector<int>> induced_components(const Topology& topo,
                                                 const std::vector<bool>& keep) {
    const int n = topo.bus_count();
    std::vector<std::vector<int>> adj(n);
    for (int e = 0; e < topo.line_count(); ++e) {
        int u = topo.from_index(e), v = topo.to_index(e);
        if (keep[u] && keep[v]) {
            adj[u].push_back(v);
            adj[v].push_back(u);
        }
    }
    std::vector<bool> seen(n, false);
    std::vector<std::vector<int>> comps;
    for (int s = 0; s < n; ++s) {
        if (!keep[s] || seen[s]) continue;
        std::vector<int> comp, stack{s};
        seen[s] = true;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            comp.push_back(u);
            for (int w : adj[u])
                if (!seen[w]) {
                    seen[w] = true;
                    stack.push_back(w);
                }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }
    return comps;
}

std::vector<bool> area_mask(const Partition& part, int area) {
    std::vector<bool> mask(part.area_of.size(), false);
    for (size_t v = 0; v < part.area_of.size(); ++v) mask[v] = part.area_of[v] == area;
    return mask;
}

}  // namespace

int Partition::area_count() const {
    std::set<int> ids(area_of.begin(), area_of.end());
    return static_cast<int>(ids.size());
}

std::vector<int> Partition::area_sizes() const {
    std::map<int, int> count;
    for (int a : area_of) ++count[a];
    std::vector<int> sizes;
    for (auto& [a, c] : count) sizes.push_back(c);
    std::sort(sizes.rbegin(), sizes.rend());
    return sizes;
}

std::vector<int> Partition::members(int area) const {
    std::vector<int> out;
    for (size_t v = 0; v < area_of.size(); ++v)
        if (area_of[v] == area) out.push_back(static_cast<int>(v));
    return out;
}

void Partition::validate(const Topology& topology) const {
    if (static_cast<int>(area_of.size()) != topology.bus_count())
        throw PartitionBroken("partition covers " + std::to_string(area_of.size()) +
                              " buses, topology has " +
                              std::to_string(topology.bus_count()));
    std::set<int> ids(area_of.begin(), area_of.end());
    for (int a : ids) {
        auto comps = induced_components(topology, area_mask(*this, a));
        if (comps.size() != 1)
            throw PartitionBroken("area " + std::to_string(a) + " induces " +
                                  std::to_string(comps.size()) + " components");
    }
}

double modularity(const Topology& topo, const std::vector<int>& area_of) {
    const int n = topo.bus_count();
    const int m = topo.line_count();
    if (m == 0) return 0.0;
    std::vector<double> degree(n, 0.0);
    double internal = 0.0;
    for (int e = 0; e < m; ++e) {
        int u = topo.from_index(e), v = topo.to_index(e);
        degree[u] += 1.0;
        degree[v] += 1.0;
        if (area_of[u] == area_of[v]) internal += 1.0;
    }
    std::map<int, double> area_degree;
    for (int v = 0; v < n; ++v) area_degree[area_of[v]] += degree[v];
    double q = internal / m;
    for (auto& [a, d] : area_degree) q -= (d / (2.0 * m)) * (d / (2.0 * m));
    return q;
}

Partition modularity_bisect(const Topology& topo) {
    const int n = topo.bus_count();
    const int m = topo.line_count();
    if (n < 2) throw GridError("bisection needs at least two buses");
    if (islands(topo).size() != 1) throw DisconnectedInput("bisection needs a connected network");

    Mat a = Mat::Zero(n, n);
    Vec degree = Vec::Zero(n);
    for (int e = 0; e < m; ++e) {
        int u = topo.from_index(e), v = topo.to_index(e);
        a(u, v) += 1.0;
        a(v, u) += 1.0;
        degree[u] += 1.0;
        degree[v] += 1.0;
    }
    Mat b = a - degree * degree.transpose() / (2.0 * m);
    Eigen::SelfAdjointEigenSolver<Mat> eig(b);
    Vec lead = eig.eigenvectors().col(n - 1);  // largest eigenvalue

    Partition part;
    part.area_of.assign(n, 1);
    for (int v = 0; v < n; ++v) part.area_of[v] = lead[v] >= 0.0 ? 1 : 2;

    auto count_area = [&](int area) {
        return std::count(part.area_of.begin(), part.area_of.end(), area);
    };
    if (count_area(1) == 0 || count_area(2) == 0) {
        // Degenerate leading eigenvector: sweep prefix splits along the
        // eigenvector ordering and keep the best-modularity connected split.
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int x, int y) {
            if (lead[x] != lead[y]) return lead[x] < lead[y];
            return x < y;
        });
        double best = -2.0;
        std::vector<int> best_assign;
        std::vector<int> assign(n, 1);
        for (int k = 0; k < n - 1; ++k) {
            assign[order[k]] = 2;
            double q = modularity(topo, assign);
            if (q > best) {
                best = q;
                best_assign = assign;
            }
        }
        part.area_of = best_assign;
    }

    // Greedy refinement: move single buses between sides while any move
    // improves modularity. The sign split is only a first-order guess; this
    // climbs to a local optimum of the actual objective.
    for (bool improved = true; improved;) {
        improved = false;
        double base = modularity(topo, part.area_of);
        double best_gain = 0.0;
        int best_v = -1;
        for (int v = 0; v < n; ++v) {
            part.area_of[v] = 3 - part.area_of[v];
            double gain = modularity(topo, part.area_of) - base;
            part.area_of[v] = 3 - part.area_of[v];
            if (gain > best_gain + 1e-12) {
                best_gain = gain;
                best_v = v;
            }
        }
        if (best_v >= 0) {
            part.area_of[best_v] = 3 - part.area_of[best_v];
            improved = true;
        }
        if (count_area(1) == 0 || count_area(2) == 0) {
            // Never collapse to a single side.
            part.area_of[best_v] = 3 - part.area_of[best_v];
            break;
        }
    }

    // Connectivity repair: within each side keep the largest component
    // (ties: the one containing the lowest bus) and flip the rest.
    for (int pass = 0; pass < n; ++pass) {
        bool changed = false;
        for (int area : {1, 2}) {
            auto comps = induced_components(topo, area_mask(part, area));
            if (comps.size() <= 1) continue;
            size_t largest = 0;
            for (size_t c = 1; c < comps.size(); ++c)
                if (comps[c].size() > comps[largest].size()) largest = c;
            for (size_t c = 0; c < comps.size(); ++c) {
                if (c == largest) continue;
                for (int v : comps[c]) part.area_of[v] = area == 1 ? 2 : 1;
            }
            changed = true;
        }
        if (!changed) break;
    }

    // Deterministic labels: the lowest bus index belongs to area 1.
    if (part.area_of[0] == 2)
        for (int v = 0; v < n; ++v) part.area_of[v] = 3 - part.area_of[v];
    return part;
}

std::vector<int> tie_lines(const Topology& topo, const Partition& part) {
    std::vector<int> ties;
    for (int e = 0; e < topo.line_count(); ++e)
        if (part.area_of[topo.from_index(e)] != part.area_of[topo.to_index(e)])
            ties.push_back(topo.line_indices()[e]);
    std::sort(ties.begin(), ties.end());
    return ties;
}

double congestion_level(const Topology& topo, const Vec& injections,
                        const Partition& part, const std::vector<int>& switched_off) {
    Topology remaining = topo.without(switched_off);
    std::set<int> areas(part.area_of.begin(), part.area_of.end());
    for (int a : areas) {
        auto comps = induced_components(remaining, area_mask(part, a));
        if (comps.size() > 1)
            throw PartitionBroken("switching disconnects area " + std::to_string(a));
    }
    PowerFlowState state = dc_power_flow(remaining, injections, 1e-6);
    double gamma = 0.0;
    for (int e = 0; e < remaining.line_count(); ++e)
        gamma = std::max(gamma, std::abs(state.flows[e]) / remaining.limit(e));
    return gamma;
}

namespace {

/// True when the kept tie lines span all areas as a tree (l-1 edges, no cycle).
bool spans_tree(const std::vector<std::pair<int, int>>& kept_area_edges,
                const std::vector<int>& area_ids) {
    std::map<int, int> root;
    for (int a : area_ids) root[a] = a;
    auto find = [&](int a) {
        while (root[a] != a) a = root[a] = root[root[a]];
        return a;
    };
    for (auto [x, y] : kept_area_edges) {
        int rx = find(x), ry = find(y);
        if (rx == ry) return false;
        root[rx] = ry;
    }
    int r0 = find(area_ids.front());
    return std::all_of(area_ids.begin(), area_ids.end(),
                       [&](int a) { return find(a) == r0; });
}

}  // namespace

SwitchingResult optimal_switching(const Topology& topo, const Vec& injections,
                                  const Partition& part) {
    std::vector<int> ties = tie_lines(topo, part);
    std::set<int> area_set(part.area_of.begin(), part.area_of.end());
    std::vector<int> area_ids(area_set.begin(), area_set.end());
    const int l = static_cast<int>(area_ids.size());
    const int t = static_cast<int>(ties.size());

    PowerFlowState base = dc_power_flow(topo, injections, 1e-6);
    auto abs_flow = [&](int grid_line) {
        return std::abs(base.flows[topo.position_of(grid_line)]);
    };
    auto area_edge = [&](int grid_line) {
        const Line& ln = topo.grid().lines()[grid_line];
        return std::pair{part.area_of[topo.grid().bus_index(ln.from)],
                         part.area_of[topo.grid().bus_index(ln.to)]};
    };

    SwitchingResult best;
    if (l == 1) return best;  // nothing to switch

    // Candidate count: (t choose l-1); fall back to greedy beyond 1e5.
    double combos = 1.0;
    for (int i = 0; i < l - 1; ++i) combos *= double(t - i) / double(i + 1);
    if (combos > 1e5) {
        // Greedy maximum-|f0| spanning tree of the reduced multigraph.
        std::vector<int> order = ties;
        std::sort(order.begin(), order.end(), [&](int x, int y) {
            if (abs_flow(x) != abs_flow(y)) return abs_flow(x) > abs_flow(y);
            return x < y;
        });
        std::map<int, int> root;
        for (int a : area_ids) root[a] = a;
        auto find = [&](int a) {
            while (root[a] != a) a = root[a] = root[root[a]];
            return a;
        };
        std::set<int> kept;
        for (int e : order) {
            auto [x, y] = area_edge(e);
            int rx = find(x), ry = find(y);
            if (rx == ry) continue;
            root[rx] = ry;
            kept.insert(e);
        }
        if (static_cast<int>(kept.size()) != l - 1)
            throw NoSpanningTree("reduced area graph is disconnected");
        for (int e : ties)
            if (!kept.count(e)) best.switched_off.push_back(e);
        best.gamma = congestion_level(topo, injections, part, best.switched_off);
        best.exhaustive = false;
        return best;
    }

    bool found = false;
    double best_gamma = 0.0, best_kept_flow = -1.0;
    // Enumerate (l-1)-subsets of ties in lexicographic order.
    std::vector<int> idx(l - 1);
    std::iota(idx.begin(), idx.end(), 0);
    auto advance = [&]() {
        for (int i = l - 2; i >= 0; --i) {
            if (idx[i] < t - (l - 1 - i)) {
                ++idx[i];
                for (int j = i + 1; j < l - 1; ++j) idx[j] = idx[j - 1] + 1;
                return true;
            }
        }
        return false;
    };
    if (l - 1 > t) throw NoSpanningTree("fewer tie lines than areas minus one");
    do {
        std::vector<std::pair<int, int>> kept_edges;
        std::vector<int> kept;
        for (int i : idx) {
            kept.push_back(ties[i]);
            kept_edges.push_back(area_edge(ties[i]));
        }
        if (!spans_tree(kept_edges, area_ids)) continue;
        std::vector<int> off;
        std::set<int> kept_set(kept.begin(), kept.end());
        for (int e : ties)
            if (!kept_set.count(e)) off.push_back(e);
        double gamma = congestion_level(topo, injections, part, off);
        double kept_flow = 0.0;
        for (int e : kept) kept_flow += abs_flow(e);
        constexpr double kTol = 1e-12;
        if (!found || gamma < best_gamma - kTol ||
            (gamma < best_gamma + kTol && kept_flow > best_kept_flow)) {
            found = true;
            best_gamma = gamma;
            best_kept_flow = kept_flow;
            best.switched_off = off;
        }
    } while (advance());
    if (!found) throw NoSpanningTree("reduced area graph is disconnected");
    best.gamma = best_gamma;
    best.exhaustive = true;
    return best;
}

std::vector<int> keep_largest_flow(const Topology& topo, const Vec& injections,
                                   const Partition& part) {
    if (part.area_count() != 2)
        throw GridError("largest-flow switching requires exactly two areas");
    std::vector<int> ties = tie_lines(topo, part);
    if (ties.size() <= 1) return {};
    PowerFlowState base = dc_power_flow(topo, injections, 1e-6);
    int keep = ties.front();
    double best = -1.0;
    for (int e : ties) {
        double f = std::abs(base.flows[topo.position_of(e)]);
        if (f > best) {
            best = f;
            keep = e;
        }
    }
    std::vector<int> off;
    for (int e : ties)
        if (e != keep) off.push_back(e);
    return off;
}

std::vector<int> associated_areas(const std::vector<int>& failed_lines,
                                  const Topology& topo, const Partition& part) {
    std::set<int> areas;
    for (int e : failed_lines) {
        const Line& ln = topo.grid().lines()[e];
        areas.insert(part.area_of[topo.grid().bus_index(ln.from)]);
        areas.insert(part.area_of[topo.grid().bus_index(ln.to)]);
    }
    return {areas.begin(), areas.end()};
}

}  // namespace gridmit
