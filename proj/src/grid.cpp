#include "gridmit/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gridmit {

GridCase::GridCase(std::vector<Bus> buses, std::vector<Line> lines)
    : buses_(std::move(buses)), lines_(std::move(lines)) {
    for (int i = 0; i < static_cast<int>(buses_.size()); ++i) {
        const Bus& b = buses_[i];
        if (index_of_.count(b.id))
            throw GridError("duplicate bus id " + std::to_string(b.id));
        if (b.inertia <= 0.0)
            throw GridError("bus " + std::to_string(b.id) + ": inertia must be > 0");
        if (b.damping < 0.0)
            throw GridError("bus " + std::to_string(b.id) + ": damping must be >= 0");
        if (b.alpha_gen <= 0.0 || b.alpha_load <= 0.0)
            throw GridError("bus " + std::to_string(b.id) + ": control gains must be > 0");
        if (b.gen_min > b.gen_max)
            throw GridError("bus " + std::to_string(b.id) + ": gen_min > gen_max");
        index_of_[b.id] = i;
    }
    for (const Line& l : lines_) {
        if (!index_of_.count(l.from) || !index_of_.count(l.to))
            throw GridError("line (" + std::to_string(l.from) + "," +
                            std::to_string(l.to) + ") references unknown bus");
        if (l.from == l.to)
            throw GridError("self-loop at bus " + std::to_string(l.from));
        if (l.susceptance <= 0.0)
            throw GridError("line (" + std::to_string(l.from) + "," +
                            std::to_string(l.to) + "): susceptance must be > 0");
        if (l.limit <= 0.0)
            throw GridError("line (" + std::to_string(l.from) + "," +
                            std::to_string(l.to) + "): limit must be > 0");
    }
}

int GridCase::bus_index(int external_id) const {
    auto it = index_of_.find(external_id);
    if (it == index_of_.end())
        throw GridError("unknown bus id " + std::to_string(external_id));
    return it->second;
}

std::optional<int> GridCase::find_line(int from_id, int to_id) const {
    for (int i = 0; i < line_count(); ++i) {
        const Line& l = lines_[i];
        if ((l.from == from_id && l.to == to_id) ||
            (l.from == to_id && l.to == from_id))
            return i;
    }
    return std::nullopt;
}

Vec GridCase::nominal_injection() const {
    Vec p(bus_count());
    for (int i = 0; i < bus_count(); ++i) p[i] = buses_[i].injection();
    return p;
}

Vec GridCase::nominal_generation() const {
    Vec g(bus_count());
    for (int i = 0; i < bus_count(); ++i) g[i] = buses_[i].gen;
    return g;
}

Vec GridCase::nominal_demand() const {
    Vec d(bus_count());
    for (int i = 0; i < bus_count(); ++i) d[i] = buses_[i].demand;
    return d;
}

double GridCase::total_demand() const {
    double s = 0.0;
    for (const Bus& b : buses_) s += b.demand;
    return s;
}

std::vector<int> GridCase::generator_buses() const {
    std::vector<int> out;
    for (int i = 0; i < bus_count(); ++i)
        if (buses_[i].is_generator()) out.push_back(i);
    return out;
}

std::vector<int> GridCase::area_ids() const {
    std::vector<int> ids;
    for (const Bus& b : buses_) ids.push_back(b.area);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

Topology Topology::full(const GridCase& grid) {
    std::vector<int> idx;
    for (int i = 0; i < grid.line_count(); ++i)
        if (grid.lines()[i].in_service) idx.push_back(i);
    return of_lines(grid, std::move(idx));
}

Topology Topology::of_lines(const GridCase& grid, std::vector<int> line_indices) {
    Topology t;
    t.grid_ = &grid;
    t.lines_ = std::move(line_indices);
    const int m = static_cast<int>(t.lines_.size());
    t.from_.resize(m);
    t.to_.resize(m);
    t.b_.resize(m);
    t.position_.assign(grid.line_count(), -1);
    for (int e = 0; e < m; ++e) {
        const Line& l = grid.lines()[t.lines_[e]];
        t.from_[e] = grid.bus_index(l.from);
        t.to_[e] = grid.bus_index(l.to);
        t.b_[e] = l.susceptance;
        t.position_[t.lines_[e]] = e;
    }
    return t;
}

Topology Topology::without(std::span<const int> removed) const {
    std::vector<int> keep;
    keep.reserve(lines_.size());
    for (int idx : lines_) {
        if (std::find(removed.begin(), removed.end(), idx) == removed.end())
            keep.push_back(idx);
    }
    return of_lines(*grid_, std::move(keep));
}

bool Topology::contains_line(int grid_line_index) const {
    return grid_line_index >= 0 && grid_line_index < static_cast<int>(position_.size()) &&
           position_[grid_line_index] >= 0;
}

int Topology::position_of(int grid_line_index) const {
    if (grid_line_index < 0 || grid_line_index >= static_cast<int>(position_.size()))
        return -1;
    return position_[grid_line_index];
}

Mat Topology::incidence() const {
    Mat C = Mat::Zero(bus_count(), line_count());
    for (int e = 0; e < line_count(); ++e) {
        C(from_[e], e) = 1.0;
        C(to_[e], e) = -1.0;
    }
    return C;
}

std::vector<std::vector<int>> islands(const Topology& topology) {
    const int n = topology.bus_count();
    std::vector<int> comp(n, -1);
    std::vector<std::vector<int>> adjacency(n);
    for (int e = 0; e < topology.line_count(); ++e) {
        adjacency[topology.from_index(e)].push_back(topology.to_index(e));
        adjacency[topology.to_index(e)].push_back(topology.from_index(e));
    }
    // Seed components in increasing bus-id order so output ordering is stable.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return topology.grid().bus_id(a) < topology.grid().bus_id(b);
    });
    std::vector<std::vector<int>> out;
    for (int seed : order) {
        if (comp[seed] >= 0) continue;
        const int c = static_cast<int>(out.size());
        std::vector<int> members;
        std::vector<int> stack{seed};
        comp[seed] = c;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            members.push_back(v);
            for (int w : adjacency[v]) {
                if (comp[w] < 0) {
                    comp[w] = c;
                    stack.push_back(w);
                }
            }
        }
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
    }
    return out;
}

namespace {

// Reduced-Laplacian solve on one island with its lowest-id bus grounded.
void solve_island(const Topology& topology, const std::vector<int>& island,
                  const Vec& rhs, Vec& theta) {
    const int ni = static_cast<int>(island.size());
    // Reference: lowest external id.
    int ref = island[0];
    for (int v : island)
        if (topology.grid().bus_id(v) < topology.grid().bus_id(ref)) ref = v;
    if (ni == 1) {
        theta[ref] = 0.0;
        return;
    }
    std::vector<int> local(topology.bus_count(), -1);
    int k = 0;
    for (int v : island)
        if (v != ref) local[v] = k++;
    Mat L = Mat::Zero(ni - 1, ni - 1);
    Vec r = Vec::Zero(ni - 1);
    for (int v : island)
        if (v != ref) r[local[v]] = rhs[v];
    for (int e = 0; e < topology.line_count(); ++e) {
        int i = topology.from_index(e), j = topology.to_index(e);
        if (local[i] < 0 && i != ref) continue;  // line outside this island
        if (local[j] < 0 && j != ref) continue;
        double b = topology.susceptance(e);
        if (i != ref) L(local[i], local[i]) += b;
        if (j != ref) L(local[j], local[j]) += b;
        if (i != ref && j != ref) {
            L(local[i], local[j]) -= b;
            L(local[j], local[i]) -= b;
        }
    }
    Vec x = Eigen::LDLT<Mat>(L).solve(r);
    theta[ref] = 0.0;
    for (int v : island)
        if (v != ref) theta[v] = x[local[v]];
}

}  // namespace

Vec laplacian_pinv_solve(const Topology& topology, const Vec& rhs, double balance_tol) {
    if (rhs.size() != topology.bus_count())
        throw GridError("rhs dimension mismatch");
    auto comps = islands(topology);
    Vec theta = Vec::Zero(topology.bus_count());
    for (int c = 0; c < static_cast<int>(comps.size()); ++c) {
        double sum = 0.0;
        for (int v : comps[c]) sum += rhs[v];
        if (std::abs(sum) > balance_tol) throw UnbalancedIsland(c, sum);
        solve_island(topology, comps[c], rhs, theta);
    }
    return theta;
}

PowerFlowState dc_power_flow(const Topology& topology, const Vec& injections,
                             double balance_tol) {
    PowerFlowState s;
    s.angles = laplacian_pinv_solve(topology, injections, balance_tol);
    s.flows.resize(topology.line_count());
    for (int e = 0; e < topology.line_count(); ++e)
        s.flows[e] = topology.susceptance(e) *
                     (s.angles[topology.from_index(e)] - s.angles[topology.to_index(e)]);
    return s;
}

std::vector<int> check_limits(const PowerFlowState& state, const Topology& topology) {
    if (state.flows.size() != topology.line_count())
        throw GridError("flow dimension mismatch");
    std::vector<int> overloaded;
    for (int e = 0; e < topology.line_count(); ++e) {
        // Strict trip rule: a line exactly at its limit survives. The margin
        // keeps roundoff in recomputed binding flows from faking an overload.
        double margin = 1e-9 * std::max(1.0, topology.limit(e));
        if (std::abs(state.flows[e]) > topology.limit(e) + margin)
            overloaded.push_back(topology.line_indices()[e]);
    }
    std::sort(overloaded.begin(), overloaded.end());
    return overloaded;
}

Mat ptdf(const Topology& topology) {
    const int n = topology.bus_count();
    const int m = topology.line_count();
    auto comps = islands(topology);
    // Theta response to a unit injection at each non-reference bus, balanced
    // against the island reference bus: one factorization per island.
    Mat theta = Mat::Zero(n, n);  // theta(:, j) for injection e_j - e_ref(j)
    for (const auto& island : comps) {
        const int ni = static_cast<int>(island.size());
        int ref = island[0];
        for (int v : island)
            if (topology.grid().bus_id(v) < topology.grid().bus_id(ref)) ref = v;
        if (ni == 1) continue;
        std::vector<int> local(n, -1);
        int k = 0;
        for (int v : island)
            if (v != ref) local[v] = k++;
        Mat L = Mat::Zero(ni - 1, ni - 1);
        for (int e = 0; e < topology.line_count(); ++e) {
            int i = topology.from_index(e), j = topology.to_index(e);
            if (local[i] < 0 && i != ref) continue;
            if (local[j] < 0 && j != ref) continue;
            double b = topology.susceptance(e);
            if (i != ref) L(local[i], local[i]) += b;
            if (j != ref) L(local[j], local[j]) += b;
            if (i != ref && j != ref) {
                L(local[i], local[j]) -= b;
                L(local[j], local[i]) -= b;
            }
        }
        Mat X = Eigen::LDLT<Mat>(L).solve(Mat::Identity(ni - 1, ni - 1));
        for (int j : island) {
            if (j == ref) continue;
            for (int v : island)
                if (v != ref) theta(v, j) = X(local[v], local[j]);
        }
    }
    Mat F = Mat::Zero(m, n);
    for (int e = 0; e < m; ++e) {
        int i = topology.from_index(e), j = topology.to_index(e);
        double b = topology.susceptance(e);
        for (int c = 0; c < n; ++c) F(e, c) = b * (theta(i, c) - theta(j, c));
    }
    return F;
}

}  // namespace gridmit
