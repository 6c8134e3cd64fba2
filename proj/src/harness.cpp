#include "gridmit/harness.hpp"

#include "gridmit/qp.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace gridmit {

using json = nlohmann::json;

std::string Strategy::name() const {
    std::string base = controller == ControllerKind::Uc ? "uc" : "agc";
    return base + (tree ? "-tree" : "-mesh");
}

Strategy Strategy::parse(const std::string& name) {
    for (const Strategy& s : all())
        if (s.name() == name) return s;
    throw GridError("unknown strategy '" + name + "'");
}

std::vector<Strategy> Strategy::all() {
    return {{ControllerKind::Uc, true},
            {ControllerKind::Uc, false},
            {ControllerKind::Agc, true},
            {ControllerKind::Agc, false}};
}

Vec dc_opf(const GridCase& grid, const Topology& topology) {
    std::vector<int> gens = grid.generator_buses();
    const int g = static_cast<int>(gens.size());
    const int n = grid.bus_count();
    const int m = topology.line_count();
    if (g == 0) throw OpfInfeasible("no generators");
    Vec demand = grid.nominal_demand();

    QpProblem qp;
    qp.q = Vec(g);
    qp.c = Vec::Zero(g);
    for (int k = 0; k < g; ++k) qp.q[k] = 2.0 * grid.buses()[gens[k]].cost;

    auto comps = islands(topology);
    qp.A = Mat::Zero(static_cast<int>(comps.size()), g);
    qp.b = Vec::Zero(static_cast<int>(comps.size()));
    std::vector<int> island_of(n, -1);
    for (int c = 0; c < static_cast<int>(comps.size()); ++c)
        for (int v : comps[c]) island_of[v] = c;
    for (int k = 0; k < g; ++k) qp.A(island_of[gens[k]], k) = 1.0;
    for (int v = 0; v < n; ++v) qp.b[island_of[v]] += demand[v];

    Mat F = ptdf(topology);
    Mat Fg(m, g);
    for (int k = 0; k < g; ++k) Fg.col(k) = F.col(gens[k]);
    Vec fd = F * demand;  // flows induced by loads alone (negated injections)
    qp.G = Mat::Zero(2 * m + 2 * g, g);
    qp.h = Vec::Zero(2 * m + 2 * g);
    for (int e = 0; e < m; ++e) {
        qp.G.row(e) = Fg.row(e);
        qp.h[e] = topology.limit(e) + fd[e];
        qp.G.row(m + e) = -Fg.row(e);
        qp.h[m + e] = topology.limit(e) - fd[e];
    }
    for (int k = 0; k < g; ++k) {
        qp.G(2 * m + k, k) = 1.0;
        qp.h[2 * m + k] = grid.buses()[gens[k]].gen_max;
        qp.G(2 * m + g + k, k) = -1.0;
        qp.h[2 * m + g + k] = -grid.buses()[gens[k]].gen_min;
    }

    QpResult res = solve_qp(qp);
    if (res.status != QpStatus::Optimal)
        throw OpfInfeasible("dispatch problem infeasible (violation " +
                            std::to_string(res.infeasibility) + " pu)");
    Vec dispatch = Vec::Zero(n);
    for (int k = 0; k < g; ++k) dispatch[gens[k]] = res.x[k];
    return dispatch;
}

GridCase scale_limits(const GridCase& grid, double alpha) {
    if (alpha <= 0.0) throw GridError("alpha must be positive");
    std::vector<Bus> buses = grid.buses();
    std::vector<Line> lines = grid.lines();
    for (Bus& b : buses) {
        b.gen_min *= alpha;
        b.gen_max *= alpha;
    }
    for (Line& l : lines) l.limit *= alpha;
    return GridCase(std::move(buses), std::move(lines));
}

double llr(const Vec& pre_demand, const Vec& post_served) {
    double total = pre_demand.sum();
    if (total <= 0.0) throw ZeroDemand("total demand is zero");
    double shed = (pre_demand - post_served).sum();
    return std::clamp(shed / total, 0.0, 1.0);
}

double agr(const GridCase& grid, const Vec& gen_pre, const Vec& gen_post, double tol) {
    std::vector<int> gens = grid.generator_buses();
    if (gens.empty()) return 0.0;
    int moved = 0;
    for (int j : gens)
        if (std::abs(gen_post[j] - gen_pre[j]) > tol) ++moved;
    return static_cast<double>(moved) / static_cast<double>(gens.size());
}

namespace {

std::string fnv1a_hex(const std::string& data) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

std::string level_name(RelaxationLevel level) {
    switch (level) {
        case RelaxationLevel::L0: return "L0";
        case RelaxationLevel::L1: return "L1";
        case RelaxationLevel::L2: return "L2";
    }
    return "?";
}

struct ScenarioSpec {
    Strategy strategy;
    double alpha;
    int line;
};

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<ScenarioResult>& scenarios) {
    std::vector<std::pair<std::string, double>> keys;
    for (const auto& s : scenarios) {
        std::pair<std::string, double> k{s.strategy, s.alpha};
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
    std::vector<AggregateRow> rows;
    for (const auto& [strategy, alpha] : keys) {
        AggregateRow row;
        row.strategy = strategy;
        row.alpha = alpha;
        int ok = 0, nz_llr = 0, nz_agr = 0;
        double sum_llr = 0.0, sum_agr = 0.0;
        for (const auto& s : scenarios) {
            if (s.strategy != strategy || s.alpha != alpha) continue;
            ++row.scenarios;
            if (s.errored) {
                ++row.errored;
                continue;
            }
            ++ok;
            if (s.llr > 0.0) {
                ++nz_llr;
                sum_llr += s.llr;
            }
            if (s.agr > 0.0) {
                ++nz_agr;
                sum_agr += s.agr;
            }
        }
        if (ok > 0) {
            row.frac_nonzero_llr = static_cast<double>(nz_llr) / ok;
            row.frac_nonzero_agr = static_cast<double>(nz_agr) / ok;
        }
        if (nz_llr > 0) row.mean_nonzero_llr = sum_llr / nz_llr;
        if (nz_agr > 0) row.mean_nonzero_agr = sum_agr / nz_agr;
        rows.push_back(row);
    }
    return rows;
}

SweepReport run_sweep(const GridCase& grid, const Partition& partition,
                      const SweepOptions& options) {
    partition.validate(Topology::full(grid));
    std::map<int, int> area_map;
    for (int v = 0; v < grid.bus_count(); ++v) area_map[grid.bus_id(v)] = partition.area_of[v];

    // Per-alpha operating points: dispatch from the scaled original network,
    // shared by the tree and mesh variants.
    struct AlphaContext {
        GridCase grid;
        Vec dispatch;
        std::optional<std::string> opf_error;
    };
    std::vector<AlphaContext> contexts;
    for (double alpha : options.alphas) {
        GridCase scaled = scale_limits(grid, alpha);
        AlphaContext ctx{scaled, Vec(), std::nullopt};
        try {
            Vec dispatch = dc_opf(scaled, Topology::full(scaled));
            std::vector<Bus> buses = scaled.buses();
            for (int v = 0; v < scaled.bus_count(); ++v) buses[v].gen = dispatch[v];
            ctx.grid = GridCase(std::move(buses), scaled.lines());
            ctx.dispatch = dispatch;
        } catch (const GridError& e) {
            ctx.opf_error = e.what();
        }
        contexts.push_back(std::move(ctx));
    }

    std::vector<ScenarioSpec> specs;
    for (const Strategy& strategy : options.strategies)
        for (size_t ai = 0; ai < options.alphas.size(); ++ai)
            for (int e = 0; e < grid.line_count(); ++e) {
                if (!grid.lines()[e].in_service) continue;
                if (strategy.tree &&
                    std::find(partition.switched_off.begin(), partition.switched_off.end(),
                              e) != partition.switched_off.end())
                    continue;
                specs.push_back({strategy, options.alphas[ai], e});
            }

    std::vector<ScenarioResult> results(specs.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= specs.size()) return;
            const ScenarioSpec& spec = specs[i];
            ScenarioResult& out = results[i];
            out.line = spec.line;
            out.strategy = spec.strategy.name();
            out.alpha = spec.alpha;
            size_t ai = std::find(options.alphas.begin(), options.alphas.end(), spec.alpha) -
                        options.alphas.begin();
            const AlphaContext& ctx = contexts[ai];
            if (ctx.opf_error) {
                out.errored = true;
                out.error = "dispatch: " + *ctx.opf_error;
                continue;
            }
            try {
                Topology base = Topology::full(ctx.grid);
                if (spec.strategy.tree) base = base.without(partition.switched_off);
                AreaSet areas = AreaSet::from_map(ctx.grid, area_map);
                ControllerRule rule(spec.strategy.controller, areas);
                CascadeTrace trace =
                    run_cascade(ctx.grid, base, ctx.dispatch, ctx.grid.nominal_demand(),
                                {spec.line}, rule, options.max_stages);
                const StageRecord& last = trace.final_stage();
                out.stages = static_cast<int>(trace.stages.size());
                out.llr = llr(ctx.grid.nominal_demand(), last.load);
                out.agr = agr(ctx.grid, ctx.dispatch, last.gen, options.agr_tol);
                for (const auto& st : trace.stages)
                    if (st.control && st.control->level_used > out.level)
                        out.level = st.control->level_used;
                const auto& first = trace.stages.front();
                out.severe = first.control && !first.control->feasible_at_entry;
            } catch (const std::exception& e) {
                out.errored = true;
                out.error = e.what();
            }
        }
    };
    int workers = std::max(1, options.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    SweepReport report;
    report.scenarios = std::move(results);
    report.rows = aggregate(report.scenarios);
    std::ostringstream cfg;
    cfg << "alphas=";
    for (double a : options.alphas) cfg << a << ",";
    cfg << ";strategies=";
    for (const auto& s : options.strategies) cfg << s.name() << ",";
    cfg << ";max_stages=" << options.max_stages << ";agr_tol=" << options.agr_tol
        << ";buses=" << grid.bus_count() << ";lines=" << grid.line_count();
    report.config_hash = fnv1a_hex(cfg.str());
    return report;
}

void write_report_json(const SweepReport& report, const std::string& path) {
    json root;
    root["tool_version"] = kToolVersion;
    root["config_hash"] = report.config_hash;
    root["rows"] = json::array();
    for (const auto& r : report.rows) {
        root["rows"].push_back({{"strategy", r.strategy},
                                {"alpha", r.alpha},
                                {"scenarios", r.scenarios},
                                {"errored", r.errored},
                                {"frac_nonzero_llr", r.frac_nonzero_llr},
                                {"frac_nonzero_agr", r.frac_nonzero_agr},
                                {"mean_nonzero_llr", r.mean_nonzero_llr},
                                {"mean_nonzero_agr", r.mean_nonzero_agr}});
    }
    std::ofstream out(path);
    if (!out) throw GridError("cannot write " + path);
    out << root.dump(2) << "\n";
}

void write_scenarios_csv(const SweepReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw GridError("cannot write " + path);
    out << "# tool_version=" << kToolVersion << " config_hash=" << report.config_hash << "\n";
    out << "strategy,alpha,line,llr,agr,stages,level,severe,errored,error\n";
    out.precision(17);
    for (const auto& s : report.scenarios) {
        std::string err = s.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << s.strategy << "," << s.alpha << "," << s.line << "," << s.llr << "," << s.agr
            << "," << s.stages << "," << level_name(s.level) << "," << (s.severe ? 1 : 0)
            << "," << (s.errored ? 1 : 0) << "," << err << "\n";
    }
}

void write_tables_md(const SweepReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw GridError("cannot write " + path);
    std::vector<double> alphas;
    std::vector<std::string> strategies;
    for (const auto& r : report.rows) {
        if (std::find(alphas.begin(), alphas.end(), r.alpha) == alphas.end())
            alphas.push_back(r.alpha);
        if (std::find(strategies.begin(), strategies.end(), r.strategy) == strategies.end())
            strategies.push_back(r.strategy);
    }
    auto find_row = [&](const std::string& s, double a) -> const AggregateRow* {
        for (const auto& r : report.rows)
            if (r.strategy == s && r.alpha == a) return &r;
        return nullptr;
    };
    auto emit = [&](const std::string& title, auto frac, auto mean) {
        out << "## " << title << "\n\n| strategy |";
        for (double a : alphas) out << " alpha=" << a << " |";
        out << "\n|---|";
        for (size_t i = 0; i < alphas.size(); ++i) out << "---|";
        out << "\n";
        for (const auto& s : strategies) {
            out << "| " << s << " |";
            for (double a : alphas) {
                const AggregateRow* r = find_row(s, a);
                char buf[64];
                if (r)
                    std::snprintf(buf, sizeof buf, " %.2f%% (%.2f%%) |", 100.0 * frac(*r),
                                  100.0 * mean(*r));
                else
                    std::snprintf(buf, sizeof buf, " - |");
                out << buf;
            }
            out << "\n";
        }
        out << "\n";
    };
    out << "# Sweep results\n\ntool_version=" << kToolVersion
        << " config_hash=" << report.config_hash << "\n\n"
        << "Cell format: fraction of scenarios with a nonzero metric"
           " (mean over those scenarios).\n\n";
    emit("Load loss rate", [](const AggregateRow& r) { return r.frac_nonzero_llr; },
         [](const AggregateRow& r) { return r.mean_nonzero_llr; });
    emit("Adjusted generator rate", [](const AggregateRow& r) { return r.frac_nonzero_agr; },
         [](const AggregateRow& r) { return r.mean_nonzero_agr; });
    int errored = 0;
    for (const auto& r : report.rows) errored += r.errored;
    if (errored > 0) out << "Note: " << errored << " scenario(s) errored and were excluded.\n";
}

}  // namespace gridmit
