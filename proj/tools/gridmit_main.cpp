#include "gridmit/case_io.hpp"
#include "gridmit/cascade.hpp"
#include "gridmit/dynamics.hpp"
#include "gridmit/harness.hpp"
#include "gridmit/kkt.hpp"
#include "gridmit/partition.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gridmit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitSolver = 4;

/// Parses "from-to" into a grid line index.
int parse_line_ref(const GridCase& grid, const std::string& ref) {
    auto dash = ref.find('-');
    if (dash == std::string::npos)
        throw GridError("line reference '" + ref + "' is not of the form FROM-TO");
    int from = std::stoi(ref.substr(0, dash));
    int to = std::stoi(ref.substr(dash + 1));
    auto idx = grid.find_line(from, to);
    if (!idx) throw GridError("no line " + ref + " in case");
    return *idx;
}

std::string line_label(const GridCase& grid, int e) {
    const Line& l = grid.lines()[e];
    return "(" + std::to_string(l.from) + "," + std::to_string(l.to) + ")";
}

Partition auto_partition(const GridCase& grid, const std::string& switching) {
    Topology full = Topology::full(grid);
    Partition part = modularity_bisect(full);
    Vec p0 = grid.nominal_injection();
    if (switching == "optimal")
        part.switched_off = optimal_switching(full, p0, part).switched_off;
    else if (switching == "largest-flow")
        part.switched_off = keep_largest_flow(full, p0, part);
    return part;
}

Partition load_or_build_partition(const GridCase& grid, const CaseDocument& doc,
                                  const std::string& partition_path,
                                  const std::string& switching) {
    if (!partition_path.empty()) {
        CaseDocument pdoc = parse_case_file(partition_path, ParseMode::Lenient);
        return partition_from_document(grid, pdoc);
    }
    if (doc.has_partition()) return partition_from_document(grid, doc);
    return auto_partition(grid, switching);
}

void write_json_file(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw GridError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json solution_to_json(const GridCase& grid, const Topology& topo,
                      const ControlSolution& sol, RelaxationLevel level) {
    json j;
    j["level"] = static_cast<int>(level);
    j["objective"] = sol.objective;
    j["max_abs_dual"] = sol.max_abs_dual();
    json d = json::array(), flows = json::array();
    for (int v = 0; v < grid.bus_count(); ++v)
        d.push_back({{"bus", grid.bus_id(v)},
                     {"d_gen", sol.d_gen[v]},
                     {"d_load", sol.d_load[v]}});
    for (int e = 0; e < topo.line_count(); ++e)
        flows.push_back({{"line", line_label(grid, topo.line_indices()[e])},
                         {"flow", sol.flows[e]},
                         {"limit", topo.limit(e)}});
    j["control"] = d;
    j["flows"] = flows;
    return j;
}

int cmd_solve(const std::string& case_path, const std::vector<std::string>& failures,
              ParseMode mode) {
    GridCase grid = load_grid(case_path, mode);
    Topology full = Topology::full(grid);
    Vec p0 = grid.nominal_injection();
    PowerFlowState base = dc_power_flow(full, p0, 1e-6);
    if (failures.empty()) {
        std::cout << "nominal flows (pu):\n";
        for (int e = 0; e < full.line_count(); ++e)
            std::cout << "  " << line_label(grid, full.line_indices()[e]) << "  f="
                      << base.flows[e] << "  limit=" << full.limit(e) << "\n";
        return kExitOk;
    }
    std::vector<int> failed;
    for (const auto& ref : failures) failed.push_back(parse_line_ref(grid, ref));
    Topology surviving = full.without(failed);
    AreaSet areas = AreaSet::from_grid(grid);
    Vec ace0 = area_ace(areas, full, base.flows);
    ControlProblem problem =
        make_control_problem(grid, surviving, grid.nominal_generation(),
                             grid.nominal_demand(), areas, ace0, RelaxationLevel::L0,
                             ControllerKind::Uc);
    auto [sol, level] = mitigate(problem);
    std::cout << "mitigated at level L" << static_cast<int>(level)
              << "  objective=" << sol.objective << "  max|dual|=" << sol.max_abs_dual()
              << "\n";
    for (int v = 0; v < grid.bus_count(); ++v)
        if (std::abs(sol.d[v]) > 1e-9)
            std::cout << "  bus " << grid.bus_id(v) << ": d_gen=" << sol.d_gen[v]
                      << " d_load=" << sol.d_load[v] << "\n";
    for (int e = 0; e < surviving.line_count(); ++e)
        std::cout << "  " << line_label(grid, surviving.line_indices()[e]) << "  f="
                  << sol.flows[e] << "  limit=" << surviving.limit(e) << "\n";
    return kExitOk;
}

int cmd_cascade(const std::string& case_path, const std::string& failure,
                const std::string& rule_name, int max_stages, const std::string& out_dir,
                ParseMode mode) {
    GridCase grid = load_grid(case_path, mode);
    int failed = parse_line_ref(grid, failure);
    std::unique_ptr<BalancingRule> rule;
    if (rule_name == "prop") {
        rule = std::make_unique<ProportionalRule>();
    } else if (rule_name == "droop") {
        rule = std::make_unique<DroopRule>();
    } else if (rule_name == "uc" || rule_name == "agc") {
        rule = std::make_unique<ControllerRule>(
            rule_name == "uc" ? ControllerKind::Uc : ControllerKind::Agc,
            AreaSet::from_grid(grid));
    } else {
        std::cerr << "unknown rule '" << rule_name << "'\n";
        return kExitUsage;
    }
    CascadeTrace trace = run_cascade(grid, {failed}, *rule, max_stages);
    json j;
    j["tool_version"] = kToolVersion;
    j["rule"] = rule_name;
    j["initial_failure"] = line_label(grid, failed);
    j["terminated"] = trace.terminal == TerminalStatus::Terminated;
    j["stages"] = json::array();
    for (const auto& st : trace.stages) {
        json js;
        js["stage"] = st.stage;
        js["tripped"] = json::array();
        for (int e : st.tripped) js["tripped"].push_back(line_label(grid, e));
        js["overloads"] = json::array();
        for (int e : st.overloads) js["overloads"].push_back(line_label(grid, e));
        js["total_gen"] = st.gen.sum();
        js["total_load"] = st.load.sum();
        if (st.control) {
            js["level"] = static_cast<int>(st.control->level_used);
            js["feasible_at_entry"] = st.control->feasible_at_entry;
        }
        j["stages"].push_back(js);
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_json_file(j, fs::path(out_dir) / "cascade.json");
    }
    std::cout << "cascade: " << trace.stages.size() << " stage(s), "
              << (trace.terminal == TerminalStatus::Terminated ? "terminated"
                                                               : "max stages exceeded")
              << ", final served load " << trace.final_stage().load.sum() << " pu\n";
    return kExitOk;
}

int cmd_partition(const std::string& case_path, const std::string& method,
                  const std::string& switching, const std::string& out_dir,
                  ParseMode mode) {
    CaseDocument doc = load_case(case_path, mode);
    GridCase grid = doc.to_grid();
    Topology full = Topology::full(grid);
    Partition part;
    if (method == "given") {
        part = partition_from_document(grid, doc);
    } else if (method == "modularity") {
        part = modularity_bisect(full);
    } else {
        std::cerr << "unknown method '" << method << "'\n";
        return kExitUsage;
    }
    Vec p0 = grid.nominal_injection();
    if (switching == "optimal") {
        SwitchingResult res = optimal_switching(full, p0, part);
        part.switched_off = res.switched_off;
    } else if (switching == "largest-flow") {
        part.switched_off = keep_largest_flow(full, p0, part);
    } else if (switching != "none") {
        std::cerr << "unknown switching '" << switching << "'\n";
        return kExitUsage;
    }
    double gamma = congestion_level(full, p0, part, part.switched_off);
    auto sizes = part.area_sizes();
    std::cout << "areas:";
    for (int s : sizes) std::cout << " " << s;
    std::cout << "\ntie lines:";
    for (int e : tie_lines(full, part)) std::cout << " " << line_label(grid, e);
    std::cout << "\nswitched off:";
    for (int e : part.switched_off) std::cout << " " << line_label(grid, e);
    std::cout << "\ncongestion level gamma = " << gamma << "\n";
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        CaseDocument out_doc = doc;
        attach_partition(out_doc, grid, part);
        write_case_file(out_doc, (fs::path(out_dir) / "partitioned_case.json").string());
        json pj;
        pj["tool_version"] = kToolVersion;
        json area_of = json::object();
        for (int v = 0; v < grid.bus_count(); ++v)
            area_of[std::to_string(grid.bus_id(v))] = part.area_of[v];
        pj["area_of"] = area_of;
        pj["switched_off"] = json::array();
        for (int e : part.switched_off) {
            const Line& l = grid.lines()[e];
            pj["switched_off"].push_back({l.from, l.to});
        }
        pj["gamma"] = gamma;
        write_json_file(pj, fs::path(out_dir) / "partition.json");
    }
    return kExitOk;
}

int cmd_sweep(const std::string& case_path, const std::string& partition_path,
              const std::vector<double>& alphas, const std::string& strategies_csv,
              int max_stages, int workers, const std::string& out_dir, ParseMode mode) {
    CaseDocument doc = load_case(case_path, mode);
    GridCase grid = doc.to_grid();
    Partition part = load_or_build_partition(grid, doc, partition_path, "optimal");
    SweepOptions options;
    if (!alphas.empty()) options.alphas = alphas;
    if (!strategies_csv.empty()) {
        options.strategies.clear();
        std::stringstream ss(strategies_csv);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) options.strategies.push_back(Strategy::parse(item));
    }
    options.max_stages = max_stages;
    options.workers = workers;
    SweepReport report = run_sweep(grid, part, options);
    fs::create_directories(out_dir);
    write_report_json(report, (fs::path(out_dir) / "report.json").string());
    write_scenarios_csv(report, (fs::path(out_dir) / "scenarios.csv").string());
    write_tables_md(report, (fs::path(out_dir) / "tables.md").string());
    std::cout << "sweep: " << report.scenarios.size() << " scenarios -> " << out_dir << "\n";
    for (const auto& r : report.rows)
        std::cout << "  " << r.strategy << " alpha=" << r.alpha
                  << "  nonzero-LLR " << 100.0 * r.frac_nonzero_llr << "% (mean "
                  << 100.0 * r.mean_nonzero_llr << "%)  nonzero-AGR "
                  << 100.0 * r.frac_nonzero_agr << "% (mean " << 100.0 * r.mean_nonzero_agr
                  << "%)" << (r.errored ? "  [" + std::to_string(r.errored) + " errored]" : "")
                  << "\n";
    return kExitOk;
}

int cmd_demo39(const std::string& case_path, double dual_threshold, double horizon,
               const std::string& out_dir, ParseMode mode) {
    CaseDocument doc = load_case(case_path, mode);
    GridCase grid = doc.to_grid();
    Topology full = Topology::full(grid);
    // Operate on the tree-connected network when the case ships a partition
    // with switched-off tie lines.
    AreaSet areas = AreaSet::from_grid(grid);
    if (doc.has_partition()) {
        Partition part = partition_from_document(grid, doc);
        full = full.without(part.switched_off);
        std::map<int, int> m;
        for (auto& [id, a] : doc.partition_area_of) m[id] = a;
        areas = AreaSet::from_map(grid, m);
    }
    Vec p0 = grid.nominal_injection();
    PowerFlowState base = dc_power_flow(full, p0, 1e-6);
    Vec ace0 = area_ace(areas, full, base.flows);
    fs::create_directories(out_dir);
    json log;
    log["tool_version"] = kToolVersion;
    log["dual_threshold"] = dual_threshold;
    log["events"] = json::array();

    for (const std::string& ref : {std::string("4-14"), std::string("6-7")}) {
        int failed = parse_line_ref(grid, ref);
        Topology surviving = full.without(std::vector<int>{failed});
        ControlProblem problem =
            make_control_problem(grid, surviving, grid.nominal_generation(),
                                 grid.nominal_demand(), areas, ace0, RelaxationLevel::L0,
                                 ControllerKind::Uc);
        Vec f0(surviving.line_count());
        for (int e = 0; e < surviving.line_count(); ++e)
            f0[e] = base.flows[full.position_of(surviving.line_indices()[e])];

        SimulateOptions sim;
        sim.horizon = horizon;
        sim.dual_threshold = dual_threshold;
        Detection det = detect_severe(problem, f0, dual_threshold, horizon, sim);

        UcController controller(problem);
        Trajectory traj = simulate(grid, surviving, problem.p0(), f0, controller, sim);
        std::string csv = (fs::path(out_dir) / ("trajectory_" + std::to_string(failed) +
                                                ".csv")).string();
        write_trajectory_csv(traj, grid, surviving, csv);

        auto [sol, level] = mitigate(problem);
        double shed = -sol.d_load.sum();
        json ev;
        ev["failure"] = line_label(grid, failed);
        ev["severe"] = det.severe;
        ev["warning_time"] = det.warning_time;
        ev["max_dual_seen"] = det.max_dual_seen;
        ev["mitigation_level"] = static_cast<int>(level);
        ev["shed_pu"] = shed;
        ev["trajectory_csv"] = csv;
        log["events"].push_back(ev);
        std::cout << "failure " << line_label(grid, failed) << ": "
                  << (det.severe ? "SEVERE (warning at t=" + std::to_string(det.warning_time) +
                                       " s)"
                                 : "not severe")
                  << ", mitigated at level L" << static_cast<int>(level) << ", shed " << shed
                  << " pu\n";
    }
    write_json_file(log, fs::path(out_dir) / "demo39_events.json");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DC-network failure mitigation toolkit"};
    app.require_subcommand(1);

    std::string case_path, out_dir, partition_path;
    bool strict = false;
    std::vector<std::string> failures;
    std::string rule = "uc", method = "modularity", switching = "optimal";
    std::string failure, strategies_csv;
    std::vector<double> alphas;
    int max_stages = kDefaultMaxStages, workers = 1;
    double dual_threshold = 0.5, horizon = 60.0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("case", case_path, "case file (.json or .m)")->required();
        cmd->add_flag("--strict-parse", strict, "reject unknown fields");
    };

    CLI::App* solve = app.add_subcommand("solve", "DC flow or post-failure mitigation");
    add_common(solve);
    solve->add_option("--failure", failures, "failed line as FROM-TO (repeatable)");

    CLI::App* cascade = app.add_subcommand("cascade", "single cascade trace");
    add_common(cascade);
    cascade->add_option("--failure", failure, "initial failed line FROM-TO")->required();
    cascade->add_option("--rule", rule, "balancing rule: prop|droop|agc|uc");
    cascade->add_option("--max-stages", max_stages, "stage cap");
    cascade->add_option("--out", out_dir, "output directory");

    CLI::App* partition = app.add_subcommand("partition", "area construction and switching");
    add_common(partition);
    partition->add_option("--method", method, "modularity|given");
    partition->add_option("--switching", switching, "optimal|largest-flow|none");
    partition->add_option("--out", out_dir, "output directory");

    CLI::App* sweep = app.add_subcommand("sweep", "full contingency sweep");
    add_common(sweep);
    sweep->add_option("--partition", partition_path, "partition case file (default: auto)");
    sweep->add_option("--alpha", alphas, "limit scaling factors")->delimiter(',');
    sweep->add_option("--strategies", strategies_csv,
                      "comma list of uc-tree,uc-mesh,agc-tree,agc-mesh");
    sweep->add_option("--max-stages", max_stages, "stage cap");
    sweep->add_option("--workers", workers, "worker threads");
    sweep->add_option("--out", out_dir, "output directory")->required();

    CLI::App* demo = app.add_subcommand("demo39", "two-area demonstration scenario");
    add_common(demo);
    demo->add_option("--dual-threshold", dual_threshold, "severity threshold, pu");
    demo->add_option("--horizon", horizon, "simulation horizon, s");
    demo->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    ParseMode mode = strict ? ParseMode::Strict : ParseMode::Lenient;

    try {
        if (solve->parsed()) return cmd_solve(case_path, failures, mode);
        if (cascade->parsed())
            return cmd_cascade(case_path, failure, rule, max_stages, out_dir, mode);
        if (partition->parsed())
            return cmd_partition(case_path, method, switching, out_dir, mode);
        if (sweep->parsed())
            return cmd_sweep(case_path, partition_path, alphas, strategies_csv, max_stages,
                             workers, out_dir, mode);
        if (demo->parsed())
            return cmd_demo39(case_path, dual_threshold, horizon, out_dir, mode);
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const SchemaError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ValueError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const UnsupportedFeature& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const GridError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitUsage;
}
