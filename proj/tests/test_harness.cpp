#include "helpers.hpp"

#include "gridmit/case_io.hpp"
#include "gridmit/harness.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace gridmit;
using namespace gridmit::testing;

TEST_CASE("strategies enumerate the four combinations") {
    auto all = Strategy::all();
    REQUIRE(all.size() == 4);
    CHECK(all[0].name() == "uc-tree");
    CHECK(all[1].name() == "uc-mesh");
    CHECK(all[2].name() == "agc-tree");
    CHECK(all[3].name() == "agc-mesh");
    CHECK(Strategy::parse("agc-tree").controller == ControllerKind::Agc);
    CHECK_THROWS_AS(Strategy::parse("nope"), GridError);
}

TEST_CASE("single-generator dispatch serves the load") {
    GridCase grid = make_twobus();
    Vec g = dc_opf(grid, Topology::full(grid));
    CHECK(g[0] == doctest::Approx(1.0));  // total demand 1.0
    CHECK(g[1] == doctest::Approx(0.0));
}

TEST_CASE("symmetric generators split the load evenly") {
    std::vector<Bus> buses{{.id = 1, .gen = 0.0, .gen_max = 2.0, .cost = 1.0},
                           {.id = 2, .gen = 0.0, .gen_max = 2.0, .cost = 1.0},
                           {.id = 3, .demand = 1.0}};
    GridCase grid(buses, make_triangle().lines());
    Vec g = dc_opf(grid, Topology::full(grid));
    CHECK(g[0] == doctest::Approx(0.5));
    CHECK(g[1] == doctest::Approx(0.5));
}

TEST_CASE("binding line limit shifts dispatch, verified against the QP oracle") {
    std::vector<Bus> buses{{.id = 1, .gen_max = 2.0, .cost = 1.0},
                           {.id = 2, .gen_max = 2.0, .cost = 2.0},
                           {.id = 3, .demand = 1.2}};
    std::vector<Line> lines{{.from = 1, .to = 2, .susceptance = 1.0, .limit = 5.0},
                            {.from = 1, .to = 3, .susceptance = 1.0, .limit = 0.5},
                            {.from = 2, .to = 3, .susceptance = 1.0, .limit = 5.0}};
    GridCase grid(buses, lines);
    Topology topo = Topology::full(grid);
    Vec g = dc_opf(grid, topo);
    // Oracle: 2-variable QP with the same constraint set.
    QpProblem qp;
    qp.q = Vec(2);
    qp.q << 2.0, 4.0;
    qp.c = Vec::Zero(2);
    qp.A = Mat::Ones(1, 2);
    qp.b = Vec::Constant(1, 1.2);
    Mat f = ptdf(topo);
    Vec demand = grid.nominal_demand();
    qp.G = Mat(2 * 3 + 4, 2);
    qp.h = Vec(2 * 3 + 4);
    for (int e = 0; e < 3; ++e) {
        for (int k = 0; k < 2; ++k) {
            qp.G(e, k) = f(e, k);
            qp.G(3 + e, k) = -f(e, k);
        }
        double fd = f.row(e).dot(demand);
        qp.h[e] = topo.limit(e) + fd;
        qp.h[3 + e] = topo.limit(e) - fd;
    }
    qp.G.block(6, 0, 4, 2) << 1, 0, 0, 1, -1, 0, 0, -1;
    qp.h.segment(6, 4) << 2.0, 2.0, 0.0, 0.0;
    auto oracle = brute_force_qp(qp);
    REQUIRE(oracle.has_value());
    CHECK(g[0] == doctest::Approx((*oracle)[0]).epsilon(1e-7));
    CHECK(g[1] == doctest::Approx((*oracle)[1]).epsilon(1e-7));
    // The binding limit is respected.
    Vec p = g - demand;
    Vec flows = dc_power_flow(topo, p).flows;
    CHECK(std::abs(flows[1]) <= 0.5 + 1e-8);
}

TEST_CASE("infeasible dispatch is reported") {
    std::vector<Bus> buses{{.id = 1, .gen_max = 0.5}, {.id = 2, .demand = 1.0}};
    GridCase grid(buses, {{.from = 1, .to = 2, .susceptance = 1.0, .limit = 2.0}});
    CHECK_THROWS_AS(dc_opf(grid, Topology::full(grid)), OpfInfeasible);
}

TEST_CASE("limit scaling") {
    GridCase grid = make_twobus();
    GridCase half = scale_limits(grid, 0.5);
    CHECK(half.lines()[0].limit == doctest::Approx(0.75));
    CHECK(half.buses()[0].gen_max == doctest::Approx(0.75));
    CHECK(half.buses()[1].demand == doctest::Approx(1.0));  // demand untouched
    GridCase same = scale_limits(grid, 1.0);
    CHECK(same.lines()[0].limit == doctest::Approx(1.5));
    CHECK_THROWS_AS(scale_limits(grid, 0.0), GridError);
}

TEST_CASE("metric formulas") {
    Vec demand(2), served(2);
    demand << 10.0, 0.0;
    served << 9.5, 0.0;
    CHECK(llr(demand, served) == doctest::Approx(0.05));
    CHECK_THROWS_AS(llr(Vec::Zero(2), Vec::Zero(2)), ZeroDemand);

    std::vector<Bus> buses;
    for (int i = 1; i <= 10; ++i) {
        Bus b;
        b.id = i;
        b.gen_max = 1.0;
        buses.push_back(b);
    }
    std::vector<Line> lines;
    for (int i = 1; i < 10; ++i)
        lines.push_back({.from = i, .to = i + 1, .susceptance = 1.0, .limit = 1.0});
    GridCase grid(buses, lines);
    Vec pre = Vec::Zero(10), post = Vec::Zero(10);
    post[2] = 0.5;
    post[7] = -0.5;
    CHECK(agr(grid, pre, post) == doctest::Approx(0.2));
    CHECK(agr(grid, pre, pre) == 0.0);
}

TEST_CASE("sweep on the bundled six-bus case") {
    CaseDocument doc = parse_case_file(GRIDMIT_CASE_DIR "/sixbus.json", ParseMode::Strict);
    GridCase grid = doc.to_grid();
    Partition part = partition_from_document(grid, doc);
    // Tree variants need a tree-connected reduced graph.
    part.switched_off = keep_largest_flow(Topology::full(grid), grid.nominal_injection(), part);

    SweepOptions options;
    options.alphas = {1.0};
    SweepReport report = run_sweep(grid, part, options);

    int uc_scenarios = 0;
    for (const auto& s : report.scenarios) {
        CHECK_FALSE(s.errored);
        CHECK(s.llr >= 0.0);
        CHECK(s.llr <= 1.0);
        CHECK(s.agr >= 0.0);
        CHECK(s.agr <= 1.0);
        if (s.strategy.rfind("uc", 0) == 0) {
            CHECK(s.stages == 1);
            ++uc_scenarios;
        }
    }
    CHECK(uc_scenarios > 0);
    // Report algebra: aggregates recomputed from scenarios match exactly.
    auto rows = aggregate(report.scenarios);
    REQUIRE(rows.size() == report.rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].frac_nonzero_llr == report.rows[i].frac_nonzero_llr);
        CHECK(rows[i].mean_nonzero_llr == report.rows[i].mean_nonzero_llr);
        CHECK(rows[i].frac_nonzero_agr == report.rows[i].frac_nonzero_agr);
        CHECK(rows[i].mean_nonzero_agr == report.rows[i].mean_nonzero_agr);
    }
}

TEST_CASE("sweep output is identical across worker counts") {
    CaseDocument doc = parse_case_file(GRIDMIT_CASE_DIR "/sixbus.json", ParseMode::Strict);
    GridCase grid = doc.to_grid();
    Partition part = partition_from_document(grid, doc);
    part.switched_off = keep_largest_flow(Topology::full(grid), grid.nominal_injection(), part);

    SweepOptions serial;
    serial.alphas = {0.9, 1.1};
    SweepOptions parallel = serial;
    parallel.workers = 4;
    SweepReport a = run_sweep(grid, part, serial);
    SweepReport b = run_sweep(grid, part, parallel);

    write_scenarios_csv(a, "sweep_a_tmp.csv");
    write_scenarios_csv(b, "sweep_b_tmp.csv");
    auto slurp = [](const char* p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    CHECK(slurp("sweep_a_tmp.csv") == slurp("sweep_b_tmp.csv"));
    std::remove("sweep_a_tmp.csv");
    std::remove("sweep_b_tmp.csv");
}

TEST_CASE("report files are written with version and config hash") {
    CaseDocument doc = parse_case_file(GRIDMIT_CASE_DIR "/sixbus.json", ParseMode::Strict);
    GridCase grid = doc.to_grid();
    Partition part = partition_from_document(grid, doc);
    SweepOptions options;
    options.alphas = {1.0};
    options.strategies = {Strategy::parse("uc-mesh")};
    SweepReport report = run_sweep(grid, part, options);
    write_report_json(report, "report_tmp.json");
    write_tables_md(report, "tables_tmp.md");
    std::ifstream in("report_tmp.json");
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str().find(report.config_hash) != std::string::npos);
    CHECK(ss.str().find(kToolVersion) != std::string::npos);
    std::remove("report_tmp.json");
    std::remove("tables_tmp.md");
}
