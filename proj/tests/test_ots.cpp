#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

#include "gridpwl/ots.hpp"

#include <cmath>

using namespace gridpwl;

namespace {

struct Fixture {
    Network net;
    FixedMatrices fm;
    PwlModel model;

    Fixture() : net(load_case(testutil::data_path("case14.m"))), fm(build_fixed_matrices(net)) {
        // A lightly trained model keeps the MILPs realistic but fast to build.
        SampleSet data = generate_samples(net, fm, 600, 5);
        TrainConfig cfg;
        cfg.q = 8;
        cfg.epochs = 150;
        cfg.seed = 3;
        model = train(net, fm, data, cfg);
    }
};

Scenario nominal(const Network& net, double scale = 1.0) {
    Scenario sc;
    sc.p_demand.resize(net.num_buses());
    sc.q_demand.resize(net.num_buses());
    for (int i = 0; i < net.num_buses(); ++i) {
        sc.p_demand[i] = scale * net.buses[i].p_demand;
        sc.q_demand[i] = scale * net.buses[i].q_demand;
    }
    return sc;
}

}  // namespace

TEST_CASE("scenario sampling: deterministic, in range, constant power factor") {
    Network net = load_case(testutil::data_path("case14.m"));
    auto a = make_scenarios(net, 50, 9);
    auto b = make_scenarios(net, 50, 9);
    REQUIRE(a.size() == 50);
    for (std::size_t s = 0; s < a.size(); ++s) {
        CHECK((a[s].p_demand - b[s].p_demand).cwiseAbs().maxCoeff() == 0.0);
        for (int i = 0; i < net.num_buses(); ++i) {
            const double base = net.buses[i].p_demand;
            if (base > 0) {
                const double mult = a[s].p_demand[i] / base;
                CHECK(mult >= 0.5);
                CHECK(mult <= 2.0);
                if (net.buses[i].q_demand != 0.0)
                    CHECK(a[s].q_demand[i] / net.buses[i].q_demand ==
                          doctest::Approx(mult).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("DC-OTS with alpha = 0 equals the DC-OPF LP") {
    Network net = load_case(testutil::data_path("case14.m"));
    Scenario sc = nominal(net);
    OtsConfig cfg;
    cfg.alpha = 0;
    OtsProblem prob = build_dc_ots(net, cfg, sc);
    OtsSolution sol = solve_ots(net, prob, cfg.limits);
    REQUIRE(sol.status == SolveStatus::Optimal);
    for (int e : sol.statuses) CHECK(e == 1);

    // Plain DC-OPF: same LP without binaries or products.
    MilpProblem lp;
    const int n = net.num_buses(), l = net.num_branches();
    const int slack = net.slack();
    std::vector<int> th(n), pf(l);
    for (int i = 0; i < n; ++i) {
        const bool pin = i == slack;
        const double t0 = net.buses[slack].theta_setpoint;
        th[i] = lp.add_var("th" + std::to_string(i), pin ? t0 : t0 - 3.2, pin ? t0 : t0 + 3.2);
    }
    for (int k = 0; k < l; ++k) {
        const Branch& br = net.branches[k];
        pf[k] = lp.add_var("pf" + std::to_string(k), -br.rating, br.rating);
        const double td0 = net.buses[br.from].theta_setpoint - net.buses[br.to].theta_setpoint;
        const int td = lp.add_var("td" + std::to_string(k), td0 - 0.5235987755982988,
                                  td0 + 0.5235987755982988);
        lp.add_row("l" + std::to_string(k),
                   {{th[br.from], 1.0}, {th[br.to], -1.0}, {td, -1.0}}, RowSense::Eq, 0.0);
        lp.add_row("d" + std::to_string(k), {{pf[k], 1.0}, {td, br.b}}, RowSense::Eq, 0.0);
    }
    std::vector<int> pg;
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        pg.push_back(lp.add_var("pg" + std::to_string(g), net.generators[g].p_min,
                                net.generators[g].p_max));
        lp.set_objective_coeff(pg.back(), net.generators[g].cost_linear);
        lp.objective_offset += net.generators[g].cost_const;
    }
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<int, double>> row;
        for (std::size_t g = 0; g < net.generators.size(); ++g)
            if (net.generators[g].bus == i) row.emplace_back(pg[g], 1.0);
        for (int k = 0; k < l; ++k) {
            if (net.branches[k].from == i) row.emplace_back(pf[k], -1.0);
            if (net.branches[k].to == i) row.emplace_back(pf[k], 1.0);
        }
        lp.add_row("b" + std::to_string(i), std::move(row), RowSense::Eq, sc.p_demand[i]);
    }
    MilpSolution ref = solve_lp(lp);
    REQUIRE(ref.status == SolveStatus::Optimal);
    CHECK(std::abs(sol.objective - ref.objective) <= 1e-7 * std::max(1.0, std::abs(ref.objective)));
}

TEST_CASE("DC: single line maximum transfer and islanded load") {
    // One line, b = -10, angle window pi/6 around zero: max flow 10 * pi/6.
    Network net = testutil::two_bus(0.0, 0.1, 0.0, 1.0, 10.0 * 0.5235987755982988 * 0.999);
    Scenario sc = nominal(net);
    OtsConfig cfg;
    cfg.alpha = 0;
    OtsProblem prob = build_dc_ots(net, cfg, sc);
    OtsSolution sol = solve_ots(net, prob, cfg.limits);
    CHECK(sol.status == SolveStatus::Optimal);

    // Slightly above the limit: infeasible.
    Network net2 = testutil::two_bus(0.0, 0.1, 0.0, 1.0, 10.0 * 0.5235987755982988 * 1.001);
    Scenario sc2 = nominal(net2);
    OtsProblem prob2 = build_dc_ots(net2, cfg, sc2);
    OtsSolution sol2 = solve_ots(net2, prob2, cfg.limits);
    CHECK(sol2.status == SolveStatus::Infeasible);

    // Opening the only line with nonzero demand: infeasible.
    OtsConfig cfg3;
    cfg3.alpha = 1;
    Network net3 = testutil::two_bus(0.0, 0.1, 0.0, 1.0, 0.3);
    Scenario sc3 = nominal(net3);
    OtsProblem prob3 = build_dc_ots(net3, cfg3, sc3);
    // Force the line open.
    prob3.milp.vars[prob3.eps[0]].upper = 0.0;
    OtsSolution sol3 = solve_ots(net3, prob3, cfg3.limits);
    CHECK(sol3.status == SolveStatus::Infeasible);
}

TEST_CASE_FIXTURE(Fixture, "PWL-OTS: budget structure and encoding faithfulness") {
    Scenario sc = nominal(net, 1.0);
    OtsConfig cfg;
    cfg.alpha = 1;
    cfg.limits.rel_gap = 1e-6;
    FlowBounds limits = flow_bounds(net);
    OtsProblem prob = build_pwl_ots(net, model, limits, cfg, sc);
    OtsSolution sol = solve_ots(net, prob, cfg.limits);
    REQUIRE(sol.status == SolveStatus::Optimal);

    // Budget: at most one line opened.
    int open_count = 0;
    for (int e : sol.statuses) open_count += e == 0;
    CHECK(open_count <= 1);

    // Faithfulness: the MILP's layer values equal the forward pass at the
    // solved operating point.
    OperatingPoint x = make_operating_point(net, sol.v, sol.theta);
    ForwardTrace tr = forward(model, x);
    const MilpSolution milp_sol = solve_milp(prob.milp, cfg.limits);
    for (int r = 0; r < 4 * net.num_branches(); ++r)
        CHECK(std::abs(milp_sol.value(prob.enc.z3[r]) - tr.z3[r]) <= 1e-5);
    for (int r = 0; r < 2 * net.num_buses(); ++r)
        CHECK(std::abs(milp_sol.value(prob.enc.z4[r]) - tr.z4[r]) <= 1e-5);

    // Nodal balance holds on the switched flows.
    for (int i = 0; i < net.num_buses(); ++i) {
        double p_in = 0.0;
        for (std::size_t g = 0; g < net.generators.size(); ++g)
            if (net.generators[g].bus == i) p_in += sol.p_gen[static_cast<int>(g)];
        for (int k = 0; k < net.num_branches(); ++k) {
            if (net.branches[k].from == i)
                p_in -= milp_sol.value(prob.masked_flows[fm.row_p_fwd(k)]);
            if (net.branches[k].to == i)
                p_in -= milp_sol.value(prob.masked_flows[fm.row_p_rev(k)]);
        }
        CHECK(std::abs(p_in - sc.p_demand[i]) <= 1e-6);
    }
}

TEST_CASE_FIXTURE(Fixture, "PWL-OTS: alpha = 0 pins every line on") {
    Scenario sc = nominal(net);
    OtsConfig cfg;
    cfg.alpha = 0;
    FlowBounds limits = flow_bounds(net);
    OtsProblem prob = build_pwl_ots(net, model, limits, cfg, sc);
    OtsSolution sol = solve_ots(net, prob, cfg.limits);
    REQUIRE(sol.status == SolveStatus::Optimal);
    for (int e : sol.statuses) CHECK(e == 1);
}

TEST_CASE_FIXTURE(Fixture, "PWL-OTS objective does not increase with the budget") {
    Scenario sc = nominal(net, 1.4);
    FlowBounds limits = flow_bounds(net);
    double prev = 0.0;
    for (int alpha : {0, 1, 2}) {
        OtsConfig cfg;
        cfg.alpha = alpha;
        OtsProblem prob = build_pwl_ots(net, model, limits, cfg, sc);
        OtsSolution sol = solve_ots(net, prob, cfg.limits);
        REQUIRE(sol.status == SolveStatus::Optimal);
        if (alpha > 0) CHECK(sol.objective <= prev + 1e-6 * std::max(1.0, std::abs(prev)));
        prev = sol.objective;
    }
}

TEST_CASE("feasibility recheck: clean case and broken cases") {
    Network net = load_case(testutil::data_path("case14.m"));
    FixedMatrices fm = build_fixed_matrices(net);

    SUBCASE("zero demand with all lines on is feasible") {
        Scenario sc;
        sc.p_demand = Vec::Zero(14);
        sc.q_demand = Vec::Zero(14);
        Vec pgen = Vec::Zero(static_cast<int>(net.generators.size()));
        Vec vset(14);
        for (int i = 0; i < 14; ++i) vset[i] = std::min(1.06, net.buses[i].v_setpoint);
        FeasibilityReport rep =
            check_ac_feasibility(net, fm, std::vector<int>(20, 1), pgen, vset, sc);
        CHECK(rep.converged);
        CHECK_FALSE(rep.infeasible);
        CHECK(rep.max_voltage_violation <= 1e-9);
    }
    SUBCASE("opening a bridge is reported as disconnected") {
        Scenario sc;
        sc.p_demand = Vec::Zero(14);
        sc.q_demand = Vec::Zero(14);
        std::vector<int> statuses(20, 1);
        statuses[13] = 0;  // branch 7-8 isolates bus 8
        Vec pgen = Vec::Zero(static_cast<int>(net.generators.size()));
        Vec vset = Vec::Ones(14);
        FeasibilityReport rep = check_ac_feasibility(net, fm, statuses, pgen, vset, sc);
        CHECK(rep.disconnected);
        CHECK(rep.infeasible);
        CHECK_FALSE(rep.converged);
    }
}

TEST_CASE("enumeration baseline on the nominal scenario") {
    Network net = load_case(testutil::data_path("case14.m"));
    FixedMatrices fm = build_fixed_matrices(net);
    Scenario sc;
    sc.p_demand.resize(14);
    sc.q_demand.resize(14);
    for (int i = 0; i < 14; ++i) {
        sc.p_demand[i] = net.buses[i].p_demand;
        sc.q_demand[i] = net.buses[i].q_demand;
    }
    OtsConfig cfg;
    cfg.alpha = 1;
    EnumerationResult res = enumerate_ots(net, fm, cfg, sc);
    REQUIRE(res.feasible);
    CHECK(res.cost > 0.0);
    // The all-on topology must be among the candidates, so the best cost is
    // no worse than the all-on dispatch.
    OtsConfig cfg0 = cfg;
    cfg0.alpha = 0;
    EnumerationResult all_on = enumerate_ots(net, fm, cfg0, sc);
    REQUIRE(all_on.feasible);
    CHECK(res.cost <= all_on.cost + 1e-9);
}
