#include "gridpwl/ots.hpp"

#include "gridpwl/rng.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace gridpwl {

namespace {

constexpr double kAngleHalf = 0.5235987755982988;  // pi/6

Vec anchor_theta_diff(const Network& net) {
    Vec td(net.num_branches());
    for (int k = 0; k < net.num_branches(); ++k)
        td[k] = net.buses[net.branches[k].from].theta_setpoint -
                net.buses[net.branches[k].to].theta_setpoint;
    return td;
}

std::vector<int> all_switchable(const Network& net, const OtsConfig& cfg) {
    if (!cfg.switchable.empty()) return cfg.switchable;
    std::vector<int> out;
    for (int k = 0; k < net.num_branches(); ++k)
        if (net.branches[k].switchable) out.push_back(k);
    return out;
}

}  // namespace

std::vector<Scenario> make_scenarios(const Network& net, int count, std::uint64_t seed) {
    std::vector<Scenario> out;
    out.reserve(count);
    const int n = net.num_buses();
    for (int s = 0; s < count; ++s) {
        RngStream rng(seed, 0x5CE0ull + static_cast<std::uint64_t>(s));
        Scenario sc;
        sc.p_demand.resize(n);
        sc.q_demand.resize(n);
        for (int i = 0; i < n; ++i) {
            const double mult = rng.uniform(0.5, 2.0);
            sc.p_demand[i] = mult * net.buses[i].p_demand;
            sc.q_demand[i] = mult * net.buses[i].q_demand;
        }
        out.push_back(std::move(sc));
    }
    return out;
}

OtsProblem build_pwl_ots(const Network& net, const PwlModel& model, const FlowBounds& limits,
                         const OtsConfig& cfg, const Scenario& scenario,
                         const FlowBounds* mccormick) {
    const int n = net.num_buses();
    const int l = net.num_branches();
    const int slack = net.slack();

    OtsProblem ots;
    MilpProblem& p = ots.milp;

    InputBox box = cfg.box.v_lo.size() ? cfg.box : default_box(net, model.x0);
    const ReluBounds rb = relu_bounds(model, box);
    FlowBounds envelope = mccormick ? *mccormick : model_flow_range(model, box, rb);
    // The product bounds must contain zero so an open line stays feasible.
    for (int r = 0; r < 4 * l; ++r) {
        envelope.lower[r] = std::min(envelope.lower[r], 0.0);
        envelope.upper[r] = std::max(envelope.upper[r], 0.0);
    }

    ots.enc = encode_relu(p, model, box, rb);

    // Absolute voltage and nodal angle variables, linked to the deviations.
    for (int i = 0; i < n; ++i) {
        const double lo = std::max(box.v_lo[i], net.buses[i].v_min);
        const double hi = std::min(box.v_hi[i], net.buses[i].v_max);
        ots.v.push_back(p.add_var("v_" + std::to_string(i), std::min(lo, hi), std::max(lo, hi)));
        p.add_row("link_v_" + std::to_string(i), {{ots.v[i], 1.0}, {ots.enc.dv[i], -1.0}},
                  RowSense::Eq, model.x0.v[i]);
    }
    const double slack_theta = net.buses[slack].theta_setpoint;
    for (int i = 0; i < n; ++i) {
        const bool pinned = i == slack;
        ots.theta.push_back(p.add_var("th_" + std::to_string(i),
                                      pinned ? slack_theta : slack_theta - 3.2,
                                      pinned ? slack_theta : slack_theta + 3.2));
    }
    for (int k = 0; k < l; ++k) {
        p.add_row("link_td_" + std::to_string(k),
                  {{ots.theta[net.branches[k].from], 1.0},
                   {ots.theta[net.branches[k].to], -1.0},
                   {ots.enc.dtd[k], -1.0}},
                  RowSense::Eq, model.x0.theta_diff[k]);
    }

    // Line statuses: binaries on switchable branches, pinned to 1 elsewhere.
    std::vector<char> can_switch(l, 0);
    for (int k : all_switchable(net, cfg)) can_switch[k] = 1;
    for (int k = 0; k < l; ++k)
        ots.eps.push_back(
            p.add_var("eps_" + std::to_string(k), can_switch[k] ? 0.0 : 1.0, 1.0, true));
    {
        std::vector<std::pair<int, double>> row;
        for (int k = 0; k < l; ++k) row.emplace_back(ots.eps[k], 1.0);
        p.add_row("budget", std::move(row), RowSense::Ge, static_cast<double>(l - cfg.alpha));
    }

    // Switched flows with exact products; line limits land on the products.
    std::vector<int> eps_per_flow;
    for (int r = 0; r < 4 * l; ++r) eps_per_flow.push_back(ots.eps[r % l]);
    ots.masked_flows = encode_switching(p, ots.enc.z3, eps_per_flow, envelope);
    // Line limits land on the switched flows; zero stays inside so opening a
    // line is always admissible.
    for (int r = 0; r < 4 * l; ++r) {
        MilpVar& mv = p.vars[ots.masked_flows[r]];
        mv.lower = std::max(mv.lower, std::min(0.0, limits.lower[r]));
        mv.upper = std::min(mv.upper, std::max(0.0, limits.upper[r]));
    }

    // Generators and nodal balance on the switched flows.
    std::vector<std::vector<int>> gens_at(n);
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const Generator& gen = net.generators[g];
        ots.p_gen.push_back(p.add_var("pg_" + std::to_string(g), gen.p_min, gen.p_max));
        ots.q_gen.push_back(p.add_var("qg_" + std::to_string(g), gen.q_min, gen.q_max));
        p.set_objective_coeff(ots.p_gen.back(), gen.cost_linear);
        p.objective_offset += gen.cost_const;
        gens_at[gen.bus].push_back(static_cast<int>(g));
    }
    const FixedMatrices& fm = model.fixed;
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<int, double>> prow, qrow;
        for (int g : gens_at[i]) {
            prow.emplace_back(ots.p_gen[g], 1.0);
            qrow.emplace_back(ots.q_gen[g], 1.0);
        }
        for (int k = 0; k < l; ++k) {
            if (net.branches[k].from == i) {
                prow.emplace_back(ots.masked_flows[fm.row_p_fwd(k)], -1.0);
                qrow.emplace_back(ots.masked_flows[fm.row_q_fwd(k)], -1.0);
            }
            if (net.branches[k].to == i) {
                prow.emplace_back(ots.masked_flows[fm.row_p_rev(k)], -1.0);
                qrow.emplace_back(ots.masked_flows[fm.row_q_rev(k)], -1.0);
            }
        }
        p.add_row("bal_p_" + std::to_string(i), std::move(prow), RowSense::Eq,
                  scenario.p_demand[i]);
        p.add_row("bal_q_" + std::to_string(i), std::move(qrow), RowSense::Eq,
                  scenario.q_demand[i]);
    }
    return ots;
}

OtsProblem build_dc_ots(const Network& net, const OtsConfig& cfg, const Scenario& scenario) {
    const int n = net.num_buses();
    const int l = net.num_branches();
    const int slack = net.slack();
    const Vec td0 = anchor_theta_diff(net);

    OtsProblem ots;
    MilpProblem& p = ots.milp;

    const double slack_theta = net.buses[slack].theta_setpoint;
    for (int i = 0; i < n; ++i) {
        const bool pinned = i == slack;
        ots.theta.push_back(p.add_var("th_" + std::to_string(i),
                                      pinned ? slack_theta : slack_theta - 3.2,
                                      pinned ? slack_theta : slack_theta + 3.2));
    }

    // Flows P_k = -b_k * theta_diff_k over the +-pi/6 window around the case
    // angles; the window makes the product bounds finite.
    std::vector<int> flow_vars, td_vars;
    FlowBounds envelope;
    envelope.lower.resize(l);
    envelope.upper.resize(l);
    for (int k = 0; k < l; ++k) {
        const Branch& br = net.branches[k];
        const double lo_td = td0[k] - kAngleHalf, hi_td = td0[k] + kAngleHalf;
        td_vars.push_back(p.add_var("td_" + std::to_string(k), lo_td, hi_td));
        p.add_row("link_td_" + std::to_string(k),
                  {{ots.theta[br.from], 1.0}, {ots.theta[br.to], -1.0}, {td_vars[k], -1.0}},
                  RowSense::Eq, 0.0);
        const double a = -br.b * lo_td, b = -br.b * hi_td;
        envelope.lower[k] = std::min({a, b, 0.0});
        envelope.upper[k] = std::max({a, b, 0.0});
        flow_vars.push_back(
            p.add_var("pf_" + std::to_string(k), envelope.lower[k], envelope.upper[k]));
        p.add_row("def_pf_" + std::to_string(k), {{flow_vars[k], 1.0}, {td_vars[k], br.b}},
                  RowSense::Eq, 0.0);
    }

    std::vector<char> can_switch(l, 0);
    for (int k : all_switchable(net, cfg)) can_switch[k] = 1;
    for (int k = 0; k < l; ++k)
        ots.eps.push_back(
            p.add_var("eps_" + std::to_string(k), can_switch[k] ? 0.0 : 1.0, 1.0, true));
    {
        std::vector<std::pair<int, double>> row;
        for (int k = 0; k < l; ++k) row.emplace_back(ots.eps[k], 1.0);
        p.add_row("budget", std::move(row), RowSense::Ge, static_cast<double>(l - cfg.alpha));
    }

    ots.masked_flows = encode_switching(p, flow_vars, ots.eps, envelope);
    for (int k = 0; k < l; ++k) {
        MilpVar& mv = p.vars[ots.masked_flows[k]];
        mv.lower = std::max(mv.lower, -net.branches[k].rating);
        mv.upper = std::min(mv.upper, net.branches[k].rating);
    }

    std::vector<std::vector<int>> gens_at(n);
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const Generator& gen = net.generators[g];
        ots.p_gen.push_back(p.add_var("pg_" + std::to_string(g), gen.p_min, gen.p_max));
        p.set_objective_coeff(ots.p_gen.back(), gen.cost_linear);
        p.objective_offset += gen.cost_const;
        gens_at[gen.bus].push_back(static_cast<int>(g));
    }
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<int, double>> row;
        for (int g : gens_at[i]) row.emplace_back(ots.p_gen[g], 1.0);
        for (int k = 0; k < l; ++k) {
            if (net.branches[k].from == i) row.emplace_back(ots.masked_flows[k], -1.0);
            if (net.branches[k].to == i) row.emplace_back(ots.masked_flows[k], 1.0);
        }
        p.add_row("bal_p_" + std::to_string(i), std::move(row), RowSense::Eq,
                  scenario.p_demand[i]);
    }
    return ots;
}

OtsSolution solve_ots(const Network& net, const OtsProblem& prob, const SolveLimits& limits) {
    const MilpSolution sol = solve_milp(prob.milp, limits);
    OtsSolution out;
    out.status = sol.status;
    out.gap = sol.gap;
    out.nodes_explored = sol.nodes_explored;
    if (sol.status != SolveStatus::Optimal && sol.status != SolveStatus::BudgetExceeded)
        return out;
    if (sol.values.empty()) return out;  // budget ran out before any incumbent
    out.objective = sol.objective;
    for (int e : prob.eps) out.statuses.push_back(static_cast<int>(std::lround(sol.value(e))));
    out.p_gen.resize(static_cast<int>(prob.p_gen.size()));
    for (std::size_t g = 0; g < prob.p_gen.size(); ++g)
        out.p_gen[static_cast<int>(g)] = sol.value(prob.p_gen[g]);
    out.q_gen = Vec::Zero(static_cast<int>(net.generators.size()));
    for (std::size_t g = 0; g < prob.q_gen.size(); ++g)
        out.q_gen[static_cast<int>(g)] = sol.value(prob.q_gen[g]);
    const int n = net.num_buses();
    out.v.resize(n);
    out.theta.resize(n);
    for (int i = 0; i < n; ++i) {
        out.v[i] = prob.v.empty() ? net.buses[i].v_setpoint : sol.value(prob.v[i]);
        out.theta[i] = sol.value(prob.theta[i]);
    }
    return out;
}

FeasibilityReport check_ac_feasibility(const Network& net, const FixedMatrices& fm,
                                       const std::vector<int>& statuses, const Vec& p_gen,
                                       const Vec& v_solved, const Scenario& scenario) {
    const int n = net.num_buses();
    const int l = net.num_branches();
    FeasibilityReport rep;

    Vec p_gen_bus = Vec::Zero(n);
    for (std::size_t g = 0; g < net.generators.size(); ++g)
        p_gen_bus[net.generators[g].bus] += p_gen[static_cast<int>(g)];

    // Newton spec against the scenario demands.
    std::vector<char> has_gen(n, 0);
    for (const auto& g : net.generators) has_gen[g.bus] = 1;
    NewtonSpec spec;
    spec.kind.resize(n);
    spec.p_inj.resize(n);
    spec.q_inj.resize(n);
    spec.v_set = v_solved;
    spec.theta_set = Vec::Zero(n);
    const int slack = net.slack();
    for (int i = 0; i < n; ++i) {
        if (i == slack)
            spec.kind[i] = BusKind::Slack;
        else
            spec.kind[i] = has_gen[i] ? BusKind::Pv : BusKind::Pq;
        spec.p_inj[i] = p_gen_bus[i] - scenario.p_demand[i];
        spec.q_inj[i] = -scenario.q_demand[i];
        spec.theta_set[i] = net.buses[i].theta_setpoint;
    }

    const NewtonResult res = solve_newton(net, fm, statuses, spec);
    rep.disconnected = res.status == NewtonStatus::Disconnected;
    rep.converged = res.status == NewtonStatus::Converged;
    rep.solved = res.point;
    if (!rep.converged) {
        rep.infeasible = true;
        rep.violation_detail.push_back(rep.disconnected ? "disconnected" : "no convergence");
        return rep;
    }

    const Vec td0 = anchor_theta_diff(net);
    for (int i = 0; i < n; ++i) {
        const double v = res.point.v[i];
        const double viol = std::max(net.buses[i].v_min - v, v - net.buses[i].v_max);
        if (viol > rep.max_voltage_violation) rep.max_voltage_violation = viol;
        if (viol > kVoltageViolTol) {
            ++rep.n_voltage_violations;
            rep.violation_detail.push_back("V out of range at bus " +
                                           std::to_string(net.buses[i].id));
        }
    }
    const PowerVariables pv = branch_flows(res.point, net, fm);
    for (int k = 0; k < l; ++k) {
        if (!statuses[k]) continue;
        const double dev = std::abs(res.point.theta_diff[k] - td0[k]) - kAngleHalf;
        if (dev > rep.max_angle_violation) rep.max_angle_violation = dev;
        if (dev > kAngleViolTol) {
            ++rep.n_angle_violations;
            rep.violation_detail.push_back("angle window exceeded on branch " +
                                           std::to_string(k));
        }
        const double s_fwd = std::hypot(pv.z_pf[fm.row_p_fwd(k)], pv.z_pf[fm.row_q_fwd(k)]);
        const double s_rev = std::hypot(pv.z_pf[fm.row_p_rev(k)], pv.z_pf[fm.row_q_rev(k)]);
        const double overload = std::max(s_fwd, s_rev) / net.branches[k].rating - 1.0;
        if (overload > rep.max_line_overload) rep.max_line_overload = overload;
        if (overload > kOverloadViolTol)
            rep.violation_detail.push_back("overload on branch " + std::to_string(k));
    }
    rep.infeasible = rep.max_voltage_violation > kVoltageViolTol ||
                     rep.max_angle_violation > kAngleViolTol ||
                     rep.max_line_overload > kOverloadViolTol;

    // Re-price with the slack generator carrying its actual output.
    rep.slack_p = pv.z_inj[slack];
    double cost = 0.0;
    const double slack_gen_p = rep.slack_p + scenario.p_demand[slack];
    bool priced_slack = false;
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const Generator& gen = net.generators[g];
        if (gen.bus == slack && !priced_slack) {
            cost += gen.cost_linear * slack_gen_p + gen.cost_const;
            priced_slack = true;
        } else if (gen.bus != slack) {
            cost += gen.cost_linear * p_gen[static_cast<int>(g)] + gen.cost_const;
        }
    }
    rep.dispatch_cost = cost;
    return rep;
}

// ---------------------------------------------------------------------------
// Exhaustive small-budget baseline.

namespace {

struct DispatchResult {
    bool ok = false;
    Vec p_gen;       // per generator
    Vec v_set;       // per bus
};

// Linearized dispatch LP at the given operating point with fixed statuses.
DispatchResult dispatch_lp(const Network& net, const FixedMatrices& fm,
                           const std::vector<int>& statuses, const Scenario& scenario,
                           const OperatingPoint& at) {
    const int n = net.num_buses();
    const int l = net.num_branches();
    const int slack = net.slack();
    const Vec td0 = anchor_theta_diff(net);

    MilpProblem p;
    std::vector<int> v_vars, th_vars, td_vars(l, -1);
    for (int i = 0; i < n; ++i) {
        double lo = std::max(0.94, net.buses[i].v_min);
        double hi = std::min(1.06, net.buses[i].v_max);
        if (i == slack) lo = hi = net.buses[i].v_setpoint;
        v_vars.push_back(p.add_var("v_" + std::to_string(i), lo, hi));
    }
    const double slack_theta = net.buses[slack].theta_setpoint;
    for (int i = 0; i < n; ++i) {
        const bool pinned = i == slack;
        th_vars.push_back(p.add_var("th_" + std::to_string(i),
                                    pinned ? slack_theta : slack_theta - 3.2,
                                    pinned ? slack_theta : slack_theta + 3.2));
    }
    for (int k = 0; k < l; ++k) {
        if (!statuses[k]) continue;
        td_vars[k] = p.add_var("td_" + std::to_string(k), td0[k] - kAngleHalf,
                               td0[k] + kAngleHalf);
        p.add_row("link_td_" + std::to_string(k),
                  {{th_vars[net.branches[k].from], 1.0},
                   {th_vars[net.branches[k].to], -1.0},
                   {td_vars[k], -1.0}},
                  RowSense::Eq, 0.0);
    }

    // First-order flows at `at` for in-service rows, with rating boxes.
    const PowerVariables base = branch_flows(at, net, fm);
    const Mat jf = common_term_jacobian(net, at).j;
    Mat dgamma = Mat::Zero(n, n + l);
    for (int i = 0; i < n; ++i) dgamma(i, i) = 2.0 * at.v[i];
    const Mat jflow =
        fm.w_gamma * dgamma + fm.w_rho * jf.topRows(l) + fm.w_pi * jf.bottomRows(l);

    std::vector<int> flow_vars(4 * l, -1);
    for (int k = 0; k < l; ++k) {
        if (!statuses[k]) continue;
        for (int r : {fm.row_p_fwd(k), fm.row_q_fwd(k), fm.row_p_rev(k), fm.row_q_rev(k)}) {
            const double rating = net.branches[k].rating;
            flow_vars[r] = p.add_var("f_" + std::to_string(r), -rating, rating);
            std::vector<std::pair<int, double>> row{{flow_vars[r], -1.0}};
            double rhs = -base.z_pf[r];
            for (int j = 0; j < n; ++j) {
                if (jflow(r, j) != 0.0) {
                    row.emplace_back(v_vars[j], jflow(r, j));
                    rhs += jflow(r, j) * at.v[j];
                }
            }
            const int kk = r % l;
            const double ctd = jflow(r, n + kk);
            if (ctd != 0.0 && td_vars[kk] >= 0) {
                row.emplace_back(td_vars[kk], ctd);
                rhs += ctd * at.theta_diff[kk];
            }
            p.add_row("def_f_" + std::to_string(r), std::move(row), RowSense::Eq, rhs);
        }
    }

    std::vector<std::vector<int>> gens_at(n);
    std::vector<int> pg_vars, qg_vars;
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const Generator& gen = net.generators[g];
        pg_vars.push_back(p.add_var("pg_" + std::to_string(g), gen.p_min, gen.p_max));
        qg_vars.push_back(p.add_var("qg_" + std::to_string(g), gen.q_min, gen.q_max));
        p.set_objective_coeff(pg_vars.back(), gen.cost_linear);
        gens_at[gen.bus].push_back(static_cast<int>(g));
    }
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<int, double>> prow, qrow;
        for (int g : gens_at[i]) {
            prow.emplace_back(pg_vars[g], 1.0);
            qrow.emplace_back(qg_vars[g], 1.0);
        }
        for (int k = 0; k < l; ++k) {
            if (!statuses[k]) continue;
            if (net.branches[k].from == i) {
                prow.emplace_back(flow_vars[fm.row_p_fwd(k)], -1.0);
                qrow.emplace_back(flow_vars[fm.row_q_fwd(k)], -1.0);
            }
            if (net.branches[k].to == i) {
                prow.emplace_back(flow_vars[fm.row_p_rev(k)], -1.0);
                qrow.emplace_back(flow_vars[fm.row_q_rev(k)], -1.0);
            }
        }
        p.add_row("bal_p_" + std::to_string(i), std::move(prow), RowSense::Eq,
                  scenario.p_demand[i]);
        p.add_row("bal_q_" + std::to_string(i), std::move(qrow), RowSense::Eq,
                  scenario.q_demand[i]);
    }

    const MilpSolution sol = solve_lp(p);
    DispatchResult out;
    if (sol.status != SolveStatus::Optimal) return out;
    out.ok = true;
    out.p_gen.resize(static_cast<int>(net.generators.size()));
    for (std::size_t g = 0; g < net.generators.size(); ++g)
        out.p_gen[static_cast<int>(g)] = sol.value(pg_vars[g]);
    out.v_set.resize(n);
    for (int i = 0; i < n; ++i) out.v_set[i] = sol.value(v_vars[i]);
    return out;
}

}  // namespace

EnumerationResult enumerate_ots(const Network& net, const FixedMatrices& fm,
                                const OtsConfig& cfg, const Scenario& scenario) {
    const int l = net.num_branches();
    EnumerationResult best;

    std::vector<std::vector<int>> topologies;
    topologies.emplace_back(l, 1);
    if (cfg.alpha >= 1) {
        for (int k : all_switchable(net, cfg)) {
            std::vector<int> st(l, 1);
            st[k] = 0;
            topologies.push_back(std::move(st));
        }
    }
    if (cfg.alpha >= 2) {
        const auto sw = all_switchable(net, cfg);
        for (std::size_t a = 0; a < sw.size(); ++a)
            for (std::size_t b = a + 1; b < sw.size(); ++b) {
                std::vector<int> st(l, 1);
                st[sw[a]] = 0;
                st[sw[b]] = 0;
                topologies.push_back(std::move(st));
            }
    }

    for (const auto& statuses : topologies) {
        // Two rounds of linearize -> dispatch -> Newton.
        OperatingPoint at;
        {
            Vec v = Vec::Ones(net.num_buses());
            Vec th(net.num_buses());
            for (int i = 0; i < net.num_buses(); ++i) th[i] = net.buses[i].theta_setpoint;
            at = make_operating_point(net, std::move(v), std::move(th));
        }
        FeasibilityReport last;
        bool ok = false;
        for (int round = 0; round < 2; ++round) {
            const DispatchResult d = dispatch_lp(net, fm, statuses, scenario, at);
            if (!d.ok) break;
            last = check_ac_feasibility(net, fm, statuses, d.p_gen, d.v_set, scenario);
            if (!last.converged) break;
            at = last.solved;
            ok = true;
        }
        if (!ok || !last.converged || last.infeasible) continue;
        if (!best.feasible || last.dispatch_cost < best.cost) {
            best.feasible = true;
            best.cost = last.dispatch_cost;
            best.statuses = statuses;
        }
    }
    return best;
}

ComparisonResult run_comparison(const Network& net, const FixedMatrices& fm,
                                const PwlModel& model, const ComparisonConfig& cfg) {
    ComparisonResult result;
    const std::vector<Scenario> scenarios = make_scenarios(net, cfg.scenarios, cfg.seed);

    OtsConfig ots_cfg = cfg.ots;
    InputBox box = ots_cfg.box.v_lo.size() ? ots_cfg.box : default_box(net, model.x0);
    ots_cfg.box = box;
    const ReluBounds rb = relu_bounds(model, box);
    FlowBounds limits = flow_bounds(net);
    if (ots_cfg.tighten_bounds) limits = tighten_flow_bounds(model, box, rb, limits);
    const FlowBounds envelope = model_flow_range(model, box, rb);

    struct Tally {
        int solved = 0, feasible = 0, infeasible = 0;
        double cost_milp = 0.0, cost_recheck = 0.0, seconds = 0.0, violated_share = 0.0;
        int violated_counted = 0;
    };
    std::map<std::string, Tally> tallies;

    for (int s = 0; s < cfg.scenarios; ++s) {
        const Scenario& sc = scenarios[s];
        std::vector<std::pair<std::string, OtsProblem>> runs;
        if (cfg.run_pwl)
            runs.emplace_back("pwl", build_pwl_ots(net, model, limits, ots_cfg, sc, &envelope));
        if (cfg.run_dc) runs.emplace_back("dc", build_dc_ots(net, ots_cfg, sc));

        for (auto& [method, prob] : runs) {
            ScenarioOutcome out;
            out.scenario = s;
            out.method = method;
            const auto t0 = std::chrono::steady_clock::now();
            const OtsSolution sol = solve_ots(net, prob, ots_cfg.limits);
            out.solve_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            out.milp_status = sol.status;
            out.gap = sol.gap;
            out.nodes = sol.nodes_explored;
            Tally& tally = tallies[method];
            tally.seconds += out.solve_seconds;
            if (!sol.statuses.empty()) {
                out.milp_objective = sol.objective;
                out.statuses = sol.statuses;
                ++tally.solved;
                tally.cost_milp += sol.objective;

                const FeasibilityReport rep =
                    check_ac_feasibility(net, fm, sol.statuses, sol.p_gen, sol.v, sc);
                out.recheck_converged = rep.converged;
                out.recheck_feasible = rep.converged && !rep.infeasible;
                out.recheck_cost = rep.dispatch_cost;
                out.max_voltage_violation = rep.max_voltage_violation;
                out.max_angle_violation = rep.max_angle_violation;
                out.max_line_overload = rep.max_line_overload;
                if (out.recheck_feasible) {
                    ++tally.feasible;
                    tally.cost_recheck += rep.dispatch_cost;
                } else {
                    ++tally.infeasible;
                    if (rep.converged) {
                        // Share of over-limit voltage and angle quantities,
                        // measured over the infeasible solutions.
                        const int quantities = net.num_buses() + net.num_branches();
                        tally.violated_share +=
                            100.0 * (rep.n_voltage_violations + rep.n_angle_violations) /
                            quantities;
                        ++tally.violated_counted;
                    }
                }
            } else {
                ++tally.infeasible;
            }
            result.outcomes.push_back(std::move(out));
        }

        if (cfg.run_enumeration)
            result.enumeration.push_back(enumerate_ots(net, fm, ots_cfg, sc));
    }

    for (auto& [method, tally] : tallies) {
        ComparisonSummary sum;
        sum.method = method;
        sum.scenarios = cfg.scenarios;
        sum.solved = tally.solved;
        sum.feasible = tally.feasible;
        sum.infeasible_rate = 100.0 * tally.infeasible / std::max(1, cfg.scenarios);
        sum.violation_rate =
            tally.violated_counted ? tally.violated_share / tally.violated_counted : 0.0;
        sum.mean_cost_milp = tally.solved ? tally.cost_milp / tally.solved : 0.0;
        sum.mean_cost_recheck = tally.feasible ? tally.cost_recheck / tally.feasible : 0.0;
        sum.mean_solve_seconds = tally.seconds / std::max(1, cfg.scenarios);
        result.summaries.push_back(std::move(sum));
    }
    return result;
}

}  // namespace gridpwl
