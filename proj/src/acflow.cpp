#include "gridpwl/acflow.hpp"

#include <cmath>

namespace gridpwl {

OperatingPoint make_operating_point(const Network& net, Vec v, Vec theta) {
    if (v.size() != net.num_buses() || theta.size() != net.num_buses())
        throw std::invalid_argument("operating point dimension mismatch");
    OperatingPoint x;
    x.v = std::move(v);
    x.theta = std::move(theta);
    x.theta_diff.resize(net.num_branches());
    for (int k = 0; k < net.num_branches(); ++k)
        x.theta_diff[k] = x.theta[net.branches[k].from] - x.theta[net.branches[k].to];
    return x;
}

CommonTerms common_terms(const Network& net, const OperatingPoint& x) {
    CommonTerms ct;
    ct.gamma = x.v.array().square();
    const int l = net.num_branches();
    ct.rho.resize(l);
    ct.pi.resize(l);
    for (int k = 0; k < l; ++k) {
        const Branch& br = net.branches[k];
        const double vv = x.v[br.from] * x.v[br.to];
        ct.rho[k] = vv * std::cos(x.theta_diff[k]);
        ct.pi[k] = vv * std::sin(x.theta_diff[k]);
    }
    return ct;
}

PowerVariables branch_flows(const OperatingPoint& x, const Network& net,
                            const FixedMatrices& fm) {
    const CommonTerms ct = common_terms(net, x);
    PowerVariables pv;
    pv.z_pf = fm.w_gamma * ct.gamma + fm.w_rho * ct.rho + fm.w_pi * ct.pi;
    pv.z_inj = fm.w_psi * pv.z_pf;
    return pv;
}

CommonTermJacobian common_term_jacobian(const Network& net, const OperatingPoint& x) {
    const int n = net.num_buses();
    const int l = net.num_branches();
    CommonTermJacobian cj;
    cj.j = Mat::Zero(2 * l, n + l);
    for (int k = 0; k < l; ++k) {
        const Branch& br = net.branches[k];
        const double vi = x.v[br.from], vj = x.v[br.to];
        const double c = std::cos(x.theta_diff[k]), s = std::sin(x.theta_diff[k]);
        cj.j(k, br.from) = vj * c;
        cj.j(k, br.to) = vi * c;
        cj.j(k, n + k) = -vi * vj * s;
        cj.j(l + k, br.from) = vj * s;
        cj.j(l + k, br.to) = vi * s;
        cj.j(l + k, n + k) = vi * vj * c;
    }
    return cj;
}

NewtonSpec make_newton_spec(const Network& net, const Vec& p_gen_per_bus,
                            const Vec& v_set_per_bus) {
    const int n = net.num_buses();
    std::vector<char> has_gen(n, 0);
    for (const auto& g : net.generators) has_gen[g.bus] = 1;

    NewtonSpec spec;
    spec.kind.resize(n);
    spec.p_inj = Vec::Zero(n);
    spec.q_inj = Vec::Zero(n);
    spec.v_set = Vec::Zero(n);
    spec.theta_set = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
        const Bus& bus = net.buses[i];
        if (bus.kind == BusKind::Slack) {
            spec.kind[i] = BusKind::Slack;
            spec.v_set[i] = v_set_per_bus[i];
            spec.theta_set[i] = bus.theta_setpoint;
        } else if (has_gen[i]) {
            spec.kind[i] = BusKind::Pv;
            spec.v_set[i] = v_set_per_bus[i];
        } else {
            spec.kind[i] = BusKind::Pq;
        }
        spec.p_inj[i] = p_gen_per_bus[i] - bus.p_demand;
        spec.q_inj[i] = -bus.q_demand;
    }
    return spec;
}

namespace {

bool in_service_connected(const Network& net, const std::vector<int>& statuses) {
    const int n = net.num_buses();
    std::vector<std::vector<int>> adj(n);
    for (int k = 0; k < net.num_branches(); ++k) {
        if (!statuses[k]) continue;
        adj[net.branches[k].from].push_back(net.branches[k].to);
        adj[net.branches[k].to].push_back(net.branches[k].from);
    }
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int v : adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                stack.push_back(v);
            }
    }
    return count == n;
}

}  // namespace

NewtonResult solve_newton(const Network& net, const FixedMatrices& fm,
                          const std::vector<int>& statuses, const NewtonSpec& spec,
                          const NewtonOptions& opts) {
    const int n = net.num_buses();
    const int l = net.num_branches();
    NewtonResult res;
    if (static_cast<int>(statuses.size()) != l)
        throw std::invalid_argument("status vector length mismatch");
    if (!in_service_connected(net, statuses)) {
        res.status = NewtonStatus::Disconnected;
        return res;
    }

    // Unknown layout: angles at non-slack buses, then voltages at PQ buses.
    std::vector<int> ang_bus, volt_bus;
    for (int i = 0; i < n; ++i) {
        if (spec.kind[i] != BusKind::Slack) ang_bus.push_back(i);
        if (spec.kind[i] == BusKind::Pq) volt_bus.push_back(i);
    }
    const int m = static_cast<int>(ang_bus.size() + volt_bus.size());

    // Flat start: setpoint magnitudes where regulated, 1.0 elsewhere; slack angle everywhere.
    Vec v(n), theta(n);
    double slack_theta = 0.0;
    for (int i = 0; i < n; ++i)
        if (spec.kind[i] == BusKind::Slack) slack_theta = spec.theta_set[i];
    for (int i = 0; i < n; ++i) {
        v[i] = spec.kind[i] == BusKind::Pq ? 1.0 : spec.v_set[i];
        theta[i] = slack_theta;
    }

    // Masked copies of the flow maps drop out-of-service branches from the sums.
    Mat w_gamma = fm.w_gamma, w_rho = fm.w_rho, w_pi = fm.w_pi;
    for (int k = 0; k < l; ++k) {
        if (statuses[k]) continue;
        for (int r : {fm.row_p_fwd(k), fm.row_q_fwd(k), fm.row_p_rev(k), fm.row_q_rev(k)}) {
            w_gamma.row(r).setZero();
            w_rho.row(r).setZero();
            w_pi.row(r).setZero();
        }
    }

    std::vector<int> theta_col_of(n, -1), volt_col_of(n, -1);
    for (std::size_t a = 0; a < ang_bus.size(); ++a) theta_col_of[ang_bus[a]] = static_cast<int>(a);
    for (std::size_t q = 0; q < volt_bus.size(); ++q)
        volt_col_of[volt_bus[q]] = static_cast<int>(ang_bus.size() + q);

    Vec mismatch(m);
    Mat jac(m, m);
    for (int it = 0; it <= opts.max_iterations; ++it) {
        OperatingPoint x = make_operating_point(net, v, theta);
        const CommonTerms ct = common_terms(net, x);
        const Vec z_pf = w_gamma * ct.gamma + w_rho * ct.rho + w_pi * ct.pi;
        const Vec z_inj = fm.w_psi * z_pf;

        for (std::size_t a = 0; a < ang_bus.size(); ++a)
            mismatch[static_cast<int>(a)] = spec.p_inj[ang_bus[a]] - z_inj[ang_bus[a]];
        for (std::size_t q = 0; q < volt_bus.size(); ++q)
            mismatch[static_cast<int>(ang_bus.size() + q)] =
                spec.q_inj[volt_bus[q]] - z_inj[n + volt_bus[q]];

        res.max_mismatch = mismatch.size() ? mismatch.cwiseAbs().maxCoeff() : 0.0;
        res.iterations = it;
        if (res.max_mismatch < opts.tolerance) {
            res.status = NewtonStatus::Converged;
            res.point = std::move(x);
            return res;
        }
        if (it == opts.max_iterations) break;

        // d z_inj / d u through the common terms; u = [theta_free; V_pq].
        // gamma depends on V only; rho/pi depend on V endpoints and theta_diff.
        Mat dct(2 * l + n, m);  // rows: [gamma; rho; pi] stacked
        dct.setZero();
        for (int i = 0; i < n; ++i) {
            const int vc = volt_col_of[i];
            if (vc >= 0) dct(i, vc) = 2.0 * v[i];
        }
        for (int k = 0; k < l; ++k) {
            const Branch& br = net.branches[k];
            const double vi = v[br.from], vj = v[br.to];
            const double c = std::cos(x.theta_diff[k]), s = std::sin(x.theta_diff[k]);
            const int vci = volt_col_of[br.from], vcj = volt_col_of[br.to];
            const int tci = theta_col_of[br.from], tcj = theta_col_of[br.to];
            const int rrow = n + k, prow = n + l + k;
            if (vci >= 0) dct(rrow, vci) = vj * c;
            if (vcj >= 0) dct(rrow, vcj) = vi * c;
            if (tci >= 0) dct(rrow, tci) -= vi * vj * s;
            if (tcj >= 0) dct(rrow, tcj) += vi * vj * s;
            if (vci >= 0) dct(prow, vci) = vj * s;
            if (vcj >= 0) dct(prow, vcj) = vi * s;
            if (tci >= 0) dct(prow, tci) += vi * vj * c;
            if (tcj >= 0) dct(prow, tcj) -= vi * vj * c;
        }
        Mat dz_pf = w_gamma * dct.topRows(n) + w_rho * dct.middleRows(n, l) +
                    w_pi * dct.bottomRows(l);
        Mat dz_inj = fm.w_psi * dz_pf;

        for (std::size_t a = 0; a < ang_bus.size(); ++a)
            jac.row(static_cast<int>(a)) = dz_inj.row(ang_bus[a]);
        for (std::size_t q = 0; q < volt_bus.size(); ++q)
            jac.row(static_cast<int>(ang_bus.size() + q)) = dz_inj.row(n + volt_bus[q]);

        Eigen::PartialPivLU<Mat> lu(jac);
        const Vec step = lu.solve(mismatch);
        if (!step.allFinite()) break;
        for (std::size_t a = 0; a < ang_bus.size(); ++a)
            theta[ang_bus[a]] += step[static_cast<int>(a)];
        for (std::size_t q = 0; q < volt_bus.size(); ++q)
            v[volt_bus[q]] += step[static_cast<int>(ang_bus.size() + q)];
        if (!v.allFinite() || !theta.allFinite() || v.minCoeff() <= 0.0) break;
    }
    res.status = NewtonStatus::NoConvergence;
    res.point = make_operating_point(net, v, theta);
    return res;
}

}  // namespace gridpwl
