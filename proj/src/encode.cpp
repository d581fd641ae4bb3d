#include "gridpwl/encode.hpp"

#include <cmath>

namespace gridpwl {

InputBox default_box(const Network& net, const OperatingPoint& anchor) {
    const int n = net.num_buses();
    const int l = net.num_branches();
    InputBox box;
    box.v_lo = Vec::Constant(n, 0.94);
    box.v_hi = Vec::Constant(n, 1.06);
    const int s = net.slack();
    box.v_lo[s] = net.buses[s].v_setpoint;
    box.v_hi[s] = net.buses[s].v_setpoint;
    const double half = 0.5235987755982988;  // pi/6
    box.td_lo = anchor.theta_diff.array() - half;
    box.td_hi = anchor.theta_diff.array() + half;
    return box;
}

ReluBounds relu_bounds(const PwlModel& model, const InputBox& box) {
    const int n = static_cast<int>(box.v_lo.size());
    const int l = static_cast<int>(box.td_lo.size());
    if (n + l != model.input_dim()) throw EncodeError("box does not match the model input");
    Vec dlo(n + l), dhi(n + l);
    dlo << box.v_lo - model.x0.v, box.td_lo - model.x0.theta_diff;
    dhi << box.v_hi - model.x0.v, box.td_hi - model.x0.theta_diff;
    for (int j = 0; j < n + l; ++j)
        if (dlo[j] > dhi[j]) throw EncodeError("empty input box");

    ReluBounds rb;
    rb.lower = model.bias;
    rb.upper = model.bias;
    for (int k = 0; k < model.q; ++k) {
        for (int j = 0; j < n + l; ++j) {
            const double w = model.w1(j, k);
            rb.upper[k] += std::max(w * dlo[j], w * dhi[j]);
            rb.lower[k] += std::min(w * dlo[j], w * dhi[j]);
        }
    }
    return rb;
}

PwlEncoding encode_relu(MilpProblem& prob, const PwlModel& model, const InputBox& box,
                        const ReluBounds& bounds, const std::string& prefix) {
    const int n = static_cast<int>(box.v_lo.size());
    const int l = static_cast<int>(box.td_lo.size());
    const int q = model.q;

    // Bounds must cover the exact box extrema of the affine pre-activation.
    const ReluBounds exact = relu_bounds(model, box);
    for (int k = 0; k < q; ++k) {
        if (bounds.lower[k] > bounds.upper[k] + 1e-12)
            throw EncodeError("ReLU bounds inverted at unit " + std::to_string(k));
        if (bounds.lower[k] > exact.lower[k] + 1e-9 || bounds.upper[k] < exact.upper[k] - 1e-9)
            throw EncodeError("unsound ReLU bounds at unit " + std::to_string(k));
    }

    PwlEncoding enc;
    auto name = [&prefix](const std::string& base, int i) {
        return prefix + base + "_" + std::to_string(i);
    };

    for (int i = 0; i < n; ++i)
        enc.dv.push_back(prob.add_var(name("dv", i), box.v_lo[i] - model.x0.v[i],
                                      box.v_hi[i] - model.x0.v[i]));
    for (int k = 0; k < l; ++k)
        enc.dtd.push_back(prob.add_var(name("dtd", k), box.td_lo[k] - model.x0.theta_diff[k],
                                       box.td_hi[k] - model.x0.theta_diff[k]));

    for (int k = 0; k < q; ++k)
        enc.z1_pre.push_back(prob.add_var(name("z1p", k), bounds.lower[k], bounds.upper[k]));
    for (int k = 0; k < q; ++k)
        enc.z1.push_back(prob.add_var(name("z1", k), 0.0, std::max(0.0, bounds.upper[k])));
    for (int k = 0; k < q; ++k)
        enc.beta.push_back(prob.add_var(name("beta", k), 0.0, 1.0, true));
    for (int r = 0; r < 2 * l; ++r) enc.z2.push_back(prob.add_var(name("z2", r), -kInf, kInf));
    for (int r = 0; r < 4 * l; ++r) enc.z3.push_back(prob.add_var(name("z3", r), -kInf, kInf));
    for (int r = 0; r < 2 * n; ++r) enc.z4.push_back(prob.add_var(name("z4", r), -kInf, kInf));

    // z1_pre = w1' dx + bias
    for (int k = 0; k < q; ++k) {
        std::vector<std::pair<int, double>> row{{enc.z1_pre[k], -1.0}};
        for (int j = 0; j < n; ++j)
            if (model.w1(j, k) != 0.0) row.emplace_back(enc.dv[j], model.w1(j, k));
        for (int j = 0; j < l; ++j)
            if (model.w1(n + j, k) != 0.0) row.emplace_back(enc.dtd[j], model.w1(n + j, k));
        prob.add_row(name("def_z1p", k), std::move(row), RowSense::Eq, -model.bias[k]);
    }

    // Big-M ReLU rows; the variable bound 0 <= z1 supplies the first inequality.
    for (int k = 0; k < q; ++k) {
        prob.add_row(name("relu_cap", k),
                     {{enc.z1[k], 1.0}, {enc.beta[k], -std::max(0.0, bounds.upper[k])}},
                     RowSense::Le, 0.0);
        prob.add_row(name("relu_lb", k), {{enc.z1[k], 1.0}, {enc.z1_pre[k], -1.0}}, RowSense::Ge,
                     0.0);
        prob.add_row(name("relu_ub", k),
                     {{enc.z1[k], 1.0}, {enc.z1_pre[k], -1.0}, {enc.beta[k], -bounds.lower[k]}},
                     RowSense::Le, -bounds.lower[k]);
    }

    // z2 = f_x0 + j_x0 dx + w2 z1
    for (int r = 0; r < 2 * l; ++r) {
        std::vector<std::pair<int, double>> row{{enc.z2[r], -1.0}};
        for (int j = 0; j < n; ++j)
            if (model.j_x0(r, j) != 0.0) row.emplace_back(enc.dv[j], model.j_x0(r, j));
        for (int j = 0; j < l; ++j)
            if (model.j_x0(r, n + j) != 0.0) row.emplace_back(enc.dtd[j], model.j_x0(r, n + j));
        for (int k = 0; k < q; ++k)
            if (model.w2(r, k) != 0.0) row.emplace_back(enc.z1[k], model.w2(r, k));
        prob.add_row(name("def_z2", r), std::move(row), RowSense::Eq, -model.f_x0[r]);
    }

    // z3 = w_gamma gamma_hat(V) + [w_rho w_pi] z2 with gamma_hat = 2 V - 1
    // and V = x0.v + dv, so the gamma part contributes 2*coef*dv + const.
    for (int r = 0; r < 4 * l; ++r) {
        std::vector<std::pair<int, double>> row{{enc.z3[r], -1.0}};
        double rhs = 0.0;
        for (int j = 0; j < n; ++j) {
            const double c = model.fixed.w_gamma(r, j);
            if (c == 0.0) continue;
            row.emplace_back(enc.dv[j], 2.0 * c);
            rhs -= c * (2.0 * model.x0.v[j] - 1.0);
        }
        for (int k = 0; k < l; ++k) {
            const double cr = model.fixed.w_rho(r, k);
            if (cr != 0.0) row.emplace_back(enc.z2[k], cr);
            const double cp = model.fixed.w_pi(r, k);
            if (cp != 0.0) row.emplace_back(enc.z2[l + k], cp);
        }
        prob.add_row(name("def_z3", r), std::move(row), RowSense::Eq, rhs);
    }

    // z4 = w_psi z3
    for (int r = 0; r < 2 * n; ++r) {
        std::vector<std::pair<int, double>> row{{enc.z4[r], -1.0}};
        for (int c = 0; c < 4 * l; ++c)
            if (model.fixed.w_psi(r, c) != 0.0) row.emplace_back(enc.z3[c], model.fixed.w_psi(r, c));
        prob.add_row(name("def_z4", r), std::move(row), RowSense::Eq, 0.0);
    }
    return enc;
}

FlowBounds flow_bounds(const Network& net) {
    const int l = net.num_branches();
    FlowBounds fb;
    fb.lower.resize(4 * l);
    fb.upper.resize(4 * l);
    for (int k = 0; k < l; ++k) {
        const double r = net.branches[k].rating;
        for (int row : {k, l + k, 2 * l + k, 3 * l + k}) {
            fb.lower[row] = -r;
            fb.upper[row] = r;
        }
    }
    return fb;
}

FlowBounds model_flow_range(const PwlModel& model, const InputBox& box,
                            const ReluBounds& relu) {
    MilpProblem prob;
    const PwlEncoding enc = encode_relu(prob, model, box, relu);
    const int rows = static_cast<int>(model.fixed.w_gamma.rows());
    FlowBounds out;
    out.lower = Vec::Constant(rows, -kInf);
    out.upper = Vec::Constant(rows, kInf);
    for (int r = 0; r < rows; ++r) {
        for (int dir = 0; dir < 2; ++dir) {
            MilpProblem copy = prob;
            copy.set_objective_coeff(enc.z3[r], dir == 0 ? 1.0 : -1.0);
            const MilpSolution sol = solve_lp(copy);  // beta relaxed: a valid outer bound
            if (sol.status != SolveStatus::Optimal)
                throw EncodeError("flow range LP failed on row " + std::to_string(r));
            if (dir == 0)
                out.lower[r] = sol.objective - 1e-9;
            else
                out.upper[r] = -sol.objective + 1e-9;
        }
    }
    return out;
}

FlowBounds tighten_flow_bounds(const PwlModel& model, const InputBox& box,
                               const ReluBounds& relu, const FlowBounds& base) {
    const FlowBounds range = model_flow_range(model, box, relu);
    FlowBounds out = base;
    const int rows = static_cast<int>(base.lower.size());
    for (int r = 0; r < rows; ++r) {
        out.lower[r] = std::max(base.lower[r], range.lower[r]);
        out.upper[r] = std::min(base.upper[r], range.upper[r]);
        if (out.lower[r] > out.upper[r]) {
            // Ratings and reachable range are disjoint: the flow limit simply
            // stays at the rating box on this row.
            out.lower[r] = base.lower[r];
            out.upper[r] = base.upper[r];
        }
    }
    return out;
}

std::vector<int> encode_switching(MilpProblem& prob, const std::vector<int>& flows,
                                  const std::vector<int>& statuses, const FlowBounds& bounds,
                                  const std::string& prefix) {
    if (flows.size() != statuses.size())
        throw EncodeError("encode_switching: flow/status lists differ in length");
    std::vector<int> masked;
    masked.reserve(flows.size());
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const double lo = bounds.lower[static_cast<int>(i)];
        const double hi = bounds.upper[static_cast<int>(i)];
        if (lo > hi) throw EncodeError("encode_switching: inverted flow bounds");
        const std::string tag = prefix + "m" + std::to_string(i);
        const int mv = prob.add_var(tag, std::min(lo, 0.0), std::max(hi, 0.0));
        const int f = flows[i];
        const int e = statuses[i];
        // masked <= hi * eps ; masked >= lo * eps
        prob.add_row(tag + "_cap_hi", {{mv, 1.0}, {e, -hi}}, RowSense::Le, 0.0);
        prob.add_row(tag + "_cap_lo", {{mv, 1.0}, {e, -lo}}, RowSense::Ge, 0.0);
        // flow + hi (eps - 1) <= masked <= flow + lo (eps - 1)
        prob.add_row(tag + "_link_lo", {{mv, 1.0}, {f, -1.0}, {e, -hi}}, RowSense::Ge, -hi);
        prob.add_row(tag + "_link_hi", {{mv, 1.0}, {f, -1.0}, {e, -lo}}, RowSense::Le, -lo);
        masked.push_back(mv);
    }
    return masked;
}

}  // namespace gridpwl
