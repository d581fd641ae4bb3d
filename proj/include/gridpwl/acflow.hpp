#pragma once

#include "gridpwl/network.hpp"

namespace gridpwl {

// A network state in polar coordinates. theta_diff carries the per-branch
// angle differences theta[from] - theta[to], derived from the nodal angles.
struct OperatingPoint {
    Vec v;           // length n
    Vec theta;       // length n, radians
    Vec theta_diff;  // length l

    // The model input coordinates: [V; theta_diff], length n + l.
    Vec input() const {
        Vec x(v.size() + theta_diff.size());
        x << v, theta_diff;
        return x;
    }
};

OperatingPoint make_operating_point(const Network& net, Vec v, Vec theta);

// The three nonlinear terms every branch flow is linear in.
struct CommonTerms {
    Vec gamma;  // V_i^2, length n
    Vec rho;    // V_i V_j cos(theta_ij), length l
    Vec pi;     // V_i V_j sin(theta_ij), length l
};

struct PowerVariables {
    Vec z_pf;   // directed flows, length 4l (layout in FixedMatrices)
    Vec z_inj;  // injections [P; Q], length 2n
};

// Jacobian of [rho; pi] with respect to [V; theta_diff]; rows 2l, cols n + l.
struct CommonTermJacobian {
    Mat j;
};

CommonTerms common_terms(const Network& net, const OperatingPoint& x);

// Exact flows/injections: the fixed matrices applied to the exact common terms.
PowerVariables branch_flows(const OperatingPoint& x, const Network& net,
                            const FixedMatrices& fm);

CommonTermJacobian common_term_jacobian(const Network& net, const OperatingPoint& x);

enum class NewtonStatus { Converged, NoConvergence, Disconnected };

// Per-bus targets for the power-flow solve. Slack: v_set + theta_set fixed.
// PV: p_inj + v_set. PQ: p_inj + q_inj. p_inj/q_inj are net injections
// (generation minus demand), per unit.
struct NewtonSpec {
    std::vector<BusKind> kind;
    Vec p_inj;
    Vec q_inj;
    Vec v_set;
    Vec theta_set;  // used for the slack bus
};

// Builds the case-file operating spec: generator buses hold their setpoint
// voltage; demands taken from the bus table, generation from p_max midpoints
// is NOT assumed -- callers pass dispatch explicitly via `p_gen` (per bus).
NewtonSpec make_newton_spec(const Network& net, const Vec& p_gen_per_bus,
                            const Vec& v_set_per_bus);

struct NewtonOptions {
    double tolerance = 1e-8;  // max-norm power mismatch, per unit
    int max_iterations = 30;
};

struct NewtonResult {
    NewtonStatus status = NewtonStatus::NoConvergence;
    OperatingPoint point;
    int iterations = 0;
    double max_mismatch = 0.0;
};

// Newton-Raphson in polar form over the paper-convention branch flows.
// `statuses` holds 0/1 per branch; out-of-service branches drop out of the
// injection sums. Fails with Disconnected when the in-service graph splits.
NewtonResult solve_newton(const Network& net, const FixedMatrices& fm,
                          const std::vector<int>& statuses, const NewtonSpec& spec,
                          const NewtonOptions& opts = {});

}  // namespace gridpwl
