#pragma once

#include "gridpwl/encode.hpp"

namespace gridpwl {

// One demand scenario: per-bus active/reactive demand, per unit.
struct Scenario {
    Vec p_demand;
    Vec q_demand;
};

// Per-bus multipliers drawn uniformly in [0.5, 2.0]; reactive demand scales
// with active demand (constant power factor).
std::vector<Scenario> make_scenarios(const Network& net, int count, std::uint64_t seed);

struct OtsConfig {
    int alpha = 1;                 // switching budget: sum(eps) >= l - alpha
    std::vector<int> switchable;   // branch indices; empty = all branches
    InputBox box;                  // empty = default_box(net, anchor)
    SolveLimits limits;
    bool tighten_bounds = false;   // LP-tighten the flow limit boxes
};

// Variable map of an assembled OTS problem.
struct OtsProblem {
    MilpProblem milp;
    PwlEncoding enc;               // empty vectors for the DC variant
    std::vector<int> v;            // bus voltage vars (PWL only), n
    std::vector<int> theta;        // nodal angle vars, n
    std::vector<int> eps;          // line status binaries, l
    std::vector<int> p_gen;        // per generator
    std::vector<int> q_gen;        // per generator (PWL only)
    std::vector<int> masked_flows; // P-hat/Q-hat per directed flow (PWL: 4l, DC: l)
};

struct OtsSolution {
    SolveStatus status = SolveStatus::Infeasible;
    std::vector<int> statuses;  // per branch
    Vec p_gen, q_gen;           // per generator
    Vec v, theta;               // per bus
    double objective = 0.0;
    double gap = 0.0;
    long nodes_explored = 0;
};

// PWL-based AC-OTS: the trained model supplies the power flow constraints;
// switching enters through exact McCormick products at the flow level.
// `limits` are the per-flow line limits (ratings, possibly tightened);
// `mccormick` must bound the model's reachable flow range over the box and is
// computed internally when omitted (callers solving many scenarios should
// compute it once via model_flow_range).
OtsProblem build_pwl_ots(const Network& net, const PwlModel& model, const FlowBounds& limits,
                         const OtsConfig& cfg, const Scenario& scenario,
                         const FlowBounds* mccormick = nullptr);

// DC-OTS baseline: P = -b theta_diff, same switching machinery, no V/Q.
OtsProblem build_dc_ots(const Network& net, const OtsConfig& cfg, const Scenario& scenario);

OtsSolution solve_ots(const Network& net, const OtsProblem& prob, const SolveLimits& limits);

struct FeasibilityReport {
    bool converged = false;
    bool disconnected = false;
    bool infeasible = true;
    double max_voltage_violation = 0.0;  // pu beyond [v_min, v_max]
    double max_angle_violation = 0.0;    // rad beyond +-pi/6, in-service branches
    double max_line_overload = 0.0;      // fraction of rating, in-service
    int n_voltage_violations = 0;
    int n_angle_violations = 0;
    double slack_p = 0.0;                // slack bus net active injection
    double dispatch_cost = 0.0;          // cost re-priced with the slack output
    std::vector<std::string> violation_detail;
    OperatingPoint solved;
};

// Violation thresholds marking a solution infeasible.
inline constexpr double kVoltageViolTol = 1e-4;   // pu
inline constexpr double kAngleViolTol = 1e-4;     // rad
inline constexpr double kOverloadViolTol = 1e-3;  // fraction of rating

// Fixed-dispatch Newton recheck: generator buses hold the solved voltage
// magnitudes, the slack absorbs the mismatch, and violations are measured
// against voltage bounds, +-pi/6 angle differences and ratings.
FeasibilityReport check_ac_feasibility(const Network& net, const FixedMatrices& fm,
                                       const std::vector<int>& statuses, const Vec& p_gen,
                                       const Vec& v_solved, const Scenario& scenario);

// Exhaustive small-budget baseline: enumerate in-service subsets within the
// budget, dispatch each by an iterated linearized LP, validate with Newton.
struct EnumerationResult {
    bool feasible = false;
    double cost = 0.0;
    std::vector<int> statuses;
};

EnumerationResult enumerate_ots(const Network& net, const FixedMatrices& fm,
                                const OtsConfig& cfg, const Scenario& scenario);

// Per-scenario comparison record.
struct ScenarioOutcome {
    int scenario = 0;
    std::string method;
    SolveStatus milp_status = SolveStatus::Infeasible;
    double milp_objective = 0.0;
    double gap = 0.0;
    long nodes = 0;
    std::vector<int> statuses;
    bool recheck_converged = false;
    bool recheck_feasible = false;
    double recheck_cost = 0.0;
    double max_voltage_violation = 0.0;
    double max_angle_violation = 0.0;
    double max_line_overload = 0.0;
    double solve_seconds = 0.0;
};

struct ComparisonSummary {
    std::string method;
    int scenarios = 0;
    int solved = 0;              // MILP produced a solution
    int feasible = 0;            // passed the AC recheck
    double infeasible_rate = 0.0;
    double violation_rate = 0.0;  // share of violated quantities over infeasible runs
    double mean_cost_milp = 0.0;
    double mean_cost_recheck = 0.0;  // over recheck-feasible scenarios
    double mean_solve_seconds = 0.0;
};

struct ComparisonResult {
    std::vector<ScenarioOutcome> outcomes;          // all methods, scenario-major
    std::vector<ComparisonSummary> summaries;       // one per method
    std::vector<EnumerationResult> enumeration;     // per scenario, when enabled
};

struct ComparisonConfig {
    int scenarios = 100;
    std::uint64_t seed = 1;
    bool run_pwl = true;
    bool run_dc = true;
    bool run_enumeration = false;  // exhaustive baseline (14-bus scale, alpha <= 1)
    OtsConfig ots;
};

ComparisonResult run_comparison(const Network& net, const FixedMatrices& fm,
                                const PwlModel& model, const ComparisonConfig& cfg);

}  // namespace gridpwl
