#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridpwl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { Le, Eq, Ge };

struct MilpVar {
    std::string name;
    double lower = 0.0;
    double upper = kInf;
    bool integer = false;
};

struct MilpRow {
    std::string name;
    std::vector<std::pair<int, double>> coeffs;  // (variable index, coefficient)
    RowSense sense = RowSense::Le;
    double rhs = 0.0;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, BudgetExceeded };

struct MilpProblem {
    std::vector<MilpVar> vars;
    std::vector<MilpRow> rows;
    std::vector<std::pair<int, double>> objective;  // sparse, minimize
    double objective_offset = 0.0;

    int add_var(const std::string& name, double lower, double upper, bool integer = false);
    void add_row(const std::string& name, std::vector<std::pair<int, double>> coeffs,
                 RowSense sense, double rhs);
    void set_objective_coeff(int var, double coeff);

    int num_vars() const { return static_cast<int>(vars.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }
};

struct MilpSolution {
    SolveStatus status = SolveStatus::Infeasible;
    std::vector<double> values;           // by variable index
    std::map<std::string, double> named;  // by variable name
    double objective = 0.0;
    double gap = 0.0;
    long nodes_explored = 0;
    long lp_iterations = 0;

    double value(int var) const { return values[static_cast<std::size_t>(var)]; }
};

struct SolveLimits {
    long max_nodes = 2'000'000;
    double time_budget_s = kInf;
    double rel_gap = 1e-6;
};

// Tolerances shared by the simplex and the search.
inline constexpr double kFeasTol = 1e-7;
inline constexpr double kIntTol = 1e-6;

// Bounded-variable primal simplex on the problem with integrality relaxed.
MilpSolution solve_lp(const MilpProblem& p);

// Best-first branch and bound; branches on the most fractional integer
// variable (ties to the lowest index). Deterministic node order.
MilpSolution solve_milp(const MilpProblem& p, const SolveLimits& limits = {});

// LP-format text export/import (objective, constraints, bounds, generals).
std::string write_lp_format(const MilpProblem& p);
MilpProblem parse_lp_format(const std::string& text);

}  // namespace gridpwl
