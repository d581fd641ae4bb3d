#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gridpwl/milp.hpp"
#include "gridpwl/rng.hpp"

#include <cmath>

#include <Eigen/Dense>

using namespace gridpwl;

namespace {

// Brute-force LP oracle: enumerate candidate vertices as solutions of n
// active hyperplanes drawn from {constraint rows at equality} + {bounds},
// keep the feasible ones, return the best objective.
struct OracleResult {
    bool feasible = false;
    double objective = kInf;
};

OracleResult vertex_oracle(const MilpProblem& p) {
    const int n = p.num_vars();
    struct Plane {
        std::vector<double> a;
        double b;
    };
    std::vector<Plane> planes;
    for (const auto& r : p.rows) {
        Plane pl{std::vector<double>(n, 0.0), r.rhs};
        for (auto& [j, c] : r.coeffs) pl.a[j] += c;
        planes.push_back(std::move(pl));
    }
    for (int j = 0; j < n; ++j) {
        if (std::isfinite(p.vars[j].lower)) {
            Plane pl{std::vector<double>(n, 0.0), p.vars[j].lower};
            pl.a[j] = 1.0;
            planes.push_back(std::move(pl));
        }
        if (std::isfinite(p.vars[j].upper)) {
            Plane pl{std::vector<double>(n, 0.0), p.vars[j].upper};
            pl.a[j] = 1.0;
            planes.push_back(std::move(pl));
        }
    }
    const int m = static_cast<int>(planes.size());
    std::vector<int> pick(n);
    OracleResult best;

    std::vector<double> obj(n, 0.0);
    for (auto& [j, c] : p.objective) obj[j] += c;

    auto feasible_point = [&](const Eigen::VectorXd& x) {
        for (int j = 0; j < n; ++j) {
            if (x[j] < p.vars[j].lower - 1e-7 || x[j] > p.vars[j].upper + 1e-7) return false;
        }
        for (const auto& r : p.rows) {
            double lhs = 0.0;
            for (auto& [j, c] : r.coeffs) lhs += c * x[j];
            if (r.sense == RowSense::Le && lhs > r.rhs + 1e-7) return false;
            if (r.sense == RowSense::Ge && lhs < r.rhs - 1e-7) return false;
            if (r.sense == RowSense::Eq && std::abs(lhs - r.rhs) > 1e-7) return false;
        }
        return true;
    };

    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == n) {
            Eigen::MatrixXd a(n, n);
            Eigen::VectorXd b(n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) a(i, j) = planes[pick[i]].a[j];
                b[i] = planes[pick[i]].b;
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
            if (!lu.isInvertible()) return;
            Eigen::VectorXd x = lu.solve(b);
            if (!feasible_point(x)) return;
            double v = 0.0;
            for (int j = 0; j < n; ++j) v += obj[j] * x[j];
            best.feasible = true;
            best.objective = std::min(best.objective, v);
            return;
        }
        for (int i = start; i < m; ++i) {
            pick[depth] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

}  // namespace

TEST_CASE("LP: box corner optimum") {
    MilpProblem p;
    int x = p.add_var("x", 0, kInf);
    int y = p.add_var("y", 0, kInf);
    p.add_row("cx", {{x, 1.0}}, RowSense::Le, 1.0);
    p.add_row("cy", {{y, 1.0}}, RowSense::Le, 1.0);
    p.set_objective_coeff(x, -1.0);
    p.set_objective_coeff(y, -1.0);
    MilpSolution s = solve_lp(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective == doctest::Approx(-2.0));
    CHECK(s.value(x) == doctest::Approx(1.0));
    CHECK(s.value(y) == doctest::Approx(1.0));
}

TEST_CASE("LP: infeasible bound pair") {
    MilpProblem p;
    int x = p.add_var("x", -kInf, kInf);
    p.add_row("a", {{x, 1.0}}, RowSense::Ge, 1.0);
    p.add_row("b", {{x, 1.0}}, RowSense::Le, 0.0);
    p.set_objective_coeff(x, 1.0);
    CHECK(solve_lp(p).status == SolveStatus::Infeasible);
}

TEST_CASE("LP: unbounded detection") {
    MilpProblem p;
    int x = p.add_var("x", -kInf, kInf);
    p.set_objective_coeff(x, 1.0);
    CHECK(solve_lp(p).status == SolveStatus::Unbounded);
}

TEST_CASE("LP: equalities and free variables") {
    // min x + 2y  s.t.  x + y = 3,  x - y = 1   ->  x=2, y=1.
    MilpProblem p;
    int x = p.add_var("x", -kInf, kInf);
    int y = p.add_var("y", -kInf, kInf);
    p.add_row("s", {{x, 1.0}, {y, 1.0}}, RowSense::Eq, 3.0);
    p.add_row("d", {{x, 1.0}, {y, -1.0}}, RowSense::Eq, 1.0);
    p.set_objective_coeff(x, 1.0);
    p.set_objective_coeff(y, 2.0);
    MilpSolution s = solve_lp(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.value(x) == doctest::Approx(2.0));
    CHECK(s.value(y) == doctest::Approx(1.0));
    CHECK(s.objective == doctest::Approx(4.0));
}

TEST_CASE("LP: random boxes against the vertex-enumeration oracle") {
    RngStream rng(2711);
    int checked = 0;
    for (int trial = 0; trial < 60; ++trial) {
        MilpProblem p;
        const int n = 3 + static_cast<int>(rng.index_below(3));  // 3..5 vars
        for (int j = 0; j < n; ++j) {
            const double lo = rng.uniform(-3.0, 0.0);
            const double hi = lo + rng.uniform(0.5, 4.0);
            p.add_var("v" + std::to_string(j), lo, hi);
            p.set_objective_coeff(j, rng.uniform(-2.0, 2.0));
        }
        const int m = 1 + static_cast<int>(rng.index_below(4));
        for (int i = 0; i < m; ++i) {
            std::vector<std::pair<int, double>> coeffs;
            for (int j = 0; j < n; ++j) coeffs.emplace_back(j, rng.uniform(-2.0, 2.0));
            const RowSense sense = rng.uniform01() < 0.5 ? RowSense::Le : RowSense::Ge;
            p.add_row("r" + std::to_string(i), coeffs, sense, rng.uniform(-2.0, 2.0));
        }
        OracleResult oracle = vertex_oracle(p);
        MilpSolution s = solve_lp(p);
        if (!oracle.feasible) {
            CHECK(s.status == SolveStatus::Infeasible);
        } else {
            REQUIRE(s.status == SolveStatus::Optimal);
            CHECK(std::abs(s.objective - oracle.objective) <= 1e-8 * std::max(1.0, std::abs(oracle.objective)));
            ++checked;
        }
    }
    CHECK(checked >= 20);  // most random instances should be feasible
}

TEST_CASE("MILP: tiny knapsack") {
    MilpProblem p;
    int a = p.add_var("a", 0, 1, true);
    int b = p.add_var("b", 0, 1, true);
    p.add_row("cap", {{a, 1.0}, {b, 1.0}}, RowSense::Le, 1.0);
    p.set_objective_coeff(a, -3.0);
    p.set_objective_coeff(b, -2.0);
    MilpSolution s = solve_milp(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective == doctest::Approx(-3.0));
    CHECK(s.value(a) == 1.0);
    CHECK(s.value(b) == 0.0);
}

TEST_CASE("MILP: random 0-1 problems equal exhaustive enumeration") {
    RngStream rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 6 + static_cast<int>(rng.index_below(7));  // 6..12 binaries
        const int m = 2 + static_cast<int>(rng.index_below(9));  // 2..10 rows
        MilpProblem p;
        std::vector<double> obj(n);
        for (int j = 0; j < n; ++j) {
            p.add_var("b" + std::to_string(j), 0, 1, true);
            obj[j] = rng.uniform(-5.0, 5.0);
            p.set_objective_coeff(j, obj[j]);
        }
        std::vector<std::vector<double>> rows(m, std::vector<double>(n));
        std::vector<double> rhs(m);
        std::vector<RowSense> sense(m);
        for (int i = 0; i < m; ++i) {
            std::vector<std::pair<int, double>> coeffs;
            for (int j = 0; j < n; ++j) {
                rows[i][j] = rng.uniform(-3.0, 3.0);
                coeffs.emplace_back(j, rows[i][j]);
            }
            rhs[i] = rng.uniform(-2.0, 6.0);
            sense[i] = rng.uniform01() < 0.7 ? RowSense::Le : RowSense::Ge;
            p.add_row("r" + std::to_string(i), coeffs, sense[i], rhs[i]);
        }

        // Exhaustive oracle.
        bool any = false;
        double best = kInf;
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
            bool ok = true;
            for (int i = 0; i < m && ok; ++i) {
                double lhs = 0.0;
                for (int j = 0; j < n; ++j)
                    if (mask & (1u << j)) lhs += rows[i][j];
                if (sense[i] == RowSense::Le && lhs > rhs[i] + 1e-9) ok = false;
                if (sense[i] == RowSense::Ge && lhs < rhs[i] - 1e-9) ok = false;
            }
            if (!ok) continue;
            any = true;
            double v = 0.0;
            for (int j = 0; j < n; ++j)
                if (mask & (1u << j)) v += obj[j];
            best = std::min(best, v);
        }

        MilpSolution s = solve_milp(p);
        if (!any) {
            CHECK(s.status == SolveStatus::Infeasible);
        } else {
            REQUIRE(s.status == SolveStatus::Optimal);
            CHECK(std::abs(s.objective - best) <= 1e-7 * std::max(1.0, std::abs(best)));
        }
    }
}

TEST_CASE("MILP: assignment instance solves at the root node") {
    // Totally unimodular constraint matrix: the LP vertex is already integral.
    MilpProblem p;
    const double cost[3][3] = {{4, 2, 5}, {3, 6, 1}, {7, 2, 3}};
    int v[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            v[i][j] = p.add_var("x" + std::to_string(i) + std::to_string(j), 0, 1, true);
            p.set_objective_coeff(v[i][j], cost[i][j]);
        }
    for (int i = 0; i < 3; ++i) {
        std::vector<std::pair<int, double>> r1, r2;
        for (int j = 0; j < 3; ++j) {
            r1.emplace_back(v[i][j], 1.0);
            r2.emplace_back(v[j][i], 1.0);
        }
        p.add_row("row" + std::to_string(i), r1, RowSense::Eq, 1.0);
        p.add_row("col" + std::to_string(i), r2, RowSense::Eq, 1.0);
    }
    MilpSolution s = solve_milp(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective == doctest::Approx(7.0));  // 4 + 1 + 2
    CHECK(s.nodes_explored == 1);
}

TEST_CASE("MILP: deterministic node counts and budget status") {
    RngStream rng(5);
    MilpProblem p;
    const int n = 10;
    for (int j = 0; j < n; ++j) {
        p.add_var("b" + std::to_string(j), 0, 1, true);
        p.set_objective_coeff(j, rng.uniform(-3.0, 1.0));
    }
    std::vector<std::pair<int, double>> coeffs;
    for (int j = 0; j < n; ++j) coeffs.emplace_back(j, rng.uniform(0.5, 2.0));
    p.add_row("cap", coeffs, RowSense::Le, 4.0);

    MilpSolution a = solve_milp(p);
    MilpSolution b = solve_milp(p);
    REQUIRE(a.status == SolveStatus::Optimal);
    CHECK(a.nodes_explored == b.nodes_explored);
    CHECK(a.objective == b.objective);
    for (int j = 0; j < n; ++j) CHECK(a.value(j) == b.value(j));

    SolveLimits tight;
    tight.max_nodes = 1;
    MilpSolution c = solve_milp(p, tight);
    CHECK((c.status == SolveStatus::Optimal || c.status == SolveStatus::BudgetExceeded));
}

TEST_CASE("MILP: optimum never beats the root relaxation") {
    RngStream rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        MilpProblem p;
        const int n = 8;
        for (int j = 0; j < n; ++j) {
            p.add_var("b" + std::to_string(j), 0, 1, true);
            p.set_objective_coeff(j, rng.uniform(-4.0, 2.0));
        }
        for (int i = 0; i < 4; ++i) {
            std::vector<std::pair<int, double>> coeffs;
            for (int j = 0; j < n; ++j) coeffs.emplace_back(j, rng.uniform(-1.0, 2.0));
            p.add_row("r" + std::to_string(i), coeffs, RowSense::Le, rng.uniform(1.0, 4.0));
        }
        MilpSolution relax = solve_lp(p);
        MilpSolution full = solve_milp(p);
        if (relax.status != SolveStatus::Optimal || full.status != SolveStatus::Optimal) continue;
        CHECK(full.objective >= relax.objective - 1e-7);
    }
}

TEST_CASE("LP text format round-trip") {
    MilpProblem p;
    int x = p.add_var("x1", 0, 4);
    int y = p.add_var("y_2", -2, kInf);
    int z = p.add_var("zb", 0, 1, true);
    p.add_row("c1", {{x, 2.0}, {y, -1.5}}, RowSense::Le, 7.0);
    p.add_row("c2", {{x, 1.0}, {y, 1.0}, {z, 3.0}}, RowSense::Ge, -1.0);
    p.add_row("c3", {{y, 1.0}, {z, -1.0}}, RowSense::Eq, 0.5);
    p.set_objective_coeff(x, 1.25);
    p.set_objective_coeff(y, -0.5);
    p.set_objective_coeff(z, 2.0);

    const std::string text = write_lp_format(p);
    MilpProblem q = parse_lp_format(text);
    REQUIRE(q.num_vars() == 3);
    REQUIRE(q.num_rows() == 3);
    CHECK(q.vars[0].upper == 4.0);
    CHECK(q.vars[1].lower == -2.0);
    CHECK(q.vars[2].integer);

    MilpSolution a = solve_milp(p);
    MilpSolution b = solve_milp(q);
    REQUIRE(a.status == SolveStatus::Optimal);
    REQUIRE(b.status == SolveStatus::Optimal);
    CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-12));
}

TEST_CASE("LP format: hand-written maximization with binaries") {
    const std::string text = R"(\ a comment line
Maximize
 profit: 3 a + 2 b - 0.5 c
Subject To
 cap: a + b + c <= 2
 link: a - b >= 0
Bounds
 0 <= c <= 1
Binaries
 a
 b
End
)";
    MilpProblem p = parse_lp_format(text);
    MilpSolution s = solve_milp(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    // max 3a + 2b - 0.5c: a=1, b=1, c=0 -> 5 (minimization form: -5)
    CHECK(s.objective == doctest::Approx(-5.0));
    CHECK(s.named.at("a") == 1.0);
    CHECK(s.named.at("b") == 1.0);
}
