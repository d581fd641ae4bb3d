#include "gridpwl/milp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <queue>
#include <sstream>

namespace gridpwl {

int MilpProblem::add_var(const std::string& name, double lower, double upper, bool integer) {
    if (lower > upper) throw std::invalid_argument("variable '" + name + "': lower > upper");
    if (integer && (!std::isfinite(lower) || !std::isfinite(upper)))
        throw std::invalid_argument("integer variable '" + name + "' must be bounded");
    vars.push_back({name, lower, upper, integer});
    return num_vars() - 1;
}

void MilpProblem::add_row(const std::string& name, std::vector<std::pair<int, double>> coeffs,
                          RowSense sense, double rhs) {
    for (const auto& [idx, coef] : coeffs) {
        (void)coef;
        if (idx < 0 || idx >= num_vars())
            throw std::invalid_argument("row '" + name + "' references unknown variable");
    }
    rows.push_back({name, std::move(coeffs), sense, rhs});
}

void MilpProblem::set_objective_coeff(int var, double coeff) {
    for (auto& [idx, c] : objective)
        if (idx == var) {
            c = coeff;
            return;
        }
    objective.emplace_back(var, coeff);
}

// ===========================================================================
// Bounded-variable primal simplex.
//
// Columns: [0, n) structurals, [n, n+m) row logicals, [n+m, n+2m) phase-1
// artificials. Every row reads  a'x + w_i (+ sigma_i a_i) = rhs. Logical
// bounds encode the row sense. The basis inverse is kept explicitly and
// refactorized periodically.

namespace {

using DenseMat = Eigen::MatrixXd;
using DenseVec = Eigen::VectorXd;

constexpr double kPivotTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr int kRefactorEvery = 256;

enum class Loc : unsigned char { Basic, AtLower, AtUpper, FreeZero };

struct SparseCol {
    std::vector<int> row;
    std::vector<double> val;
};

class Simplex {
  public:
    Simplex(const MilpProblem& p, const std::vector<double>& lb, const std::vector<double>& ub)
        : n_(p.num_vars()), m_(p.num_rows()) {
        cols_.resize(n_);
        for (const auto& r : p.rows) {
            (void)r;
        }
        for (int i = 0; i < m_; ++i)
            for (const auto& [j, v] : p.rows[i].coeffs)
                if (v != 0.0) {
                    cols_[j].row.push_back(i);
                    cols_[j].val.push_back(v);
                }
        rhs_.resize(m_);
        wlo_.resize(m_);
        wup_.resize(m_);
        for (int i = 0; i < m_; ++i) {
            rhs_[i] = p.rows[i].rhs;
            switch (p.rows[i].sense) {
                case RowSense::Le:
                    wlo_[i] = 0.0;
                    wup_[i] = kInf;
                    break;
                case RowSense::Ge:
                    wlo_[i] = -kInf;
                    wup_[i] = 0.0;
                    break;
                case RowSense::Eq:
                    wlo_[i] = 0.0;
                    wup_[i] = 0.0;
                    break;
            }
        }
        lo_.assign(2 * m_ + n_, 0.0);
        up_.assign(2 * m_ + n_, 0.0);
        for (int j = 0; j < n_; ++j) {
            lo_[j] = lb[j];
            up_[j] = ub[j];
        }
        for (int i = 0; i < m_; ++i) {
            lo_[n_ + i] = wlo_[i];
            up_[n_ + i] = wup_[i];
        }
        // Artificials disabled until installed by phase 1.
        art_sign_.assign(m_, 1.0);
        obj_.assign(n_, 0.0);
        for (const auto& [j, c] : p.objective) obj_[j] += c;
    }

    // Returns status; fills values (structurals) and objective on optimality.
    SolveStatus solve(std::vector<double>& values, double& objective, long& iterations) {
        start_basis();
        if (!phase1()) {
            iterations = iters_;
            return SolveStatus::Infeasible;
        }
        const bool bounded = phase2();
        refactor();
        recompute_basics();
        iterations = iters_;
        if (!bounded) return SolveStatus::Unbounded;
        values.assign(n_, 0.0);
        for (int j = 0; j < n_; ++j) values[j] = x_[j];
        objective = 0.0;
        for (int j = 0; j < n_; ++j) objective += obj_[j] * x_[j];
        return SolveStatus::Optimal;
    }

  private:
    int total_cols() const { return n_ + 2 * m_; }
    bool is_artificial(int j) const { return j >= n_ + m_; }

    // apply A_j into dense vector (artificials and logicals are unit columns)
    void column_into(int j, DenseVec& out) const {
        out.setZero();
        if (j < n_) {
            const auto& c = cols_[j];
            for (std::size_t k = 0; k < c.row.size(); ++k) out[c.row[k]] = c.val[k];
        } else if (j < n_ + m_) {
            out[j - n_] = 1.0;
        } else {
            out[j - n_ - m_] = art_sign_[j - n_ - m_];
        }
    }

    double col_dot_y(int j, const DenseVec& y) const {
        if (j < n_) {
            const auto& c = cols_[j];
            double s = 0.0;
            for (std::size_t k = 0; k < c.row.size(); ++k) s += c.val[k] * y[c.row[k]];
            return s;
        }
        if (j < n_ + m_) return y[j - n_];
        return art_sign_[j - n_ - m_] * y[j - n_ - m_];
    }

    void start_basis() {
        x_.assign(total_cols(), 0.0);
        loc_.assign(total_cols(), Loc::AtLower);
        basis_.assign(m_, -1);
        // Structurals rest at the finite bound nearer zero.
        for (int j = 0; j < n_; ++j) {
            const bool lof = std::isfinite(lo_[j]), upf = std::isfinite(up_[j]);
            if (lof && upf)
                loc_[j] = std::abs(lo_[j]) <= std::abs(up_[j]) ? Loc::AtLower : Loc::AtUpper;
            else if (lof)
                loc_[j] = Loc::AtLower;
            else if (upf)
                loc_[j] = Loc::AtUpper;
            else
                loc_[j] = Loc::FreeZero;
            x_[j] = loc_[j] == Loc::AtLower ? lo_[j] : (loc_[j] == Loc::AtUpper ? up_[j] : 0.0);
        }
        // Row residuals given the nonbasic rest point.
        DenseVec r(m_);
        for (int i = 0; i < m_; ++i) r[i] = rhs_[i];
        for (int j = 0; j < n_; ++j) {
            if (x_[j] == 0.0) continue;
            const auto& c = cols_[j];
            for (std::size_t k = 0; k < c.row.size(); ++k) r[c.row[k]] -= c.val[k] * x_[j];
        }
        // Feasible logicals take the basis; otherwise install an artificial.
        n_art_ = 0;
        for (int i = 0; i < m_; ++i) {
            const int wj = n_ + i;
            const int aj = n_ + m_ + i;
            lo_[aj] = 0.0;
            up_[aj] = 0.0;
            if (r[i] >= wlo_[i] - kFeasTol && r[i] <= wup_[i] + kFeasTol) {
                basis_[i] = wj;
                loc_[wj] = Loc::Basic;
                x_[wj] = r[i];
                loc_[aj] = Loc::AtLower;
                x_[aj] = 0.0;
            } else {
                const double clamped = std::min(std::max(r[i], wlo_[i]), wup_[i]);
                loc_[wj] = clamped == wlo_[i] ? Loc::AtLower : Loc::AtUpper;
                x_[wj] = clamped;
                const double resid = r[i] - clamped;
                art_sign_[i] = resid >= 0 ? 1.0 : -1.0;
                up_[aj] = kInf;
                basis_[i] = aj;
                loc_[aj] = Loc::Basic;
                x_[aj] = std::abs(resid);
                ++n_art_;
            }
        }
        binv_ = DenseMat::Identity(m_, m_);
        for (int i = 0; i < m_; ++i)
            if (basis_[i] == n_ + m_ + i && art_sign_[i] < 0) binv_(i, i) = -1.0;
        pivots_since_refactor_ = 0;
    }

    void refactor() {
        DenseMat b(m_, m_);
        DenseVec col(m_);
        for (int i = 0; i < m_; ++i) {
            column_into(basis_[i], col);
            b.col(i) = col;
        }
        Eigen::PartialPivLU<DenseMat> lu(b);
        binv_ = lu.inverse();
        pivots_since_refactor_ = 0;
    }

    void recompute_basics() {
        DenseVec r(m_);
        for (int i = 0; i < m_; ++i) r[i] = rhs_[i];
        for (int j = 0; j < total_cols(); ++j) {
            if (loc_[j] == Loc::Basic || x_[j] == 0.0) continue;
            if (j < n_) {
                const auto& c = cols_[j];
                for (std::size_t k = 0; k < c.row.size(); ++k) r[c.row[k]] -= c.val[k] * x_[j];
            } else if (j < n_ + m_) {
                r[j - n_] -= x_[j];
            } else {
                r[j - n_ - m_] -= art_sign_[j - n_ - m_] * x_[j];
            }
        }
        // x_B = B^-1 r; note binv rows map to basis positions.
        DenseVec xb = binv_ * r;
        for (int i = 0; i < m_; ++i) x_[basis_[i]] = xb[i];
    }

    // One simplex phase; cost vector given per column. Returns false on
    // unbounded descent.
    bool run(const std::vector<double>& cost, long iter_cap) {
        DenseVec y(m_), alpha(m_);
        int stall = 0;
        bool bland = false;
        for (;;) {
            if (iters_ >= iter_cap)
                throw std::runtime_error("simplex iteration limit; numerically stuck problem");
            // y' = c_B' B^-1
            DenseVec cb(m_);
            for (int i = 0; i < m_; ++i) cb[i] = cost[basis_[i]];
            y = binv_.transpose() * cb;

            // Pricing.
            int enter = -1;
            double best = bland ? 0.0 : kDualTol;
            int dir = +1;
            for (int j = 0; j < total_cols(); ++j) {
                if (loc_[j] == Loc::Basic) continue;
                if (lo_[j] == up_[j]) continue;  // fixed
                const double d = cost[j] - col_dot_y(j, y);
                int cand_dir = 0;
                double score = 0.0;
                if ((loc_[j] == Loc::AtLower || loc_[j] == Loc::FreeZero) && d < -kDualTol) {
                    cand_dir = +1;
                    score = -d;
                } else if ((loc_[j] == Loc::AtUpper || loc_[j] == Loc::FreeZero) && d > kDualTol) {
                    cand_dir = -1;
                    score = d;
                }
                if (cand_dir == 0) continue;
                if (bland) {
                    enter = j;
                    dir = cand_dir;
                    break;
                }
                if (score > best) {
                    best = score;
                    enter = j;
                    dir = cand_dir;
                }
            }
            if (enter < 0) return true;  // optimal for this phase

            // Direction through the basis.
            column_into(enter, work_);
            alpha = binv_ * work_;

            // Ratio test: basic i moves at rate delta_i = -dir * alpha_i.
            double theta = kInf;
            int leave_pos = -1;
            double leave_bound = 0.0;
            const double range =
                std::isfinite(lo_[enter]) && std::isfinite(up_[enter]) ? up_[enter] - lo_[enter]
                                                                       : kInf;
            for (int i = 0; i < m_; ++i) {
                const double delta = -dir * alpha[i];
                const int bj = basis_[i];
                if (delta > kPivotTol) {
                    if (!std::isfinite(up_[bj])) continue;
                    const double t = (up_[bj] - x_[bj]) / delta;
                    if (t < theta - 1e-12) {
                        theta = std::max(t, 0.0);
                        leave_pos = i;
                        leave_bound = up_[bj];
                    } else if (t <= theta + 1e-12 && leave_pos >= 0 &&
                               std::abs(delta) > std::abs(alpha[leave_pos])) {
                        leave_pos = i;
                        leave_bound = up_[bj];
                    }
                } else if (delta < -kPivotTol) {
                    if (!std::isfinite(lo_[bj])) continue;
                    const double t = (lo_[bj] - x_[bj]) / delta;
                    if (t < theta - 1e-12) {
                        theta = std::max(t, 0.0);
                        leave_pos = i;
                        leave_bound = lo_[bj];
                    } else if (t <= theta + 1e-12 && leave_pos >= 0 &&
                               std::abs(delta) > std::abs(alpha[leave_pos])) {
                        leave_pos = i;
                        leave_bound = lo_[bj];
                    }
                }
            }
            if (range < theta) {
                // Bound flip: the entering variable crosses to its other bound.
                theta = range;
                leave_pos = -2;
            }
            if (theta == kInf) return false;  // unbounded

            ++iters_;
            stall = theta < 1e-10 ? stall + 1 : 0;
            bland = stall > 2 * (m_ + n_);

            // Update values.
            for (int i = 0; i < m_; ++i) {
                const double delta = -dir * alpha[i];
                if (delta != 0.0) x_[basis_[i]] += delta * theta;
            }
            x_[enter] += dir * theta;

            if (leave_pos == -2) {
                loc_[enter] = loc_[enter] == Loc::AtLower ? Loc::AtUpper : Loc::AtLower;
                x_[enter] = loc_[enter] == Loc::AtLower ? lo_[enter] : up_[enter];
                continue;
            }

            const int leave_var = basis_[leave_pos];
            x_[leave_var] = leave_bound;
            loc_[leave_var] = leave_bound == lo_[leave_var] ? Loc::AtLower : Loc::AtUpper;
            basis_[leave_pos] = enter;
            loc_[enter] = Loc::Basic;

            // Elementary update of the explicit inverse.
            const double piv = alpha[leave_pos];
            binv_.row(leave_pos) /= piv;
            for (int i = 0; i < m_; ++i) {
                if (i == leave_pos) continue;
                const double f = alpha[i];
                if (f != 0.0) binv_.row(i) -= f * binv_.row(leave_pos);
            }
            if (++pivots_since_refactor_ >= kRefactorEvery) {
                refactor();
                recompute_basics();
            }
        }
    }

    bool phase1() {
        if (n_art_ == 0) {
            // Still verify the starting point: all basics inside bounds.
            bool ok = true;
            for (int i = 0; i < m_; ++i) {
                const int bj = basis_[i];
                if (x_[bj] < lo_[bj] - kFeasTol || x_[bj] > up_[bj] + kFeasTol) ok = false;
            }
            if (ok) return true;
        }
        std::vector<double> cost(total_cols(), 0.0);
        for (int i = 0; i < m_; ++i) cost[n_ + m_ + i] = 1.0;
        if (!run(cost, kIterCap)) throw std::runtime_error("phase-1 descent unbounded");
        double infeas = 0.0;
        for (int i = 0; i < m_; ++i) infeas += x_[n_ + m_ + i];
        if (infeas > 1e2 * kFeasTol) return false;
        // Freeze artificials at zero for phase 2.
        for (int i = 0; i < m_; ++i) {
            const int aj = n_ + m_ + i;
            up_[aj] = 0.0;
            if (loc_[aj] != Loc::Basic) x_[aj] = 0.0;
        }
        return true;
    }

    bool phase2() {
        std::vector<double> cost(total_cols(), 0.0);
        for (int j = 0; j < n_; ++j) cost[j] = obj_[j];
        return run(cost, kIterCap);
    }

    static constexpr long kIterCap = 400000;

    int n_ = 0, m_ = 0;
    int n_art_ = 0;
    std::vector<SparseCol> cols_;
    std::vector<double> rhs_, wlo_, wup_;
    std::vector<double> lo_, up_;
    std::vector<double> art_sign_;
    std::vector<double> obj_;
    std::vector<double> x_;
    std::vector<Loc> loc_;
    std::vector<int> basis_;
    DenseMat binv_;
    DenseVec work_{};
    long iters_ = 0;
    int pivots_since_refactor_ = 0;

  public:
    void prepare_work() { work_.resize(m_); }
};

MilpSolution solve_lp_bounds(const MilpProblem& p, const std::vector<double>& lb,
                             const std::vector<double>& ub, bool with_names) {
    MilpSolution sol;
    Simplex simplex(p, lb, ub);
    simplex.prepare_work();
    double obj = 0.0;
    long iters = 0;
    sol.status = simplex.solve(sol.values, obj, iters);
    sol.lp_iterations = iters;
    sol.nodes_explored = 1;
    if (sol.status == SolveStatus::Optimal) {
        sol.objective = obj + p.objective_offset;
        if (with_names)
            for (int j = 0; j < p.num_vars(); ++j) sol.named[p.vars[j].name] = sol.values[j];
    }
    return sol;
}

}  // namespace

MilpSolution solve_lp(const MilpProblem& p) {
    std::vector<double> lb(p.num_vars()), ub(p.num_vars());
    for (int j = 0; j < p.num_vars(); ++j) {
        lb[j] = p.vars[j].lower;
        ub[j] = p.vars[j].upper;
    }
    return solve_lp_bounds(p, lb, ub, true);
}

// ===========================================================================
// Branch and bound.

namespace {

struct Node {
    double bound = -kInf;  // parent LP objective (lower bound for minimize)
    long id = 0;
    std::vector<double> lb, ub;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
        return a.id > b.id;
    }
};

}  // namespace

MilpSolution solve_milp(const MilpProblem& p, const SolveLimits& limits) {
    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&t_start]() {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    std::vector<int> int_vars;
    for (int j = 0; j < p.num_vars(); ++j)
        if (p.vars[j].integer) int_vars.push_back(j);

    MilpSolution best;
    best.status = SolveStatus::Infeasible;
    bool have_incumbent = false;
    long nodes = 0;
    long lp_iters = 0;

    Node root;
    root.lb.resize(p.num_vars());
    root.ub.resize(p.num_vars());
    for (int j = 0; j < p.num_vars(); ++j) {
        root.lb[j] = p.vars[j].lower;
        root.ub[j] = p.vars[j].upper;
    }
    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    open.push(std::move(root));
    long next_id = 1;
    double best_open_bound = -kInf;
    bool root_node = true;

    while (!open.empty()) {
        best_open_bound = open.top().bound;
        if (have_incumbent) {
            const double gap =
                (best.objective - best_open_bound) / std::max(1.0, std::abs(best.objective));
            if (gap <= limits.rel_gap) break;
        }
        if (nodes >= limits.max_nodes || elapsed() > limits.time_budget_s) {
            best.status = SolveStatus::BudgetExceeded;
            best.gap = have_incumbent ? (best.objective - best_open_bound) /
                                            std::max(1.0, std::abs(best.objective))
                                      : kInf;
            best.nodes_explored = nodes;
            best.lp_iterations = lp_iters;
            return best;
        }
        Node node = open.top();
        open.pop();
        if (have_incumbent &&
            node.bound >= best.objective - limits.rel_gap * std::max(1.0, std::abs(best.objective)))
            continue;

        ++nodes;
        MilpSolution lp = solve_lp_bounds(p, node.lb, node.ub, false);
        lp_iters += lp.lp_iterations;
        if (lp.status == SolveStatus::Unbounded && root_node) {
            lp.nodes_explored = nodes;
            lp.lp_iterations = lp_iters;
            return lp;  // integer variables are bounded, so the ray is real
        }
        root_node = false;
        if (lp.status != SolveStatus::Optimal) continue;
        if (have_incumbent &&
            lp.objective >=
                best.objective - limits.rel_gap * std::max(1.0, std::abs(best.objective)))
            continue;

        // Most fractional integer variable, ties to the lowest index.
        int branch_var = -1;
        double branch_score = kIntTol;
        for (int j : int_vars) {
            const double v = lp.values[j];
            const double frac = v - std::floor(v);
            const double score = std::min(frac, 1.0 - frac);
            if (score > branch_score) {
                branch_score = score;
                branch_var = j;
            }
        }
        if (branch_var < 0) {
            // Integral: new incumbent (snap integers exactly).
            for (int j : int_vars) lp.values[j] = std::round(lp.values[j]);
            best = lp;
            best.named.clear();
            for (int j = 0; j < p.num_vars(); ++j) best.named[p.vars[j].name] = best.values[j];
            have_incumbent = true;
            continue;
        }
        const double v = lp.values[branch_var];
        Node down = node, up = node;
        down.bound = lp.objective;
        up.bound = lp.objective;
        down.id = next_id++;
        up.id = next_id++;
        down.ub[branch_var] = std::floor(v);
        up.lb[branch_var] = std::ceil(v);
        open.push(std::move(down));
        open.push(std::move(up));
    }

    best.nodes_explored = nodes;
    best.lp_iterations = lp_iters;
    if (!have_incumbent) {
        best.status = SolveStatus::Infeasible;
        return best;
    }
    best.status = SolveStatus::Optimal;
    best.gap = open.empty() ? 0.0
                            : std::max(0.0, (best.objective - best_open_bound) /
                                                std::max(1.0, std::abs(best.objective)));
    return best;
}

// ===========================================================================
// LP text format.

namespace {

void append_term(std::string& out, double coef, const std::string& name, bool first) {
    char buf[64];
    if (coef < 0) {
        out += first ? "-" : "- ";
    } else if (!first) {
        out += "+ ";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", std::abs(coef));
    out += buf;
    out += ' ';
    out += name;
    out += ' ';
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string write_lp_format(const MilpProblem& p) {
    std::string out = "\\ LP export\nMinimize\n obj: ";
    bool first = true;
    for (const auto& [j, c] : p.objective) {
        if (c == 0.0) continue;
        append_term(out, c, p.vars[j].name, first);
        first = false;
    }
    if (p.objective_offset != 0.0) {
        out += (p.objective_offset < 0 ? "- " : (first ? "" : "+ "));
        out += fmt(std::abs(p.objective_offset));
    } else if (first) {
        out += "0 " + (p.num_vars() ? p.vars[0].name : "x");
    }
    out += "\nSubject To\n";
    for (int i = 0; i < p.num_rows(); ++i) {
        const auto& r = p.rows[i];
        out += ' ' + (r.name.empty() ? "c" + std::to_string(i) : r.name) + ": ";
        bool f = true;
        for (const auto& [j, c] : r.coeffs) {
            if (c == 0.0) continue;
            append_term(out, c, p.vars[j].name, f);
            f = false;
        }
        if (f) out += "0 " + p.vars[0].name + ' ';
        out += r.sense == RowSense::Le ? "<= " : (r.sense == RowSense::Ge ? ">= " : "= ");
        out += fmt(r.rhs);
        out += '\n';
    }
    out += "Bounds\n";
    for (const auto& v : p.vars) {
        if (v.lower == v.upper) {
            out += ' ' + v.name + " = " + fmt(v.lower) + '\n';
        } else if (!std::isfinite(v.lower) && !std::isfinite(v.upper)) {
            out += ' ' + v.name + " free\n";
        } else {
            out += ' ';
            if (std::isfinite(v.lower))
                out += fmt(v.lower) + " <= ";
            else
                out += "-inf <= ";
            out += v.name;
            if (std::isfinite(v.upper)) out += " <= " + fmt(v.upper);
            out += '\n';
        }
    }
    bool any_int = false;
    for (const auto& v : p.vars) any_int |= v.integer;
    if (any_int) {
        out += "Generals\n";
        for (const auto& v : p.vars)
            if (v.integer) out += ' ' + v.name + '\n';
    }
    out += "End\n";
    return out;
}

namespace {

struct LpToken {
    enum Kind { Name, Number, Op, Colon, End } kind;
    std::string text;
    double value = 0.0;
};

class LpLexer {
  public:
    explicit LpLexer(const std::string& text) : text_(text) {}

    LpToken next() {
        skip();
        if (pos_ >= text_.size()) return {LpToken::End, "", 0};
        const char c = text_[pos_];
        if (c == ':') {
            ++pos_;
            return {LpToken::Colon, ":", 0};
        }
        if (c == '<' || c == '>' || c == '=' || c == '+' || c == '-') {
            std::string op(1, c);
            ++pos_;
            if (pos_ < text_.size() && text_[pos_] == '=') {
                op += '=';
                ++pos_;
            }
            return {LpToken::Op, op, 0};
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* start = text_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(start, &end);
            const auto len = static_cast<std::size_t>(end - start);
            pos_ += len;
            return {LpToken::Number, std::string(start, len), v};
        }
        std::size_t s = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
                text_[pos_] == '.' || text_[pos_] == '(' || text_[pos_] == ')' ||
                text_[pos_] == '[' || text_[pos_] == ']'))
            ++pos_;
        if (pos_ == s) throw std::runtime_error("LP parse: unexpected character");
        return {LpToken::Name, text_.substr(s, pos_ - s), 0};
    }

    LpToken peek() {
        const std::size_t saved = pos_;
        LpToken t = next();
        pos_ = saved;
        return t;
    }

  private:
    void skip() {
        for (;;) {
            while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            if (pos_ < text_.size() && text_[pos_] == '\\') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
                continue;
            }
            return;
        }
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

MilpProblem parse_lp_format(const std::string& text) {
    MilpProblem p;
    std::map<std::string, int> index;
    std::vector<char> bounds_given;
    auto var_of = [&](const std::string& name) {
        auto it = index.find(name);
        if (it != index.end()) return it->second;
        const int id = p.add_var(name, -kInf, kInf);
        bounds_given.push_back(0);
        index[name] = id;
        return id;
    };

    LpLexer lex(text);
    enum Section { None, Objective, Constraints, BoundsSec, GeneralsSec, BinariesSec } section =
        None;
    double obj_sign = 1.0;

    auto is_keyword = [&](const std::string& w, Section& out) {
        const std::string k = lower(w);
        if (k == "minimize" || k == "minimise" || k == "min") {
            out = Objective;
            obj_sign = 1.0;
            return true;
        }
        if (k == "maximize" || k == "maximise" || k == "max") {
            out = Objective;
            obj_sign = -1.0;
            return true;
        }
        if (k == "subject" || k == "st" || k == "s.t.") {
            out = Constraints;
            return true;
        }
        if (k == "bounds" || k == "bound") {
            out = BoundsSec;
            return true;
        }
        if (k == "general" || k == "generals" || k == "integer" || k == "integers") {
            out = GeneralsSec;
            return true;
        }
        if (k == "binary" || k == "binaries" || k == "bin") {
            out = BinariesSec;
            return true;
        }
        return false;
    };

    // Pending linear expression state.
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;
    double sign = 1.0;
    double coef = 1.0;
    bool have_coef = false;
    std::string row_name;
    auto reset_expr = [&]() {
        terms.clear();
        constant = 0.0;
        sign = 1.0;
        coef = 1.0;
        have_coef = false;
        row_name.clear();
    };

    auto flush_objective = [&]() {
        for (auto& [j, c] : terms) p.set_objective_coeff(j, obj_sign * c);
        p.objective_offset = obj_sign * constant;
        reset_expr();
    };

    for (;;) {
        LpToken t = lex.next();
        if (t.kind == LpToken::End) break;
        if (t.kind == LpToken::Name) {
            Section next_section;
            const std::string klow = lower(t.text);
            if (klow == "to") continue;   // the second word of "subject to"
            if (klow == "end") continue;  // trailer
            if (is_keyword(t.text, next_section)) {
                if (section == Objective) flush_objective();
                section = next_section;
                reset_expr();
                continue;
            }
        }
        switch (section) {
            case Objective:
            case Constraints: {
                if (t.kind == LpToken::Name) {
                    if (lex.peek().kind == LpToken::Colon) {
                        lex.next();
                        row_name = t.text;
                        break;
                    }
                    terms.emplace_back(var_of(t.text), sign * (have_coef ? coef : 1.0));
                    sign = 1.0;
                    coef = 1.0;
                    have_coef = false;
                } else if (t.kind == LpToken::Number) {
                    coef = t.value;
                    have_coef = true;
                    // A number not followed by a name is an additive constant.
                    const LpToken nxt = lex.peek();
                    if (nxt.kind != LpToken::Name) {
                        constant += sign * t.value;
                        sign = 1.0;
                        coef = 1.0;
                        have_coef = false;
                    }
                } else if (t.kind == LpToken::Op) {
                    if (t.text == "+") {
                        sign = 1.0;
                    } else if (t.text == "-") {
                        sign = -sign;
                    } else if (section == Constraints) {
                        // sense token: rhs follows
                        RowSense sense = t.text == "<=" ? RowSense::Le
                                                        : (t.text == ">=" ? RowSense::Ge
                                                                          : RowSense::Eq);
                        double rsign = 1.0;
                        LpToken rt = lex.next();
                        if (rt.kind == LpToken::Op && (rt.text == "-" || rt.text == "+")) {
                            rsign = rt.text == "-" ? -1.0 : 1.0;
                            rt = lex.next();
                        }
                        if (rt.kind != LpToken::Number)
                            throw std::runtime_error("LP parse: expected numeric rhs");
                        p.add_row(row_name.empty() ? "c" + std::to_string(p.num_rows())
                                                   : row_name,
                                  terms, sense, rsign * rt.value - constant);
                        reset_expr();
                    } else {
                        throw std::runtime_error("LP parse: unexpected operator in objective");
                    }
                }
                break;
            }
            case BoundsSec: {
                // Forms: "a <= x <= b", "x <= b", "x >= a", "x = v", "x free",
                // "-inf <= x <= b".
                double first_num = 0.0;
                bool have_first = false;
                std::string name;
                if (t.kind == LpToken::Number) {
                    first_num = t.value;
                    have_first = true;
                } else if (t.kind == LpToken::Op && (t.text == "-" || t.text == "+")) {
                    LpToken nx = lex.next();
                    if (nx.kind == LpToken::Name && lower(nx.text) == "inf") {
                        first_num = t.text == "-" ? -kInf : kInf;
                    } else if (nx.kind == LpToken::Number) {
                        first_num = (t.text == "-" ? -1 : 1) * nx.value;
                    } else {
                        throw std::runtime_error("LP parse: bad bound");
                    }
                    have_first = true;
                } else if (t.kind == LpToken::Name) {
                    name = t.text;
                }
                if (have_first) {
                    LpToken op = lex.next();  // <=
                    if (op.kind != LpToken::Op)
                        throw std::runtime_error("LP parse: bad bound line");
                    LpToken nm = lex.next();
                    if (nm.kind != LpToken::Name)
                        throw std::runtime_error("LP parse: bad bound line");
                    name = nm.text;
                    const int j = var_of(name);
                    bounds_given[static_cast<std::size_t>(j)] = 1;
                    if (op.text == "<=")
                        p.vars[j].lower = first_num;
                    else if (op.text == ">=")
                        p.vars[j].upper = first_num;
                    // optional trailing "<= upper"
                    LpToken after = lex.peek();
                    if (after.kind == LpToken::Op && after.text == "<=") {
                        lex.next();
                        LpToken ub = lex.next();
                        double s2 = 1.0;
                        if (ub.kind == LpToken::Op && (ub.text == "-" || ub.text == "+")) {
                            s2 = ub.text == "-" ? -1.0 : 1.0;
                            ub = lex.next();
                        }
                        if (ub.kind == LpToken::Name && lower(ub.text) == "inf")
                            p.vars[j].upper = s2 * kInf;
                        else if (ub.kind == LpToken::Number)
                            p.vars[j].upper = s2 * ub.value;
                        else
                            throw std::runtime_error("LP parse: bad upper bound");
                    }
                } else {
                    const int j = var_of(name);
                    bounds_given[static_cast<std::size_t>(j)] = 1;
                    LpToken op = lex.peek();
                    if (op.kind == LpToken::Name && lower(op.text) == "free") {
                        lex.next();
                        p.vars[j].lower = -kInf;
                        p.vars[j].upper = kInf;
                        break;
                    }
                    if (op.kind != LpToken::Op) break;
                    lex.next();
                    LpToken num = lex.next();
                    double s2 = 1.0;
                    if (num.kind == LpToken::Op && (num.text == "-" || num.text == "+")) {
                        s2 = num.text == "-" ? -1.0 : 1.0;
                        num = lex.next();
                    }
                    double v;
                    if (num.kind == LpToken::Name && lower(num.text) == "inf")
                        v = s2 * kInf;
                    else if (num.kind == LpToken::Number)
                        v = s2 * num.value;
                    else
                        throw std::runtime_error("LP parse: bad bound value");
                    if (op.text == "<=")
                        p.vars[j].upper = v;
                    else if (op.text == ">=")
                        p.vars[j].lower = v;
                    else {
                        p.vars[j].lower = v;
                        p.vars[j].upper = v;
                    }
                }
                break;
            }
            case GeneralsSec:
            case BinariesSec: {
                if (t.kind != LpToken::Name)
                    throw std::runtime_error("LP parse: expected variable name");
                const int j = var_of(t.text);
                p.vars[j].integer = true;
                if (section == BinariesSec) {
                    p.vars[j].lower = 0.0;
                    p.vars[j].upper = 1.0;
                }
                break;
            }
            case None:
                throw std::runtime_error("LP parse: content before a section keyword");
        }
    }
    if (section == Objective) flush_objective();

    // LP-format default: variables without an explicit bound line are >= 0
    // (binaries already received [0, 1]).
    for (int j = 0; j < p.num_vars(); ++j)
        if (!bounds_given[static_cast<std::size_t>(j)] && p.vars[j].lower == -kInf &&
            p.vars[j].upper == kInf)
            p.vars[j].lower = 0.0;
    return p;
}

}  // namespace gridpwl
