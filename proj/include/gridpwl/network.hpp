#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace gridpwl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class BusKind { Slack, Pv, Pq };

struct Bus {
    int id = 0;  // external 1-based id from the case file
    BusKind kind = BusKind::Pq;
    double v_min = 0.94;
    double v_max = 1.06;
    double p_demand = 0.0;  // per unit on system base
    double q_demand = 0.0;
    double v_setpoint = 1.0;      // slack/PV magnitude
    double theta_setpoint = 0.0;  // radians, meaningful for the slack
};

struct Branch {
    int from = 0;  // internal 0-based bus indices
    int to = 0;
    double g = 0.0;  // series conductance, per unit
    double b = 0.0;  // series susceptance, per unit
    double g_sh = 0.0;  // shunt conductance per end
    double b_sh = 0.0;  // shunt susceptance per end (half of total charging)
    double tap = 1.0;   // 1.0 for lines, [0.9, 1.1] for transformers
    double rating = 1.0;  // per-unit MVA capacity
    bool switchable = true;
};

struct Generator {
    int bus = 0;  // internal bus index
    double p_min = 0.0, p_max = 0.0;
    double q_min = 0.0, q_max = 0.0;
    double cost_linear = 0.0;  // $/pu-h
    double cost_const = 0.0;   // $/h
};

class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Network {
    std::string case_id;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;

    int num_buses() const { return static_cast<int>(buses.size()); }
    int num_branches() const { return static_cast<int>(branches.size()); }
    int slack() const;  // internal index of the unique slack bus
    int internal_index(int external_id) const;
};

// Fixed linear maps taking the common terms (gamma, rho, pi) to directed
// branch flows and nodal injections, with every line in service.
//
// Flow vector layout (4l rows, l = branch count):
//   rows [0,    l)   P forward (from -> to), by branch index
//   rows [l,   2l)   Q forward
//   rows [2l,  3l)   P reverse (to -> from)
//   rows [3l,  4l)   Q reverse
// Injection layout (2n rows): [P per bus; Q per bus].
struct FixedMatrices {
    Mat w_gamma;  // 4l x n
    Mat w_rho;    // 4l x l
    Mat w_pi;     // 4l x l
    Mat w_psi;    // 2n x 4l

    int num_branches() const { return static_cast<int>(w_rho.cols()); }
    int num_buses() const { return static_cast<int>(w_gamma.cols()); }

    int row_p_fwd(int k) const { return k; }
    int row_q_fwd(int k) const { return num_branches() + k; }
    int row_p_rev(int k) const { return 2 * num_branches() + k; }
    int row_q_rev(int k) const { return 3 * num_branches() + k; }
};

// Parses a MATPOWER-style case (mpc.baseMVA, mpc.bus, mpc.gen, mpc.branch,
// mpc.gencost). All quantities are converted to per unit on the system base.
Network parse_case(const std::string& text);

Network load_case(const std::string& path);

FixedMatrices build_fixed_matrices(const Network& net);

// Flat-voltage linearization of the squared voltage magnitude: 2V - 1.
Vec gamma_hat(const Vec& v);

// FNV-1a over the canonical byte layout of the fixed matrices; used to match
// serialized models to the case they were trained on.
std::uint64_t fixed_matrices_hash(const FixedMatrices& fm);

}  // namespace gridpwl
