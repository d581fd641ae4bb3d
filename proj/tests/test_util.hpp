#pragma once

// Shared helpers for the test binaries: fixture paths, tiny hand-built
// networks, and independent oracles kept separate from the library code.

#include "gridpwl/acflow.hpp"
#include "gridpwl/network.hpp"

#include <complex>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace testutil {

inline std::string data_path(const std::string& name) {
    return std::string(GRIDPWL_DATA_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Two buses joined by one branch; bus 1 carries the given PQ demand.
inline gridpwl::Network two_bus(double r, double x, double bc = 0.0, double tap = 1.0,
                                double p_demand = 0.0, double q_demand = 0.0) {
    std::ostringstream os;
    os << "function mpc = twobus\n"
       << "mpc.baseMVA = 100;\n"
       << "mpc.bus = [\n"
       << "1 3 0 0 0 0 1 1.0 0 0 1 1.06 0.94;\n"
       << "2 1 " << p_demand * 100 << " " << q_demand * 100
       << " 0 0 1 1.0 0 0 1 1.06 0.94;\n];\n"
       << "mpc.gen = [\n1 0 0 100 -100 1.0 100 1 300 0;\n];\n"
       << "mpc.branch = [\n1 2 " << r << " " << x << " " << bc << " 0 0 0 " << tap
       << " 0 1 -360 360;\n];\n"
       << "mpc.gencost = [\n2 0 0 2 10 0;\n];\n";
    return gridpwl::parse_case(os.str());
}

// Independent branch-flow oracle via complex arithmetic. Forward direction
// sees the tap; the reverse direction treats the tap as 1.
struct ComplexFlows {
    double p_fwd, q_fwd, p_rev, q_rev;
};

inline ComplexFlows complex_flow_oracle(const gridpwl::Branch& br, double vi, double thi,
                                        double vj, double thj) {
    using cd = std::complex<double>;
    const cd y(br.g, br.b);
    const cd ysh(br.g_sh, br.b_sh);
    const cd ui = std::polar(vi, thi);
    const cd uj = std::polar(vj, thj);
    const double a = br.tap;
    const cd i_fwd = (y / (a * a) + ysh) * ui - (y / a) * uj;
    const cd s_fwd = ui * std::conj(i_fwd);
    const cd i_rev = (y + ysh) * uj - y * ui;
    const cd s_rev = uj * std::conj(i_rev);
    return {s_fwd.real(), s_fwd.imag(), s_rev.real(), s_rev.imag()};
}

// Deterministic operating point inside the sampling box.
inline gridpwl::OperatingPoint random_point(const gridpwl::Network& net, std::mt19937_64& rng) {
    const int n = net.num_buses();
    gridpwl::Vec v(n), theta(n);
    auto uni = [&rng](double lo, double hi) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    };
    for (int i = 0; i < n; ++i) {
        v[i] = uni(0.94, 1.06);
        theta[i] = net.buses[i].theta_setpoint + uni(-0.5235987755982988, 0.5235987755982988);
    }
    const int s = net.slack();
    v[s] = net.buses[s].v_setpoint;
    theta[s] = net.buses[s].theta_setpoint;
    return gridpwl::make_operating_point(net, std::move(v), std::move(theta));
}

}  // namespace testutil
