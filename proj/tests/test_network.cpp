#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

#include "gridpwl/network.hpp"

using namespace gridpwl;

TEST_CASE("two-bus branch admittance from r, x") {
    Network net = testutil::two_bus(0.0, 0.1);
    REQUIRE(net.num_branches() == 1);
    CHECK(net.branches[0].g == doctest::Approx(0.0));
    CHECK(net.branches[0].b == doctest::Approx(-10.0));
}

TEST_CASE("line charging splits across ends") {
    Network net = testutil::two_bus(0.01, 0.1, 0.04);
    CHECK(net.branches[0].b_sh == doctest::Approx(0.02));
    CHECK(net.branches[0].g_sh == 0.0);
}

TEST_CASE("IEEE 14-bus dimensions and per-unit conversion") {
    Network net = load_case(testutil::data_path("case14.m"));
    CHECK(net.case_id == "case14");
    CHECK(net.num_buses() == 14);
    CHECK(net.num_branches() == 20);
    CHECK(net.generators.size() == 5);
    CHECK(net.buses[net.slack()].id == 1);
    CHECK(net.buses[1].p_demand == doctest::Approx(0.217));
    CHECK(net.buses[2].q_demand == doctest::Approx(0.19));
    // Generator at bus 2: linear cost 20 $/MWh -> 2000 $/pu-h.
    CHECK(net.generators[1].cost_linear == doctest::Approx(2000.0));
    CHECK(net.generators[1].p_max == doctest::Approx(1.4));
    // Transformer taps preserved; lines have tap 1.
    CHECK(net.branches[7].tap == doctest::Approx(0.978));
    CHECK(net.branches[0].tap == 1.0);
}

TEST_CASE("parse errors are distinct and descriptive") {
    std::string base = testutil::read_file(testutil::data_path("case14.m"));

    SUBCASE("missing slack bus") {
        // Demote the slack to PV.
        auto pos = base.find("1\t3\t0\t0");
        REQUIRE(pos != std::string::npos);
        std::string text = base;
        text[pos + 2] = '2';
        CHECK_THROWS_WITH_AS(parse_case(text), doctest::Contains("no slack bus"), ParseError);
    }
    SUBCASE("zero impedance branch") {
        Network net;
        CHECK_THROWS_WITH_AS(testutil::two_bus(0.0, 0.0), doctest::Contains("zero impedance"),
                             ParseError);
    }
    SUBCASE("unknown bus reference") {
        std::string text = base;
        auto pos = text.find("13\t14\t0.17093");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 5, "13\t77");
        CHECK_THROWS_WITH_AS(parse_case(text), doctest::Contains("unknown bus reference"),
                             ParseError);
    }
    SUBCASE("malformed section") {
        CHECK_THROWS_AS(parse_case("function mpc = broken\nmpc.baseMVA = 100;\n"), ParseError);
    }
}

TEST_CASE("fixed matrices: single-branch coefficient read-off") {
    // g = 1, b = -5, tap 1, no shunts: P row taps gamma with +g, rho with -g, pi with -b.
    Network net = testutil::two_bus(1.0 / 26.0, 5.0 / 26.0);
    REQUIRE(net.branches[0].g == doctest::Approx(1.0));
    REQUIRE(net.branches[0].b == doctest::Approx(-5.0));
    FixedMatrices fm = build_fixed_matrices(net);
    CHECK(fm.w_gamma(fm.row_p_fwd(0), 0) == doctest::Approx(1.0));
    CHECK(fm.w_rho(fm.row_p_fwd(0), 0) == doctest::Approx(-1.0));
    CHECK(fm.w_pi(fm.row_p_fwd(0), 0) == doctest::Approx(5.0));
    CHECK(fm.w_gamma(fm.row_q_fwd(0), 0) == doctest::Approx(5.0));
    CHECK(fm.w_rho(fm.row_q_fwd(0), 0) == doctest::Approx(-5.0));
    CHECK(fm.w_pi(fm.row_q_fwd(0), 0) == doctest::Approx(-1.0));
    // Reverse pi column flips sign.
    CHECK(fm.w_pi(fm.row_p_rev(0), 0) == doctest::Approx(-5.0));
}

TEST_CASE("fixed matrices: shapes and structural invariants on 14-bus") {
    Network net = load_case(testutil::data_path("case14.m"));
    FixedMatrices fm = build_fixed_matrices(net);
    CHECK(fm.w_gamma.rows() == 80);
    CHECK(fm.w_gamma.cols() == 14);
    CHECK(fm.w_rho.rows() == 80);
    CHECK(fm.w_rho.cols() == 20);
    CHECK(fm.w_pi.cols() == 20);
    CHECK(fm.w_psi.rows() == 28);
    CHECK(fm.w_psi.cols() == 80);

    // Row r of any flow map may only touch the owning branch's rho/pi column
    // (r mod l) and one bus column; numerical zeros appear when g or b is 0.
    const int l = net.num_branches();
    for (int r = 0; r < fm.w_gamma.rows(); ++r) {
        int nz_gamma = 0;
        for (int c = 0; c < fm.w_gamma.cols(); ++c) nz_gamma += fm.w_gamma(r, c) != 0.0;
        CHECK(nz_gamma <= 1);
        for (int c = 0; c < l; ++c) {
            if (c == r % l) continue;
            CHECK(fm.w_rho(r, c) == 0.0);
            CHECK(fm.w_pi(r, c) == 0.0);
        }
        // Branches always carry series susceptance, so at least one of the
        // rho/pi couplings is structurally present in every row.
        CHECK((fm.w_rho(r, r % l) != 0.0 || fm.w_pi(r, r % l) != 0.0));
    }
    // Pure 0/1 summation matrix.
    for (int r = 0; r < fm.w_psi.rows(); ++r)
        for (int c = 0; c < fm.w_psi.cols(); ++c)
            CHECK((fm.w_psi(r, c) == 0.0 || fm.w_psi(r, c) == 1.0));

    // A unit forward active flow on branch k lands on exactly one injection row.
    Vec z = Vec::Zero(80);
    z[fm.row_p_fwd(3)] = 1.0;
    Vec inj = fm.w_psi * z;
    CHECK(inj.cwiseAbs().sum() == doctest::Approx(1.0));
    CHECK(inj[net.branches[3].from] == doctest::Approx(1.0));
}

TEST_CASE("build_fixed_matrices is deterministic") {
    std::string text = testutil::read_file(testutil::data_path("case14.m"));
    FixedMatrices a = build_fixed_matrices(parse_case(text));
    FixedMatrices b = build_fixed_matrices(parse_case(text));
    CHECK(fixed_matrices_hash(a) == fixed_matrices_hash(b));
    CHECK((a.w_gamma - b.w_gamma).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gamma_hat flat-voltage linearization") {
    Vec v(3);
    v << 1.0, 1.06, 0.94;
    Vec g = gamma_hat(v);
    CHECK(g[0] == doctest::Approx(1.0));
    CHECK(g[1] == doctest::Approx(1.12));
    CHECK(g[2] == doctest::Approx(0.88));
    // |2V - 1 - V^2| = (V-1)^2 <= 0.0036 across the sampling range.
    for (double vv = 0.94; vv <= 1.06; vv += 0.001) {
        CHECK(std::abs(2 * vv - 1 - vv * vv) <= 0.0036 + 1e-12);
    }
}
