#include "gridpwl/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace gridpwl {

namespace {

// MATPOWER column positions (0-based).
enum BusCol { kBusId = 0, kBusType = 1, kPd = 2, kQd = 3, kVm = 7, kVa = 8, kVmax = 11, kVmin = 12 };
enum GenCol { kGenBus = 0, kQmax = 3, kQmin = 4, kVg = 5, kGenStatus = 7, kPmax = 8, kPmin = 9 };
enum BranchCol {
    kFrom = 0,
    kTo = 1,
    kR = 2,
    kX = 3,
    kBc = 4,
    kRateA = 5,
    kRatio = 8,
    kShift = 9,
    kBrStatus = 10
};

// Rating substituted when the case file carries RATE_A = 0 (unlimited).
constexpr double kUnlimitedRating = 99.0;

std::string strip_comments(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool in_comment = false;
    for (char c : text) {
        if (c == '%') in_comment = true;
        if (c == '\n') in_comment = false;
        if (!in_comment) out.push_back(c);
    }
    return out;
}

// Reads the bracketed numeric matrix assigned to `key`, e.g. "mpc.bus = [...];".
// Rows are delimited by ';' or newlines. Returns false if the key is absent.
bool read_matrix(const std::string& text, const std::string& key,
                 std::vector<std::vector<double>>& rows) {
    rows.clear();
    auto pos = text.find(key);
    if (pos == std::string::npos) return false;
    pos = text.find('=', pos + key.size());
    if (pos == std::string::npos) throw ParseError("malformed section: " + key);
    auto open = text.find('[', pos);
    auto close = text.find(']', open);
    if (open == std::string::npos || close == std::string::npos)
        throw ParseError("malformed section: " + key);

    std::vector<double> row;
    const char* p = text.c_str() + open + 1;
    const char* end = text.c_str() + close;
    while (p < end) {
        if (*p == ';' || *p == '\n') {
            if (!row.empty()) rows.push_back(std::move(row));
            row.clear();
            ++p;
        } else if (std::isspace(static_cast<unsigned char>(*p)) || *p == ',') {
            ++p;
        } else {
            char* next = nullptr;
            double v = std::strtod(p, &next);
            if (next == p) throw ParseError("malformed section: bad number in " + key);
            row.push_back(v);
            p = next;
        }
    }
    if (!row.empty()) rows.push_back(std::move(row));
    return true;
}

double scalar_field(const std::string& text, const std::string& key) {
    auto pos = text.find(key);
    if (pos == std::string::npos) throw ParseError("malformed section: missing " + key);
    pos = text.find('=', pos + key.size());
    if (pos == std::string::npos) throw ParseError("malformed section: " + key);
    char* next = nullptr;
    double v = std::strtod(text.c_str() + pos + 1, &next);
    if (next == text.c_str() + pos + 1) throw ParseError("malformed section: " + key);
    return v;
}

std::string case_name(const std::string& text) {
    auto pos = text.find("function");
    if (pos == std::string::npos) return "case";
    auto eq = text.find('=', pos);
    if (eq == std::string::npos) return "case";
    std::istringstream is(text.substr(eq + 1));
    std::string name;
    is >> name;
    return name.empty() ? "case" : name;
}

void check_connected(const Network& net) {
    const int n = net.num_buses();
    if (n == 0) return;
    std::vector<std::vector<int>> adj(n);
    for (const auto& br : net.branches) {
        adj[br.from].push_back(br.to);
        adj[br.to].push_back(br.from);
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
    if (count != n) throw ParseError("disconnected: network graph is not connected");
}

}  // namespace

int Network::slack() const {
    for (int i = 0; i < num_buses(); ++i)
        if (buses[i].kind == BusKind::Slack) return i;
    throw std::logic_error("no slack bus");
}

int Network::internal_index(int external_id) const {
    for (int i = 0; i < num_buses(); ++i)
        if (buses[i].id == external_id) return i;
    return -1;
}

Network parse_case(const std::string& raw) {
    const std::string text = strip_comments(raw);
    Network net;
    net.case_id = case_name(text);
    net.base_mva = scalar_field(text, "mpc.baseMVA");
    if (net.base_mva <= 0) throw ParseError("malformed section: baseMVA must be positive");

    std::vector<std::vector<double>> rows;
    if (!read_matrix(text, "mpc.bus", rows) || rows.empty())
        throw ParseError("malformed section: missing mpc.bus");

    std::map<int, int> index_of;
    int slack_count = 0;
    for (const auto& r : rows) {
        if (r.size() < 13) throw ParseError("malformed section: bus row too short");
        Bus bus;
        bus.id = static_cast<int>(r[kBusId]);
        const int type = static_cast<int>(r[kBusType]);
        if (type == 3)
            bus.kind = BusKind::Slack;
        else if (type == 2)
            bus.kind = BusKind::Pv;
        else if (type == 1)
            bus.kind = BusKind::Pq;
        else
            throw ParseError("malformed section: unsupported bus type");
        bus.p_demand = r[kPd] / net.base_mva;
        bus.q_demand = r[kQd] / net.base_mva;
        bus.v_setpoint = r[kVm];
        bus.theta_setpoint = r[kVa] * std::numbers::pi / 180.0;
        bus.v_max = r[kVmax];
        bus.v_min = r[kVmin];
        if (!(bus.v_min > 0 && bus.v_min <= bus.v_max))
            throw ParseError("malformed section: bad voltage bounds at bus " +
                             std::to_string(bus.id));
        if (bus.kind == BusKind::Slack) ++slack_count;
        if (index_of.count(bus.id))
            throw ParseError("malformed section: duplicate bus id " + std::to_string(bus.id));
        index_of[bus.id] = net.num_buses();
        net.buses.push_back(bus);
    }
    if (slack_count == 0) throw ParseError("no slack bus");
    if (slack_count > 1) throw ParseError("malformed section: multiple slack buses");

    if (!read_matrix(text, "mpc.branch", rows) || rows.empty())
        throw ParseError("malformed section: missing mpc.branch");
    for (const auto& r : rows) {
        if (r.size() < 11) throw ParseError("malformed section: branch row too short");
        if (static_cast<int>(r[kBrStatus]) == 0) continue;  // out of service: not modeled
        Branch br;
        const int f = static_cast<int>(r[kFrom]);
        const int t = static_cast<int>(r[kTo]);
        if (!index_of.count(f) || !index_of.count(t))
            throw ParseError("unknown bus reference in branch " + std::to_string(f) + "-" +
                             std::to_string(t));
        br.from = index_of[f];
        br.to = index_of[t];
        if (br.from == br.to) throw ParseError("malformed section: branch endpoints coincide");
        const double res = r[kR], x = r[kX];
        const double denom = res * res + x * x;
        if (denom == 0.0)
            throw ParseError("zero impedance branch " + std::to_string(f) + "-" +
                             std::to_string(t));
        br.g = res / denom;
        br.b = -x / denom;
        br.g_sh = 0.0;
        br.b_sh = r[kBc] / 2.0;  // line charging split over the two ends
        const double ratio = r[kRatio];
        if (ratio == 0.0 || ratio == 1.0) {
            br.tap = 1.0;
        } else {
            if (ratio < 0.9 || ratio > 1.1)
                throw ParseError("malformed section: tap ratio out of [0.9, 1.1] on branch " +
                                 std::to_string(f) + "-" + std::to_string(t));
            br.tap = ratio;
        }
        if (r[kShift] != 0.0)
            throw ParseError("malformed section: phase-shifting transformers unsupported");
        const double rate_a = r[kRateA];
        br.rating = rate_a > 0 ? rate_a / net.base_mva : kUnlimitedRating;
        net.branches.push_back(br);
    }

    if (!read_matrix(text, "mpc.gen", rows) || rows.empty())
        throw ParseError("malformed section: missing mpc.gen");
    std::vector<std::vector<double>> gen_rows = rows;

    std::vector<std::vector<double>> cost_rows;
    const bool have_costs = read_matrix(text, "mpc.gencost", cost_rows);
    if (have_costs && cost_rows.size() != gen_rows.size())
        throw ParseError("malformed section: gencost row count mismatch");

    for (std::size_t gi = 0; gi < gen_rows.size(); ++gi) {
        const auto& r = gen_rows[gi];
        if (r.size() < 10) throw ParseError("malformed section: gen row too short");
        if (static_cast<int>(r[kGenStatus]) == 0) continue;
        Generator gen;
        const int bus_id = static_cast<int>(r[kGenBus]);
        if (!index_of.count(bus_id))
            throw ParseError("unknown bus reference in generator at bus " +
                             std::to_string(bus_id));
        gen.bus = index_of[bus_id];
        gen.q_max = r[kQmax] / net.base_mva;
        gen.q_min = r[kQmin] / net.base_mva;
        gen.p_max = r[kPmax] / net.base_mva;
        gen.p_min = r[kPmin] / net.base_mva;
        if (gen.p_min > gen.p_max || gen.q_min > gen.q_max)
            throw ParseError("malformed section: inverted generator limits at bus " +
                             std::to_string(bus_id));
        net.buses[gen.bus].v_setpoint = r[kVg];  // regulated magnitude wins over bus VM

        if (have_costs) {
            const auto& c = cost_rows[gi];
            if (c.size() < 4) throw ParseError("malformed section: gencost row too short");
            const int model = static_cast<int>(c[0]);
            const int ncost = static_cast<int>(c[3]);
            if (model != 2 || c.size() < 4 + static_cast<std::size_t>(ncost))
                throw ParseError("malformed section: only polynomial gencost supported");
            // Polynomial coefficients are listed highest order first; anything
            // above linear is dropped (the OTS objective must stay linear).
            if (ncost >= 1) gen.cost_const = c[4 + ncost - 1];
            if (ncost >= 2) gen.cost_linear = c[4 + ncost - 2] * net.base_mva;
        }
        net.generators.push_back(gen);
    }

    // PV buses left without an in-service generator revert to PQ.
    std::vector<char> has_gen(net.num_buses(), 0);
    for (const auto& g : net.generators) has_gen[g.bus] = 1;
    for (int i = 0; i < net.num_buses(); ++i)
        if (net.buses[i].kind == BusKind::Pv && !has_gen[i]) net.buses[i].kind = BusKind::Pq;

    check_connected(net);
    return net;
}

Network load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open case file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str());
}

FixedMatrices build_fixed_matrices(const Network& net) {
    const int n = net.num_buses();
    const int l = net.num_branches();
    FixedMatrices fm;
    fm.w_gamma = Mat::Zero(4 * l, n);
    fm.w_rho = Mat::Zero(4 * l, l);
    fm.w_pi = Mat::Zero(4 * l, l);
    fm.w_psi = Mat::Zero(2 * n, 4 * l);

    for (int k = 0; k < l; ++k) {
        const Branch& br = net.branches[k];
        const double a = br.tap;
        const double g = br.g, b = br.b;

        // Forward direction sees the tap; reverse uses a = 1.
        const int pf = fm.row_p_fwd(k), qf = fm.row_q_fwd(k);
        fm.w_gamma(pf, br.from) = g / (a * a) + br.g_sh;
        fm.w_rho(pf, k) = -g / a;
        fm.w_pi(pf, k) = -b / a;
        fm.w_gamma(qf, br.from) = -(b / (a * a) + br.b_sh);
        fm.w_rho(qf, k) = b / a;
        fm.w_pi(qf, k) = -g / a;

        // Reverse rows: theta_ji = -theta_ij flips the sign of the pi column.
        const int pr = fm.row_p_rev(k), qr = fm.row_q_rev(k);
        fm.w_gamma(pr, br.to) = g + br.g_sh;
        fm.w_rho(pr, k) = -g;
        fm.w_pi(pr, k) = b;
        fm.w_gamma(qr, br.to) = -(b + br.b_sh);
        fm.w_rho(qr, k) = b;
        fm.w_pi(qr, k) = g;

        fm.w_psi(br.from, pf) = 1.0;
        fm.w_psi(n + br.from, qf) = 1.0;
        fm.w_psi(br.to, pr) = 1.0;
        fm.w_psi(n + br.to, qr) = 1.0;
    }
    return fm;
}

Vec gamma_hat(const Vec& v) { return 2.0 * v.array() - 1.0; }

std::uint64_t fixed_matrices_hash(const FixedMatrices& fm) {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const Mat* m : {&fm.w_gamma, &fm.w_rho, &fm.w_pi, &fm.w_psi}) {
        const std::int64_t dims[2] = {m->rows(), m->cols()};
        mix(dims, sizeof(dims));
        mix(m->data(), sizeof(double) * static_cast<std::size_t>(m->size()));
    }
    return h;
}

}  // namespace gridpwl
