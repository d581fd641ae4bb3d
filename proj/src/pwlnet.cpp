#include "gridpwl/pwlnet.hpp"

#include "gridpwl/rng.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace gridpwl {

namespace {

OperatingPoint anchor_point(const Network& net) {
    // Flat voltage, case-file angles.
    Vec v = Vec::Ones(net.num_buses());
    Vec theta(net.num_buses());
    for (int i = 0; i < net.num_buses(); ++i) theta[i] = net.buses[i].theta_setpoint;
    return make_operating_point(net, std::move(v), std::move(theta));
}

Vec delta_input(const OperatingPoint& x, const OperatingPoint& x0) {
    return x.input() - x0.input();
}

// Flow-map rows have one gamma source, one branch source and one injection
// destination each; the compact form keeps the batched trainer off dense
// 4l-row multiplies.
struct CompactFlowMap {
    std::vector<int> gamma_src;
    std::vector<int> branch_src;
    std::vector<int> inj_row;
    Vec gamma_coef, rho_coef, pi_coef;

    explicit CompactFlowMap(const FixedMatrices& fm) {
        const int rows = static_cast<int>(fm.w_gamma.rows());
        const int l = fm.num_branches();
        const int n = fm.num_buses();
        gamma_src.assign(rows, 0);
        branch_src.assign(rows, 0);
        inj_row.assign(rows, 0);
        gamma_coef = Vec::Zero(rows);
        rho_coef = Vec::Zero(rows);
        pi_coef = Vec::Zero(rows);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < n; ++c)
                if (fm.w_gamma(r, c) != 0.0) {
                    gamma_src[r] = c;
                    gamma_coef[r] = fm.w_gamma(r, c);
                }
            branch_src[r] = r % l;
            rho_coef[r] = fm.w_rho(r, branch_src[r]);
            pi_coef[r] = fm.w_pi(r, branch_src[r]);
            for (int c = 0; c < 2 * n; ++c)
                if (fm.w_psi(c, r) != 0.0) inj_row[r] = c;
        }
    }
};

double uniform_pm(RngStream& rng, double scale) { return rng.uniform(-scale, scale); }

}  // namespace

PwlModel make_anchor_model(const Network& net, const FixedMatrices& fm, int q) {
    PwlModel m;
    m.q = q;
    const int nx = net.num_buses() + net.num_branches();
    const int l2 = 2 * net.num_branches();
    m.w1 = Mat::Zero(nx, q);
    m.w2 = Mat::Zero(l2, q);
    m.bias = Vec::Zero(q);
    m.x0 = anchor_point(net);
    const CommonTerms ct = common_terms(net, m.x0);
    m.f_x0.resize(l2);
    m.f_x0 << ct.rho, ct.pi;
    m.j_x0 = common_term_jacobian(net, m.x0).j;
    m.fixed = fm;
    m.fixed_hash = fixed_matrices_hash(fm);
    return m;
}

DirectModel make_anchor_direct(const Network& net, const FixedMatrices& fm, int q) {
    DirectModel m;
    m.q = q;
    const int n = net.num_buses();
    const int nx = n + net.num_branches();
    const int l4 = 4 * net.num_branches();
    m.w1 = Mat::Zero(nx, q);
    m.w2 = Mat::Zero(l4, q);
    m.bias = Vec::Zero(q);
    m.x0 = anchor_point(net);
    m.flows_x0 = branch_flows(m.x0, net, fm).z_pf;
    // Exact flow Jacobian: gamma contributes 2 V0 on the voltage block.
    Mat dgamma = Mat::Zero(n, nx);
    for (int i = 0; i < n; ++i) dgamma(i, i) = 2.0 * m.x0.v[i];
    const Mat jf = common_term_jacobian(net, m.x0).j;
    const int l = net.num_branches();
    m.j_flow_x0 = fm.w_gamma * dgamma + fm.w_rho * jf.topRows(l) + fm.w_pi * jf.bottomRows(l);
    m.fixed = fm;
    m.fixed_hash = fixed_matrices_hash(fm);
    return m;
}

// Draw order: w1 column by column (inner index = input dimension), then w2
// column by column, bias stays zero. Scales are 1/sqrt(fan-in) of each layer.
void init_weights(PwlModel& model, std::uint64_t seed) {
    RngStream rng(seed ^ 0x77AE1ull);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(model.w1.rows()));
    for (int c = 0; c < model.w1.cols(); ++c)
        for (int r = 0; r < model.w1.rows(); ++r) model.w1(r, c) = uniform_pm(rng, s1);
    const double s2 = 1.0 / std::sqrt(static_cast<double>(model.q));
    for (int c = 0; c < model.w2.cols(); ++c)
        for (int r = 0; r < model.w2.rows(); ++r) model.w2(r, c) = uniform_pm(rng, s2);
    model.bias.setZero();
}

void init_weights(DirectModel& model, std::uint64_t seed) {
    RngStream rng(seed ^ 0x77AE1ull);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(model.w1.rows()));
    for (int c = 0; c < model.w1.cols(); ++c)
        for (int r = 0; r < model.w1.rows(); ++r) model.w1(r, c) = uniform_pm(rng, s1);
    const double s2 = 1.0 / std::sqrt(static_cast<double>(model.q));
    for (int c = 0; c < model.w2.cols(); ++c)
        for (int r = 0; r < model.w2.rows(); ++r) model.w2(r, c) = uniform_pm(rng, s2);
    model.bias.setZero();
}

ForwardTrace forward(const PwlModel& model, const OperatingPoint& x) {
    if (x.input().size() != model.input_dim())
        throw std::invalid_argument("forward: input dimension mismatch");
    ForwardTrace t;
    const Vec dx = delta_input(x, model.x0);
    t.z1_pre = model.w1.transpose() * dx + model.bias;
    t.z1 = t.z1_pre.cwiseMax(0.0);
    t.z2 = model.f_x0 + model.j_x0 * dx + model.w2 * t.z1;
    const int l = model.fixed.num_branches();
    t.z3 = model.fixed.w_gamma * gamma_hat(x.v) + model.fixed.w_rho * t.z2.head(l) +
           model.fixed.w_pi * t.z2.tail(l);
    t.z4 = model.fixed.w_psi * t.z3;
    return t;
}

Vec forward_direct(const DirectModel& model, const OperatingPoint& x) {
    if (x.input().size() != model.w1.rows())
        throw std::invalid_argument("forward_direct: input dimension mismatch");
    const Vec dx = delta_input(x, model.x0);
    const Vec z1 = (model.w1.transpose() * dx + model.bias).cwiseMax(0.0);
    return model.flows_x0 + model.j_flow_x0 * dx + model.w2 * z1;
}

namespace {

std::vector<int> all_indices(const SampleSet& data, const std::vector<int>& idx) {
    if (!idx.empty()) return idx;
    std::vector<int> out(data.size());
    for (int i = 0; i < data.size(); ++i) out[i] = i;
    return out;
}

}  // namespace

double loss(const PwlModel& model, const SampleSet& data, const std::vector<int>& idx,
            double lambda) {
    const auto ids = all_indices(data, idx);
    if (ids.empty()) throw std::invalid_argument("loss: empty batch");
    const int l = model.fixed.num_branches();
    double total = 0.0;
    for (int i : ids) {
        const ForwardTrace t = forward(model, data.inputs[i]);
        Vec f(2 * l);
        f << data.targets_common[i].rho, data.targets_common[i].pi;
        total += (f - t.z2).squaredNorm() +
                 lambda * ((data.targets_power[i].z_pf - t.z3).squaredNorm() +
                           (data.targets_power[i].z_inj - t.z4).squaredNorm());
    }
    return total / static_cast<double>(ids.size());
}

double loss_direct(const DirectModel& model, const SampleSet& data,
                   const std::vector<int>& idx) {
    const auto ids = all_indices(data, idx);
    if (ids.empty()) throw std::invalid_argument("loss: empty batch");
    double total = 0.0;
    for (int i : ids)
        total += (data.targets_power[i].z_pf - forward_direct(model, data.inputs[i]))
                     .squaredNorm();
    return total / static_cast<double>(ids.size());
}

ParamGradients gradients(const PwlModel& model, const SampleSet& data,
                         const std::vector<int>& idx, double lambda) {
    const auto ids = all_indices(data, idx);
    if (ids.empty()) throw std::invalid_argument("gradients: empty batch");
    const int l = model.fixed.num_branches();
    ParamGradients g;
    g.w1 = Mat::Zero(model.w1.rows(), model.w1.cols());
    g.w2 = Mat::Zero(model.w2.rows(), model.w2.cols());
    g.bias = Vec::Zero(model.q);
    for (int i : ids) {
        const OperatingPoint& x = data.inputs[i];
        const ForwardTrace t = forward(model, x);
        const Vec dx = delta_input(x, model.x0);
        Vec f(2 * l);
        f << data.targets_common[i].rho, data.targets_common[i].pi;

        const Vec e2 = t.z2 - f;
        const Vec e3 = t.z3 - data.targets_power[i].z_pf;
        const Vec e4 = t.z4 - data.targets_power[i].z_inj;
        const Vec g4 = 2.0 * lambda * e4;
        const Vec g3 = 2.0 * lambda * e3 + model.fixed.w_psi.transpose() * g4;
        Vec g2 = 2.0 * e2;
        g2.head(l) += model.fixed.w_rho.transpose() * g3;
        g2.tail(l) += model.fixed.w_pi.transpose() * g3;
        Vec g1 = model.w2.transpose() * g2;
        for (int k = 0; k < model.q; ++k)
            if (t.z1_pre[k] <= 0.0) g1[k] = 0.0;  // subgradient at 0 is 0

        g.w2 += g2 * t.z1.transpose();
        g.w1 += dx * g1.transpose();
        g.bias += g1;
    }
    const double inv = 1.0 / static_cast<double>(ids.size());
    g.w1 *= inv;
    g.w2 *= inv;
    g.bias *= inv;
    return g;
}

ParamGradients gradients_direct(const DirectModel& model, const SampleSet& data,
                                const std::vector<int>& idx) {
    const auto ids = all_indices(data, idx);
    if (ids.empty()) throw std::invalid_argument("gradients: empty batch");
    ParamGradients g;
    g.w1 = Mat::Zero(model.w1.rows(), model.w1.cols());
    g.w2 = Mat::Zero(model.w2.rows(), model.w2.cols());
    g.bias = Vec::Zero(model.q);
    for (int i : ids) {
        const OperatingPoint& x = data.inputs[i];
        const Vec dx = delta_input(x, model.x0);
        const Vec z1_pre = model.w1.transpose() * dx + model.bias;
        const Vec z1 = z1_pre.cwiseMax(0.0);
        const Vec pred = model.flows_x0 + model.j_flow_x0 * dx + model.w2 * z1;
        const Vec ge = 2.0 * (pred - data.targets_power[i].z_pf);
        Vec g1 = model.w2.transpose() * ge;
        for (int k = 0; k < model.q; ++k)
            if (z1_pre[k] <= 0.0) g1[k] = 0.0;
        g.w2 += ge * z1.transpose();
        g.w1 += dx * g1.transpose();
        g.bias += g1;
    }
    const double inv = 1.0 / static_cast<double>(ids.size());
    g.w1 *= inv;
    g.w2 *= inv;
    g.bias *= inv;
    return g;
}

// ---------------------------------------------------------------------------
// Batched trainer. Samples live in column-major matrices; gradient reduction
// runs over a fixed number of column chunks so the result does not depend on
// the number of worker threads.

namespace {

constexpr int kChunks = 16;

int worker_count() {
    if (const char* env = std::getenv("GRIDPWL_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return std::min(v, kChunks);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return std::max(1, std::min<int>(static_cast<int>(hw), kChunks));
}

struct BatchData {
    Mat dx;      // nx x N
    Mat f2;      // 2l x N (rho; pi targets)
    Mat f3;      // 4l x N (flow targets)
    Mat f4;      // 2n x N (injection targets)
    Mat lin2;    // 2l x N: f_x0 + J dx (constant through training)
    Mat c3;      // 4l x N: gamma part of z3 (constant)
    Mat lin4;    // 4l x N: flows_x0 + J_flow dx (direct model only)
};

struct ChunkGrad {
    Mat w1, w2;
    Vec bias;
    double loss = 0.0;
};

struct AdamState {
    Mat m_w1, v_w1, m_w2, v_w2;
    Vec m_b, v_b;
    long t = 0;

    void init(const Mat& w1, const Mat& w2, const Vec& b) {
        m_w1 = Mat::Zero(w1.rows(), w1.cols());
        v_w1 = m_w1;
        m_w2 = Mat::Zero(w2.rows(), w2.cols());
        v_w2 = m_w2;
        m_b = Vec::Zero(b.size());
        v_b = m_b;
    }

    void step(Mat& w1, Mat& w2, Vec& b, const ChunkGrad& g, const TrainConfig& cfg) {
        ++t;
        const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
        auto update = [&](Mat& w, Mat& m, Mat& v, const Mat& grad) {
            m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
            v = cfg.adam_beta2 * v.array().matrix() +
                (1.0 - cfg.adam_beta2) * grad.array().square().matrix();
            w.array() -= cfg.learning_rate * (m.array() / bc1) /
                         ((v.array() / bc2).sqrt() + cfg.adam_eps);
        };
        update(w1, m_w1, v_w1, g.w1);
        update(w2, m_w2, v_w2, g.w2);
        Vec mb = m_b, vb = v_b;
        m_b = cfg.adam_beta1 * mb + (1.0 - cfg.adam_beta1) * g.bias;
        v_b = cfg.adam_beta2 * vb.array().matrix() +
              (1.0 - cfg.adam_beta2) * g.bias.array().square().matrix();
        b.array() -= cfg.learning_rate * (m_b.array() / bc1) /
                     ((v_b.array() / bc2).sqrt() + cfg.adam_eps);
    }
};

BatchData prepare_data(const SampleSet& data, const OperatingPoint& x0, const Vec& f_x0,
                       const Mat& j_x0, const FixedMatrices& fm, const CompactFlowMap& cm,
                       bool direct, const Vec& flows_x0, const Mat& j_flow_x0) {
    const int n_samples = data.size();
    const int nx = static_cast<int>(j_x0.cols());
    const int l2 = static_cast<int>(j_x0.rows());
    const int l4 = static_cast<int>(fm.w_gamma.rows());
    const int n2 = static_cast<int>(fm.w_psi.rows());
    const int n = fm.num_buses();

    BatchData bd;
    bd.dx.resize(nx, n_samples);
    bd.f2.resize(l2, n_samples);
    bd.f3.resize(l4, n_samples);
    bd.f4.resize(n2, n_samples);
    bd.c3.resize(l4, n_samples);
    const Vec x0_input = x0.input();
    for (int s = 0; s < n_samples; ++s) {
        bd.dx.col(s) = data.inputs[s].input() - x0_input;
        bd.f2.col(s).head(l2 / 2) = data.targets_common[s].rho;
        bd.f2.col(s).tail(l2 / 2) = data.targets_common[s].pi;
        bd.f3.col(s) = data.targets_power[s].z_pf;
        bd.f4.col(s) = data.targets_power[s].z_inj;
        const Vec gh = gamma_hat(data.inputs[s].v);
        for (int r = 0; r < l4; ++r) bd.c3(r, s) = cm.gamma_coef[r] * gh[cm.gamma_src[r]];
    }
    (void)n;
    bd.lin2 = f_x0.replicate(1, n_samples) + j_x0 * bd.dx;
    if (direct) bd.lin4 = flows_x0.replicate(1, n_samples) + j_flow_x0 * bd.dx;
    return bd;
}

// One gradient/loss pass over columns [c0, c1) of the prepared data.
void chunk_pass_gen(const Mat& w1, const Mat& w2, const Vec& bias, double lambda,
                    const BatchData& bd, const CompactFlowMap& cm, int c0, int c1,
                    ChunkGrad& out) {
    const int m = c1 - c0;
    const int q = static_cast<int>(w1.cols());
    const int l2 = static_cast<int>(w2.rows());
    const int l = l2 / 2;
    const int l4 = static_cast<int>(cm.gamma_coef.size());
    const int n2 = static_cast<int>(bd.f4.rows());

    Mat z1 = (w1.transpose() * bd.dx.middleCols(c0, m)).colwise() + bias;
    Mat mask(q, m);
    for (int c = 0; c < m; ++c)
        for (int r = 0; r < q; ++r) {
            const bool on = z1(r, c) > 0.0;
            mask(r, c) = on ? 1.0 : 0.0;
            if (!on) z1(r, c) = 0.0;
        }
    Mat z2 = bd.lin2.middleCols(c0, m) + w2 * z1;
    Mat e2 = z2 - bd.f2.middleCols(c0, m);

    // z3/z4 residuals and their pullback onto z2, via the compact flow map.
    Mat e3(l4, m), g2 = 2.0 * e2;
    Vec e4(n2);
    double loss_sum = 0.0;
    Vec g4(n2), g3row(1);
    for (int c = 0; c < m; ++c) {
        e4.setZero();
        for (int r = 0; r < l4; ++r) {
            const int k = cm.branch_src[r];
            const double z3v = bd.c3(r, c0 + c) + cm.rho_coef[r] * z2(k, c) +
                               cm.pi_coef[r] * z2(l + k, c);
            const double e = z3v - bd.f3(r, c0 + c);
            e3(r, c) = e;
            e4[cm.inj_row[r]] += z3v;
        }
        e4 -= bd.f4.col(c0 + c);
        loss_sum += e2.col(c).squaredNorm() +
                    lambda * (e3.col(c).squaredNorm() + e4.squaredNorm());
        g4 = 2.0 * lambda * e4;
        for (int r = 0; r < l4; ++r) {
            const double g3 = 2.0 * lambda * e3(r, c) + g4[cm.inj_row[r]];
            const int k = cm.branch_src[r];
            g2(k, c) += cm.rho_coef[r] * g3;
            g2(l + k, c) += cm.pi_coef[r] * g3;
        }
    }

    Mat g1 = (w2.transpose() * g2).cwiseProduct(mask);
    out.w2 = g2 * z1.transpose();
    out.w1 = bd.dx.middleCols(c0, m) * g1.transpose();
    out.bias = g1.rowwise().sum();
    out.loss = loss_sum;
}

void chunk_pass_direct(const Mat& w1, const Mat& w2, const Vec& bias, const BatchData& bd,
                       int c0, int c1, ChunkGrad& out) {
    const int m = c1 - c0;
    const int q = static_cast<int>(w1.cols());

    Mat z1 = (w1.transpose() * bd.dx.middleCols(c0, m)).colwise() + bias;
    Mat mask(q, m);
    for (int c = 0; c < m; ++c)
        for (int r = 0; r < q; ++r) {
            const bool on = z1(r, c) > 0.0;
            mask(r, c) = on ? 1.0 : 0.0;
            if (!on) z1(r, c) = 0.0;
        }
    Mat pred = bd.lin4.middleCols(c0, m) + w2 * z1;
    Mat e = pred - bd.f3.middleCols(c0, m);
    out.loss = e.squaredNorm();
    Mat ge = 2.0 * e;
    Mat g1 = (w2.transpose() * ge).cwiseProduct(mask);
    out.w2 = ge * z1.transpose();
    out.w1 = bd.dx.middleCols(c0, m) * g1.transpose();
    out.bias = g1.rowwise().sum();
}

// Runs chunk passes across workers and reduces in fixed chunk order.
template <typename Pass>
ChunkGrad parallel_reduce(int n_cols, int w1_rows, int w2_rows, int q, Pass&& pass) {
    std::vector<ChunkGrad> slots(kChunks);
    std::atomic<int> next{0};
    const int workers = worker_count();
    auto work = [&]() {
        for (;;) {
            const int c = next.fetch_add(1);
            if (c >= kChunks) return;
            const int c0 = static_cast<int>(static_cast<long>(n_cols) * c / kChunks);
            const int c1 = static_cast<int>(static_cast<long>(n_cols) * (c + 1) / kChunks);
            if (c1 > c0) pass(c0, c1, slots[c]);
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    ChunkGrad total;
    total.w1 = Mat::Zero(w1_rows, q);
    total.w2 = Mat::Zero(w2_rows, q);
    total.bias = Vec::Zero(q);
    for (const auto& s : slots) {
        if (s.w1.size() == 0) continue;
        total.w1 += s.w1;
        total.w2 += s.w2;
        total.bias += s.bias;
        total.loss += s.loss;
    }
    return total;
}

}  // namespace

PwlModel train(const Network& net, const FixedMatrices& fm, const SampleSet& data,
               const TrainConfig& cfg, std::vector<double>* curve) {
    if (data.size() < 1) throw std::invalid_argument("train: empty dataset");
    if (cfg.epochs < 0 || cfg.learning_rate < 0) throw std::invalid_argument("train: bad config");
    PwlModel model = make_anchor_model(net, fm, cfg.q);
    init_weights(model, cfg.seed);
    const CompactFlowMap cm(fm);
    const BatchData bd = prepare_data(data, model.x0, model.f_x0, model.j_x0, fm, cm, false,
                                      Vec(), Mat());
    const int n_samples = data.size();
    const int batch = cfg.batch_size > 0 ? std::min(cfg.batch_size, n_samples) : n_samples;

    AdamState adam;
    adam.init(model.w1, model.w2, model.bias);

    std::vector<int> order(n_samples);
    for (int i = 0; i < n_samples; ++i) order[i] = i;
    Mat dx_s, f2_s, f3_s, f4_s, lin2_s, c3_s;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        if (batch == n_samples) {
            ChunkGrad g = parallel_reduce(
                n_samples, static_cast<int>(model.w1.rows()), static_cast<int>(model.w2.rows()),
                cfg.q, [&](int c0, int c1, ChunkGrad& out) {
                    chunk_pass_gen(model.w1, model.w2, model.bias, cfg.lambda, bd, cm, c0, c1,
                                   out);
                });
            const double inv = 1.0 / static_cast<double>(n_samples);
            g.w1 *= inv;
            g.w2 *= inv;
            g.bias *= inv;
            epoch_loss = g.loss * inv;
            if (!std::isfinite(epoch_loss))
                throw TrainError("training loss diverged at epoch " + std::to_string(epoch));
            adam.step(model.w1, model.w2, model.bias, g, cfg);
        } else {
            // Deterministic per-epoch shuffle, sequential mini-batches.
            RngStream shuffle(cfg.seed ^ 0xA5C39Eull ^ static_cast<std::uint64_t>(epoch));
            for (int i = n_samples - 1; i > 0; --i)
                std::swap(order[i],
                          order[static_cast<int>(shuffle.index_below(static_cast<std::size_t>(i) + 1))]);
            double total = 0.0;
            for (int start = 0; start < n_samples; start += batch) {
                const int mb = std::min(batch, n_samples - start);
                dx_s.resize(bd.dx.rows(), mb);
                f2_s.resize(bd.f2.rows(), mb);
                f3_s.resize(bd.f3.rows(), mb);
                f4_s.resize(bd.f4.rows(), mb);
                lin2_s.resize(bd.lin2.rows(), mb);
                c3_s.resize(bd.c3.rows(), mb);
                for (int c = 0; c < mb; ++c) {
                    const int s = order[start + c];
                    dx_s.col(c) = bd.dx.col(s);
                    f2_s.col(c) = bd.f2.col(s);
                    f3_s.col(c) = bd.f3.col(s);
                    f4_s.col(c) = bd.f4.col(s);
                    lin2_s.col(c) = bd.lin2.col(s);
                    c3_s.col(c) = bd.c3.col(s);
                }
                BatchData sub;
                sub.dx = std::move(dx_s);
                sub.f2 = std::move(f2_s);
                sub.f3 = std::move(f3_s);
                sub.f4 = std::move(f4_s);
                sub.lin2 = std::move(lin2_s);
                sub.c3 = std::move(c3_s);
                ChunkGrad g;
                chunk_pass_gen(model.w1, model.w2, model.bias, cfg.lambda, sub, cm, 0, mb, g);
                const double inv = 1.0 / static_cast<double>(mb);
                g.w1 *= inv;
                g.w2 *= inv;
                g.bias *= inv;
                total += g.loss;
                if (!std::isfinite(g.loss))
                    throw TrainError("training loss diverged at epoch " + std::to_string(epoch));
                adam.step(model.w1, model.w2, model.bias, g, cfg);
                dx_s = std::move(sub.dx);
                f2_s = std::move(sub.f2);
                f3_s = std::move(sub.f3);
                f4_s = std::move(sub.f4);
                lin2_s = std::move(sub.lin2);
                c3_s = std::move(sub.c3);
            }
            epoch_loss = total / static_cast<double>(n_samples);
        }
        if (curve) curve->push_back(epoch_loss);
    }
    return model;
}

DirectModel train_direct(const Network& net, const FixedMatrices& fm, const SampleSet& data,
                         const TrainConfig& cfg, std::vector<double>* curve) {
    if (data.size() < 1) throw std::invalid_argument("train: empty dataset");
    DirectModel model = make_anchor_direct(net, fm, cfg.q);
    init_weights(model, cfg.seed);
    const CompactFlowMap cm(fm);
    const BatchData bd = prepare_data(data, model.x0, Vec::Zero(2 * net.num_branches()),
                                      Mat::Zero(2 * net.num_branches(), model.w1.rows()), fm, cm,
                                      true, model.flows_x0, model.j_flow_x0);
    const int n_samples = data.size();

    AdamState adam;
    adam.init(model.w1, model.w2, model.bias);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        ChunkGrad g = parallel_reduce(
            n_samples, static_cast<int>(model.w1.rows()), static_cast<int>(model.w2.rows()),
            cfg.q, [&](int c0, int c1, ChunkGrad& out) {
                chunk_pass_direct(model.w1, model.w2, model.bias, bd, c0, c1, out);
            });
        const double inv = 1.0 / static_cast<double>(n_samples);
        g.w1 *= inv;
        g.w2 *= inv;
        g.bias *= inv;
        const double epoch_loss = g.loss * inv;
        if (!std::isfinite(epoch_loss))
            throw TrainError("training loss diverged at epoch " + std::to_string(epoch));
        adam.step(model.w1, model.w2, model.bias, g, cfg);
        if (curve) curve->push_back(epoch_loss);
    }
    return model;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json mat_to_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat mat_from_json(const nlohmann::json& rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
    return m;
}

nlohmann::json vec_to_json(const Vec& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Vec vec_from_json(const nlohmann::json& arr) {
    Vec v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<int>(i)] = arr[i].get<double>();
    return v;
}

nlohmann::json model_json_common(const std::string& kind, const std::string& case_id, int q,
                                 const OperatingPoint& x0, const Mat& w1, const Mat& w2,
                                 const Vec& bias, std::uint64_t hash) {
    nlohmann::json root;
    root["kind"] = kind;
    root["case_id"] = case_id;
    root["q"] = q;
    root["x0"] = {{"v", vec_to_json(x0.v)}, {"theta", vec_to_json(x0.theta)}};
    root["w1"] = mat_to_json(w1);
    root["w2"] = mat_to_json(w2);
    root["bias"] = vec_to_json(bias);
    root["fixed_hash"] = hash;
    return root;
}

void check_model_header(const nlohmann::json& root, const Network& net) {
    if (root.at("case_id").get<std::string>() != net.case_id)
        throw std::runtime_error("model was trained on case '" +
                                 root.at("case_id").get<std::string>() + "', not '" +
                                 net.case_id + "'");
    const auto hash = root.at("fixed_hash").get<std::uint64_t>();
    if (hash != fixed_matrices_hash(build_fixed_matrices(net)))
        throw std::runtime_error("model fixed-matrix hash does not match the case data");
}

}  // namespace

std::string model_to_json(const PwlModel& model, const std::string& case_id) {
    return model_json_common("gen", case_id, model.q, model.x0, model.w1, model.w2, model.bias,
                             model.fixed_hash)
        .dump();
}

std::string model_to_json(const DirectModel& model, const std::string& case_id) {
    return model_json_common("direct", case_id, model.q, model.x0, model.w1, model.w2,
                             model.bias, model.fixed_hash)
        .dump();
}

bool json_is_direct_model(const std::string& text) {
    return nlohmann::json::parse(text).at("kind").get<std::string>() == "direct";
}

PwlModel model_from_json(const std::string& text, const Network& net) {
    const nlohmann::json root = nlohmann::json::parse(text);
    if (root.at("kind").get<std::string>() != "gen")
        throw std::runtime_error("expected a generative model file");
    check_model_header(root, net);
    const FixedMatrices fm = build_fixed_matrices(net);
    PwlModel model = make_anchor_model(net, fm, root.at("q").get<int>());
    OperatingPoint x0 = make_operating_point(net, vec_from_json(root.at("x0").at("v")),
                                             vec_from_json(root.at("x0").at("theta")));
    model.x0 = std::move(x0);
    const CommonTerms ct = common_terms(net, model.x0);
    model.f_x0 << ct.rho, ct.pi;
    model.j_x0 = common_term_jacobian(net, model.x0).j;
    model.w1 = mat_from_json(root.at("w1"));
    model.w2 = mat_from_json(root.at("w2"));
    model.bias = vec_from_json(root.at("bias"));
    if (model.w1.rows() != net.num_buses() + net.num_branches() ||
        model.w1.cols() != model.q || model.w2.rows() != 2 * net.num_branches())
        throw std::runtime_error("model dimensions do not match the case");
    return model;
}

DirectModel direct_model_from_json(const std::string& text, const Network& net) {
    const nlohmann::json root = nlohmann::json::parse(text);
    if (root.at("kind").get<std::string>() != "direct")
        throw std::runtime_error("expected a direct model file");
    check_model_header(root, net);
    const FixedMatrices fm = build_fixed_matrices(net);
    DirectModel model = make_anchor_direct(net, fm, root.at("q").get<int>());
    model.w1 = mat_from_json(root.at("w1"));
    model.w2 = mat_from_json(root.at("w2"));
    model.bias = vec_from_json(root.at("bias"));
    if (model.w1.rows() != net.num_buses() + net.num_branches() ||
        model.w2.rows() != 4 * net.num_branches())
        throw std::runtime_error("model dimensions do not match the case");
    return model;
}

}  // namespace gridpwl
