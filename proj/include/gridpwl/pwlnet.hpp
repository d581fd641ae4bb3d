#pragma once

#include "gridpwl/sampler.hpp"

namespace gridpwl {

class TrainError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Four-layer generative model. The trainable part (w1, w2, bias) corrects the
// first-order common-term approximation anchored at x0; the remaining layers
// are the fixed flow/injection maps:
//   z1 = relu(w1' dx + bias)
//   z2 = f(x0) + J(x0) dx + w2 z1
//   z3 = w_gamma (2V - 1) + [w_rho w_pi] z2
//   z4 = w_psi z3
struct PwlModel {
    int q = 0;
    Mat w1;    // (n+l) x q
    Mat w2;    // 2l x q
    Vec bias;  // q
    OperatingPoint x0;
    Vec f_x0;  // [rho; pi] at the anchor, 2l
    Mat j_x0;  // common-term Jacobian at the anchor, 2l x (n+l)
    FixedMatrices fixed;
    std::uint64_t fixed_hash = 0;

    int input_dim() const { return static_cast<int>(w1.rows()); }
};

// Two-layer baseline that predicts the 4l directed flows directly:
//   z_pf ~ flows(x0) + J_flow(x0) dx + w2 relu(w1' dx + bias)
// Injections are derived afterwards as w_psi z_pf for error reporting only.
struct DirectModel {
    int q = 0;
    Mat w1;    // (n+l) x q
    Mat w2;    // 4l x q
    Vec bias;  // q
    OperatingPoint x0;
    Vec flows_x0;   // 4l
    Mat j_flow_x0;  // 4l x (n+l)
    FixedMatrices fixed;
    std::uint64_t fixed_hash = 0;
};

struct TrainConfig {
    int q = 25;
    int epochs = 20000;
    double learning_rate = 2.5e-3;
    double lambda = 1.0;  // balance between common-term and power-variable errors
    int batch_size = 0;   // 0 = full batch
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
};

struct ForwardTrace {
    Vec z1_pre;  // q
    Vec z1;      // q
    Vec z2;      // 2l
    Vec z3;      // 4l
    Vec z4;      // 2n
};

// Anchor at the flat-voltage / case-angle point with zero weights; forward()
// of this model is exactly the first-order approximation.
PwlModel make_anchor_model(const Network& net, const FixedMatrices& fm, int q);
DirectModel make_anchor_direct(const Network& net, const FixedMatrices& fm, int q);

// Uniform +-1/sqrt(fan-in) weight draw, bias zero; one documented draw order.
void init_weights(PwlModel& model, std::uint64_t seed);
void init_weights(DirectModel& model, std::uint64_t seed);

ForwardTrace forward(const PwlModel& model, const OperatingPoint& x);
Vec forward_direct(const DirectModel& model, const OperatingPoint& x);

// Mean per-sample loss over the given indices (all samples when empty):
// |f(x) - z2|^2 + lambda |[z_pf; z_inj] - [z3; z4]|^2.
double loss(const PwlModel& model, const SampleSet& data, const std::vector<int>& idx,
            double lambda);
double loss_direct(const DirectModel& model, const SampleSet& data,
                   const std::vector<int>& idx);

struct ParamGradients {
    Mat w1;
    Mat w2;
    Vec bias;
};

// Analytic gradients of the mean loss; the ReLU subgradient at 0 is 0.
ParamGradients gradients(const PwlModel& model, const SampleSet& data,
                         const std::vector<int>& idx, double lambda);
ParamGradients gradients_direct(const DirectModel& model, const SampleSet& data,
                                const std::vector<int>& idx);

// Adam training with fixed-order batch reduction; bit-reproducible for a
// given (seed, config) regardless of thread count. Per-epoch training loss
// appended to *curve when provided. Throws TrainError on divergence.
PwlModel train(const Network& net, const FixedMatrices& fm, const SampleSet& data,
               const TrainConfig& cfg, std::vector<double>* curve = nullptr);
DirectModel train_direct(const Network& net, const FixedMatrices& fm, const SampleSet& data,
                         const TrainConfig& cfg, std::vector<double>* curve = nullptr);

// Model serialization: {kind, case_id, q, x0, w1, w2, bias, fixed_hash}.
std::string model_to_json(const PwlModel& model, const std::string& case_id);
std::string model_to_json(const DirectModel& model, const std::string& case_id);
bool json_is_direct_model(const std::string& text);
PwlModel model_from_json(const std::string& text, const Network& net);
DirectModel direct_model_from_json(const std::string& text, const Network& net);

}  // namespace gridpwl
