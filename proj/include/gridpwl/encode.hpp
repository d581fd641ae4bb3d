#pragma once

#include "gridpwl/milp.hpp"
#include "gridpwl/pwlnet.hpp"

namespace gridpwl {

class EncodeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Operating region the compiled model is valid over: per-bus voltage bounds
// (slack pinned to its setpoint) and per-branch angle-difference bounds
// around the anchor.
struct InputBox {
    Vec v_lo, v_hi;    // length n
    Vec td_lo, td_hi;  // length l
};

InputBox default_box(const Network& net, const OperatingPoint& anchor);

// Valid pre-activation bounds over the box. The pre-activation is affine in
// the input, so the exact extrema sit at box corners and have a closed form.
struct ReluBounds {
    Vec lower;  // per hidden unit
    Vec upper;
};

ReluBounds relu_bounds(const PwlModel& model, const InputBox& box);

// Indices of the variables a compiled model contributes to a MilpProblem.
struct PwlEncoding {
    std::vector<int> dv;      // voltage deviation from the anchor, n
    std::vector<int> dtd;     // angle-difference deviation, l
    std::vector<int> z1_pre;  // q
    std::vector<int> z1;      // q
    std::vector<int> beta;    // q binaries
    std::vector<int> z2;      // 2l
    std::vector<int> z3;      // 4l
    std::vector<int> z4;      // 2n
};

// Appends the network layers and the big-M ReLU reformulation:
//   0 <= z1_k <= upper_k * beta_k
//   z1_pre_k <= z1_k <= z1_pre_k - lower_k (1 - beta_k)
// Bounds are validated against the closed-form extrema; unsound bounds raise
// EncodeError.
PwlEncoding encode_relu(MilpProblem& prob, const PwlModel& model, const InputBox& box,
                        const ReluBounds& bounds, const std::string& prefix = "");

// Per directed flow bounds used by the switching products.
struct FlowBounds {
    Vec lower;  // 4l
    Vec upper;
};

// Default: +-rating for both active and reactive flow of each direction.
FlowBounds flow_bounds(const Network& net);

// Outer bounds on each z3 row over the box, by extremizing the row through
// the LP relaxation of the encoded model (relaxed binaries widen, never
// shrink, so the result is sound). These are the valid product bounds for
// the switching rows whenever the model range exceeds the ratings.
FlowBounds model_flow_range(const PwlModel& model, const InputBox& box,
                            const ReluBounds& relu);

// Optional tightening of limit boxes: intersects `base` with the model range,
// so the result is contained in `base`.
FlowBounds tighten_flow_bounds(const PwlModel& model, const InputBox& box,
                               const ReluBounds& relu, const FlowBounds& base);

// Switched-flow products via exact McCormick rows. flows[i] pairs with
// statuses[i] (a binary epsilon variable, shared across the four directed
// flows of one branch). Returns the masked-flow variable per input flow.
std::vector<int> encode_switching(MilpProblem& prob, const std::vector<int>& flows,
                                  const std::vector<int>& statuses, const FlowBounds& bounds,
                                  const std::string& prefix = "");

}  // namespace gridpwl
