#pragma once

#include "gridpwl/acflow.hpp"

#include <utility>

namespace gridpwl {

// Training data: operating points drawn from the sampling box together with
// their exact common-term and power-variable targets.
struct SampleSet {
    std::string case_id;
    std::uint64_t seed = 0;
    double split_fraction = 0.9;
    std::vector<OperatingPoint> inputs;
    std::vector<CommonTerms> targets_common;
    std::vector<PowerVariables> targets_power;

    int size() const { return static_cast<int>(inputs.size()); }
};

// Sampling ranges: voltage magnitudes U[0.94, 1.06]; nodal angles uniform in
// +-pi/6 around the case angles; the slack bus keeps its setpoints. Angle
// differences are derived from the nodal draw, so every input corresponds to
// a realizable angle vector. Draw order per sample: V by bus index, then
// theta by bus index, one RngStream per sample index.
SampleSet generate_samples(const Network& net, const FixedMatrices& fm, int count,
                           std::uint64_t seed);

// Seeded-shuffle partition: train takes floor(fraction * size) samples.
std::pair<SampleSet, SampleSet> split_samples(const SampleSet& set, double fraction);

// JSON dataset round-trip: {case_id, seed, inputs[], targets[]}.
std::string dataset_to_json(const SampleSet& set);
SampleSet dataset_from_json(const std::string& text, const Network& net);
void save_dataset(const std::string& path, const SampleSet& set);
SampleSet load_dataset(const std::string& path, const Network& net);

inline constexpr double kVoltageLow = 0.94;
inline constexpr double kVoltageHigh = 1.06;
inline constexpr double kAngleHalfRange = 0.5235987755982988;  // pi/6

}  // namespace gridpwl
