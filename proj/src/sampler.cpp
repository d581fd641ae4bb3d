#include "gridpwl/sampler.hpp"

#include "gridpwl/rng.hpp"

#include <json.hpp>

#include <fstream>
#include <numeric>

namespace gridpwl {

SampleSet generate_samples(const Network& net, const FixedMatrices& fm, int count,
                           std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample count must be >= 1");
    const int n = net.num_buses();
    const int s = net.slack();

    SampleSet set;
    set.case_id = net.case_id;
    set.seed = seed;
    set.inputs.reserve(count);
    set.targets_common.reserve(count);
    set.targets_power.reserve(count);

    for (int idx = 0; idx < count; ++idx) {
        RngStream rng(seed, static_cast<std::uint64_t>(idx));
        Vec v(n), theta(n);
        for (int i = 0; i < n; ++i) v[i] = rng.uniform(kVoltageLow, kVoltageHigh);
        for (int i = 0; i < n; ++i)
            theta[i] = net.buses[i].theta_setpoint + rng.uniform(-kAngleHalfRange, kAngleHalfRange);
        v[s] = net.buses[s].v_setpoint;
        theta[s] = net.buses[s].theta_setpoint;

        OperatingPoint x = make_operating_point(net, std::move(v), std::move(theta));
        set.targets_common.push_back(common_terms(net, x));
        set.targets_power.push_back(branch_flows(x, net, fm));
        set.inputs.push_back(std::move(x));
    }
    return set;
}

std::pair<SampleSet, SampleSet> split_samples(const SampleSet& set, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("split fraction must lie in (0, 1)");
    const int count = set.size();
    std::vector<int> order(count);
    std::iota(order.begin(), order.end(), 0);
    RngStream rng(set.seed ^ 0x5f3759df);  // shuffle stream distinct from sample streams
    for (int i = count - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng.index_below(static_cast<std::size_t>(i) + 1));
        std::swap(order[i], order[j]);
    }
    const int n_train = static_cast<int>(fraction * count);

    auto take = [&set](const std::vector<int>& idx, int begin, int end) {
        SampleSet out;
        out.case_id = set.case_id;
        out.seed = set.seed;
        out.split_fraction = set.split_fraction;
        for (int i = begin; i < end; ++i) {
            out.inputs.push_back(set.inputs[idx[i]]);
            out.targets_common.push_back(set.targets_common[idx[i]]);
            out.targets_power.push_back(set.targets_power[idx[i]]);
        }
        return out;
    };
    return {take(order, 0, n_train), take(order, n_train, count)};
}

namespace {

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

}  // namespace

std::string dataset_to_json(const SampleSet& set) {
    nlohmann::json root;
    root["case_id"] = set.case_id;
    root["seed"] = set.seed;
    root["split_fraction"] = set.split_fraction;
    nlohmann::json inputs = nlohmann::json::array();
    nlohmann::json targets = nlohmann::json::array();
    for (int i = 0; i < set.size(); ++i) {
        inputs.push_back({{"v", vec_to_json(set.inputs[i].v)},
                          {"theta", vec_to_json(set.inputs[i].theta)}});
        targets.push_back({{"gamma", vec_to_json(set.targets_common[i].gamma)},
                           {"rho", vec_to_json(set.targets_common[i].rho)},
                           {"pi", vec_to_json(set.targets_common[i].pi)},
                           {"z_pf", vec_to_json(set.targets_power[i].z_pf)},
                           {"z_inj", vec_to_json(set.targets_power[i].z_inj)}});
    }
    root["inputs"] = std::move(inputs);
    root["targets"] = std::move(targets);
    return root.dump();
}

SampleSet dataset_from_json(const std::string& text, const Network& net) {
    const nlohmann::json root = nlohmann::json::parse(text);
    SampleSet set;
    set.case_id = root.at("case_id").get<std::string>();
    if (set.case_id != net.case_id)
        throw std::runtime_error("dataset was generated for case '" + set.case_id +
                                 "', not '" + net.case_id + "'");
    set.seed = root.at("seed").get<std::uint64_t>();
    set.split_fraction = root.value("split_fraction", 0.9);
    const auto& inputs = root.at("inputs");
    const auto& targets = root.at("targets");
    if (inputs.size() != targets.size()) throw std::runtime_error("dataset arrays differ in length");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        OperatingPoint x = make_operating_point(net, vec_from_json(inputs[i].at("v")),
                                                vec_from_json(inputs[i].at("theta")));
        set.inputs.push_back(std::move(x));
        set.targets_common.push_back({vec_from_json(targets[i].at("gamma")),
                                      vec_from_json(targets[i].at("rho")),
                                      vec_from_json(targets[i].at("pi"))});
        set.targets_power.push_back({vec_from_json(targets[i].at("z_pf")),
                                     vec_from_json(targets[i].at("z_inj"))});
    }
    return set;
}

void save_dataset(const std::string& path, const SampleSet& set) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset: " + path);
    out << dataset_to_json(set);
}

SampleSet load_dataset(const std::string& path, const Network& net) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read dataset: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return dataset_from_json(text, net);
}

}  // namespace gridpwl
