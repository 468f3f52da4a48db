#include "bsnn/netgen.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace bsnn::netgen {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "bsnn-connectome";
constexpr int kVersion = 1;

const char* sign_name(neuro::Sign s) { return s == neuro::Sign::Inhibitory ? "inh" : "exc"; }

neuro::Sign sign_from(const std::string& s) {
    if (s == "exc") return neuro::Sign::Excitatory;
    if (s == "inh") return neuro::Sign::Inhibitory;
    throw SpecValidationError("unknown synapse sign: " + s);
}

} // namespace

json params_to_json(const ConnectivityParams& p) {
    json gamma = json::object();
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            const std::string key = std::string(to_string(static_cast<NeuronKind>(a))) + "-" +
                                    std::string(to_string(static_cast<NeuronKind>(b)));
            gamma[key] = p.gamma[a][b];
        }
    }
    return json{{"gamma", gamma},
                {"lambda", p.lambda},
                {"delay_per_unit_ps", p.delay_per_unit},
                {"delay_sigma_ps", p.delay_sigma},
                {"delay_quantum_ps", p.delay_quantum},
                {"weights", p.weights},
                {"inhibitory_fraction", p.inhibitory_fraction},
                {"capacity", {{"E", p.capacity_excitatory},
                              {"I", p.capacity_inhibitory},
                              {"R", p.capacity_receptive}}}};
}

ConnectivityParams params_from_json(const json& j) {
    ConnectivityParams p;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            const std::string key = std::string(to_string(static_cast<NeuronKind>(a))) + "-" +
                                    std::string(to_string(static_cast<NeuronKind>(b)));
            p.gamma[a][b] = j.at("gamma").at(key).get<double>();
        }
    }
    p.lambda = j.at("lambda").get<double>();
    p.delay_per_unit = j.at("delay_per_unit_ps").get<SimTime>();
    p.delay_sigma = j.at("delay_sigma_ps").get<SimTime>();
    p.delay_quantum = j.at("delay_quantum_ps").get<SimTime>();
    p.weights = j.at("weights").get<std::vector<int>>();
    p.inhibitory_fraction = j.at("inhibitory_fraction").get<double>();
    p.capacity_excitatory = j.at("capacity").at("E").get<int>();
    p.capacity_inhibitory = j.at("capacity").at("I").get<int>();
    p.capacity_receptive = j.at("capacity").at("R").get<int>();
    return p;
}

std::string to_json_text(const NetworkSpec& spec) {
    json neurons = json::array();
    for (const auto& n : spec.neurons) {
        neurons.push_back(json::array(
            {n.id, n.position.x, n.position.y, n.position.z, std::string(to_string(n.kind))}));
    }
    json synapses = json::array();
    for (const auto& s : spec.synapses) {
        synapses.push_back(json::array({s.pre, s.post, s.weight, sign_name(s.sign), s.delay}));
    }
    json j{{"format", kFormat},
           {"version", kVersion},
           {"seed", spec.seed},
           {"dims", {spec.dims.x, spec.dims.y, spec.dims.z}},
           {"params", params_to_json(spec.params)},
           {"neuron_fields", {"id", "x", "y", "z", "kind"}},
           {"neurons", neurons},
           {"synapse_fields", {"pre", "post", "weight", "sign", "delay_ps"}},
           {"synapses", synapses},
           {"input_map", spec.input_map}};
    return j.dump(1) + "\n";
}

NetworkSpec from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SpecValidationError(std::string("connectome is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kFormat) {
            throw SpecValidationError("not a connectome file");
        }
        if (j.at("version").get<int>() != kVersion) {
            throw SpecValidationError("unsupported connectome version");
        }
        NetworkSpec spec;
        spec.seed = j.at("seed").get<std::uint64_t>();
        const auto dims = j.at("dims").get<std::vector<int>>();
        if (dims.size() != 3) throw SpecValidationError("dims must have three entries");
        spec.dims = GridDims{dims[0], dims[1], dims[2]};
        spec.params = params_from_json(j.at("params"));
        for (const auto& n : j.at("neurons")) {
            spec.neurons.push_back(NeuronInfo{
                n.at(0).get<NeuronId>(),
                GridPosition{n.at(1).get<int>(), n.at(2).get<int>(), n.at(3).get<int>()},
                neuron_kind_from_string(n.at(4).get<std::string>())});
        }
        for (const auto& s : j.at("synapses")) {
            spec.synapses.push_back(Synapse{s.at(0).get<NeuronId>(), s.at(1).get<NeuronId>(),
                                            s.at(2).get<int>(),
                                            sign_from(s.at(3).get<std::string>()),
                                            s.at(4).get<SimTime>()});
        }
        spec.input_map = j.at("input_map").get<std::vector<NeuronId>>();
        spec.validate();
        return spec;
    } catch (const json::exception& e) {
        throw SpecValidationError(std::string("malformed connectome: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw SpecValidationError(std::string("malformed connectome: ") + e.what());
    }
}

void save_spec(const NetworkSpec& spec, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json_text(spec);
}

NetworkSpec load_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

} // namespace bsnn::netgen
