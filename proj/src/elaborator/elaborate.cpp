#include "bsnn/elaborator.hpp"

#include <algorithm>
#include <map>

namespace bsnn::elab {

std::string probe_label(netgen::NeuronId id) { return "n" + std::to_string(id); }

ElaboratedNetwork elaborate(const netgen::NetworkSpec& spec, const ElaborationOptions& options) {
    spec.validate();
    ElaboratedNetwork out;
    out.netlist = std::make_shared<Netlist>();
    Netlist& nl = *out.netlist;
    const std::size_t n = spec.neurons.size();

    std::vector<std::uint32_t> group(n);
    for (std::size_t i = 0; i < n; ++i) {
        group[i] = nl.add_group(probe_label(static_cast<netgen::NeuronId>(i)));
        out.neuron_outputs.push_back(nl.add_net(probe_label(static_cast<netgen::NeuronId>(i)) +
                                                "/spike"));
    }

    std::vector<std::vector<NetId>> exc_lines(n), inh_lines(n);
    for (std::size_t c = 0; c < spec.input_map.size(); ++c) {
        const NetId port = nl.add_port("in" + std::to_string(c));
        out.input_ports.push_back(port);
        exc_lines[spec.input_map[c]].push_back(port);
    }

    // One tapped line per presynaptic neuron, tapped at each distinct outgoing delay.
    std::vector<std::vector<SimTime>> delays(n);
    for (const auto& s : spec.synapses) {
        delays[s.pre].push_back(s.delay);
    }
    std::vector<std::map<SimTime, NetId>> taps(n);
    for (std::size_t pre = 0; pre < n; ++pre) {
        auto& d = delays[pre];
        if (d.empty()) continue;
        std::sort(d.begin(), d.end());
        d.erase(std::unique(d.begin(), d.end()), d.end());
        nl.set_current_group(group[pre]);
        const auto nets = neuro::build_tapped_delay_line(
            nl, out.neuron_outputs[pre], d,
            probe_label(static_cast<netgen::NeuronId>(pre)) + "/axon", options.timing);
        for (std::size_t k = 0; k < d.size(); ++k) {
            taps[pre][d[k]] = nets[k];
        }
    }

    for (std::size_t k = 0; k < spec.synapses.size(); ++k) {
        const auto& s = spec.synapses[k];
        nl.set_current_group(group[s.pre]);
        const NetId line = neuro::build_weighted_synapse(
            nl, taps[s.pre].at(s.delay),
            neuro::SynapseWeightSpec{s.weight, options.branch_spacing, s.sign},
            "syn" + std::to_string(k), options.timing);
        (s.sign == neuro::Sign::Inhibitory ? inh_lines : exc_lines)[s.post].push_back(line);
    }

    for (std::size_t i = 0; i < n; ++i) {
        const auto id = static_cast<netgen::NeuronId>(i);
        nl.set_current_group(group[i]);
        const neuro::NeuronSpec ns{spec.capacity(id), options.output_pulse,
                                   options.refractory_segments};
        out.neurons.push_back(neuro::build_neuron(nl, exc_lines[i], inh_lines[i], ns,
                                                  probe_label(id), options.timing,
                                                  out.neuron_outputs[i]));
        nl.add_probe(out.neuron_outputs[i], probe_label(id));
    }
    nl.set_current_group(0);
    nl.validate();
    return out;
}

} // namespace bsnn::elab
