#include "bsnn/elaborator.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace bsnn::elab {

long long cascade_elements(long long inputs, int fan_in) {
    if (inputs <= 1) return 0;
    return (inputs - 1 + fan_in - 2) / (fan_in - 1);
}

ResourceReport estimate_resources(const netgen::NetworkSpec& spec, const ResourceModel& model,
                                  const ElaborationOptions& options) {
    const SimTime tau = options.timing.tau_p();
    const std::size_t n = spec.neurons.size();
    ResourceReport r;
    r.neurons = static_cast<long long>(n) * model.le_per_neuron;

    // Each presynaptic chain is as long as its longest outgoing delay.
    std::vector<SimTime> longest(n, 0);
    std::vector<long long> exc_fan_in(n, 0), inh_fan_in(n, 0);
    for (netgen::NeuronId id : spec.input_map) {
        ++exc_fan_in[id];
    }
    for (const auto& s : spec.synapses) {
        longest[s.pre] = std::max(longest[s.pre], s.delay);
        const long long branch_pairs = (s.weight - 1) * options.branch_spacing / tau;
        r.synapses += branch_pairs * model.le_per_delay_pair +
                      cascade_elements(s.weight, model.gate_fan_in) + model.le_per_synapse_route;
        ++(s.sign == neuro::Sign::Inhibitory ? inh_fan_in : exc_fan_in)[s.post];
    }
    for (std::size_t i = 0; i < n; ++i) {
        r.delay_lines += longest[i] / tau * model.le_per_delay_pair;
        r.dendrites += cascade_elements(exc_fan_in[i], model.gate_fan_in) +
                       cascade_elements(inh_fan_in[i], model.gate_fan_in);
    }
    if (model.include_overhead) {
        r.overhead = kOverheadLogicElements;
        r.memory_bits = kOverheadMemoryBits;
    }
    return r;
}

ResourceReport infrastructure_resources() {
    ResourceReport r;
    r.overhead = kOverheadLogicElements;
    r.memory_bits = kOverheadMemoryBits;
    return r;
}

void write_resource_csv(const ResourceReport& report, std::ostream& out) {
    out << "category,logic_elements\n"
        << "neurons," << report.neurons << '\n'
        << "delay_lines," << report.delay_lines << '\n'
        << "synapses," << report.synapses << '\n'
        << "dendrites," << report.dendrites << '\n'
        << "overhead," << report.overhead << '\n'
        << "total," << report.logic_elements() << '\n'
        << "memory_bits," << report.memory_bits << '\n';
}

long long scaling_estimate(long long neuron_count) {
    if (neuron_count < 1) {
        throw std::invalid_argument("scaling estimate needs at least one neuron");
    }
    return std::llround(kScalingCoefficient *
                        std::pow(static_cast<double>(neuron_count), kScalingExponent));
}

} // namespace bsnn::elab
