#include "bsnn/neuroblocks.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace bsnn::neuro {

using desim::GateInstance;
using desim::GateKind;

namespace {

std::string join(std::string_view prefix, std::string_view local) {
    std::string s(prefix);
    s.push_back('/');
    s.append(local);
    return s;
}

} // namespace

void PulseGeneratorSpec::validate() const {
    if (line_a_pairs < 0 || line_b_pairs <= line_a_pairs) {
        throw SpecError("pulse generator needs 0 <= line_a_pairs < line_b_pairs (got " +
                        std::to_string(line_a_pairs) + ", " + std::to_string(line_b_pairs) + ")");
    }
}

NetId build_delay_line(Netlist& nl, NetId in, SimTime delay, std::string_view name,
                       const Timing& timing) {
    const SimTime tau = timing.tau_p();
    if (delay <= 0 || delay % tau != 0) {
        throw SpecError("delay line length " + std::to_string(delay) +
                        " ps is not a positive multiple of tau_p=" + std::to_string(tau));
    }
    const SimTime pairs = delay / tau;
    NetId cur = in;
    for (SimTime i = 0; i < 2 * pairs; ++i) {
        cur = nl.add_gate(GateKind::Inv, {cur}, join(name, "inv" + std::to_string(i)),
                          timing.gate_delay);
    }
    return cur;
}

std::vector<NetId> build_tapped_delay_line(Netlist& nl, NetId in, std::span<const SimTime> taps,
                                           std::string_view name, const Timing& timing) {
    const SimTime tau = timing.tau_p();
    SimTime longest = 0;
    for (SimTime t : taps) {
        if (t < 0 || t % tau != 0) {
            throw SpecError("tap at " + std::to_string(t) + " ps is not a multiple of tau_p");
        }
        longest = std::max(longest, t);
    }
    std::map<SimTime, NetId> at_pair{{0, in}};
    NetId cur = in;
    for (SimTime p = 1; p <= longest / tau; ++p) {
        cur = nl.add_gate(GateKind::Inv, {cur}, join(name, "inv" + std::to_string(2 * p - 2)),
                          timing.gate_delay);
        cur = nl.add_gate(GateKind::Inv, {cur}, join(name, "inv" + std::to_string(2 * p - 1)),
                          timing.gate_delay);
        at_pair[p] = cur;
    }
    std::vector<NetId> out;
    out.reserve(taps.size());
    for (SimTime t : taps) {
        out.push_back(at_pair.at(t / tau));
    }
    return out;
}

NetId build_dendrite(Netlist& nl, std::span<const NetId> lines, std::string_view name,
                     Combiner combiner, const Timing& timing) {
    if (lines.empty()) {
        return nl.tie_low();
    }
    const GateKind kind = combiner == Combiner::Xor ? GateKind::Xor2 : GateKind::Or2;
    std::vector<NetId> level(lines.begin(), lines.end());
    int counter = 0;
    while (level.size() > 1) {
        std::vector<NetId> next;
        for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
            next.push_back(nl.add_gate(kind, {level[i], level[i + 1]},
                                       join(name, (combiner == Combiner::Xor ? "xor" : "or") +
                                                      std::to_string(counter++)),
                                       timing.gate_delay));
        }
        if (level.size() % 2 == 1) {
            next.push_back(level.back());
        }
        level = std::move(next);
    }
    return level.front();
}

NetId build_weighted_synapse(Netlist& nl, NetId in, const SynapseWeightSpec& spec,
                             std::string_view name, const Timing& timing) {
    if (spec.weight < 1) {
        throw SpecError("synaptic weight must be >= 1");
    }
    if (spec.weight == 1) {
        return in;
    }
    std::vector<SimTime> offsets;
    for (int k = 0; k < spec.weight; ++k) {
        offsets.push_back(k * spec.branch_spacing);
    }
    const auto branches = build_tapped_delay_line(nl, in, offsets, join(name, "branch"), timing);
    return build_dendrite(nl, branches, join(name, "w"), Combiner::Xor, timing);
}

PulseGeneratorPorts build_pulse_generator(Netlist& nl, NetId trigger,
                                          const PulseGeneratorSpec& spec,
                                          std::string_view name, const Timing& timing,
                                          NetId output) {
    spec.validate();
    PulseGeneratorPorts ports;
    ports.trigger = trigger;
    ports.q = nl.add_net(join(name, "q"));
    const NetId qn = nl.add_net(join(name, "qn"));
    GateInstance ff;
    ff.kind = GateKind::Dff;
    ff.inputs = {qn, trigger};
    ff.output = ports.q;
    ff.output_n = qn;
    ff.delay = ff.reject_window = timing.gate_delay;
    nl.add_gate(ff);

    const SimTime tau = timing.tau_p();
    const NetId line_a = spec.line_a_pairs == 0
                             ? ports.q
                             : build_delay_line(nl, ports.q, spec.line_a_pairs * tau,
                                                join(name, "line_a"), timing);
    const NetId line_b =
        build_delay_line(nl, ports.q, spec.line_b_pairs * tau, join(name, "line_b"), timing);
    if (output == desim::kNoNet) {
        ports.output =
            nl.add_gate(GateKind::Xor2, {line_a, line_b}, join(name, "pulse"), timing.gate_delay);
    } else {
        GateInstance x;
        x.kind = GateKind::Xor2;
        x.inputs = {line_a, line_b};
        x.output = output;
        x.delay = x.reject_window = timing.gate_delay;
        nl.add_gate(x);
        ports.output = output;
    }
    return ports;
}

} // namespace bsnn::neuro
