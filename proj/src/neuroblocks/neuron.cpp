#include "bsnn/neuroblocks.hpp"

#include <algorithm>
#include <bit>
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

// Left-leaning AND chain; returns the literal itself for a single term.
NetId and_chain(Netlist& nl, const std::vector<NetId>& terms, std::string_view name,
                const Timing& timing) {
    NetId acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) {
        acc = nl.add_gate(GateKind::And2, {acc, terms[i]}, join(name, std::to_string(i)),
                          timing.gate_delay);
    }
    return acc;
}

NetId and_tree(Netlist& nl, std::vector<NetId> terms, std::string_view name,
               const Timing& timing) {
    int counter = 0;
    while (terms.size() > 1) {
        std::vector<NetId> next;
        for (std::size_t i = 0; i + 1 < terms.size(); i += 2) {
            next.push_back(nl.add_gate(GateKind::And2, {terms[i], terms[i + 1]},
                                       join(name, std::to_string(counter++)), timing.gate_delay));
        }
        if (terms.size() % 2 == 1) {
            next.push_back(terms.back());
        }
        terms = std::move(next);
    }
    return terms.front();
}

} // namespace

void AcmSpec::validate() const {
    if (capacity < 1) {
        throw SpecError("counter capacity must be >= 1");
    }
}

int AcmSpec::state_bits() const {
    validate();
    return std::bit_width(static_cast<unsigned>(capacity));
}

AcmPorts build_acm(Netlist& nl, NetId exc, NetId inh, NetId hold, const AcmSpec& spec,
                   std::string_view name, const Timing& timing) {
    spec.validate();
    const SimTime dly = timing.gate_delay;
    AcmPorts p;
    p.exc = exc;
    p.inh = inh;
    p.hold = hold;

    // Mode latch: set by excitatory pulses, reset by inhibitory ones.
    p.mode = nl.add_net(join(name, "mode"));
    const NetId mode_n = nl.add_net(join(name, "mode_n"));
    GateInstance sr;
    sr.kind = GateKind::SrLatch;
    sr.inputs = {exc, inh};
    sr.output = p.mode;
    sr.output_n = mode_n;
    sr.delay = sr.reject_window = dly;
    nl.add_gate(sr);

    const NetId merged = nl.add_gate(GateKind::Xor2, {exc, inh}, join(name, "merge"), dly);
    const NetId guarded = build_delay_line(nl, merged, 2 * timing.tau_p(), join(name, "guard"),
                                           timing);

    const int bits = spec.state_bits();
    std::vector<NetId> q(bits), qn(bits);
    for (int i = 0; i < bits; ++i) {
        q[i] = nl.add_net(join(name, "q" + std::to_string(i)));
        qn[i] = nl.add_net(join(name, "qn" + std::to_string(i)));
    }

    // Zero detector gates the count request unless the mode is increment.
    NetId nonzero = q[0];
    for (int i = 1; i < bits; ++i) {
        nonzero = nl.add_gate(GateKind::Or2, {nonzero, q[i]}, join(name, "nz" + std::to_string(i)),
                              dly);
    }
    const NetId enable = nl.add_gate(GateKind::Or2, {p.mode, nonzero}, join(name, "enable"), dly);
    p.trigger = nl.add_gate(GateKind::And2, {guarded, enable}, join(name, "request"), dly);
    p.hold_n = nl.add_gate(GateKind::Inv, {hold}, join(name, "hold_n"), dly);
    // Narrow the clock to an edge pulse so the state it produces cannot reach the
    // threshold gate while it is still high.
    const NetId clk_wide =
        nl.add_gate(GateKind::And2, {p.trigger, p.hold_n}, join(name, "clk_wide"), dly);
    NetId clk_late = clk_wide;
    for (int i = 0; i < 3; ++i) {
        clk_late = nl.add_gate(GateKind::Inv, {clk_late}, join(name, "clk_edge" + std::to_string(i)),
                               dly);
    }
    p.clock = nl.add_gate(GateKind::And2, {clk_wide, clk_late}, join(name, "clk"), dly);

    // Count == capacity - 1.
    std::vector<NetId> literals;
    const unsigned top = static_cast<unsigned>(spec.capacity - 1);
    for (int i = 0; i < bits; ++i) {
        literals.push_back(((top >> i) & 1U) ? q[i] : qn[i]);
    }
    const NetId at_top = and_tree(nl, literals, join(name, "eq"), timing);
    const NetId not_top = nl.add_gate(GateKind::Inv, {at_top}, join(name, "neq"), dly);

    NetId carry = q[0];
    NetId borrow = qn[0];
    for (int i = 0; i < bits; ++i) {
        const std::string bi = std::to_string(i);
        NetId inc = qn[0];
        NetId dec = qn[0];
        if (i > 0) {
            inc = nl.add_gate(GateKind::Xor2, {q[i], carry}, join(name, "inc" + bi), dly);
            dec = nl.add_gate(GateKind::Xor2, {q[i], borrow}, join(name, "dec" + bi), dly);
            if (i + 1 < bits) {
                carry = and_chain(nl, {carry, q[i]}, join(name, "carry" + bi), timing);
                borrow = and_chain(nl, {borrow, qn[i]}, join(name, "borrow" + bi), timing);
            }
        }
        const NetId inc_wrapped =
            nl.add_gate(GateKind::And2, {inc, not_top}, join(name, "incw" + bi), dly);
        const NetId up = nl.add_gate(GateKind::And2, {p.mode, inc_wrapped}, join(name, "up" + bi), dly);
        const NetId down = nl.add_gate(GateKind::And2, {mode_n, dec}, join(name, "down" + bi), dly);
        const NetId d = nl.add_gate(GateKind::Or2, {up, down}, join(name, "d" + bi), dly);
        GateInstance ff;
        ff.kind = GateKind::Dff;
        ff.inputs = {d, p.clock};
        ff.output = q[i];
        ff.output_n = qn[i];
        ff.delay = ff.reject_window = dly;
        nl.add_gate(ff);
    }
    p.count_bits = q;

    const NetId fire_enable =
        nl.add_gate(GateKind::And2, {p.mode, at_top}, join(name, "fire_en"), dly);
    const NetId fire_settled =
        build_delay_line(nl, fire_enable, 2 * timing.tau_p(), join(name, "fire_dly"), timing);
    p.threshold = nl.add_gate(GateKind::And2, {p.clock, fire_settled}, join(name, "threshold"), dly);
    return p;
}

NeuronPorts build_neuron(Netlist& nl, std::span<const NetId> exc_lines,
                         std::span<const NetId> inh_lines, const NeuronSpec& spec,
                         std::string_view name, const Timing& timing, NetId output) {
    spec.output_pulse.validate();
    if (spec.refractory_segments < 0) {
        throw SpecError("refractory segment count must be >= 0");
    }
    NeuronPorts p;
    p.exc_dendrite = build_dendrite(nl, exc_lines, join(name, "dend_e"), Combiner::Xor, timing);
    p.inh_dendrite = build_dendrite(nl, inh_lines, join(name, "dend_i"), Combiner::Xor, timing);
    p.block = nl.add_net(join(name, "block"));
    p.acm = build_acm(nl, p.exc_dendrite, p.inh_dendrite, p.block, AcmSpec{spec.capacity},
                      join(name, "acm"), timing);
    const auto pg = build_pulse_generator(nl, p.acm.threshold, spec.output_pulse,
                                          join(name, "pg_o"), timing, output);
    p.output = pg.output;

    // Input blocking while firing: the spike OR'ed with copies of itself delayed by
    // whole pulse widths, so a request that starts inside the window is masked to its end.
    const SimTime width = spec.output_pulse.width(timing);
    std::vector<SimTime> taps;
    for (int k = 1; k <= 1 + spec.refractory_segments; ++k) {
        taps.push_back(k * width);
    }
    auto delayed = build_tapped_delay_line(nl, p.output, taps, join(name, "hold_line"), timing);
    NetId acc = p.output;
    for (std::size_t k = 0; k < delayed.size(); ++k) {
        if (k + 1 == delayed.size()) {
            GateInstance g;
            g.kind = GateKind::Or2;
            g.inputs = {acc, delayed[k]};
            g.output = p.block;
            g.delay = g.reject_window = timing.gate_delay;
            nl.add_gate(g);
        } else {
            acc = nl.add_gate(GateKind::Or2, {acc, delayed[k]},
                              join(name, "hold_or" + std::to_string(k)), timing.gate_delay);
        }
    }
    return p;
}

Fragment<NeuronFixturePorts> make_neuron_fixture(const NeuronSpec& spec,
                                                 std::span<const int> exc_weights,
                                                 std::span<const int> inh_weights,
                                                 const Timing& timing) {
    Fragment<NeuronFixturePorts> f;
    f.netlist = std::make_shared<Netlist>();
    Netlist& nl = *f.netlist;
    std::vector<NetId> exc_lines, inh_lines;
    for (std::size_t i = 0; i < exc_weights.size(); ++i) {
        const NetId port = nl.add_port("exc" + std::to_string(i));
        f.ports.exc_inputs.push_back(port);
        exc_lines.push_back(build_weighted_synapse(
            nl, port, SynapseWeightSpec{exc_weights[i], 5 * timing.tau_p(), Sign::Excitatory},
            "syn_e" + std::to_string(i), timing));
    }
    for (std::size_t i = 0; i < inh_weights.size(); ++i) {
        const NetId port = nl.add_port("inh" + std::to_string(i));
        f.ports.inh_inputs.push_back(port);
        inh_lines.push_back(build_weighted_synapse(
            nl, port, SynapseWeightSpec{inh_weights[i], 5 * timing.tau_p(), Sign::Inhibitory},
            "syn_i" + std::to_string(i), timing));
    }
    f.ports.neuron = build_neuron(nl, exc_lines, inh_lines, spec, "neuron", timing);
    nl.add_probe(f.ports.neuron.output, "spike");
    return f;
}

OracleParams calibrate_neuron(const NeuronSpec& spec, const Timing& timing,
                              std::span<const int> exc_weights) {
    static const int single[] = {1};
    if (exc_weights.empty()) {
        exc_weights = single;
    }
    auto fx = make_neuron_fixture(spec, exc_weights, {}, timing);
    desim::SimOptions opts;
    opts.extra_probes = {fx.ports.neuron.acm.trigger, fx.ports.neuron.acm.hold_n};
    desim::Simulator sim(fx.netlist, opts);
    const SimTime gap = 20 * desim::kClockStep;
    const SimTime width = 4 * timing.tau_p();
    const int weight = exc_weights[0];
    // Time of the unit increment that reaches the threshold.
    SimTime firing_increment = 0;
    int count = 0;
    SimTime last = 0;
    while (count < spec.capacity) {
        last = desim::kClockStep + (count / weight) * gap;
        sim.schedule_pulse(fx.ports.exc_inputs[0], last, width);
        for (int k = 0; k < weight && count < spec.capacity; ++k) {
            ++count;
            firing_increment = last + k * 5 * timing.tau_p();
        }
    }
    sim.run_until(last + gap);
    const auto& tr = sim.trace();
    const auto spikes = tr.rising_edges("spike");
    const auto requests = tr.rising_edges(fx.netlist->net_name(fx.ports.neuron.acm.trigger));
    const auto unblocked = tr.rising_edges(fx.netlist->net_name(fx.ports.neuron.acm.hold_n));
    if (spikes.size() != 1 || requests.empty() || unblocked.empty()) {
        throw desim::SimulationError("neuron calibration did not produce exactly one spike");
    }
    OracleParams params;
    params.capacity = spec.capacity;
    params.latency = spikes.front() - firing_increment;
    // Requests rising before hold_n returns high are masked; measure from the firing request.
    const auto firing_request =
        std::upper_bound(requests.begin(), requests.end(), spikes.front()) - 1;
    params.block_window = unblocked.back() - *firing_request;
    return params;
}

} // namespace bsnn::neuro
