#include "bsnn/desim.hpp"

#include <cmath>
#include <random>

namespace bsnn::desim {

Netlist::Netlist() { groups_.emplace_back("top"); }

NetId Netlist::add_net(std::string name) {
    const auto id = static_cast<NetId>(net_names_.size());
    net_names_.push_back(std::move(name));
    drivers_.push_back(Driver::None);
    return id;
}

NetId Netlist::add_port(std::string name) {
    const NetId id = add_net(std::move(name));
    drivers_[id] = Driver::Port;
    ports_.push_back(id);
    return id;
}

NetId Netlist::tie_low() {
    if (tie_low_ == kNoNet) {
        tie_low_ = add_port("tie0");
    }
    return tie_low_;
}

void Netlist::claim_driver(NetId net, Driver kind) {
    if (net >= net_names_.size()) {
        throw NetlistError("net id " + std::to_string(net) + " out of range");
    }
    if (drivers_[net] != Driver::None) {
        throw NetlistError("net '" + net_names_[net] + "' already has a driver");
    }
    drivers_[net] = kind;
}

std::size_t Netlist::add_gate(const GateInstance& gate) {
    const std::size_t n = arity(gate.kind);
    for (std::size_t i = 0; i < 2; ++i) {
        const NetId in = gate.inputs[i];
        if (i < n && in >= net_names_.size()) {
            throw NetlistError("gate " + std::string(to_string(gate.kind)) +
                               " has an unconnected input");
        }
        if (i >= n && in != kNoNet) {
            throw NetlistError("gate " + std::string(to_string(gate.kind)) +
                               " has too many inputs");
        }
    }
    if (gate.delay <= 0) {
        throw NetlistError("gate delay must be positive");
    }
    if (gate.reject_window < 0 || gate.reject_window > gate.delay) {
        throw NetlistError("reject window must lie in [0, delay]");
    }
    if (gate.output_n != kNoNet && !is_sequential(gate.kind)) {
        throw NetlistError("complement output only exists on sequential gates");
    }
    claim_driver(gate.output, Driver::Gate);
    if (gate.output_n != kNoNet) {
        claim_driver(gate.output_n, Driver::Gate);
    }
    gates_.push_back(gate);
    gates_.back().group = gate.group == 0 ? current_group_ : gate.group;
    return gates_.size() - 1;
}

NetId Netlist::add_gate(GateKind kind, std::span<const NetId> inputs, std::string out_name,
                        SimTime delay) {
    if (inputs.size() != arity(kind)) {
        throw NetlistError("gate " + std::string(to_string(kind)) + " arity mismatch");
    }
    GateInstance g;
    g.kind = kind;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        g.inputs[i] = inputs[i];
    }
    g.output = add_net(std::move(out_name));
    g.delay = delay;
    g.reject_window = delay;
    add_gate(g);
    return g.output;
}

void Netlist::add_probe(NetId net, std::string label) {
    if (net >= net_names_.size()) {
        throw NetlistError("probe on unknown net");
    }
    probes_.push_back(Probe{net, std::move(label)});
}

std::uint32_t Netlist::add_group(std::string name) {
    groups_.push_back(std::move(name));
    return static_cast<std::uint32_t>(groups_.size() - 1);
}

NetId Netlist::find_net(std::string_view name) const {
    for (NetId i = 0; i < net_names_.size(); ++i) {
        if (net_names_[i] == name) {
            return i;
        }
    }
    return kNoNet;
}

void Netlist::validate() const {
    for (NetId i = 0; i < net_names_.size(); ++i) {
        if (drivers_[i] == Driver::None) {
            throw NetlistError("net '" + net_names_[i] + "' has no driver");
        }
    }
    for (const auto& g : gates_) {
        for (std::size_t i = 0; i < arity(g.kind); ++i) {
            if (g.inputs[i] >= net_names_.size()) {
                throw NetlistError("gate input out of range");
            }
        }
    }
}

void apply_delay_jitter(Netlist& netlist, double sigma_ps, std::uint64_t seed, SimTime mean) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma_ps > 0 ? sigma_ps : 1.0);
    for (auto& g : netlist.mutable_gates()) {
        SimTime d = mean;
        if (sigma_ps > 0) {
            d = static_cast<SimTime>(std::llround(static_cast<double>(mean) + noise(rng)));
        }
        g.delay = std::max<SimTime>(1, d);
        g.reject_window = g.delay;
    }
}

} // namespace bsnn::desim
