// Gate-level builders for the Boolean neuron sub-blocks, plus a behavioural
// integer-counter neuron used as the reference model.
#pragma once

#include "bsnn/desim.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace bsnn::neuro {

using desim::NetId;
using desim::Netlist;
using desim::SimTime;

class SpecError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct Timing {
    SimTime gate_delay = desim::kGateDelay;
    SimTime tau_p() const { return 2 * gate_delay; }
};

struct PulseGeneratorSpec {
    int line_a_pairs = 0;
    int line_b_pairs = 4;

    void validate() const;
    SimTime width(const Timing& timing = {}) const {
        return (line_b_pairs - line_a_pairs) * timing.tau_p();
    }
};

struct PulseGeneratorPorts {
    NetId trigger = desim::kNoNet;
    NetId q = desim::kNoNet;
    NetId output = desim::kNoNet;
};

/// D flip-flop with Q-bar fed back to D, followed by two inverter-pair delay
/// lines recombined by XOR. Every rising edge on `trigger` yields one pulse.
/// `output`, when given, is an existing undriven net that the XOR drives.
PulseGeneratorPorts build_pulse_generator(Netlist& nl, NetId trigger,
                                          const PulseGeneratorSpec& spec,
                                          std::string_view name, const Timing& timing = {},
                                          NetId output = desim::kNoNet);

/// Chain of 2*(delay/tau_p) inverters. `delay` must be a positive multiple of tau_p.
NetId build_delay_line(Netlist& nl, NetId in, SimTime delay, std::string_view name,
                       const Timing& timing = {});

/// One inverter chain with taps; returns the tapped net for each requested delay
/// (same order as `taps`). A zero tap is the input itself.
std::vector<NetId> build_tapped_delay_line(Netlist& nl, NetId in, std::span<const SimTime> taps,
                                           std::string_view name, const Timing& timing = {});

enum class Combiner { Xor, Or };

/// Balanced cascade of 2-input gates. Zero lines -> tie-low, one line -> the line itself.
NetId build_dendrite(Netlist& nl, std::span<const NetId> lines, std::string_view name,
                     Combiner combiner = Combiner::Xor, const Timing& timing = {});

enum class Sign : std::uint8_t { Excitatory, Inhibitory };

struct SynapseWeightSpec {
    int weight = 1;
    SimTime branch_spacing = 5 * desim::kTauP;
    Sign sign = Sign::Excitatory;
};

/// Splits one spike line into `weight` branches delayed by k*branch_spacing and XORs them.
NetId build_weighted_synapse(Netlist& nl, NetId in, const SynapseWeightSpec& spec,
                             std::string_view name, const Timing& timing = {});

struct AcmSpec {
    int capacity = 4;

    void validate() const;
    /// ceil(log2(capacity + 1))
    int state_bits() const;
};

struct AcmPorts {
    NetId exc = desim::kNoNet;
    NetId inh = desim::kNoNet;
    NetId hold = desim::kNoNet;   // counting blocked while high
    NetId threshold = desim::kNoNet;
    NetId mode = desim::kNoNet;   // 1 = increment
    NetId trigger = desim::kNoNet; // merged, guard-delayed, zero-gated count request
    NetId hold_n = desim::kNoNet;
    NetId clock = desim::kNoNet;
    std::vector<NetId> count_bits; // LSB first
};

/// Bidirectional counter: SR mode latch, XOR exc/inh merge with a 2*tau_p guard
/// delay, OR zero-detector on the decrement path, synchronous next-state logic.
/// `threshold` pulses when the count would reach `capacity`; the count wraps to 0.
AcmPorts build_acm(Netlist& nl, NetId exc, NetId inh, NetId hold, const AcmSpec& spec,
                   std::string_view name, const Timing& timing = {});

struct NeuronSpec {
    int capacity = 4;
    PulseGeneratorSpec output_pulse{};
    /// Extra input-blocking segments after the spike (absolute refractory period).
    int refractory_segments = 0;
};

struct NeuronPorts {
    NetId output = desim::kNoNet;
    NetId exc_dendrite = desim::kNoNet;
    NetId inh_dendrite = desim::kNoNet;
    NetId block = desim::kNoNet;
    AcmPorts acm;
};

/// `output` may name a pre-created net (recurrent wiring needs the spike net
/// before the neuron exists).
NeuronPorts build_neuron(Netlist& nl, std::span<const NetId> exc_lines,
                         std::span<const NetId> inh_lines, const NeuronSpec& spec,
                         std::string_view name, const Timing& timing = {},
                         NetId output = desim::kNoNet);

/// Standalone netlist with stimulus ports and probes, for tests and dumps.
template <class Ports>
struct Fragment {
    std::shared_ptr<Netlist> netlist;
    Ports ports;
};

struct NeuronFixturePorts {
    std::vector<NetId> exc_inputs; // one stimulus port per excitatory synapse
    std::vector<NetId> inh_inputs;
    NeuronPorts neuron;
};

/// Neuron with one weighted synapse per listed weight, each driven by a port
/// "exc<i>" / "inh<i>". The output is probed as "spike".
Fragment<NeuronFixturePorts> make_neuron_fixture(const NeuronSpec& spec,
                                                 std::span<const int> exc_weights,
                                                 std::span<const int> inh_weights,
                                                 const Timing& timing = {});

// ---------------------------------------------------------------------------
// Behavioural reference neuron

struct OracleParams {
    int capacity = 4;
    SimTime latency = 0;      // input edge -> output spike onset
    SimTime block_window = 0; // inputs ignored for this long after a firing input
};

struct BehavioralNeuronState {
    int count = 0;
    SimTime firing_until = std::numeric_limits<SimTime>::min();
    SimTime last_time = std::numeric_limits<SimTime>::min();
};

struct SignedSpike {
    SimTime time = 0;
    int sign = +1; // +1 excitatory, -1 inhibitory
};

struct OracleStep {
    BehavioralNeuronState state;
    std::optional<SimTime> spike;
};

OracleStep oracle_step(const BehavioralNeuronState& state, const SignedSpike& event,
                       const OracleParams& params);

/// Replays a train through oracle_step; returns output spike times.
std::vector<SimTime> oracle_run(std::span<const SignedSpike> events, const OracleParams& params);

/// Expands weighted synaptic events into unit increments spaced by the branch spacing.
std::vector<SignedSpike> expand_weighted(SimTime time, int weight, Sign sign,
                                         SimTime branch_spacing = 5 * desim::kTauP);

/// Measures latency and blocking window of the gate-level neuron (zero jitter), driving
/// the first synapse of a fixture built with `exc_weights` (default: one unit synapse).
OracleParams calibrate_neuron(const NeuronSpec& spec, const Timing& timing = {},
                              std::span<const int> exc_weights = {});

} // namespace bsnn::neuro
