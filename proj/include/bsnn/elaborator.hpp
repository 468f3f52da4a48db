// Network elaboration into one flat gate-level netlist, structural Verilog
// emission and logic-element accounting.
#pragma once

#include "bsnn/desim.hpp"
#include "bsnn/netgen.hpp"
#include "bsnn/neuroblocks.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace bsnn::elab {

using desim::NetId;
using desim::Netlist;
using desim::SimTime;

struct ElaborationOptions {
    neuro::Timing timing{};
    neuro::PulseGeneratorSpec output_pulse{};
    int refractory_segments = 0;
    SimTime branch_spacing = 5 * desim::kTauP;
};

struct ElaboratedNetwork {
    std::shared_ptr<Netlist> netlist;
    std::vector<NetId> input_ports;    // input channel -> stimulus port "in<c>"
    std::vector<NetId> neuron_outputs; // neuron id -> spike net, probed as "n<id>"
    std::vector<neuro::NeuronPorts> neurons;
};

/// One gate-level neuron per spec neuron. Each presynaptic neuron drives one tapped
/// delay line; each synapse takes its tap, passes its weight structure and enters the
/// post neuron's excitatory or inhibitory dendrite. Gates are grouped per neuron.
ElaboratedNetwork elaborate(const netgen::NetworkSpec& spec, const ElaborationOptions& options = {});

std::string probe_label(netgen::NeuronId id);

struct ResourceReport {
    long long neurons = 0;
    long long delay_lines = 0;
    long long synapses = 0;  // weight branches and per-synapse routing
    long long dendrites = 0; // wide XOR cascades
    long long overhead = 0;  // I/O infrastructure
    long long memory_bits = 0;

    long long logic_elements() const {
        return neurons + delay_lines + synapses + dendrites + overhead;
    }
};

struct ResourceModel {
    int le_per_neuron = 22;
    int le_per_delay_pair = 2;
    int le_per_synapse_route = 1;
    int gate_fan_in = 4;
    bool include_overhead = false;
};

inline constexpr long long kOverheadEthernet = 4730;
inline constexpr long long kOverheadTimeTagger = 2862;
inline constexpr long long kOverheadSpikeGenerator = 676;
inline constexpr long long kOverheadControl = 376;
inline constexpr long long kOverheadLogicElements =
    kOverheadEthernet + kOverheadTimeTagger + kOverheadSpikeGenerator + kOverheadControl;
inline constexpr long long kOverheadMemoryBits = 1'195'377; // 1.14 Mib

/// Logic elements of one LUT cascade combining `inputs` lines.
long long cascade_elements(long long inputs, int fan_in = 4);

ResourceReport estimate_resources(const netgen::NetworkSpec& spec, const ResourceModel& model = {},
                                  const ElaborationOptions& options = {});
/// Infrastructure only (no network).
ResourceReport infrastructure_resources();

void write_resource_csv(const ResourceReport& report, std::ostream& out);

inline constexpr double kScalingCoefficient = 15.40;
inline constexpr double kScalingExponent = 1.46;

/// round(15.40 * n^1.46); n >= 1.
long long scaling_estimate(long long neuron_count);

/// Structural Verilog: one module per gate group plus a top module. Deterministic.
void emit_hdl(const Netlist& netlist, std::ostream& out, const std::string& top = "bsnn_top");

/// Plain-text netlist dump and its parser (round-trips every field).
void write_netlist_text(const Netlist& netlist, std::ostream& out);
Netlist read_netlist_text(std::istream& in);

} // namespace bsnn::elab
