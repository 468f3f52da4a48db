#include "bsnn/spikeio.hpp"

namespace bsnn::spikeio {

void SpikeTrainInput::validate() const {
    if (channels < 0 || channels > kMaxInputChannels) {
        throw std::invalid_argument("input channel count must lie in [0, " +
                                    std::to_string(kMaxInputChannels) + "]");
    }
    for (const auto& e : events) {
        if (e.channel >= channels) {
            throw std::invalid_argument("input event on channel " + std::to_string(e.channel) +
                                        " beyond " + std::to_string(channels) + " channels");
        }
    }
}

void inject(const SpikeTrainInput& input, const elab::ElaboratedNetwork& network,
            desim::Simulator& sim, SimTime offset) {
    input.validate();
    if (static_cast<std::size_t>(input.channels) > network.input_ports.size()) {
        throw std::invalid_argument("input has more channels than the receptive layer");
    }
    for (const auto& e : input.events) {
        sim.schedule_pulse(network.input_ports[e.channel],
                           offset + static_cast<SimTime>(e.step) * kStep, kInputPulseWidth);
    }
}

ObservationMatrix simulate_window(const elab::ElaboratedNetwork& network,
                                  const SpikeTrainInput& input, const WindowConfig& config) {
    std::shared_ptr<const desim::Netlist> netlist = network.netlist;
    if (config.jitter_sigma_ps > 0.0) {
        auto jittered = std::make_shared<desim::Netlist>(*network.netlist);
        desim::apply_delay_jitter(*jittered, config.jitter_sigma_ps, config.jitter_seed);
        netlist = std::move(jittered);
    }
    if (netlist->probes().size() > kMaxProbes) {
        throw std::invalid_argument("the time tagger observes at most 200 probes");
    }
    // Batch windows would repeat the same latch notice thousands of times.
    desim::SimOptions options;
    options.log_sr_conflicts = false;
    desim::Simulator sim(netlist, options);
    inject(input, network, sim, config.window.start);
    sim.run_until(config.window.end());
    return tag(sim.trace(), config.window);
}

} // namespace bsnn::spikeio
