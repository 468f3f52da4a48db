#include "bsnn/neuroblocks.hpp"

#include <algorithm>

namespace bsnn::neuro {

OracleStep oracle_step(const BehavioralNeuronState& state, const SignedSpike& event,
                       const OracleParams& params) {
    if (event.time < state.last_time) {
        throw std::invalid_argument("oracle events must be presented in time order");
    }
    if (event.sign != 1 && event.sign != -1) {
        throw std::invalid_argument("oracle event sign must be +1 or -1");
    }
    OracleStep out{state, std::nullopt};
    out.state.last_time = event.time;
    if (event.time < state.firing_until) {
        return out;
    }
    if (event.sign > 0) {
        if (++out.state.count >= params.capacity) {
            out.state.count = 0;
            out.spike = event.time + params.latency;
            out.state.firing_until = event.time + params.block_window;
        }
    } else {
        out.state.count = std::max(0, out.state.count - 1);
    }
    return out;
}

std::vector<SimTime> oracle_run(std::span<const SignedSpike> events, const OracleParams& params) {
    std::vector<SimTime> spikes;
    BehavioralNeuronState state;
    for (const auto& ev : events) {
        auto step = oracle_step(state, ev, params);
        state = step.state;
        if (step.spike) {
            spikes.push_back(*step.spike);
        }
    }
    return spikes;
}

std::vector<SignedSpike> expand_weighted(SimTime time, int weight, Sign sign,
                                         SimTime branch_spacing) {
    std::vector<SignedSpike> out;
    for (int k = 0; k < weight; ++k) {
        out.push_back(SignedSpike{time + k * branch_spacing, sign == Sign::Excitatory ? 1 : -1});
    }
    return out;
}

} // namespace bsnn::neuro
