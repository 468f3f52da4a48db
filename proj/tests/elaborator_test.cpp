#include "bsnn/elaborator.hpp"

#include <gtest/gtest.h>

#include <regex>
#include <sstream>

namespace bsnn::elab {
namespace {

using desim::kTauP;
using desim::Simulator;
using netgen::NeuronInfo;
using netgen::NeuronKind;
using netgen::Synapse;
using neuro::Sign;

constexpr SimTime kSpikeWidth = 4 * kTauP;

int read_count(const Simulator& sim, const neuro::AcmPorts& acm) {
    int c = 0;
    for (std::size_t i = 0; i < acm.count_bits.size(); ++i) {
        c |= (sim.value(acm.count_bits[i]) ? 1 : 0) << i;
    }
    return c;
}

netgen::NetworkSpec single_receptive() {
    return netgen::make_spec({1, 1, 1}, {NeuronInfo{0, {0, 0, 0}, NeuronKind::Receptive}}, {});
}

netgen::NetworkSpec chain(int weight, SimTime delay) {
    return netgen::make_spec({1, 1, 2},
                             {NeuronInfo{0, {0, 0, 0}, NeuronKind::Receptive},
                              NeuronInfo{1, {0, 0, 1}, NeuronKind::Excitatory}},
                             {Synapse{0, 1, weight, Sign::Excitatory, delay}});
}

TEST(Elaborate, SingleNeuronMatchesBuilder) {
    const auto net = elaborate(single_receptive());
    ASSERT_EQ(net.input_ports.size(), 1u);
    ASSERT_EQ(net.neuron_outputs.size(), 1u);

    auto manual = std::make_shared<Netlist>();
    const NetId port = manual->add_port("in0");
    const NetId lines[] = {port};
    const auto ports = neuro::build_neuron(*manual, lines, {}, neuro::NeuronSpec{2}, "manual");
    manual->add_probe(ports.output, "n0");
    EXPECT_EQ(manual->gates().size(), net.netlist->gates().size());

    Simulator a(net.netlist), b(manual);
    for (SimTime t : {10'000, 30'000, 50'000, 70'000}) {
        a.schedule_pulse(net.input_ports[0], t, kSpikeWidth);
        b.schedule_pulse(port, t, kSpikeWidth);
    }
    const auto ta = a.run_until(120'000);
    const auto tb = b.run_until(120'000);
    EXPECT_EQ(ta.at("n0").transitions, tb.at("n0").transitions);
    EXPECT_EQ(ta.rising_edges("n0").size(), 2u);
}

TEST(Elaborate, ChainDeliversWeightAfterAxonDelay) {
    const auto net = elaborate(chain(2, 20 * kTauP));
    desim::SimOptions opts;
    opts.extra_probes = {net.neurons[1].acm.clock};
    Simulator sim(net.netlist, opts);
    sim.schedule_pulse(net.input_ports[0], 10'000, kSpikeWidth);
    sim.schedule_pulse(net.input_ports[0], 30'000, kSpikeWidth);
    const auto tr = sim.run_until(100'000);
    const auto pre = tr.rising_edges("n0");
    ASSERT_EQ(pre.size(), 1u);
    EXPECT_TRUE(tr.rising_edges("n1").empty());
    EXPECT_EQ(read_count(sim, net.neurons[1].acm), 2);
    const auto clocks =
        tr.rising_edges(net.netlist->net_name(net.neurons[1].acm.clock));
    ASSERT_EQ(clocks.size(), 2u);
    // The clock edge detector recovers in 3 gate delays, so the second branch may lag by one.
    EXPECT_GE(clocks[1] - clocks[0], 2800);
    EXPECT_LE(clocks[1] - clocks[0], 2800 + desim::kGateDelay);
    // Axon delay dominates the pre-spike to post-count latency.
    EXPECT_GE(clocks[0] - pre[0], 11'200);
    EXPECT_LE(clocks[0] - pre[0], 11'200 + 5 * kTauP);
}

TEST(Elaborate, ChainMatchesManualComposition) {
    const auto net = elaborate(chain(2, 20 * kTauP));

    auto manual = std::make_shared<Netlist>();
    Netlist& nl = *manual;
    const NetId pre_out = nl.add_net("pre_out");
    const NetId port = nl.add_port("in0");
    const SimTime taps[] = {20 * kTauP};
    const NetId tap = neuro::build_tapped_delay_line(nl, pre_out, taps, "axon")[0];
    const NetId line = neuro::build_weighted_synapse(nl, tap, {2}, "syn");
    const NetId pre_lines[] = {port};
    const NetId post_lines[] = {line};
    neuro::build_neuron(nl, pre_lines, {}, neuro::NeuronSpec{2}, "pre", {}, pre_out);
    const auto post = neuro::build_neuron(nl, post_lines, {}, neuro::NeuronSpec{4}, "post");
    nl.add_probe(pre_out, "n0");
    nl.add_probe(post.output, "n1");

    Simulator a(net.netlist), b(manual);
    for (int k = 0; k < 6; ++k) {
        a.schedule_pulse(net.input_ports[0], 10'000 + k * 20'000, kSpikeWidth);
        b.schedule_pulse(port, 10'000 + k * 20'000, kSpikeWidth);
    }
    const auto ta = a.run_until(300'000);
    const auto tb = b.run_until(300'000);
    EXPECT_EQ(ta.at("n0").transitions, tb.at("n0").transitions);
    EXPECT_EQ(ta.at("n1").transitions, tb.at("n1").transitions);
    EXPECT_EQ(ta.rising_edges("n1").size(), 1u);
}

TEST(Elaborate, DefaultGridExposesAllChannels) {
    const auto spec = netgen::generate({7, 7, 4}, netgen::ConnectivityParams::defaults(), 1);
    const auto net = elaborate(spec);
    EXPECT_EQ(net.netlist->probes().size(), 196u);
    EXPECT_EQ(net.input_ports.size(), 49u);
    EXPECT_EQ(net.netlist->probes()[7].label, "n7");
    EXPECT_EQ(net.netlist->groups().size(), 197u);
    EXPECT_NO_THROW(net.netlist->validate());
}

TEST(Elaborate, IsolatedNeuronIsAllowed) {
    const auto spec = netgen::make_spec(
        {1, 1, 2},
        {NeuronInfo{0, {0, 0, 0}, NeuronKind::Receptive},
         NeuronInfo{1, {0, 0, 1}, NeuronKind::Inhibitory}},
        {});
    const auto net = elaborate(spec);
    Simulator sim(net.netlist);
    EXPECT_TRUE(sim.run_until(50'000).at("n1").transitions.empty());
}

TEST(Resources, IsolatedNeuronAndInfrastructure) {
    EXPECT_EQ(estimate_resources(single_receptive()).logic_elements(), 22);
    EXPECT_EQ(infrastructure_resources().logic_elements(), 8644);
    EXPECT_EQ(infrastructure_resources().memory_bits, 1'195'377);
    ResourceModel with_io;
    with_io.include_overhead = true;
    EXPECT_EQ(estimate_resources(single_receptive(), with_io).logic_elements(), 22 + 8644);
}

TEST(Resources, CategoriesSumToTotal) {
    const auto spec = netgen::generate({7, 7, 2}, netgen::ConnectivityParams::defaults(), 4);
    const auto r = estimate_resources(spec);
    EXPECT_EQ(r.logic_elements(),
              r.neurons + r.delay_lines + r.synapses + r.dendrites + r.overhead);
    EXPECT_EQ(r.neurons, 98 * 22);
    std::ostringstream os;
    write_resource_csv(r, os);
    EXPECT_NE(os.str().find("total," + std::to_string(r.logic_elements())), std::string::npos);
}

TEST(Resources, ChainCounts) {
    // 2 neurons, 20-pair axon, weight-2 branch (5 pairs + XOR), one route buffer.
    const auto r = estimate_resources(chain(2, 20 * kTauP));
    EXPECT_EQ(r.neurons, 44);
    EXPECT_EQ(r.delay_lines, 40);
    EXPECT_EQ(r.synapses, 10 + 1 + 1);
    EXPECT_EQ(r.dendrites, 0);
}

TEST(Resources, CascadePacking) {
    EXPECT_EQ(cascade_elements(0), 0);
    EXPECT_EQ(cascade_elements(1), 0);
    EXPECT_EQ(cascade_elements(2), 1);
    EXPECT_EQ(cascade_elements(4), 1);
    EXPECT_EQ(cascade_elements(5), 2);
    EXPECT_EQ(cascade_elements(7), 2);
    EXPECT_EQ(cascade_elements(8), 3);
}

TEST(Resources, ScalingLaw) {
    EXPECT_EQ(scaling_estimate(1), 15);
    EXPECT_GE(scaling_estimate(98), 12'100);
    EXPECT_LE(scaling_estimate(98), 12'700);
    EXPECT_LE(scaling_estimate(447), 114'480);
    EXPECT_THROW(scaling_estimate(0), std::invalid_argument);
    for (int n = 1; n < 500; ++n) EXPECT_LE(scaling_estimate(n), scaling_estimate(n + 1));
}

TEST(ResourcesProperty, MonotoneInSynapses) {
    auto spec = netgen::generate({7, 7, 2}, netgen::ConnectivityParams::defaults(), 8);
    auto prev = estimate_resources(spec).logic_elements();
    auto syn = spec.synapses;
    while (!syn.empty()) {
        syn.pop_back();
        spec.synapses = syn;
        const auto now = estimate_resources(spec).logic_elements();
        EXPECT_LE(now, prev);
        prev = now;
    }
}

// Single seeds scatter by several percent, so compare the mean over five seeds.
TEST(ResourcesProperty, DetailedModelTracksScalingLaw) {
    for (int layers = 2; layers <= 5; ++layers) {
        double ratio = 0;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto spec =
                netgen::generate({7, 7, layers}, netgen::ConnectivityParams::defaults(), seed);
            ratio += static_cast<double>(estimate_resources(spec).logic_elements()) /
                     static_cast<double>(scaling_estimate(49 * layers));
        }
        ratio /= 5;
        EXPECT_NEAR(ratio, 1.0, 0.05) << "layers " << layers;
    }
}

std::size_t count_instances(const std::string& hdl) {
    static const std::regex inst(R"(^  (not|xor|or|and|bsnn_\w+) .*\bg\d+ )");
    std::istringstream in(hdl);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) n += std::regex_search(line, inst);
    return n;
}

TEST(Hdl, EmptyNetlistIsHeaderOnly) {
    Netlist nl;
    std::ostringstream os;
    emit_hdl(nl, os);
    EXPECT_EQ(os.str(), "// Structural gate-level netlist\n// nets: 0, gates: 0, probes: 0\n");
}

TEST(Hdl, OneInstancePerGateAndDeterministic) {
    const auto net = elaborate(single_receptive());
    std::ostringstream a, b;
    emit_hdl(*net.netlist, a);
    emit_hdl(*net.netlist, b);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(count_instances(a.str()), net.netlist->gates().size());
    EXPECT_NE(a.str().find("module grp1_n0"), std::string::npos);
    EXPECT_NE(a.str().find("module bsnn_top"), std::string::npos);
}

TEST(Hdl, RecurrentNetworkModulesBalance) {
    const auto spec = netgen::generate({7, 7, 2}, netgen::ConnectivityParams::defaults(), 2);
    const auto net = elaborate(spec);
    std::ostringstream os;
    emit_hdl(*net.netlist, os);
    const auto text = os.str();
    EXPECT_EQ(count_instances(text), net.netlist->gates().size());
    std::size_t modules = 0, ends = 0;
    for (std::size_t p = 0; (p = text.find("\nmodule ", p)) != std::string::npos; ++p) ++modules;
    for (std::size_t p = 0; (p = text.find("endmodule", p)) != std::string::npos; ++p) ++ends;
    EXPECT_EQ(modules, ends);
}

TEST(NetlistText, RoundTripPreservesBehaviour) {
    const auto net = elaborate(chain(2, 3 * kTauP));
    std::ostringstream first;
    write_netlist_text(*net.netlist, first);
    std::istringstream in(first.str());
    auto back = std::make_shared<Netlist>(read_netlist_text(in));
    std::ostringstream second;
    write_netlist_text(*back, second);
    EXPECT_EQ(first.str(), second.str());

    Simulator a(net.netlist), b(back);
    for (auto* s : {&a, &b}) {
        s->schedule_pulse(s->netlist().find_net("in0"), 10'000, kSpikeWidth);
        s->schedule_pulse(s->netlist().find_net("in0"), 30'000, kSpikeWidth);
    }
    EXPECT_EQ(a.run_until(80'000), b.run_until(80'000));
}

TEST(NetlistText, RejectsGarbage) {
    std::istringstream bad("hello\n");
    EXPECT_THROW(read_netlist_text(bad), desim::NetlistError);
    std::istringstream truncated("bsnn-netlist 1\ngroups 1\ngroup top\nnets 2\n");
    EXPECT_THROW(read_netlist_text(truncated), desim::NetlistError);
}

} // namespace
} // namespace bsnn::elab
