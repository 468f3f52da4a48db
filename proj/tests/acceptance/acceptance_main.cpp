#include "bsnn/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

namespace {

using namespace bsnn;
namespace fs = std::filesystem;
using desim::kClockStep;
using desim::kGateDelay;
using desim::kTauP;
using desim::SimTime;
using desim::Simulator;

constexpr SimTime kSpikeWidth = 4 * kTauP;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. gate-level neuron against the behavioural neuron

Outcome neuron_fidelity() {
    constexpr int kTrials = 1000;
    int count_mismatches = 0, timing_violations = 0;
    std::size_t spikes = 0;
    SimTime worst_spread = 0;
    std::mt19937_64 rng(20240601);
    for (int trial = 0; trial < kTrials; ++trial) {
        const int cap = rng() % 2 ? 4 : 2;
        const neuro::NeuronSpec spec{cap};
        std::vector<int> exc_w(1 + rng() % 3), inh_w(1 + rng() % 2);
        for (auto& w : exc_w) w = 1 + static_cast<int>(rng() % 2);
        for (auto& w : inh_w) w = 1 + static_cast<int>(rng() % 2);
        const auto params = neuro::calibrate_neuron(spec, {}, exc_w);
        const auto fx = neuro::make_neuron_fixture(spec, exc_w, inh_w);
        Simulator sim(fx.netlist);
        std::vector<neuro::SignedSpike> expanded;
        SimTime t = kClockStep;
        const int events = 10 + static_cast<int>(rng() % 31);
        for (int e = 0; e < events; ++e) {
            const bool inhibitory = rng() % 4 == 0;
            const auto& ws = inhibitory ? inh_w : exc_w;
            const std::size_t idx = rng() % ws.size();
            sim.schedule_pulse(inhibitory ? fx.ports.inh_inputs[idx] : fx.ports.exc_inputs[idx], t, kSpikeWidth);
            for (auto s : neuro::expand_weighted(t, ws[idx], inhibitory ? neuro::Sign::Inhibitory
                                                                        : neuro::Sign::Excitatory)) {
                expanded.push_back(s);
            }
            t += kClockStep * (1 + static_cast<SimTime>(rng() % 4));
        }
        std::stable_sort(expanded.begin(), expanded.end(),
                         [](const auto& a, const auto& b) { return a.time < b.time; });
        const auto gate = sim.run_until(t + 5 * kClockStep).rising_edges("spike");
        const auto ref = neuro::oracle_run(expanded, params);
        if (gate.size() != ref.size()) {
            ++count_mismatches;
            continue;
        }
        spikes += gate.size();
        if (gate.empty()) continue;
        SimTime lo = gate[0] - ref[0], hi = lo;
        for (std::size_t i = 1; i < gate.size(); ++i) {
            lo = std::min(lo, gate[i] - ref[i]);
            hi = std::max(hi, gate[i] - ref[i]);
        }
        worst_spread = std::max(worst_spread, hi - lo);
        // Some constant offset c keeps every difference inside c +- 2 gate delays.
        if (hi - lo > 4 * kGateDelay) ++timing_violations;
    }
    return {count_mismatches == 0 && timing_violations == 0,
            fmt("%d trials, %zu output spikes, %d count mismatches, %d timing violations, worst spread %lld ps "
                "(limit %lld)",
                kTrials, spikes, count_mismatches, timing_violations, static_cast<long long>(worst_spread),
                static_cast<long long>(4 * kGateDelay))};
}

// ---------------------------------------------------------------------------
// 2. pulse width law

SimTime measured_width(const neuro::PulseGeneratorSpec& spec) {
    auto nl = std::make_shared<desim::Netlist>();
    const auto trigger = nl->add_port("trigger");
    const auto pg = neuro::build_pulse_generator(*nl, trigger, spec, "pg");
    nl->add_probe(pg.output, "out");
    Simulator sim(nl);
    sim.schedule_pulse(trigger, 10'000, 8'000);
    const auto trace = sim.run_until(60'000);
    const auto& tr = trace.at("out").transitions;
    if (tr.size() != 2 || !tr[0].value || tr[1].value) return -1;
    return tr[1].time - tr[0].time;
}

Outcome pulse_width_law() {
    bool ok = true;
    std::string widths;
    for (int delta = 1; delta <= 8; ++delta) {
        const SimTime w = measured_width({0, delta});
        ok = ok && w == delta * 560;
        widths += (delta > 1 ? " " : "") + std::to_string(w);
    }
    const SimTime def = measured_width({});
    ok = ok && def == 2240;
    return {ok, fmt("widths for 1..8 pairs: %s ps; default build %lld ps", widths.c_str(),
                    static_cast<long long>(def))};
}

// ---------------------------------------------------------------------------
// 3. underflow and overlap semantics

int acm_count(const Simulator& sim, const neuro::AcmPorts& acm) {
    int c = 0;
    for (std::size_t i = 0; i < acm.count_bits.size(); ++i) c |= (sim.value(acm.count_bits[i]) ? 1 : 0) << i;
    return c;
}

int overlapping_increments(neuro::Combiner combiner) {
    auto nl = std::make_shared<desim::Netlist>();
    const auto a = nl->add_port("a");
    const auto b = nl->add_port("b");
    const desim::NetId lines[] = {a, b};
    const auto dend = neuro::build_dendrite(*nl, lines, "dend", combiner);
    const auto acm = neuro::build_acm(*nl, dend, nl->tie_low(), nl->tie_low(), neuro::AcmSpec{4}, "acm");
    Simulator sim(nl);
    sim.schedule_pulse(a, 10'000, kSpikeWidth);
    sim.schedule_pulse(b, 10'000 + kSpikeWidth / 2, kSpikeWidth);
    sim.run_until(60'000);
    return acm_count(sim, acm);
}

Outcome underflow_and_overlap() {
    auto nl = std::make_shared<desim::Netlist>();
    const auto exc = nl->add_port("exc");
    const auto inh = nl->add_port("inh");
    const auto acm = neuro::build_acm(*nl, exc, inh, nl->tie_low(), neuro::AcmSpec{4}, "acm");
    nl->add_probe(acm.threshold, "threshold");
    Simulator sim(nl);
    sim.schedule_pulse(inh, 10'000, kSpikeWidth);
    sim.run_until(50'000);
    const int after_inhibition = acm_count(sim, acm);
    // Had the count wrapped, fewer than four excitations would reach threshold.
    for (int i = 0; i < 4; ++i) sim.schedule_pulse(exc, 60'000 + i * 30'000, kSpikeWidth);
    sim.run_until(60'000 + 2 * 30'000 + 20'000);
    const auto early = sim.trace().rising_edges("threshold").size();
    sim.run_until(250'000);
    const auto fires = sim.trace().rising_edges("threshold").size();

    const int xor_increments = overlapping_increments(neuro::Combiner::Xor);
    const int or_increments = overlapping_increments(neuro::Combiner::Or);
    return {after_inhibition == 0 && early == 0 && fires == 1 && xor_increments == 2 && or_increments == 1,
            fmt("count after inhibition at zero %d, threshold after 3/4 excitations %zu/%zu; half-overlapping "
                "pulses: XOR %d increments, OR %d",
                after_inhibition, early, fires, xor_increments, or_increments)};
}

// ---------------------------------------------------------------------------
// 4. weight structure

Outcome weight_structure() {
    auto nl = std::make_shared<desim::Netlist>();
    const auto in = nl->add_port("in");
    nl->add_probe(neuro::build_weighted_synapse(*nl, in, neuro::SynapseWeightSpec{2}, "syn"), "out");
    Simulator sim(nl);
    sim.schedule_pulse(in, 10'000, kSpikeWidth);
    const auto edges = sim.run_until(40'000).rising_edges("out");
    const SimTime gap = edges.size() == 2 ? edges[1] - edges[0] : -1;

    const int w[] = {2};
    const auto fx = neuro::make_neuron_fixture(neuro::NeuronSpec{4}, w, {});
    Simulator neuron(fx.netlist);
    neuron.schedule_pulse(fx.ports.exc_inputs[0], 10'000, kSpikeWidth);
    neuron.schedule_pulse(fx.ports.exc_inputs[0], 40'000, kSpikeWidth);
    const auto fires = neuron.run_until(100'000).rising_edges("spike").size();
    return {edges.size() == 2 && gap == 2800 && fires == 1,
            fmt("%zu edges per input spike, %lld ps apart; C_M=4 neuron fired %zu time(s) on two w=2 spikes",
                edges.size(), static_cast<long long>(gap), fires)};
}

// ---------------------------------------------------------------------------
// 5. topology statistics

Outcome topology_statistics() {
    const auto params = netgen::ConnectivityParams::defaults();
    constexpr int kTrials = 100'000;
    bool ok = true;
    std::string freq;
    for (int d = 1; d <= 3; ++d) {
        const netgen::GridDims dims{1, 1, d + 1};
        const auto post = static_cast<netgen::NeuronId>(d);
        double hits = 0, mean = 0, var = 0;
        for (int t = 0; t < kTrials; ++t) {
            const auto spec = netgen::generate(dims, params, static_cast<std::uint64_t>(1'000'000 * d + t));
            const double p = params.gamma_of(spec.neurons[0].kind, spec.neurons[post].kind) *
                             std::exp(-static_cast<double>(d * d) / (params.lambda * params.lambda));
            mean += p;
            var += p * (1 - p);
            for (const auto& s : spec.synapses) hits += (s.pre == 0 && s.post == post);
        }
        const double z = (hits - mean) / std::sqrt(var);
        ok = ok && std::abs(z) <= 4.0;
        freq += fmt("%sd=%d %.4f vs %.4f (z=%+.2f)", d > 1 ? ", " : "", d, hits / kTrials, mean / kTrials, z);
    }
    int dale = 0, into_receptive = 0;
    double delay_sum = 0;
    std::size_t nn = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto spec = netgen::generate({7, 7, 4}, params, seed);
        std::vector<int> sign(spec.neurons.size(), 0);
        for (const auto& s : spec.synapses) {
            const int sg = s.sign == neuro::Sign::Inhibitory ? -1 : 1;
            if ((sign[s.pre] != 0 && sign[s.pre] != sg) || s.sign != netgen::sign_of(spec.neurons[s.pre].kind)) ++dale;
            sign[s.pre] = sg;
            if (spec.neurons[s.post].kind == netgen::NeuronKind::Receptive) ++into_receptive;
            if (netgen::distance(spec.neurons[s.pre].position, spec.neurons[s.post].position) == 1.0) {
                delay_sum += static_cast<double>(s.delay);
                ++nn;
            }
        }
    }
    const double nn_mean = nn ? delay_sum / static_cast<double>(nn) : 0.0;
    ok = ok && dale == 0 && into_receptive == 0 && nn > 0 && std::abs(nn_mean - 11'200.0) <= 0.02 * 11'200.0;
    return {ok, fmt("%s; Dale violations %d, synapses into receptive %d; nearest-neighbour mean delay %.1f ps "
                    "over %zu synapses",
                    freq.c_str(), dale, into_receptive, nn_mean, nn)};
}

// ---------------------------------------------------------------------------
// 6. resource arithmetic

Outcome resource_scaling() {
    const auto s98 = elab::scaling_estimate(98);
    const auto s447 = elab::scaling_estimate(447);
    const auto single = netgen::make_spec({1, 1, 1}, {netgen::NeuronInfo{0, {0, 0, 0}, netgen::NeuronKind::Receptive}}, {});
    const auto isolated = elab::estimate_resources(single).logic_elements();
    const auto infra = elab::infrastructure_resources().logic_elements();
    return {s98 >= 12'100 && s98 <= 12'700 && s447 <= 114'480 && isolated == 22 && infra == 8644,
            fmt("scaling(98) = %lld, scaling(447) = %lld, isolated neuron %lld LEs, infrastructure %lld LEs", s98,
                s447, isolated, infra)};
}

// ---------------------------------------------------------------------------
// 7. readout correctness

struct Problem {
    readout::SoftmaxModel model;
    readout::Matrix X;
    std::vector<int> y;
};

Problem random_problem(std::mt19937_64& rng, int K, int d, int m, double scale) {
    std::normal_distribution<double> n01(0, 1);
    Problem p{readout::SoftmaxModel(K, d), readout::Matrix(m, d), std::vector<int>(static_cast<std::size_t>(m))};
    for (Eigen::Index i = 0; i < p.X.size(); ++i) p.X.data()[i] = n01(rng);
    for (Eigen::Index i = 0; i < p.model.W.size(); ++i) p.model.W.data()[i] = scale * n01(rng);
    for (int k = 0; k < K; ++k) p.model.b[k] = scale * n01(rng);
    for (auto& label : p.y) label = static_cast<int>(rng() % static_cast<std::uint64_t>(K));
    return p;
}

// Extended-precision loss written out from the definition, parameters flattened as [W, b].
long double reference_loss(const Problem& p, const readout::Vector& theta, double C) {
    const int K = p.model.classes(), d = p.model.dim();
    long double nll = 0, reg = 0;
    for (Eigen::Index j = 0; j < theta.size(); ++j) reg += static_cast<long double>(theta[j]) * theta[j];
    for (Eigen::Index i = 0; i < p.X.rows(); ++i) {
        std::vector<long double> z(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            long double acc = theta[static_cast<Eigen::Index>(K) * d + k];
            for (int j = 0; j < d; ++j) acc += static_cast<long double>(theta[k * d + j]) * p.X(i, j);
            z[static_cast<std::size_t>(k)] = acc;
        }
        long double sum = 0;
        for (auto v : z) sum += std::exp(v);
        nll += std::log(sum) - z[static_cast<std::size_t>(p.y[static_cast<std::size_t>(i)])];
    }
    return nll / p.X.rows() + reg / (2.0L * C);
}

Outcome readout_correctness() {
    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (int instance = 0; instance < 50; ++instance) {
        auto p = random_problem(rng, 2 + instance % 5, 4 + instance % 7, 10 + instance % 9, 0.5);
        const double C = 0.01 + 0.2 * instance;
        const auto lg = readout::loss_and_gradient(p.model, p.X, p.y, C);
        const readout::Vector theta = p.model.parameters();
        const double h = 1e-4;
        for (Eigen::Index j = 0; j < theta.size(); ++j) {
            const auto at = [&](double delta) {
                readout::Vector t = theta;
                t[j] += delta;
                return reference_loss(p, t, C);
            };
            const double numeric =
                static_cast<double>((-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12.0L * h));
            const double denom = std::max({std::abs(numeric), std::abs(lg.gradient[j]), 1e-8});
            worst = std::max(worst, std::abs(numeric - lg.gradient[j]) / denom);
        }
    }
    bool log_k = true;
    for (int K : {2, 3, 8, 20}) {
        auto p = random_problem(rng, K, 5, 11, 0.0);
        log_k = log_k && readout::loss_and_gradient(p.model, p.X, p.y, 0.01).loss == std::log(static_cast<double>(K));
    }
    const int dim = readout::feature_count(readout::Encoding::Combined, 196);
    const auto params = readout::SoftmaxModel(20, dim).parameter_count();
    return {worst < 1e-5 && log_k && dim == 22 * 196 && params == 86'260,
            fmt("max gradient relative error %.2e over 50 instances; zero-parameter loss == log K: %s; "
                "feature dimension %d, parameters %lld",
                worst, log_k ? "yes" : "no", dim, static_cast<long long>(params))};
}

// ---------------------------------------------------------------------------
// 8. transport equivalence

std::vector<shd::BinnedSample> first_samples(std::size_t n, bool& real) {
    const char* dir = std::getenv("SHD_DIR");
    real = dir && shd::dataset_present(dir);
    std::vector<shd::RawSample> raw;
    if (real) {
        raw = shd::load(dir).test;
    } else {
        raw = shd::make_surrogate({{0, 1, 2, 3, 10, 11, 12, 13}, 0, 3, 4}).test;
    }
    std::vector<shd::BinnedSample> out;
    for (std::size_t i = 0; i < n && i < raw.size(); ++i) out.push_back(shd::preprocess(raw[i]));
    return out;
}

Outcome transport_equivalence() {
    bool real = false;
    const auto samples = first_samples(20, real);
    const auto spec = netgen::generate({7, 7, 4}, netgen::ConnectivityParams::defaults(), 1);
    auto net = std::make_shared<const elab::ElaboratedNetwork>(elab::elaborate(spec));
    const auto runner = harness::make_inprocess_runner(net, 10.0, 2);
    spikeio::SpikeServer server(runner, {});
    server.start();
    spikeio::SpikeClient client("127.0.0.1", server.port());
    int identical = 0;
    std::size_t spikes = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto in = harness::window_input(samples[i]);
        const auto session = harness::window_session(harness::Split::Test, i, 0);
        const auto local = runner(in, session);
        const auto remote = client.run_window(in, session);
        identical += local == remote;
        spikes += local.count();
    }
    server.stop();

    std::mt19937_64 rng(99);
    int fuzz_ok = 0;
    constexpr int kPackets = 10'000;
    for (int i = 0; i < kPackets; ++i) {
        spikeio::SpikePacket p;
        p.kind = static_cast<spikeio::PacketKind>(rng() % 6);
        p.session = static_cast<std::uint32_t>(rng());
        p.sequence = static_cast<std::uint32_t>(rng());
        p.events.resize(rng() % (spikeio::kMaxEventsPerPacket + 1));
        for (auto& e : p.events) e = {static_cast<std::uint32_t>(rng()), static_cast<std::uint16_t>(rng())};
        const auto bytes = spikeio::encode(p);
        fuzz_ok += bytes.size() <= spikeio::kMaxDatagram && spikeio::decode(bytes) == p;
    }
    const bool ok = samples.size() == 20 && identical == 20 && spikes > 0 && fuzz_ok == kPackets;
    return {ok, fmt("%d/%zu %s windows identical over UDP loopback (%zu output spikes); codec round trip %d/%d",
                    identical, samples.size(), real ? "SHD" : "surrogate", spikes, fuzz_ok, kPackets)};
}

// ---------------------------------------------------------------------------
// 9 and 10. desk-scale pipeline and its determinism

harness::ExperimentConfig desk_config(const fs::path& out) {
    harness::ExperimentConfig c;
    c.output_dir = out.string();
    if (const char* dir = std::getenv("SHD_DIR"); dir && shd::dataset_present(dir)) {
        c.dataset.source = harness::DatasetSource::Shd;
        c.dataset.shd_dir = dir;
    }
    return c;
}

struct DeskRun {
    harness::RunReport report;
    double seconds = 0;
};

DeskRun run_desk(const fs::path& out, const fs::path& log_file, bool fresh) {
    const auto config = desk_config(out);
    if (fresh) fs::remove_all(harness::run_directory(config));
    fs::create_directories(out);
    std::ofstream log(log_file);
    const auto t0 = std::chrono::steady_clock::now();
    DeskRun r{harness::run_experiment(config, &log), 0};
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

double accuracy_of(const harness::RunReport& r, readout::Encoding e) {
    for (const auto& x : r.encodings) {
        if (x.encoding == e) return x.accuracy;
    }
    return -1;
}

Outcome desk_performance(const DeskRun& run) {
    const auto& r = run.report;
    const double combined = accuracy_of(r, readout::Encoding::Combined);
    const double rate = accuracy_of(r, readout::Encoding::Rate);
    const double latency = accuracy_of(r, readout::Encoding::Latency);
    const bool source_real = desk_config(".").dataset.source == harness::DatasetSource::Shd;
    const bool ok = r.mean_accuracy >= 0.375 && combined >= rate - 0.02 && combined >= latency - 0.02;
    return {ok, fmt("%s, %zu train / %zu test samples: combined %.4f, rate %.4f, latency %.4f "
                    "(chance 0.125, floor 0.375); %.0f s",
                    source_real ? "SHD subset" : "surrogate dataset (SHD_DIR not set)", r.train_samples,
                    r.test_samples, combined, rate, latency, run.seconds)};
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism(const DeskRun& a, const DeskRun& b) {
    int identical = 0;
    std::size_t bytes = 0;
    for (const char* name : {"features_train.bin", "features_test.bin"}) {
        const auto x = slurp(a.report.run_dir / name);
        const auto y = slurp(b.report.run_dir / name);
        identical += !x.empty() && x == y;
        bytes += x.size();
    }
    bool same_acc = a.report.accuracies == b.report.accuracies;
    for (const auto& e : a.report.encodings) same_acc = same_acc && accuracy_of(b.report, e.encoding) == e.accuracy;
    return {identical == 2 && same_acc && a.report.run_dir != b.report.run_dir,
            fmt("%d/2 feature matrices byte-identical (%zu bytes); accuracy %.6f vs %.6f", identical, bytes,
                a.report.mean_accuracy, b.report.mean_accuracy)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-10"};
    std::string work_dir = "acceptance_work";
    std::vector<int> only;
    bool keep = false;
    app.add_option("--work-dir", work_dir, "Scratch directory for the pipeline runs")->capture_default_str();
    app.add_option("--only", only, "Run just these criteria");
    app.add_flag("--keep", keep, "Reuse cached observations of earlier executions");
    CLI11_PARSE(app, argc, argv);
    const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}
                                                : std::set<int>(only.begin(), only.end());

    const std::vector<std::pair<const char*, std::function<Outcome()>>> fast = {
        {"neuron behavioral fidelity", neuron_fidelity},
        {"pulse-width law", pulse_width_law},
        {"underflow and overlap semantics", underflow_and_overlap},
        {"weight structure", weight_structure},
        {"topology statistics", topology_statistics},
        {"resource and scaling consistency", resource_scaling},
        {"readout correctness", readout_correctness},
        {"transport equivalence", transport_equivalence},
    };
    int failures = 0;
    const auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail
                  << std::endl;
    };
    for (std::size_t i = 0; i < fast.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (selected.count(id)) report(id, fast[i].first, fast[i].second);
    }

    if (selected.count(9) || selected.count(10)) {
        const fs::path work(work_dir);
        std::optional<DeskRun> first;
        std::string first_error;
        try {
            first = run_desk(work / "first", work / "first.log", !keep);
        } catch (const std::exception& e) {
            first_error = e.what();
        }
        const auto failed = [&] { return Outcome{false, "pipeline error: " + first_error}; };
        if (selected.count(9)) {
            report(9, "desk-scale task performance", [&] { return first ? desk_performance(*first) : failed(); });
        }
        if (selected.count(10)) {
            report(10, "determinism", [&] {
                if (!first) return failed();
                const auto second = run_desk(work / "second", work / "second.log", !keep);
                return determinism(*first, second);
            });
        }
    }
    std::cout << (selected.size() - static_cast<std::size_t>(failures)) << "/" << selected.size()
              << " criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
