#include "bsnn/harness.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace bsnn;
namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw std::runtime_error(file.string() + ": cannot open for writing");
    return out;
}

netgen::GridDims parse_grid(const std::string& text) {
    netgen::GridDims d;
    char x1 = 0, x2 = 0;
    std::istringstream in(text);
    if (!(in >> d.x >> x1 >> d.y >> x2 >> d.z) || x1 != 'x' || x2 != 'x' || !in.eof()) {
        throw std::invalid_argument("grid must look like 7x7x4, got '" + text + "'");
    }
    return d;
}

spikeio::SpikeTrainInput read_events_csv(const fs::path& file, int channels) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error(file.string() + ": cannot open");
    spikeio::SpikeTrainInput input;
    input.channels = channels;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#' || line.rfind("step", 0) == 0) continue;
        unsigned step = 0, channel = 0;
        if (std::sscanf(line.c_str(), "%u,%u", &step, &channel) != 2) {
            throw std::invalid_argument(file.string() + ":" + std::to_string(lineno) + ": expected step,channel");
        }
        input.events.push_back({step, static_cast<std::uint16_t>(channel)});
    }
    std::sort(input.events.begin(), input.events.end());
    input.validate();
    return input;
}

void write_observation_csv(const spikeio::ObservationMatrix& o, std::ostream& out) {
    out << "bin,neuron\n";
    for (int t = 0; t < o.bins(); ++t) {
        for (int n = 0; n < o.channels(); ++n) {
            if (o.get(t, n)) out << t << ',' << n << '\n';
        }
    }
}

std::shared_ptr<const elab::ElaboratedNetwork> build_network(const harness::ExperimentConfig& c) {
    const auto spec = netgen::generate(c.dims, c.connectivity, c.topology_seed);
    return std::make_shared<const elab::ElaboratedNetwork>(elab::elaborate(spec));
}

harness::Observations cached(const harness::ExperimentConfig& c, harness::Split split, int repeat) {
    const auto file = harness::observation_cache(harness::run_directory(c), split, repeat);
    harness::Observations obs;
    if (!harness::read_observations(file, harness::config_hash(c), obs)) {
        throw std::runtime_error(file.string() + ": no observations for this config; run `bsnn simulate --config` first");
    }
    return obs;
}

void wait_for_signal() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    int sig = 0;
    sigwait(&set, &sig);
}

void block_termination_signals() {
    // Blocked before any thread starts so sigwait is the only receiver.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Boolean spiking reservoir: network generation, gate-level simulation and readout"};
    app.require_subcommand(1);

    std::string config_file;
    std::string mode_name = "combined";
    int repeat = 0;

    // generate
    auto* gen = app.add_subcommand("generate", "Sample a reservoir connectome");
    std::string grid = "7x7x4", network_out = "network.json", delays_csv, weights_csv;
    std::uint64_t seed = 0;
    gen->add_option("--grid", grid, "X x Y x Z neurons")->capture_default_str();
    gen->add_option("--seed", seed, "Topology seed")->required();
    gen->add_option("--config", config_file, "Take connectivity parameters from this config");
    gen->add_option("-o,--out", network_out, "Connectome JSON")->capture_default_str();
    gen->add_option("--delays-csv", delays_csv, "Delay adjacency matrix (ps)");
    gen->add_option("--weights-csv", weights_csv, "Signed weight adjacency matrix");

    // elaborate
    auto* elb = app.add_subcommand("elaborate", "Build the gate-level netlist and estimate resources");
    std::string network_in, verilog_out, netlist_out, resources_out;
    bool with_overhead = false;
    elb->add_option("-n,--network", network_in, "Connectome JSON")->required()->check(CLI::ExistingFile);
    elb->add_option("--verilog", verilog_out, "Structural Verilog output");
    elb->add_option("--netlist", netlist_out, "Plain-text netlist output");
    elb->add_option("--resources", resources_out, "Resource CSV output");
    elb->add_flag("--overhead", with_overhead, "Include the I/O infrastructure");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate one window, or every window of a config");
    std::string events_in, obs_out = "observation.csv", vcd_out;
    double jitter_ps = 0.0;
    std::uint64_t jitter_seed = 0;
    sim->add_option("--config", config_file, "Batch mode: simulate every window into the run directory");
    sim->add_option("-n,--network", network_in, "Single-window mode: connectome JSON");
    sim->add_option("--events", events_in, "Single-window mode: CSV of step,channel input events");
    sim->add_option("-o,--out", obs_out, "Observation CSV (bin,neuron)")->capture_default_str();
    sim->add_option("--vcd", vcd_out, "Waveform dump of every neuron output");
    sim->add_option("--jitter-ps", jitter_ps, "Gate delay jitter sigma");
    sim->add_option("--jitter-seed", jitter_seed, "Jitter seed");

    // serve
    auto* srv = app.add_subcommand("serve", "Serve windows over UDP until interrupted");
    std::string bind = "127.0.0.1";
    std::uint16_t port = 0;
    int workers = 1;
    srv->add_option("--config", config_file, "Network, jitter and seeds from this config");
    srv->add_option("-n,--network", network_in, "Connectome JSON (instead of --config)");
    srv->add_option("--bind", bind, "Bind address")->capture_default_str();
    srv->add_option("--port", port, "UDP port (0 picks one)")->capture_default_str();
    srv->add_option("--workers", workers, "Simulation threads")->capture_default_str();
    srv->add_option("--jitter-ps", jitter_ps, "Gate delay jitter sigma");
    srv->add_option("--jitter-seed", jitter_seed, "Base jitter seed");

    // encode / train / evaluate work on the run directory of a config
    auto* enc = app.add_subcommand("encode", "Encode cached observations into feature matrices");
    enc->add_option("--config", config_file, "Experiment config")->required()->check(CLI::ExistingFile);
    enc->add_option("--mode", mode_name, "rate | latency | combined")->capture_default_str();
    enc->add_option("--repeat", repeat, "Repeat index")->capture_default_str();

    auto* trn = app.add_subcommand("train", "Train the readout on cached observations");
    double C = -1;
    trn->add_option("--config", config_file, "Experiment config")->required()->check(CLI::ExistingFile);
    trn->add_option("--mode", mode_name, "rate | latency | combined")->capture_default_str();
    trn->add_option("--repeat", repeat, "Repeat index")->capture_default_str();
    trn->add_option("--C", C, "Inverse regularization strength (default: from config)");

    auto* evl = app.add_subcommand("evaluate", "Evaluate a readout checkpoint on the test split");
    std::string model_in;
    evl->add_option("--config", config_file, "Experiment config")->required()->check(CLI::ExistingFile);
    evl->add_option("--model", model_in, "Checkpoint")->required()->check(CLI::ExistingFile);
    evl->add_option("--repeat", repeat, "Repeat index")->capture_default_str();

    // run
    auto* run = app.add_subcommand("run", "Full pipeline: generate, elaborate, simulate, train, evaluate");
    bool quiet = false;
    std::string output_dir;
    int run_workers = -1;
    run->add_option("--config", config_file, "Experiment config")->required()->check(CLI::ExistingFile);
    run->add_option("--output-dir", output_dir, "Override the output directory");
    run->add_option("--workers", run_workers, "Override the worker count");
    run->add_flag("-q,--quiet", quiet, "Only print the summary");

    // sweep
    auto* swp = app.add_subcommand("sweep", "Resource scaling over 7x7xL grids");
    int first = 2, last = 5, seeds = 5;
    std::string sweep_out;
    swp->add_option("--first", first, "First layer count")->capture_default_str();
    swp->add_option("--last", last, "Last layer count")->capture_default_str();
    swp->add_option("--seeds", seeds, "Networks averaged per size")->capture_default_str();
    swp->add_option("-o,--out", sweep_out, "CSV output (default: stdout)");

    // raster
    auto* ras = app.add_subcommand("raster", "Raster plot of one cached window");
    std::string split_name = "test", prefix = "raster";
    std::size_t sample = 0;
    int run_index = 0;
    double duration_ns = 10240.0;
    ras->add_option("--config", config_file, "Experiment config")->required()->check(CLI::ExistingFile);
    ras->add_option("--split", split_name, "train | test")->capture_default_str();
    ras->add_option("--sample", sample, "Sample index")->capture_default_str();
    ras->add_option("--run", run_index, "Run index")->capture_default_str();
    ras->add_option("--repeat", repeat, "Repeat index")->capture_default_str();
    ras->add_option("--duration-ns", duration_ns, "Plotted span from window start")->capture_default_str();
    ras->add_option("-o,--out-prefix", prefix, "Writes <prefix>.csv and <prefix>.svg")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            auto params = netgen::ConnectivityParams::defaults();
            if (!config_file.empty()) params = harness::load_config(config_file).connectivity;
            const auto spec = netgen::generate(parse_grid(grid), params, seed);
            netgen::save_spec(spec, network_out);
            if (!delays_csv.empty() || !weights_csv.empty()) {
                const auto m = netgen::adjacency_matrices(spec);
                if (!delays_csv.empty()) {
                    auto out = open_out(delays_csv);
                    netgen::write_delay_csv(m, out);
                }
                if (!weights_csv.empty()) {
                    auto out = open_out(weights_csv);
                    netgen::write_weight_csv(m, out);
                }
            }
            std::cout << spec.neuron_count() << " neurons, " << spec.synapses.size() << " synapses -> "
                      << network_out << '\n';
        } else if (*elb) {
            const auto spec = netgen::load_spec(network_in);
            const auto net = elab::elaborate(spec);
            if (!verilog_out.empty()) {
                auto out = open_out(verilog_out);
                elab::emit_hdl(*net.netlist, out);
            }
            if (!netlist_out.empty()) {
                auto out = open_out(netlist_out);
                elab::write_netlist_text(*net.netlist, out);
            }
            elab::ResourceModel model;
            model.include_overhead = with_overhead;
            const auto res = elab::estimate_resources(spec, model);
            if (!resources_out.empty()) {
                auto out = open_out(resources_out);
                elab::write_resource_csv(res, out);
            }
            std::cout << net.netlist->gates().size() << " gates, " << net.netlist->net_count() << " nets, "
                      << res.logic_elements() << " logic elements (scaling law "
                      << elab::scaling_estimate(static_cast<long long>(spec.neuron_count())) << ")\n";
        } else if (*sim) {
            if (!config_file.empty()) {
                const auto c = harness::load_config(config_file);
                const auto net = build_network(c);
                const auto data = harness::prepare_data(c);
                fs::create_directories(harness::run_directory(c));
                harness::save_config(c, harness::run_directory(c) / "config.json");
                for (int r = 0; r < c.repeats; ++r) {
                    harness::observe_cached(c, net, data.train, harness::Split::Train, r, &std::cout);
                    harness::observe_cached(c, net, data.test, harness::Split::Test, r, &std::cout);
                }
                std::cout << "observations in " << harness::run_directory(c).string() << '\n';
            } else {
                if (network_in.empty() || events_in.empty()) {
                    throw std::invalid_argument("single-window mode needs --network and --events");
                }
                const auto spec = netgen::load_spec(network_in);
                const auto net = elab::elaborate(spec);
                const auto input = read_events_csv(events_in, static_cast<int>(net.input_ports.size()));
                spikeio::WindowConfig wc;
                wc.jitter_sigma_ps = jitter_ps;
                wc.jitter_seed = jitter_seed;
                const auto obs = spikeio::simulate_window(net, input, wc);
                auto out = open_out(obs_out);
                write_observation_csv(obs, out);
                if (!vcd_out.empty()) {
                    auto netlist = net.netlist;
                    if (jitter_ps > 0) {
                        auto copy = std::make_shared<desim::Netlist>(*net.netlist);
                        desim::apply_delay_jitter(*copy, jitter_ps, jitter_seed);
                        netlist = copy;
                    }
                    desim::Simulator s(netlist);
                    spikeio::inject(input, net, s);
                    s.run_until(spikeio::WindowParams{}.end());
                    auto vcd = open_out(vcd_out);
                    desim::write_vcd(s.trace(), vcd);
                }
                std::cout << obs.count() << " output spikes -> " << obs_out << '\n';
            }
        } else if (*srv) {
            std::shared_ptr<const elab::ElaboratedNetwork> net;
            if (!config_file.empty()) {
                const auto c = harness::load_config(config_file);
                net = build_network(c);
                if (!srv->count("--jitter-ps")) jitter_ps = c.jitter_sigma_ps;
                if (!srv->count("--jitter-seed")) jitter_seed = c.jitter_seed;
            } else if (!network_in.empty()) {
                net = std::make_shared<const elab::ElaboratedNetwork>(elab::elaborate(netgen::load_spec(network_in)));
            } else {
                throw std::invalid_argument("serve needs --config or --network");
            }
            block_termination_signals();
            spikeio::ServerOptions options;
            options.bind_address = bind;
            options.port = port;
            options.workers = workers;
            options.input_channels = static_cast<int>(net->input_ports.size());
            spikeio::SpikeServer server(harness::make_inprocess_runner(net, jitter_ps, jitter_seed), options);
            server.start();
            std::cout << "serving on " << bind << ':' << server.port() << std::endl;
            wait_for_signal();
            server.stop();
            const auto st = server.stats();
            std::cout << st.windows_completed << " windows completed, " << st.windows_rejected << " rejected, "
                      << st.malformed << " malformed packets\n";
        } else if (*enc || *trn || *evl) {
            const auto c = harness::load_config(config_file);
            const auto hash = harness::config_hash(c);
            const auto dir = harness::run_directory(c);
            const auto data = harness::prepare_data(c);
            const auto train_obs = cached(c, harness::Split::Train, repeat);
            const auto test_obs = cached(c, harness::Split::Test, repeat);
            const int classes = static_cast<int>(c.dataset.classes.size());
            if (*evl) {
                const auto ckpt = readout::load_checkpoint(model_in);
                const auto test = harness::encode_set(test_obs, data.test.labels, ckpt.scaler, ckpt.encoding);
                const auto ev = readout::evaluate(ckpt.model, test.X, test.y);
                const auto file = dir / ("confusion_" + readout::to_string(ckpt.encoding) + ".csv");
                auto out = open_out(file);
                out << "# config_hash " << hash << '\n';
                readout::write_confusion_csv(ev.confusion, out, c.dataset.classes);
                std::printf("%s accuracy %.4f on %zu test samples\n", readout::to_string(ckpt.encoding).c_str(),
                            ev.accuracy, test.y.size());
            } else {
                const auto mode = readout::encoding_from_string(mode_name);
                const auto scaler = harness::fit_scaler(train_obs);
                const auto train = harness::encode_set(train_obs, data.train.labels, scaler, mode);
                if (*enc) {
                    const auto test = harness::encode_set(test_obs, data.test.labels, scaler, mode);
                    for (const auto& [split, set] : {std::pair{"train", &train}, std::pair{"test", &test}}) {
                        const std::string stem = std::string(split) + "_" + mode_name;
                        harness::write_feature_matrix(dir / ("features_" + stem + ".bin"), hash, set->X);
                        auto labels = open_out(dir / ("labels_" + std::string(split) + ".csv"));
                        labels << "# config_hash " << hash << "\nlabel\n";
                        for (int y : set->y) labels << y << '\n';
                    }
                    std::cout << train.X.rows() << " + " << test.X.rows() << " rows of " << train.X.cols()
                              << " features in " << dir.string() << '\n';
                } else {
                    auto tc = c.train;
                    if (C > 0) tc.C = C;
                    const auto fit = readout::train(train.X, train.y, classes, tc);
                    const auto file = dir / ("model_" + mode_name + ".bsrm");
                    readout::save_checkpoint(file, {fit.model, scaler, mode});
                    std::printf("loss %.6f after %d iterations%s -> %s\n", fit.loss, fit.iterations,
                                fit.converged ? "" : " (not converged)", file.string().c_str());
                }
            }
        } else if (*run) {
            auto c = harness::load_config(config_file);
            if (!output_dir.empty()) c.output_dir = output_dir;
            if (run_workers >= 0) c.workers = run_workers;
            const auto report = harness::run_experiment(c, quiet ? nullptr : &std::cout);
            for (const auto& e : report.encodings) {
                std::printf("%-9s %.4f\n", readout::to_string(e.encoding).c_str(), e.accuracy);
            }
            std::printf("accuracy %.4f +- %.4f over %zu repeat(s); artifacts in %s\n", report.mean_accuracy,
                        report.std_accuracy, report.accuracies.size(), report.run_dir.string().c_str());
        } else if (*swp) {
            const auto rows = harness::sweep_scaling(first, last, seeds);
            if (sweep_out.empty()) {
                harness::write_scaling_csv(rows, std::cout);
            } else {
                auto out = open_out(sweep_out);
                harness::write_scaling_csv(rows, out);
            }
        } else if (*ras) {
            const auto c = harness::load_config(config_file);
            const auto split = split_name == "train" ? harness::Split::Train : harness::Split::Test;
            if (split_name != "train" && split_name != "test") throw std::invalid_argument("split must be train or test");
            const auto obs = cached(c, split, repeat);
            if (sample >= obs.size() || run_index < 0 || static_cast<std::size_t>(run_index) >= obs[sample].size()) {
                throw std::out_of_range("no cached window for that sample/run");
            }
            const auto& o = obs[sample][static_cast<std::size_t>(run_index)];
            std::vector<std::string> labels;
            for (int n = 0; n < o.channels(); ++n) labels.push_back(elab::probe_label(static_cast<netgen::NeuronId>(n)));
            const auto raster = spikeio::raster_from_matrix(o, {}, duration_ns, labels);
            auto csv = open_out(prefix + ".csv");
            csv << "# config_hash " << harness::config_hash(c) << '\n';
            spikeio::write_raster_csv(raster, csv);
            auto svg = open_out(prefix + ".svg");
            spikeio::write_raster_svg(raster, svg, split_name + " sample " + std::to_string(sample));
            std::cout << raster.events.size() << " spikes -> " << prefix << ".csv, " << prefix << ".svg\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
