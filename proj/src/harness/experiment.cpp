#include "bsnn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <thread>
#include <ostream>
#include <sstream>

namespace bsnn::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::ofstream open_out(const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error(file.string() + ": cannot open for writing");
    return out;
}

// CSV artifacts carry the hash as a leading comment line; SVGs as an XML comment.
std::ofstream open_csv(const std::filesystem::path& file, const std::string& hash) {
    auto out = open_out(file);
    out << "# config_hash " << hash << '\n';
    return out;
}

void write_svg(const std::filesystem::path& file, const std::string& hash,
               const spikeio::RasterWindow& raster, const std::string& title) {
    std::ostringstream svg;
    spikeio::write_raster_svg(raster, svg, title);
    std::string text = svg.str();
    const auto root = text.find("<svg");
    const auto close = root == std::string::npos ? root : text.find('>', root);
    if (close != std::string::npos) text.insert(close + 1, "\n<!-- config_hash " + hash + " -->");
    auto out = open_out(file);
    out << text;
}

std::string repeat_suffix(int repeat) { return repeat == 0 ? "" : "_r" + std::to_string(repeat); }

class ProgressLog {
  public:
    ProgressLog(std::ostream* log, std::string what) : log_(log), what_(std::move(what)) {}

    void operator()(std::size_t done, std::size_t total) {
        if (!log_) return;
        const int decile = static_cast<int>(10 * done / total);
        if (decile == last_ && done != total) return;
        last_ = decile;
        *log_ << "  " << what_ << ' ' << done << '/' << total << " windows, "
              << static_cast<long>(seconds_since(t0_)) << " s\n"
              << std::flush;
    }

  private:
    std::ostream* log_;
    std::string what_;
    Clock::time_point t0_ = Clock::now();
    int last_ = -1;
};

int worker_count(int requested) {
    return requested > 0 ? requested : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

void write_rasters(const std::filesystem::path& dir, const std::string& hash, const shd::BinnedSample& sample,
                   const spikeio::ObservationMatrix& obs, std::size_t neurons) {
    const double view_ns = static_cast<double>(spikeio::WindowParams{}.end()) / 1000.0;
    std::vector<std::string> labels;
    for (std::size_t n = 0; n < neurons; ++n) labels.push_back(elab::probe_label(static_cast<netgen::NeuronId>(n)));
    const auto output = spikeio::raster_from_matrix(obs, {}, view_ns, labels);
    const auto input = spikeio::raster_from_input(window_input(sample), view_ns);
    auto csv = open_csv(dir / "raster_output.csv", hash);
    spikeio::write_raster_csv(output, csv);
    write_svg(dir / "raster_output.svg", hash, output, "reservoir output");
    auto in_csv = open_csv(dir / "raster_input.csv", hash);
    spikeio::write_raster_csv(input, in_csv);
    write_svg(dir / "raster_input.svg", hash, input, "input spikes");
}

} // namespace

std::filesystem::path run_directory(const ExperimentConfig& config) {
    return std::filesystem::path(config.output_dir) / ("run-" + config_hash(config));
}

std::filesystem::path observation_cache(const std::filesystem::path& run_dir, Split split, int repeat) {
    return run_dir / ("observations_" + std::string(split == Split::Train ? "train" : "test") +
                      repeat_suffix(repeat) + ".bin");
}

Observations observe_cached(const ExperimentConfig& config,
                            std::shared_ptr<const elab::ElaboratedNetwork> network,
                            const SampleSet& set, Split split, int repeat, std::ostream* log) {
    const std::string hash = config_hash(config);
    const auto run_dir = run_directory(config);
    const auto cache = observation_cache(run_dir, split, repeat);
    Observations obs;
    if (read_observations(cache, hash, obs) && obs.size() == set.samples.size() &&
        (obs.empty() || obs.front().size() == static_cast<std::size_t>(config.runs_per_sample))) {
        if (log) *log << "  reusing " << cache.filename().string() << '\n';
        return obs;
    }
    const int workers = worker_count(config.workers);
    std::optional<spikeio::SpikeServer> server;
    std::function<spikeio::WindowRunner()> make_runner;
    if (config.transport == Transport::Udp) {
        std::uint16_t port = config.udp_port;
        if (port == 0) {
            spikeio::ServerOptions options;
            options.workers = workers;
            options.input_channels = static_cast<int>(network->input_ports.size());
            server.emplace(make_inprocess_runner(network, config.jitter_sigma_ps, config.jitter_seed), options);
            server->start();
            port = server->port();
        }
        make_runner = [host = config.udp_host, port] {
            auto client = std::make_shared<spikeio::SpikeClient>(host, port);
            return spikeio::WindowRunner([client](const spikeio::SpikeTrainInput& in, std::uint32_t session) {
                return client->run_window(in, session);
            });
        };
    } else {
        make_runner = [&] { return make_inprocess_runner(network, config.jitter_sigma_ps, config.jitter_seed); };
    }
    ProgressLog progress(log, split == Split::Train ? "train" : "test");
    obs = observe(set, split, config.runs_per_sample, repeat, workers, make_runner,
                  [&](std::size_t d, std::size_t t) { progress(d, t); });
    if (server) server->stop();
    std::filesystem::create_directories(run_dir);
    write_observations(cache, hash, obs);
    return obs;
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json enc = nlohmann::json::array();
    for (const auto& e : encodings) {
        enc.push_back({{"encoding", readout::to_string(e.encoding)},
                       {"accuracy", e.accuracy},
                       {"converged", e.converged},
                       {"iterations", e.iterations}});
    }
    nlohmann::json conf = nlohmann::json::array();
    for (Eigen::Index r = 0; r < confusion.rows(); ++r) {
        std::vector<int> row;
        for (Eigen::Index c = 0; c < confusion.cols(); ++c) row.push_back(confusion(r, c));
        conf.push_back(row);
    }
    return {
        {"config_hash", config_hash},
        {"run_dir", run_dir.string()},
        {"accuracies", accuracies},
        {"mean_accuracy", mean_accuracy},
        {"std_accuracy", std_accuracy},
        {"confusion", conf},
        {"encodings", enc},
        {"resources",
         {{"neurons", resources.neurons},
          {"delay_lines", resources.delay_lines},
          {"synapses", resources.synapses},
          {"dendrites", resources.dendrites},
          {"overhead", resources.overhead},
          {"logic_elements", resources.logic_elements()},
          {"memory_bits", resources.memory_bits}}},
        {"timings_s", timings},
        {"train_samples", train_samples},
        {"test_samples", test_samples},
    };
}

RunReport run_experiment(const ExperimentConfig& config, std::ostream* log) {
    config.validate();
    RunReport report;
    report.config_hash = config_hash(config);
    report.run_dir = run_directory(config);
    const auto& dir = report.run_dir;
    std::filesystem::create_directories(dir);
    std::filesystem::remove(dir / "FAILED");
    try {
        const auto t_total = Clock::now();
        save_config(config, dir / "config.json");

        auto t0 = Clock::now();
        const auto spec = netgen::generate(config.dims, config.connectivity, config.topology_seed);
        {
            auto network_json = nlohmann::json::parse(netgen::to_json_text(spec));
            network_json["config_hash"] = report.config_hash;
            open_out(dir / "network.json") << network_json.dump(1) << '\n';
        }
        report.resources = elab::estimate_resources(spec, elab::ResourceModel{.include_overhead = true});
        {
            auto out = open_csv(dir / "resources.csv", report.config_hash);
            elab::write_resource_csv(report.resources, out);
        }
        auto network = std::make_shared<const elab::ElaboratedNetwork>(elab::elaborate(spec));
        report.timings["generate_elaborate"] = seconds_since(t0);
        if (log) {
            *log << "network " << spec.neuron_count() << " neurons, " << spec.synapses.size()
                 << " synapses, " << network->netlist->gates().size() << " gates\n";
        }

        t0 = Clock::now();
        const auto data = prepare_data(config);
        report.timings["prepare_data"] = seconds_since(t0);
        report.train_samples = data.train.samples.size();
        report.test_samples = data.test.samples.size();
        if (log) *log << "data " << report.train_samples << " train, " << report.test_samples << " test samples\n";

        const int classes = static_cast<int>(config.dataset.classes.size());
        std::vector<readout::Encoding> modes{config.encoding};
        if (config.compare_encodings) {
            for (auto m : {readout::Encoding::Rate, readout::Encoding::Latency, readout::Encoding::Combined}) {
                if (m != config.encoding) modes.push_back(m);
            }
        }
        auto metrics = open_csv(dir / "metrics.csv", report.config_hash);
        metrics << "repeat,encoding,accuracy,converged,iterations\n";

        double simulate_s = 0, train_s = 0;
        for (int repeat = 0; repeat < config.repeats; ++repeat) {
            const std::string sfx = repeat_suffix(repeat);
            t0 = Clock::now();
            const auto train_obs = observe_cached(config, network, data.train, Split::Train, repeat, log);
            const auto test_obs = observe_cached(config, network, data.test, Split::Test, repeat, log);
            simulate_s += seconds_since(t0);

            t0 = Clock::now();
            const auto scaler = fit_scaler(train_obs);
            for (std::size_t m = 0; m < modes.size(); ++m) {
                const auto train_set = encode_set(train_obs, data.train.labels, scaler, modes[m]);
                const auto test_set = encode_set(test_obs, data.test.labels, scaler, modes[m]);
                const auto fit = readout::train(train_set.X, train_set.y, classes, config.train);
                const auto eval = readout::evaluate(fit.model, test_set.X, test_set.y);
                char acc[32];
                std::snprintf(acc, sizeof acc, "%.6f", eval.accuracy);
                metrics << repeat << ',' << readout::to_string(modes[m]) << ',' << acc << ','
                        << (fit.converged ? 1 : 0) << ',' << fit.iterations << '\n';
                if (log) {
                    *log << "  repeat " << repeat << ' ' << readout::to_string(modes[m]) << " accuracy "
                         << acc << (fit.converged ? "" : " (not converged)") << '\n';
                }
                if (repeat == 0) {
                    report.encodings.push_back({modes[m], eval.accuracy, fit.converged, fit.iterations});
                }
                if (m != 0) continue;
                report.accuracies.push_back(eval.accuracy);
                write_feature_matrix(dir / ("features_train" + sfx + ".bin"), report.config_hash, train_set.X);
                write_feature_matrix(dir / ("features_test" + sfx + ".bin"), report.config_hash, test_set.X);
                readout::save_checkpoint(dir / ("model" + sfx + ".bsrm"), {fit.model, scaler, modes[m]});
                if (repeat == 0) {
                    report.confusion = eval.confusion;
                    auto out = open_csv(dir / "confusion.csv", report.config_hash);
                    readout::write_confusion_csv(eval.confusion, out, config.dataset.classes);
                }
            }
            train_s += seconds_since(t0);
            if (repeat == 0 && !test_obs.empty()) {
                write_rasters(dir, report.config_hash, data.test.samples.front(), test_obs.front().front(), spec.neuron_count());
            }
        }
        metrics.close();

        double sum = 0, sq = 0;
        for (double a : report.accuracies) sum += a;
        report.mean_accuracy = sum / static_cast<double>(report.accuracies.size());
        for (double a : report.accuracies) sq += (a - report.mean_accuracy) * (a - report.mean_accuracy);
        report.std_accuracy = report.accuracies.size() > 1
                                  ? std::sqrt(sq / static_cast<double>(report.accuracies.size() - 1))
                                  : 0.0;
        report.timings["simulate"] = simulate_s;
        report.timings["train_evaluate"] = train_s;
        report.timings["total"] = seconds_since(t_total);
        {
            auto out = open_csv(dir / "timings.csv", report.config_hash);
            out << "stage,seconds\n";
            for (const auto& [stage, s] : report.timings) out << stage << ',' << s << '\n';
        }
        auto out = open_out(dir / "report.json");
        out << report.to_json().dump(2) << '\n';
    } catch (const std::exception& e) {
        std::ofstream failed(dir / "FAILED");
        failed << e.what() << '\n';
        throw;
    }
    return report;
}

std::vector<ScalingRow> sweep_scaling(int first_layers, int last_layers, int seeds,
                                      const netgen::ConnectivityParams& params) {
    if (first_layers < 1 || last_layers < first_layers || seeds < 1) {
        throw std::invalid_argument("sweep needs 1 <= first <= last layers and at least one seed");
    }
    std::vector<ScalingRow> rows;
    for (int layers = first_layers; layers <= last_layers; ++layers) {
        ScalingRow row;
        row.layers = layers;
        const netgen::GridDims dims{7, 7, layers};
        row.neurons = dims.size();
        double total = 0;
        for (int s = 0; s < seeds; ++s) {
            const auto spec = netgen::generate(dims, params, static_cast<std::uint64_t>(s + 1));
            total += static_cast<double>(elab::estimate_resources(spec).logic_elements());
        }
        row.logic_elements = total / seeds;
        row.scaling_estimate = elab::scaling_estimate(static_cast<long long>(row.neurons));
        row.relative_error = (row.logic_elements - static_cast<double>(row.scaling_estimate)) /
                             static_cast<double>(row.scaling_estimate);
        rows.push_back(row);
    }
    return rows;
}

void write_scaling_csv(const std::vector<ScalingRow>& rows, std::ostream& out) {
    out << "layers,neurons,logic_elements,scaling_estimate,relative_error\n";
    for (const auto& r : rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%d,%zu,%.1f,%lld,%.4f\n", r.layers, r.neurons, r.logic_elements,
                      r.scaling_estimate, r.relative_error);
        out << line;
    }
}

} // namespace bsnn::harness
