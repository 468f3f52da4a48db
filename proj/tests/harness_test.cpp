#include "bsnn/harness.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

namespace bsnn::harness {
namespace {

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() /
               ("bsnn_harness_" + std::to_string(::getpid()) + "_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ExperimentConfig tiny_config(const std::filesystem::path& out) {
    ExperimentConfig c;
    c.dims = {7, 7, 2};
    c.dataset.classes = {0, 1};
    c.dataset.train_per_class = 4;
    c.dataset.test_per_class = 2;
    c.dataset.augment = false;
    c.runs_per_sample = 1;
    c.jitter_sigma_ps = 0.0;
    c.output_dir = out.string();
    c.workers = 1;
    return c;
}

TEST(Config, JsonRoundTripPreservesEveryField) {
    ExperimentConfig c;
    c.dims = {7, 7, 3};
    c.topology_seed = 11;
    c.jitter_seed = 12;
    c.augmentation_seed = 13;
    c.dataset_seed = 14;
    c.jitter_sigma_ps = 4.5;
    c.runs_per_sample = 2;
    c.repeats = 5;
    c.encoding = readout::Encoding::Latency;
    c.compare_encodings = false;
    c.train.C = 0.5;
    c.train.optimizer.max_iterations = 77;
    c.dataset.source = DatasetSource::Shd;
    c.dataset.shd_dir = "/data/shd";
    c.dataset.classes = {5, 15};
    c.dataset.augment_sigma = 7.0;
    c.transport = Transport::Udp;
    c.udp_port = 4242;
    c.connectivity.lambda = 3.0;
    const auto back = config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, SavedFileLoadsBackWithItsHash) {
    const auto dir = scratch("save");
    ExperimentConfig c;
    c.topology_seed = 99;
    save_config(c, dir / "c.json");
    const auto j = nlohmann::json::parse(slurp(dir / "c.json"));
    EXPECT_EQ(j.at("config_hash").get<std::string>(), config_hash(c));
    EXPECT_EQ(config_hash(load_config(dir / "c.json")), config_hash(c));
    std::filesystem::remove_all(dir);
}

TEST(Config, HashIgnoresPlumbingButTracksResults) {
    ExperimentConfig a;
    ExperimentConfig b = a;
    b.output_dir = "elsewhere";
    b.workers = 7;
    b.transport = Transport::Udp;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.jitter_seed = a.jitter_seed + 1;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, RejectsUnknownKeysAndInvalidValues) {
    auto j = to_json(ExperimentConfig{});
    j["runs_per_samples"] = 3;
    EXPECT_THROW(config_from_json(j), std::invalid_argument);
    j = to_json(ExperimentConfig{});
    j["dataset"]["classes"] = {0, 0};
    EXPECT_THROW(config_from_json(j), std::invalid_argument);
    j = to_json(ExperimentConfig{});
    j["runs_per_sample"] = 0;
    EXPECT_THROW(config_from_json(j), std::invalid_argument);
    j = to_json(ExperimentConfig{});
    j["grid"]["x"] = 6;
    EXPECT_THROW(config_from_json(j), std::invalid_argument);
}

TEST(Sessions, AreUniqueAcrossSplitsSamplesRunsAndRepeats) {
    std::set<std::uint32_t> seen;
    for (auto split : {Split::Train, Split::Test}) {
        for (std::size_t s : {0u, 1u, 1799u, (1u << 24) - 1}) {
            for (int run = 0; run < 8; ++run) {
                for (int rep : {0, 1, 15}) EXPECT_TRUE(seen.insert(window_session(split, s, run, rep)).second);
            }
        }
    }
    EXPECT_THROW(window_session(Split::Train, 1u << 24, 0), std::out_of_range);
    EXPECT_THROW(window_session(Split::Train, 0, 8), std::out_of_range);
    EXPECT_NE(window_jitter_seed(2, 0), window_jitter_seed(2, 1));
    EXPECT_NE(window_jitter_seed(2, 5), window_jitter_seed(3, 5));
}

TEST(Pipeline, PreparedDataUsesClassIndicesAndAugmentsOnlyTraining) {
    ExperimentConfig c;
    c.dataset.classes = {3, 12};
    c.dataset.train_per_class = 3;
    c.dataset.test_per_class = 2;
    c.dataset.augment = true;
    const auto data = prepare_data(c);
    EXPECT_EQ(data.train.samples.size(), 12u);
    EXPECT_EQ(data.test.samples.size(), 4u);
    for (int y : data.train.labels) EXPECT_TRUE(y == 0 || y == 1);
    for (std::size_t i = 0; i < data.train.samples.size(); ++i) {
        EXPECT_EQ(data.train.samples[i].label, c.dataset.classes[static_cast<std::size_t>(data.train.labels[i])]);
    }
}

TEST(Pipeline, WindowInputIsClippedToTheObservationWindow) {
    shd::BinnedSample s;
    s.rows.assign(1500, 0);
    s.rows[10] = 1;
    s.rows[1023] = 2;
    s.rows[1024] = 4;
    s.rows[1499] = 8;
    const auto in = window_input(s);
    ASSERT_EQ(in.events.size(), 2u);
    EXPECT_EQ(in.events[1].step, 1023u);
}

TEST(Pipeline, ObservationCacheRoundTripsAndChecksTheHash) {
    const auto dir = scratch("cache");
    Observations obs(3, std::vector<spikeio::ObservationMatrix>(2, spikeio::ObservationMatrix(1024, 98)));
    obs[0][1].set(5, 97);
    obs[2][0].set(1023, 0);
    obs[2][0].set(7, 40);
    write_observations(dir / "o.bin", "0123456789abcdef", obs);
    Observations back;
    ASSERT_TRUE(read_observations(dir / "o.bin", "0123456789abcdef", back));
    EXPECT_EQ(back, obs);
    EXPECT_FALSE(read_observations(dir / "o.bin", "fedcba9876543210", back));
    EXPECT_FALSE(read_observations(dir / "missing.bin", "0123456789abcdef", back));
    std::filesystem::remove_all(dir);
}

TEST(Pipeline, ObserveMatchesDirectSimulationForAnyWorkerCount) {
    const auto spec = netgen::generate({7, 7, 2}, netgen::ConnectivityParams::defaults(), 5);
    auto net = std::make_shared<const elab::ElaboratedNetwork>(elab::elaborate(spec));
    ExperimentConfig c = tiny_config("unused");
    c.dataset.train_per_class = 2;
    const auto data = prepare_data(c);
    auto factory = [&] { return make_inprocess_runner(net, 10.0, 9); };
    const auto one = observe(data.train, Split::Train, 2, 0, 1, factory);
    const auto three = observe(data.train, Split::Train, 2, 0, 3, factory);
    EXPECT_EQ(one, three);
    const auto session = window_session(Split::Train, 1, 1);
    spikeio::WindowConfig wc;
    wc.jitter_sigma_ps = 10.0;
    wc.jitter_seed = window_jitter_seed(9, session);
    EXPECT_EQ(one[1][1], spikeio::simulate_window(*net, window_input(data.train.samples[1]), wc));
    EXPECT_GT(one[1][1].count(), 0u);
}

TEST(Experiment, EndToEndIsReproducibleAndEmitsHashedArtifacts) {
    const auto dir = scratch("e2e");
    auto c = tiny_config(dir / "a");
    const auto first = run_experiment(c);
    c.output_dir = (dir / "b").string();
    const auto second = run_experiment(c);
    EXPECT_EQ(first.config_hash, second.config_hash);
    EXPECT_EQ(first.accuracies, second.accuracies);
    EXPECT_EQ(slurp(first.run_dir / "features_train.bin"), slurp(second.run_dir / "features_train.bin"));
    EXPECT_EQ(slurp(first.run_dir / "features_test.bin"), slurp(second.run_dir / "features_test.bin"));
    EXPECT_EQ(first.run_dir.filename().string(), "run-" + first.config_hash);

    ASSERT_EQ(first.encodings.size(), 3u);
    EXPECT_EQ(first.encodings[0].encoding, readout::Encoding::Combined);
    EXPECT_EQ(first.train_samples, 8u);
    EXPECT_EQ(first.test_samples, 4u);
    EXPECT_EQ(first.confusion.sum(), 4);
    EXPECT_EQ(first.resources.overhead, elab::kOverheadLogicElements);

    for (const char* name : {"metrics.csv", "confusion.csv", "resources.csv", "timings.csv",
                             "raster_output.csv", "raster_input.csv", "raster_output.svg",
                             "raster_input.svg", "network.json", "config.json", "report.json"}) {
        const auto text = slurp(first.run_dir / name);
        EXPECT_NE(text.find(first.config_hash), std::string::npos) << name;
    }
    for (const char* name : {"features_train.bin", "observations_train.bin", "observations_test.bin"}) {
        EXPECT_NE(slurp(first.run_dir / name).find(first.config_hash), std::string::npos) << name;
    }
    const auto ckpt = readout::load_checkpoint(first.run_dir / "model.bsrm");
    EXPECT_EQ(ckpt.scaler.neurons, 98);
    EXPECT_FALSE(std::filesystem::exists(first.run_dir / "FAILED"));
    EXPECT_EQ(netgen::load_spec((first.run_dir / "network.json").string()),
              netgen::generate(c.dims, c.connectivity, c.topology_seed));

    // A rerun in place reuses the observation caches and reproduces the report.
    const auto again = run_experiment(c);
    EXPECT_EQ(again.accuracies, second.accuracies);
    std::filesystem::remove_all(dir);
}

TEST(Experiment, UdpTransportReproducesInProcessResults) {
    const auto dir = scratch("udp");
    auto c = tiny_config(dir / "inproc");
    c.jitter_sigma_ps = 10.0;
    c.compare_encodings = false;
    const auto local = run_experiment(c);
    c.output_dir = (dir / "udp").string();
    c.transport = Transport::Udp;
    c.workers = 2;
    const auto remote = run_experiment(c);
    EXPECT_EQ(local.config_hash, remote.config_hash);
    EXPECT_EQ(slurp(local.run_dir / "observations_train.bin"), slurp(remote.run_dir / "observations_train.bin"));
    EXPECT_EQ(slurp(local.run_dir / "features_test.bin"), slurp(remote.run_dir / "features_test.bin"));
    EXPECT_EQ(local.accuracies, remote.accuracies);
    std::filesystem::remove_all(dir);
}

TEST(Experiment, SilentReservoirStillRunsAndKeepsReceptiveSpikes) {
    const auto dir = scratch("silent");
    auto c = tiny_config(dir);
    c.connectivity.gamma = {};
    c.compare_encodings = false;
    const auto report = run_experiment(c);
    EXPECT_EQ(report.accuracies.size(), 1u);
    Observations obs;
    ASSERT_TRUE(read_observations(report.run_dir / "observations_test.bin", report.config_hash, obs));
    for (const auto& runs : obs) {
        for (const auto& o : runs) {
            for (int n = 49; n < 98; ++n) EXPECT_TRUE(o.channel_bins(n).empty());
        }
    }
    std::filesystem::remove_all(dir);
}

TEST(Experiment, RepeatsReportMeanAndSampleStd) {
    const auto dir = scratch("repeats");
    auto c = tiny_config(dir);
    c.repeats = 2;
    c.jitter_sigma_ps = 25.0;
    c.compare_encodings = false;
    c.dataset.train_per_class = 2;
    c.dataset.test_per_class = 1;
    const auto report = run_experiment(c);
    ASSERT_EQ(report.accuracies.size(), 2u);
    const double mean = (report.accuracies[0] + report.accuracies[1]) / 2;
    EXPECT_DOUBLE_EQ(report.mean_accuracy, mean);
    EXPECT_NEAR(report.std_accuracy, std::abs(report.accuracies[0] - report.accuracies[1]) / std::sqrt(2.0), 1e-12);
    EXPECT_TRUE(std::filesystem::exists(report.run_dir / "features_train_r1.bin"));
    std::filesystem::remove_all(dir);
}

TEST(Experiment, FailureLeavesAMarker) {
    const auto dir = scratch("fail");
    auto c = tiny_config(dir);
    c.dataset.source = DatasetSource::Shd;
    c.dataset.shd_dir = (dir / "no_such_dataset").string();
    EXPECT_ANY_THROW(run_experiment(c));
    const auto run_dir = dir / ("run-" + config_hash(c));
    EXPECT_TRUE(std::filesystem::exists(run_dir / "FAILED"));
    EXPECT_TRUE(std::filesystem::exists(run_dir / "network.json"));
    std::filesystem::remove_all(dir);
}

TEST(Scaling, SweepCoversTheDocumentedGridRange) {
    const auto rows = sweep_scaling(2, 5, 2);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows.front().neurons, 98u);
    EXPECT_EQ(rows.back().neurons, 245u);
    for (const auto& r : rows) {
        EXPECT_TRUE(std::isfinite(r.relative_error));
        EXPECT_EQ(r.scaling_estimate, elab::scaling_estimate(static_cast<long long>(r.neurons)));
        EXPECT_GT(r.logic_elements, 0.0);
    }
    std::ostringstream csv;
    write_scaling_csv(rows, csv);
    const std::string text = csv.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
    EXPECT_THROW(sweep_scaling(3, 2), std::invalid_argument);
}

} // namespace
} // namespace bsnn::harness
