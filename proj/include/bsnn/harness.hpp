// Experiment orchestration: configuration, the end-to-end classification
// pipeline, encoding comparison and the resource scaling sweep.
#pragma once

#include "bsnn/elaborator.hpp"
#include "bsnn/netgen.hpp"
#include "bsnn/readout.hpp"
#include "bsnn/shd.hpp"
#include "bsnn/spikeio.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace bsnn::harness {

enum class DatasetSource { Shd, Surrogate };
enum class Transport { InProcess, Udp };

struct DatasetConfig {
    DatasetSource source = DatasetSource::Surrogate;
    std::string shd_dir;
    std::vector<int> classes{0, 1, 2, 3, 10, 11, 12, 13};
    int train_per_class = 100;
    int test_per_class = 25;
    bool augment = true;
    double augment_sigma = 20.0;
};

struct ExperimentConfig {
    netgen::GridDims dims{};
    netgen::ConnectivityParams connectivity = netgen::ConnectivityParams::defaults();
    std::uint64_t topology_seed = 1;
    std::uint64_t jitter_seed = 2;
    std::uint64_t augmentation_seed = 3;
    std::uint64_t dataset_seed = 4;
    double jitter_sigma_ps = 10.0;
    int runs_per_sample = 3;
    int repeats = 1;
    readout::Encoding encoding = readout::Encoding::Combined;
    bool compare_encodings = true;
    readout::TrainConfig train{};
    DatasetConfig dataset{};
    Transport transport = Transport::InProcess;
    std::string udp_host = "127.0.0.1";
    std::uint16_t udp_port = 0; // 0 starts an embedded server on an ephemeral port
    std::string output_dir = "runs";
    int workers = 0;            // 0 uses every hardware thread

    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& file);
void save_config(const ExperimentConfig& config, const std::filesystem::path& file);
/// FNV-1a over the canonical JSON of every result-affecting field, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Pipeline stages

struct SampleSet {
    std::vector<shd::BinnedSample> samples;
    std::vector<int> labels; // class index into DatasetConfig::classes
};

struct PreparedData {
    SampleSet train;
    SampleSet test;
};

/// Loads (or synthesises) the class subset, augments the training split and bins both.
PreparedData prepare_data(const ExperimentConfig& config);

/// Window input of one binned sample, clipped to the observation window.
spikeio::SpikeTrainInput window_input(const shd::BinnedSample& sample);

enum class Split : std::uint32_t { Train = 0, Test = 1 };
/// Unique per (split, sample, run); also the UDP session id.
std::uint32_t window_session(Split split, std::size_t sample, int run, int repeat = 0);
std::uint64_t window_jitter_seed(std::uint64_t base, std::uint32_t session);

/// The reservoir a window runs on, addressed by session id.
spikeio::WindowRunner make_inprocess_runner(std::shared_ptr<const elab::ElaboratedNetwork> network,
                                            double jitter_sigma_ps, std::uint64_t jitter_seed);

using Observations = std::vector<std::vector<spikeio::ObservationMatrix>>; // [sample][run]
using Progress = std::function<void(std::size_t done, std::size_t total)>;

/// Runs every window of one split through `make_runner()` (one runner per worker).
Observations observe(const SampleSet& set, Split split, int runs, int repeat, int workers,
                     const std::function<spikeio::WindowRunner()>& make_runner,
                     const Progress& progress = {});

struct EncodedSet {
    readout::Matrix X;
    std::vector<int> y;
};

/// Per-run encodings averaged per sample.
EncodedSet encode_set(const Observations& obs, const std::vector<int>& labels,
                      const readout::ScalerState& scaler, readout::Encoding mode);
readout::ScalerState fit_scaler(const Observations& train);

void write_observations(const std::filesystem::path& file, const std::string& hash,
                        const Observations& obs);
/// Returns false when the file is absent or was written under another hash.
bool read_observations(const std::filesystem::path& file, const std::string& hash,
                       Observations& obs);
void write_feature_matrix(const std::filesystem::path& file, const std::string& hash,
                          const readout::Matrix& X);

/// <output_dir>/run-<hash>
std::filesystem::path run_directory(const ExperimentConfig& config);
std::filesystem::path observation_cache(const std::filesystem::path& run_dir, Split split, int repeat = 0);

/// observe() through the configured transport, reusing a cache written under the
/// same config hash. UDP with port 0 serves from an embedded loopback server.
Observations observe_cached(const ExperimentConfig& config,
                            std::shared_ptr<const elab::ElaboratedNetwork> network,
                            const SampleSet& set, Split split, int repeat,
                            std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// Reports

struct EncodingResult {
    readout::Encoding encoding = readout::Encoding::Combined;
    double accuracy = 0.0;
    bool converged = false;
    int iterations = 0;
};

struct RunReport {
    std::string config_hash;
    std::filesystem::path run_dir;
    std::vector<double> accuracies; // primary encoding, one per repeat
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    Eigen::MatrixXi confusion;      // first repeat
    std::vector<EncodingResult> encodings; // first repeat
    elab::ResourceReport resources;
    std::map<std::string, double> timings; // seconds
    std::size_t train_samples = 0;
    std::size_t test_samples = 0;

    nlohmann::json to_json() const;
};

/// Full pipeline. Artifacts land in <output_dir>/run-<hash>/; on failure a FAILED
/// marker with the error is left next to the partial artifacts.
RunReport run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

struct ScalingRow {
    int layers = 0;
    std::size_t neurons = 0;
    double logic_elements = 0.0; // detailed model, mean over seeds
    long long scaling_estimate = 0;
    double relative_error = 0.0; // (detailed - law) / law
};

std::vector<ScalingRow> sweep_scaling(int first_layers, int last_layers, int seeds = 5,
                                      const netgen::ConnectivityParams& params =
                                          netgen::ConnectivityParams::defaults());
void write_scaling_csv(const std::vector<ScalingRow>& rows, std::ostream& out);

} // namespace bsnn::harness
