#include "bsnn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

namespace bsnn::harness {

static_assert(std::endian::native == std::endian::little, "binary artifacts are little-endian");

namespace {

constexpr char kObservationMagic[4] = {'B', 'S', 'O', 'B'};
constexpr char kFeatureMagic[4] = {'B', 'S', 'F', 'M'};
constexpr std::uint32_t kArtifactVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
bool get(std::istream& in, T& v) {
    return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

void put_header(std::ostream& out, const char (&magic)[4], const std::string& hash) {
    out.write(magic, 4);
    put<std::uint32_t>(out, kArtifactVersion);
    std::string h = hash;
    h.resize(16, ' ');
    out.write(h.data(), 16);
}

int class_index(const std::vector<int>& classes, int label) {
    const auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) throw std::logic_error("sample label outside the class subset");
    return static_cast<int>(it - classes.begin());
}

SampleSet bin_samples(const std::vector<shd::RawSample>& raw, const std::vector<int>& classes) {
    SampleSet set;
    set.samples.reserve(raw.size());
    for (const auto& s : raw) {
        set.samples.push_back(shd::preprocess(s));
        set.labels.push_back(class_index(classes, s.label));
    }
    return set;
}

} // namespace

PreparedData prepare_data(const ExperimentConfig& config) {
    const auto& d = config.dataset;
    shd::Dataset source;
    if (d.source == DatasetSource::Shd) {
        const auto full = shd::load(d.shd_dir);
        source.train = shd::select_classes(full.train, d.classes, d.train_per_class);
        source.test = shd::select_classes(full.test, d.classes, d.test_per_class);
    } else {
        source = shd::make_surrogate(
            shd::SurrogateParams{d.classes, d.train_per_class, d.test_per_class, config.dataset_seed});
    }
    if (d.augment) {
        source.train = shd::augment_training_set(source.train, d.augment_sigma, config.augmentation_seed);
    }
    return PreparedData{bin_samples(source.train, d.classes), bin_samples(source.test, d.classes)};
}

spikeio::SpikeTrainInput window_input(const shd::BinnedSample& sample) {
    auto in = shd::to_spike_input(sample);
    std::erase_if(in.events, [](const spikeio::InputEvent& e) {
        return e.step >= static_cast<std::uint32_t>(spikeio::kWindowBins);
    });
    return in;
}

std::uint32_t window_session(Split split, std::size_t sample, int run, int repeat) {
    if (sample >= (std::size_t{1} << 24) || run < 0 || run >= 8 || repeat < 0 || repeat >= 16) {
        throw std::out_of_range("window index beyond the session id space");
    }
    return (static_cast<std::uint32_t>(split) << 31) | (static_cast<std::uint32_t>(repeat) << 27) |
           (static_cast<std::uint32_t>(sample) << 3) | static_cast<std::uint32_t>(run);
}

std::uint64_t window_jitter_seed(std::uint64_t base, std::uint32_t session) {
    std::uint64_t z = base ^ (0x9E3779B97F4A7C15ULL * (std::uint64_t{session} + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

spikeio::WindowRunner make_inprocess_runner(std::shared_ptr<const elab::ElaboratedNetwork> network,
                                            double jitter_sigma_ps, std::uint64_t jitter_seed) {
    return [network = std::move(network), jitter_sigma_ps, jitter_seed](
               const spikeio::SpikeTrainInput& input, std::uint32_t session) {
        spikeio::WindowConfig cfg;
        cfg.jitter_sigma_ps = jitter_sigma_ps;
        cfg.jitter_seed = window_jitter_seed(jitter_seed, session);
        return spikeio::simulate_window(*network, input, cfg);
    };
}

Observations observe(const SampleSet& set, Split split, int runs, int repeat, int workers,
                     const std::function<spikeio::WindowRunner()>& make_runner,
                     const Progress& progress) {
    const std::size_t total = set.samples.size() * static_cast<std::size_t>(runs);
    Observations out(set.samples.size(), std::vector<spikeio::ObservationMatrix>(static_cast<std::size_t>(runs)));
    if (total == 0) return out;
    const int threads = std::clamp<int>(workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency()),
                                        1, static_cast<int>(total));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::size_t done = 0;
    std::mutex mutex;
    std::exception_ptr error;
    const auto work = [&] {
        try {
            auto runner = make_runner();
            for (std::size_t job = next++; job < total && !failed; job = next++) {
                const std::size_t sample = job / static_cast<std::size_t>(runs);
                const int run = static_cast<int>(job % static_cast<std::size_t>(runs));
                out[sample][static_cast<std::size_t>(run)] =
                    runner(window_input(set.samples[sample]), window_session(split, sample, run, repeat));
                std::lock_guard lock(mutex);
                ++done;
                if (progress) progress(done, total);
            }
        } catch (...) {
            std::lock_guard lock(mutex);
            if (!error) error = std::current_exception();
            failed = true;
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

readout::ScalerState fit_scaler(const Observations& train) {
    std::vector<const spikeio::ObservationMatrix*> all;
    for (const auto& runs : train) {
        for (const auto& o : runs) all.push_back(&o);
    }
    return readout::fit_scaler(std::span<const spikeio::ObservationMatrix* const>(all));
}

EncodedSet encode_set(const Observations& obs, const std::vector<int>& labels,
                      const readout::ScalerState& scaler, readout::Encoding mode) {
    if (obs.size() != labels.size()) throw std::invalid_argument("observations and labels differ in count");
    EncodedSet set;
    set.y = labels;
    set.X.resize(static_cast<Eigen::Index>(obs.size()), readout::feature_count(mode, scaler.neurons));
    for (std::size_t i = 0; i < obs.size(); ++i) {
        std::vector<std::vector<double>> runs;
        for (const auto& o : obs[i]) runs.push_back(readout::encode(o, scaler, mode));
        const auto avg = readout::average_features(runs);
        set.X.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXd>(avg.data(), static_cast<Eigen::Index>(avg.size()));
    }
    return set;
}

void write_observations(const std::filesystem::path& file, const std::string& hash,
                        const Observations& obs) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error(file.string() + ": cannot open for writing");
    put_header(out, kObservationMagic, hash);
    put<std::uint64_t>(out, obs.size());
    put<std::uint32_t>(out, obs.empty() ? 0 : static_cast<std::uint32_t>(obs.front().size()));
    for (const auto& runs : obs) {
        for (const auto& o : runs) {
            put<std::uint32_t>(out, static_cast<std::uint32_t>(o.bins()));
            put<std::uint32_t>(out, static_cast<std::uint32_t>(o.channels()));
            put<std::uint32_t>(out, static_cast<std::uint32_t>(o.count()));
            for (int t = 0; t < o.bins(); ++t) {
                for (int c = 0; c < o.channels(); ++c) {
                    if (!o.get(t, c)) continue;
                    put<std::uint16_t>(out, static_cast<std::uint16_t>(t));
                    put<std::uint16_t>(out, static_cast<std::uint16_t>(c));
                }
            }
        }
    }
    if (!out) throw std::runtime_error(file.string() + ": write failed");
}

bool read_observations(const std::filesystem::path& file, const std::string& hash,
                       Observations& obs) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return false;
    char magic[4];
    std::uint32_t version = 0;
    std::string stored(16, ' ');
    if (!in.read(magic, 4) || std::memcmp(magic, kObservationMagic, 4) != 0 || !get(in, version) ||
        version != kArtifactVersion || !in.read(stored.data(), 16)) {
        return false;
    }
    std::string expect = hash;
    expect.resize(16, ' ');
    if (stored != expect) return false;
    std::uint64_t samples = 0;
    std::uint32_t runs = 0;
    if (!get(in, samples) || !get(in, runs)) return false;
    Observations result(samples, std::vector<spikeio::ObservationMatrix>(runs));
    for (auto& per_sample : result) {
        for (auto& o : per_sample) {
            std::uint32_t bins = 0, channels = 0, count = 0;
            if (!get(in, bins) || !get(in, channels) || !get(in, count)) return false;
            o = spikeio::ObservationMatrix(static_cast<int>(bins), static_cast<int>(channels));
            for (std::uint32_t k = 0; k < count; ++k) {
                std::uint16_t t = 0, c = 0;
                if (!get(in, t) || !get(in, c) || t >= bins || c >= channels) return false;
                o.set(t, c);
            }
        }
    }
    obs = std::move(result);
    return true;
}

void write_feature_matrix(const std::filesystem::path& file, const std::string& hash,
                          const readout::Matrix& X) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error(file.string() + ": cannot open for writing");
    put_header(out, kFeatureMagic, hash);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(X.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(X.cols()));
    out.write(reinterpret_cast<const char*>(X.data()),
              static_cast<std::streamsize>(X.size() * static_cast<Eigen::Index>(sizeof(double))));
    if (!out) throw std::runtime_error(file.string() + ": write failed");
}

} // namespace bsnn::harness
