// Spiking Heidelberg Digits ingestion: HDF5 loading, 2 ms / 49-channel binning,
// channel-jitter augmentation, a binary cache and an SHD-like surrogate generator.
#pragma once

#include "bsnn/spikeio.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsnn::shd {

inline constexpr int kUnits = 700;
inline constexpr int kChannels = 49;
inline constexpr int kClasses = 20;
inline constexpr double kBinsPerSecond = 500.0; // 2 ms bins
inline constexpr std::size_t kTrainSize = 8156;
inline constexpr std::size_t kTestSize = 2264;

class DatasetError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RawSample {
    std::vector<float> times; // seconds
    std::vector<std::uint16_t> units;
    int label = 0;

    void validate() const;
    friend bool operator==(const RawSample&, const RawSample&) = default;
};

/// Boolean (bins x 49) array; one 64-bit channel mask per bin.
struct BinnedSample {
    std::vector<std::uint64_t> rows;
    int label = 0;

    int bins() const { return static_cast<int>(rows.size()); }
    bool get(int bin, int channel) const { return (rows.at(bin) >> channel) & 1U; }
    std::size_t active_cells() const;
    friend bool operator==(const BinnedSample&, const BinnedSample&) = default;
};

inline int channel_of(int unit) { return unit * kChannels / kUnits; }
int bin_of(float seconds);

BinnedSample preprocess(const RawSample& sample);

/// Each unit moves by round(N(0, sigma)), clamped to [0, 699]; times are untouched.
RawSample augment(const RawSample& sample, double sigma, std::uint64_t seed);
/// Originals followed by one augmented copy of each, copy i seeded from (seed, i).
std::vector<RawSample> augment_training_set(const std::vector<RawSample>& train, double sigma,
                                            std::uint64_t seed);

/// One input event per active (bin, channel) cell; bin b becomes step b.
spikeio::SpikeTrainInput to_spike_input(const BinnedSample& sample);

struct Dataset {
    std::vector<RawSample> train;
    std::vector<RawSample> test;
};

/// Reads one split file in the official layout (spikes/times, spikes/units, labels).
std::vector<RawSample> read_split(const std::filesystem::path& file);
void write_split(const std::filesystem::path& file, const std::vector<RawSample>& samples);

/// Reads shd_train.h5 and shd_test.h5 from `dir`; with `official_sizes` the split
/// sizes must be 8,156 and 2,264.
Dataset load(const std::filesystem::path& dir, bool official_sizes = true);
bool dataset_present(const std::filesystem::path& dir);

void write_cache(const std::filesystem::path& file, const std::vector<BinnedSample>& samples);
std::vector<BinnedSample> read_cache(const std::filesystem::path& file);

struct SurrogateParams {
    std::vector<int> classes;
    int train_per_class = 100;
    int test_per_class = 25;
    std::uint64_t seed = 1;
};

/// Synthetic spoken-digit-like spike data: each class owns a few drifting formant
/// tracks across the 700 units; samples warp, shift and thin them and add noise.
Dataset make_surrogate(const SurrogateParams& params);

/// First `per_class` samples of each listed class, in dataset order.
std::vector<RawSample> select_classes(const std::vector<RawSample>& samples,
                                      const std::vector<int>& classes, int per_class);

} // namespace bsnn::shd
