#include "bsnn/shd.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

namespace bsnn::shd {

namespace {

constexpr char kCacheMagic[4] = {'B', 'S', 'H', 'D'};
constexpr std::uint32_t kCacheVersion = 1;

std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

template <class T>
void put(std::ostream& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <class T>
T take(std::istream& in, const std::filesystem::path& file) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof b)) {
        throw DatasetError(file.string() + ": truncated cache file");
    }
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T{b[i]} << (8 * i));
    return v;
}

} // namespace

void RawSample::validate() const {
    if (times.size() != units.size()) throw DatasetError("times and units differ in length");
    if (label < 0 || label >= kClasses) throw DatasetError("label out of range");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0f) || !std::isfinite(times[i])) throw DatasetError("negative spike time");
        if (units[i] >= kUnits) throw DatasetError("unit index beyond 699");
    }
}

std::size_t BinnedSample::active_cells() const {
    std::size_t n = 0;
    for (auto r : rows) n += static_cast<std::size_t>(std::popcount(r));
    return n;
}

int bin_of(float seconds) {
    return static_cast<int>(std::floor(static_cast<double>(seconds) * kBinsPerSecond));
}

BinnedSample preprocess(const RawSample& sample) {
    sample.validate();
    BinnedSample out;
    out.label = sample.label;
    int last = -1;
    for (float t : sample.times) last = std::max(last, bin_of(t));
    out.rows.assign(static_cast<std::size_t>(last + 1), 0);
    for (std::size_t i = 0; i < sample.times.size(); ++i) {
        out.rows[static_cast<std::size_t>(bin_of(sample.times[i]))] |=
            std::uint64_t{1} << channel_of(sample.units[i]);
    }
    return out;
}

RawSample augment(const RawSample& sample, double sigma, std::uint64_t seed) {
    RawSample out = sample;
    if (sigma <= 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> shift(0.0, sigma);
    for (auto& u : out.units) {
        const long moved = static_cast<long>(u) + std::lround(shift(rng));
        u = static_cast<std::uint16_t>(std::clamp<long>(moved, 0, kUnits - 1));
    }
    return out;
}

std::vector<RawSample> augment_training_set(const std::vector<RawSample>& train, double sigma,
                                            std::uint64_t seed) {
    std::vector<RawSample> out = train;
    out.reserve(2 * train.size());
    for (std::size_t i = 0; i < train.size(); ++i) out.push_back(augment(train[i], sigma, mix(seed, i)));
    return out;
}

spikeio::SpikeTrainInput to_spike_input(const BinnedSample& sample) {
    spikeio::SpikeTrainInput in{kChannels, {}};
    for (int b = 0; b < sample.bins(); ++b) {
        for (std::uint64_t r = sample.rows[static_cast<std::size_t>(b)]; r; r &= r - 1) {
            in.events.push_back({static_cast<std::uint32_t>(b),
                                 static_cast<std::uint16_t>(std::countr_zero(r))});
        }
    }
    return in;
}

Dataset load(const std::filesystem::path& dir, bool official_sizes) {
    Dataset d;
    d.train = read_split(dir / "shd_train.h5");
    d.test = read_split(dir / "shd_test.h5");
    if (official_sizes) {
        if (d.train.size() != kTrainSize) {
            throw DatasetError((dir / "shd_train.h5").string() + ": expected 8156 samples, found " +
                               std::to_string(d.train.size()));
        }
        if (d.test.size() != kTestSize) {
            throw DatasetError((dir / "shd_test.h5").string() + ": expected 2264 samples, found " +
                               std::to_string(d.test.size()));
        }
    }
    return d;
}

bool dataset_present(const std::filesystem::path& dir) {
    return std::filesystem::is_regular_file(dir / "shd_train.h5") &&
           std::filesystem::is_regular_file(dir / "shd_test.h5");
}

void write_cache(const std::filesystem::path& file, const std::vector<BinnedSample>& samples) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DatasetError(file.string() + ": cannot open for writing");
    out.write(kCacheMagic, 4);
    put<std::uint32_t>(out, kCacheVersion);
    put<std::uint64_t>(out, samples.size());
    for (const auto& s : samples) {
        put<std::uint16_t>(out, static_cast<std::uint16_t>(s.label));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(s.rows.size()));
        for (auto r : s.rows) put<std::uint64_t>(out, r);
    }
    if (!out) throw DatasetError(file.string() + ": write failed");
}

std::vector<BinnedSample> read_cache(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DatasetError(file.string() + ": cannot open cache");
    char magic[4];
    if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kCacheMagic)) {
        throw DatasetError(file.string() + ": not a sample cache");
    }
    if (const auto v = take<std::uint32_t>(in, file); v != kCacheVersion) {
        throw DatasetError(file.string() + ": unsupported cache version " + std::to_string(v));
    }
    const auto n = take<std::uint64_t>(in, file);
    std::vector<BinnedSample> out;
    for (std::uint64_t i = 0; i < n; ++i) {
        BinnedSample s;
        s.label = take<std::uint16_t>(in, file);
        const auto bins = take<std::uint32_t>(in, file);
        s.rows.reserve(bins);
        for (std::uint32_t b = 0; b < bins; ++b) {
            const auto r = take<std::uint64_t>(in, file);
            if (r >> kChannels) throw DatasetError(file.string() + ": channel bits beyond 49");
            s.rows.push_back(r);
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<RawSample> select_classes(const std::vector<RawSample>& samples,
                                      const std::vector<int>& classes, int per_class) {
    std::map<int, int> taken;
    for (int c : classes) taken[c] = 0;
    std::vector<RawSample> out;
    for (const auto& s : samples) {
        auto it = taken.find(s.label);
        if (it == taken.end() || it->second >= per_class) continue;
        ++it->second;
        out.push_back(s);
    }
    return out;
}

} // namespace bsnn::shd
