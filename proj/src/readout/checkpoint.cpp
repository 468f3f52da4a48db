#include "bsnn/readout.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace bsnn::readout {

static_assert(std::endian::native == std::endian::little, "checkpoints are stored little-endian");

namespace {

constexpr char kMagic[4] = {'B', 'S', 'R', 'M'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_doubles(std::ostream& out, const double* p, std::size_t n) {
    put<std::uint64_t>(out, n);
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

class Reader {
  public:
    Reader(std::istream& in, const std::filesystem::path& file) : in_(in), file_(file) {}

    template <class T>
    T get() {
        T v{};
        if (!in_.read(reinterpret_cast<char*>(&v), sizeof v)) fail("truncated");
        return v;
    }

    std::vector<double> doubles(std::uint64_t expected) {
        const auto n = get<std::uint64_t>();
        if (n != expected) fail("array length " + std::to_string(n) + " does not match its header");
        std::vector<double> v(n);
        if (!in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
            fail("truncated");
        }
        return v;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw std::runtime_error(file_.string() + ": " + what);
    }

  private:
    std::istream& in_;
    const std::filesystem::path& file_;
};

} // namespace

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& c) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error(file.string() + ": cannot open for writing");
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(c.encoding));
    put<std::int32_t>(out, c.model.classes());
    put<std::int32_t>(out, c.model.dim());
    put_doubles(out, c.model.W.data(), static_cast<std::size_t>(c.model.W.size()));
    put_doubles(out, c.model.b.data(), static_cast<std::size_t>(c.model.b.size()));
    put<std::int32_t>(out, c.scaler.neurons);
    put<std::int32_t>(out, c.scaler.bins);
    put<double>(out, c.scaler.imputation);
    put_doubles(out, c.scaler.rate_std.data(), c.scaler.rate_std.size());
    put_doubles(out, c.scaler.latency_median.data(), c.scaler.latency_median.size());
    put_doubles(out, c.scaler.latency_iqr.data(), c.scaler.latency_iqr.size());
    if (!out) throw std::runtime_error(file.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error(file.string() + ": cannot open checkpoint");
    Reader r(in, file);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) r.fail("not a readout checkpoint");
    if (const auto v = r.get<std::uint32_t>(); v != kVersion) {
        r.fail("unsupported checkpoint version " + std::to_string(v));
    }
    Checkpoint c;
    const auto enc = r.get<std::uint8_t>();
    if (enc > static_cast<std::uint8_t>(Encoding::Combined)) r.fail("unknown encoding");
    c.encoding = static_cast<Encoding>(enc);
    const auto K = r.get<std::int32_t>();
    const auto d = r.get<std::int32_t>();
    if (K < 0 || d < 0) r.fail("negative model shape");
    c.model = SoftmaxModel(K, d);
    const auto W = r.doubles(static_cast<std::uint64_t>(K) * static_cast<std::uint64_t>(d));
    std::copy(W.begin(), W.end(), c.model.W.data());
    const auto b = r.doubles(static_cast<std::uint64_t>(K));
    std::copy(b.begin(), b.end(), c.model.b.data());
    c.scaler.neurons = r.get<std::int32_t>();
    c.scaler.bins = r.get<std::int32_t>();
    c.scaler.imputation = r.get<double>();
    const auto n = static_cast<std::uint64_t>(std::max(0, c.scaler.neurons));
    c.scaler.rate_std = r.doubles(2 * n);
    c.scaler.latency_median = r.doubles(kFirstSpikes * n);
    c.scaler.latency_iqr = r.doubles(kFirstSpikes * n);
    if (c.scaler.fitted() && feature_count(c.encoding, c.scaler.neurons) != d) {
        r.fail("model dimension does not match the encoding");
    }
    return c;
}

} // namespace bsnn::readout
