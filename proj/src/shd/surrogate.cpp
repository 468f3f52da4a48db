#include "bsnn/shd.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

namespace bsnn::shd {

namespace {

struct Track {
    double u0, um, u1;  // start, mid and end centre unit
    double begin, end;  // active span as a fraction of the utterance
    double rate;        // peak spike probability per unit per ms
    double width;       // spectral spread in units
};

struct Prototype {
    double duration;
    std::vector<Track> tracks;
};

std::uint64_t stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{seed & 0xFFFFFFFFu, seed >> 32, a, b, std::uint64_t{0x5348445F}};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (std::uint64_t{words[0]} << 32) | words[1];
}

Prototype prototype_for(int label, std::uint64_t seed) {
    std::mt19937_64 rng(stream(seed, static_cast<std::uint64_t>(label), 0));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Prototype p;
    p.duration = 0.45 + 0.35 * u(rng);
    const int n_tracks = 3 + static_cast<int>(rng() % 2);
    for (int k = 0; k < n_tracks; ++k) {
        Track t;
        t.u0 = 60 + 580 * u(rng);
        t.u1 = std::clamp(t.u0 + 240 * (u(rng) - 0.5), 20.0, 680.0);
        t.um = std::clamp(0.5 * (t.u0 + t.u1) + 160 * (u(rng) - 0.5), 20.0, 680.0);
        t.begin = 0.3 * u(rng);
        t.end = 0.6 + 0.4 * u(rng);
        t.rate = 0.3 + 0.5 * u(rng);
        t.width = 10 + 20 * u(rng);
        p.tracks.push_back(t);
    }
    return p;
}

RawSample render(const Prototype& proto, int label, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);
    const double warp = 0.85 + 0.3 * u(rng);
    const double duration = proto.duration * warp;
    const double onset = 0.01 + 0.04 * u(rng);
    const double shift = 12.0 * n01(rng);
    std::vector<double> gain(proto.tracks.size());
    for (auto& g : gain) g = 0.7 + 0.6 * u(rng);

    std::vector<std::pair<float, std::uint16_t>> spikes;
    const int steps = static_cast<int>(duration * 1000.0);
    constexpr double kNoisePerUnitMs = 0.0005;
    for (int ms = 0; ms < steps; ++ms) {
        const double s = static_cast<double>(ms) / steps;
        const auto emit = [&](int unit) {
            const double t = onset + (ms + u(rng)) * 1e-3;
            spikes.emplace_back(static_cast<float>(t), static_cast<std::uint16_t>(unit));
        };
        for (std::size_t k = 0; k < proto.tracks.size(); ++k) {
            const Track& tr = proto.tracks[k];
            if (s < tr.begin || s > tr.end) continue;
            const double a = (s - tr.begin) / (tr.end - tr.begin);
            const double centre = (1 - a) * (1 - a) * tr.u0 + 2 * a * (1 - a) * tr.um +
                                  a * a * tr.u1 + shift;
            const int lo = std::max(0, static_cast<int>(centre - 2 * tr.width));
            const int hi = std::min(kUnits - 1, static_cast<int>(centre + 2 * tr.width));
            for (int unit = lo; unit <= hi; ++unit) {
                const double z = (unit - centre) / tr.width;
                if (u(rng) < 0.25 * tr.rate * gain[k] * std::exp(-z * z)) emit(unit);
            }
        }
        std::poisson_distribution<int> noise(kNoisePerUnitMs * kUnits);
        for (int i = noise(rng); i > 0; --i) emit(static_cast<int>(rng() % kUnits));
    }
    std::sort(spikes.begin(), spikes.end());
    RawSample out;
    out.label = label;
    for (const auto& [t, unit] : spikes) {
        out.times.push_back(t);
        out.units.push_back(unit);
    }
    return out;
}

} // namespace

Dataset make_surrogate(const SurrogateParams& params) {
    for (int c : params.classes) {
        if (c < 0 || c >= kClasses) throw DatasetError("surrogate class out of range");
    }
    std::vector<Prototype> protos;
    for (int c : params.classes) protos.push_back(prototype_for(c, params.seed));
    Dataset d;
    const auto fill = [&](std::vector<RawSample>& out, int per_class, std::uint64_t split) {
        for (int i = 0; i < per_class; ++i) {
            for (std::size_t k = 0; k < params.classes.size(); ++k) {
                const int label = params.classes[k];
                std::mt19937_64 rng(stream(params.seed, 1000 + static_cast<std::uint64_t>(label),
                                           split * 1'000'000 + static_cast<std::uint64_t>(i)));
                out.push_back(render(protos[k], label, rng));
            }
        }
    };
    fill(d.train, params.train_per_class, 1);
    fill(d.test, params.test_per_class, 2);
    return d;
}

} // namespace bsnn::shd
