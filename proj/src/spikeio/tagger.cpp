#include "bsnn/spikeio.hpp"

#include <bit>
#include <unordered_map>

namespace bsnn::spikeio {

ObservationMatrix::ObservationMatrix(int bins, int channels) : bins_(bins), channels_(channels) {
    if (bins < 0 || channels < 0) {
        throw std::invalid_argument("observation matrix dimensions must be non-negative");
    }
    bits_.assign(static_cast<std::size_t>(bins) * words_per_row(), 0);
}

bool ObservationMatrix::get(int bin, int channel) const {
    if (bin < 0 || bin >= bins_ || channel < 0 || channel >= channels_) {
        throw std::out_of_range("observation index out of range");
    }
    const auto c = static_cast<std::size_t>(channel);
    return (bits_[static_cast<std::size_t>(bin) * words_per_row() + c / 64] >> (c % 64)) & 1U;
}

void ObservationMatrix::set(int bin, int channel, bool v) {
    if (bin < 0 || bin >= bins_ || channel < 0 || channel >= channels_) {
        throw std::out_of_range("observation index out of range");
    }
    const auto c = static_cast<std::size_t>(channel);
    auto& w = bits_[static_cast<std::size_t>(bin) * words_per_row() + c / 64];
    const std::uint64_t mask = std::uint64_t{1} << (c % 64);
    w = v ? (w | mask) : (w & ~mask);
}

std::size_t ObservationMatrix::count() const {
    std::size_t n = 0;
    for (auto w : bits_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

std::vector<int> ObservationMatrix::channel_bins(int channel) const {
    std::vector<int> out;
    for (int t = 0; t < bins_; ++t) {
        if (get(t, channel)) out.push_back(t);
    }
    return out;
}

namespace {

void tag_probe(const desim::ProbeTrace& probe, int column, const WindowParams& window,
               ObservationMatrix& m) {
    for (const auto& tr : probe.transitions) {
        if (!tr.value || tr.time < window.start) continue;
        const SimTime bin = (tr.time - window.start) / window.bin;
        if (bin >= window.bins) break;
        m.set(static_cast<int>(bin), column);
    }
}

} // namespace

ObservationMatrix tag(const desim::WaveTrace& trace, std::span<const std::string> labels,
                      const WindowParams& window) {
    if (labels.size() > kMaxProbes) {
        throw std::invalid_argument("the time tagger observes at most 200 probes");
    }
    if (window.bin <= 0 || window.bins < 0) {
        throw std::invalid_argument("invalid tagging window");
    }
    std::unordered_map<std::string_view, const desim::ProbeTrace*> by_label;
    for (const auto& p : trace.probes) by_label.emplace(p.label, &p);
    ObservationMatrix m(window.bins, static_cast<int>(labels.size()));
    for (std::size_t c = 0; c < labels.size(); ++c) {
        const auto it = by_label.find(labels[c]);
        if (it == by_label.end()) {
            throw std::invalid_argument("no probe labelled '" + labels[c] + "'");
        }
        tag_probe(*it->second, static_cast<int>(c), window, m);
    }
    return m;
}

ObservationMatrix tag(const desim::WaveTrace& trace, const WindowParams& window) {
    std::vector<std::string> labels;
    for (const auto& p : trace.probes) labels.push_back(p.label);
    return tag(trace, labels, window);
}

} // namespace bsnn::spikeio
