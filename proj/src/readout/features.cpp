#include "bsnn/readout.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bsnn::readout {

namespace {

constexpr double kImputationQuantile = 0.99;

double nonzero_or_one(double v) { return v > 0.0 && std::isfinite(v) ? v : 1.0; }

// Value at sorted position k of a multiset given as a histogram over 0..size-1.
double histogram_value(const std::vector<std::uint64_t>& hist, std::uint64_t k) {
    std::uint64_t seen = 0;
    for (std::size_t v = 0; v < hist.size(); ++v) {
        seen += hist[v];
        if (k < seen) return static_cast<double>(v);
    }
    throw std::logic_error("histogram index out of range");
}

std::vector<double> rate_block(const RawFeatures& raw) {
    const std::size_t n = raw.counts.size();
    std::vector<double> out(2 * n, 0.0);
    double total = 0.0;
    for (double c : raw.counts) total += c;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = raw.counts[i];
        out[n + i] = total > 0.0 ? raw.counts[i] / total : 0.0;
    }
    return out;
}

std::vector<double> latency_block(const RawFeatures& raw, double imputation) {
    std::vector<double> out(raw.first_bins.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = raw.first_bins[i] < 0 ? imputation : static_cast<double>(raw.first_bins[i]);
    }
    return out;
}

} // namespace

std::string to_string(Encoding e) {
    switch (e) {
    case Encoding::Rate: return "rate";
    case Encoding::Latency: return "latency";
    case Encoding::Combined: return "combined";
    }
    return "?";
}

Encoding encoding_from_string(const std::string& s) {
    if (s == "rate") return Encoding::Rate;
    if (s == "latency") return Encoding::Latency;
    if (s == "combined") return Encoding::Combined;
    throw std::invalid_argument("unknown encoding '" + s + "' (rate, latency or combined)");
}

int feature_count(Encoding e, int neurons) {
    switch (e) {
    case Encoding::Rate: return 2 * neurons;
    case Encoding::Latency: return kFirstSpikes * neurons;
    case Encoding::Combined: return kFeaturesPerNeuron * neurons;
    }
    return 0;
}

RawFeatures raw_features(const ObservationMatrix& o) {
    const int n = o.channels();
    RawFeatures raw;
    raw.counts.assign(static_cast<std::size_t>(n), 0.0);
    raw.first_bins.assign(static_cast<std::size_t>(n) * kFirstSpikes, -1);
    for (int t = 0; t < o.bins(); ++t) {
        for (int c = 0; c < n; ++c) {
            if (!o.get(t, c)) continue;
            auto& count = raw.counts[static_cast<std::size_t>(c)];
            if (count < kFirstSpikes) {
                raw.first_bins[static_cast<std::size_t>(c) * kFirstSpikes +
                               static_cast<std::size_t>(count)] = t;
            }
            count += 1.0;
        }
    }
    return raw;
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ScalerState fit_scaler(std::span<const ObservationMatrix> train) {
    std::vector<const ObservationMatrix*> ptrs;
    ptrs.reserve(train.size());
    for (const auto& o : train) ptrs.push_back(&o);
    return fit_scaler(std::span<const ObservationMatrix* const>(ptrs));
}

ScalerState fit_scaler(std::span<const ObservationMatrix* const> train) {
    if (train.size() < 2) throw std::invalid_argument("scaler needs at least two observations");
    const int n = train.front()->channels();
    const int bins = train.front()->bins();
    if (n <= 0) throw std::invalid_argument("observations have no channels");
    for (const auto* o : train) {
        if (o->channels() != n || o->bins() != bins) {
            throw std::invalid_argument("observation shapes differ");
        }
    }
    const std::size_t m = train.size();
    std::vector<RawFeatures> raws;
    raws.reserve(m);
    std::vector<std::uint64_t> hist(static_cast<std::size_t>(bins), 0);
    std::uint64_t spikes = 0;
    for (const auto* o : train) {
        raws.push_back(raw_features(*o));
        for (int t = 0; t < bins; ++t) {
            for (int c = 0; c < n; ++c) {
                if (o->get(t, c)) ++hist[static_cast<std::size_t>(t)];
            }
        }
    }
    for (auto h : hist) spikes += h;

    ScalerState s;
    s.neurons = n;
    s.bins = bins;
    if (spikes == 0) {
        s.imputation = static_cast<double>(bins - 1);
    } else {
        const double h = static_cast<double>(spikes - 1) * kImputationQuantile;
        const auto lo = static_cast<std::uint64_t>(std::floor(h));
        const double a = histogram_value(hist, lo);
        const double b = histogram_value(hist, std::min(lo + 1, spikes - 1));
        s.imputation = a + (h - static_cast<double>(lo)) * (b - a);
    }

    const std::size_t rate_dim = 2 * static_cast<std::size_t>(n);
    std::vector<double> mean(rate_dim, 0.0), sq(rate_dim, 0.0);
    std::vector<bool> constant(rate_dim, true);
    const auto first = rate_block(raws.front());
    for (const auto& r : raws) {
        const auto v = rate_block(r);
        for (std::size_t j = 0; j < rate_dim; ++j) {
            mean[j] += v[j];
            if (v[j] != first[j]) constant[j] = false;
        }
    }
    for (auto& v : mean) v /= static_cast<double>(m);
    for (const auto& r : raws) {
        const auto v = rate_block(r);
        for (std::size_t j = 0; j < rate_dim; ++j) sq[j] += (v[j] - mean[j]) * (v[j] - mean[j]);
    }
    s.rate_std.resize(rate_dim);
    for (std::size_t j = 0; j < rate_dim; ++j) {
        s.rate_std[j] = constant[j] ? 1.0 : nonzero_or_one(std::sqrt(sq[j] / static_cast<double>(m)));
    }

    const std::size_t lat_dim = static_cast<std::size_t>(n) * kFirstSpikes;
    s.latency_median.resize(lat_dim);
    s.latency_iqr.resize(lat_dim);
    std::vector<double> column(m);
    for (std::size_t j = 0; j < lat_dim; ++j) {
        for (std::size_t i = 0; i < m; ++i) {
            const int bin = raws[i].first_bins[j];
            column[i] = bin < 0 ? s.imputation : static_cast<double>(bin);
        }
        std::sort(column.begin(), column.end());
        s.latency_median[j] = quantile(column, 0.5);
        s.latency_iqr[j] = nonzero_or_one(quantile(column, 0.75) - quantile(column, 0.25));
    }
    return s;
}

std::vector<double> encode(const ObservationMatrix& o, const ScalerState& scaler, Encoding mode) {
    if (!scaler.fitted()) throw std::invalid_argument("scaler has not been fitted");
    if (o.channels() != scaler.neurons || o.bins() != scaler.bins) {
        throw std::invalid_argument("observation shape differs from the fitted scaler");
    }
    const auto raw = raw_features(o);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(feature_count(mode, scaler.neurons)));
    if (mode != Encoding::Latency) {
        const auto v = rate_block(raw);
        for (std::size_t j = 0; j < v.size(); ++j) out.push_back(v[j] / scaler.rate_std[j]);
    }
    if (mode != Encoding::Rate) {
        const auto v = latency_block(raw, scaler.imputation);
        for (std::size_t j = 0; j < v.size(); ++j) {
            out.push_back((v[j] - scaler.latency_median[j]) / scaler.latency_iqr[j]);
        }
    }
    return out;
}

std::vector<double> average_features(std::span<const std::vector<double>> runs) {
    if (runs.empty()) throw std::invalid_argument("no feature vectors to average");
    std::vector<double> out(runs.front().size(), 0.0);
    for (const auto& r : runs) {
        if (r.size() != out.size()) throw std::invalid_argument("feature vectors differ in length");
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += r[j];
    }
    for (auto& v : out) v /= static_cast<double>(runs.size());
    return out;
}

Matrix stack_rows(std::span<const std::vector<double>> rows) {
    if (rows.empty()) return Matrix(0, 0);
    Matrix X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) {
            throw std::invalid_argument("feature rows differ in length");
        }
        X.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXd>(rows[i].data(), static_cast<Eigen::Index>(rows[i].size()));
    }
    return X;
}

} // namespace bsnn::readout
