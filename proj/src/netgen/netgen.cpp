#include "bsnn/netgen.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace bsnn::netgen {

double distance(const GridPosition& a, const GridPosition& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

NeuronId neuron_id(const GridPosition& p, const GridDims& dims) {
    if (p.x < 0 || p.y < 0 || p.z < 0 || p.x >= dims.x || p.y >= dims.y || p.z >= dims.z) {
        throw std::out_of_range("grid position outside dims");
    }
    return static_cast<NeuronId>(p.x + dims.x * (p.y + dims.y * p.z));
}

GridPosition position_of(NeuronId id, const GridDims& dims) {
    if (id >= dims.size()) {
        throw std::out_of_range("neuron id outside grid");
    }
    const int i = static_cast<int>(id);
    return GridPosition{i % dims.x, (i / dims.x) % dims.y, i / (dims.x * dims.y)};
}

std::string_view to_string(NeuronKind kind) {
    switch (kind) {
    case NeuronKind::Excitatory: return "E";
    case NeuronKind::Inhibitory: return "I";
    case NeuronKind::Receptive: return "R";
    }
    return "?";
}

NeuronKind neuron_kind_from_string(std::string_view s) {
    if (s == "E") return NeuronKind::Excitatory;
    if (s == "I") return NeuronKind::Inhibitory;
    if (s == "R") return NeuronKind::Receptive;
    throw std::invalid_argument("unknown neuron kind: " + std::string(s));
}

neuro::Sign sign_of(NeuronKind kind) {
    return kind == NeuronKind::Inhibitory ? neuro::Sign::Inhibitory : neuro::Sign::Excitatory;
}

ConnectivityParams ConnectivityParams::defaults() {
    ConnectivityParams p;
    constexpr int E = 0, I = 1, R = 2;
    p.gamma[E][I] = 0.3;
    p.gamma[I][E] = 0.3;
    p.gamma[R][E] = 0.3;
    p.gamma[R][I] = 0.3;
    p.gamma[E][E] = 0.15;
    return p;
}

int ConnectivityParams::capacity_of(NeuronKind kind) const {
    switch (kind) {
    case NeuronKind::Excitatory: return capacity_excitatory;
    case NeuronKind::Inhibitory: return capacity_inhibitory;
    case NeuronKind::Receptive: return capacity_receptive;
    }
    return capacity_excitatory;
}

void ConnectivityParams::validate() const {
    for (const auto& row : gamma) {
        for (double g : row) {
            if (!(g >= 0.0 && g <= 1.0)) {
                throw std::invalid_argument("connection gamma must lie in [0, 1]");
            }
        }
    }
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (delay_quantum <= 0) throw std::invalid_argument("delay quantum must be positive");
    if (delay_per_unit < 0 || delay_sigma < 0) {
        throw std::invalid_argument("delay parameters must be non-negative");
    }
    if (weights.empty()) throw std::invalid_argument("weight set is empty");
    for (int w : weights) {
        if (w < 1) throw std::invalid_argument("weights must be >= 1");
    }
    if (!(inhibitory_fraction >= 0.0 && inhibitory_fraction <= 1.0)) {
        throw std::invalid_argument("inhibitory fraction must lie in [0, 1]");
    }
    if (capacity_excitatory < 1 || capacity_inhibitory < 1 || capacity_receptive < 1) {
        throw std::invalid_argument("neuron capacities must be >= 1");
    }
}

void NetworkSpec::validate() const {
    params.validate();
    if (neurons.size() != dims.size()) {
        throw SpecValidationError("neuron count does not match grid dims");
    }
    for (std::size_t i = 0; i < neurons.size(); ++i) {
        if (neurons[i].id != i) throw SpecValidationError("neuron ids must be 0..N-1 in order");
        if (neuron_id(neurons[i].position, dims) != i) {
            throw SpecValidationError("neuron position does not match its id");
        }
    }
    for (const auto& s : synapses) {
        if (s.pre >= neurons.size() || s.post >= neurons.size()) {
            throw SpecValidationError("synapse refers to unknown neuron");
        }
        if (s.pre == s.post) throw SpecValidationError("self-loop synapse");
        if (s.weight < 1) throw SpecValidationError("synapse weight must be >= 1");
        if (s.sign != sign_of(neurons[s.pre].kind)) {
            throw SpecValidationError("synapse sign violates Dale's principle");
        }
        if (s.delay < params.delay_quantum || s.delay % params.delay_quantum != 0) {
            throw SpecValidationError("synapse delay must be a positive multiple of the quantum");
        }
        if (neurons[s.post].kind == NeuronKind::Receptive) {
            throw SpecValidationError("synapse onto a receptive neuron");
        }
    }
    for (NeuronId r : input_map) {
        if (r >= neurons.size() || neurons[r].kind != NeuronKind::Receptive) {
            throw SpecValidationError("input map must target receptive neurons");
        }
    }
}

double connection_probability(const GridPosition& a, const GridPosition& b, NeuronKind pre,
                              NeuronKind post, const ConnectivityParams& params) {
    const double g = params.gamma_of(pre, post);
    if (g <= 0.0) return 0.0;
    const double d = distance(a, b);
    return std::clamp(g * std::exp(-(d * d) / (params.lambda * params.lambda)), 0.0, 1.0);
}

SimTime sample_delay(double dist, const ConnectivityParams& params, std::mt19937_64& rng) {
    const double q = static_cast<double>(params.delay_quantum);
    double raw = static_cast<double>(params.delay_per_unit) * dist;
    if (params.delay_sigma > 0) {
        std::normal_distribution<double> noise(0.0, static_cast<double>(params.delay_sigma));
        raw += noise(rng);
    }
    const auto quanta = static_cast<SimTime>(std::llround(raw / q));
    return std::max<SimTime>(1, quanta) * params.delay_quantum;
}

NetworkSpec make_spec(const GridDims& dims, std::vector<NeuronInfo> neurons,
                      std::vector<Synapse> synapses, const ConnectivityParams& params) {
    NetworkSpec spec;
    spec.dims = dims;
    spec.params = params;
    spec.neurons = std::move(neurons);
    spec.synapses = std::move(synapses);
    for (const auto& n : spec.neurons) {
        if (n.kind == NeuronKind::Receptive) spec.input_map.push_back(n.id);
    }
    spec.validate();
    return spec;
}

NetworkSpec generate(const GridDims& dims, const ConnectivityParams& params,
                     std::optional<std::uint64_t> seed) {
    if (!seed) {
        throw std::invalid_argument("network generation requires an explicit seed");
    }
    if (dims.x < 1 || dims.y < 1 || dims.z < 1) {
        throw std::invalid_argument("grid dims must be positive");
    }
    params.validate();
    std::mt19937_64 rng(*seed);

    NetworkSpec spec;
    spec.dims = dims;
    spec.params = params;
    spec.seed = *seed;
    const auto n = static_cast<NeuronId>(dims.size());
    std::vector<NeuronId> non_receptive;
    for (NeuronId id = 0; id < n; ++id) {
        const GridPosition p = position_of(id, dims);
        const NeuronKind kind = p.z == 0 ? NeuronKind::Receptive : NeuronKind::Excitatory;
        spec.neurons.push_back(NeuronInfo{id, p, kind});
        if (kind == NeuronKind::Receptive) {
            spec.input_map.push_back(id);
        } else {
            non_receptive.push_back(id);
        }
    }

    // Partial Fisher-Yates: the first k entries become inhibitory.
    const auto k = static_cast<std::size_t>(
        std::llround(params.inhibitory_fraction * static_cast<double>(non_receptive.size())));
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, non_receptive.size() - 1);
        std::swap(non_receptive[i], non_receptive[pick(rng)]);
        spec.neurons[non_receptive[i]].kind = NeuronKind::Inhibitory;
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> weight_pick(0, params.weights.size() - 1);
    for (NeuronId a = 0; a < n; ++a) {
        for (NeuronId b = 0; b < n; ++b) {
            if (a == b) continue;
            const auto& na = spec.neurons[a];
            const auto& nb = spec.neurons[b];
            const double p = connection_probability(na.position, nb.position, na.kind, nb.kind,
                                                    params);
            if (p <= 0.0 || unit(rng) >= p) continue;
            Synapse s;
            s.pre = a;
            s.post = b;
            s.weight = params.weights[weight_pick(rng)];
            s.sign = sign_of(na.kind);
            s.delay = sample_delay(distance(na.position, nb.position), params, rng);
            spec.synapses.push_back(s);
        }
    }
    return spec;
}

AdjacencyMatrices adjacency_matrices(const NetworkSpec& spec) {
    AdjacencyMatrices m;
    m.n = spec.neurons.size();
    m.delay.assign(m.n * m.n, 0);
    m.weight.assign(m.n * m.n, 0);
    for (const auto& s : spec.synapses) {
        m.delay[s.pre * m.n + s.post] = s.delay;
        m.weight[s.pre * m.n + s.post] = s.sign == neuro::Sign::Inhibitory ? -s.weight : s.weight;
    }
    return m;
}

namespace {

template <class T>
void write_matrix_csv(const std::vector<T>& values, std::size_t n, std::ostream& out) {
    out << "pre";
    for (std::size_t j = 0; j < n; ++j) out << ',' << j;
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << i;
        for (std::size_t j = 0; j < n; ++j) out << ',' << values[i * n + j];
        out << '\n';
    }
}

} // namespace

void write_delay_csv(const AdjacencyMatrices& m, std::ostream& out) {
    write_matrix_csv(m.delay, m.n, out);
}

void write_weight_csv(const AdjacencyMatrices& m, std::ostream& out) {
    write_matrix_csv(m.weight, m.n, out);
}

} // namespace bsnn::netgen
