// Random reservoir topology on a 3-D grid: neuron typing, distance-dependent
// connectivity, signed weights and noisy distance-proportional delays.
#pragma once

#include "bsnn/desim.hpp"
#include "bsnn/neuroblocks.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace bsnn::netgen {

using desim::SimTime;
using NeuronId = std::uint32_t;

struct GridDims {
    int x = 7;
    int y = 7;
    int z = 4;

    std::size_t size() const { return static_cast<std::size_t>(x) * y * z; }
    std::size_t layer_size() const { return static_cast<std::size_t>(x) * y; }
    friend bool operator==(const GridDims&, const GridDims&) = default;
};

struct GridPosition {
    int x = 0;
    int y = 0;
    int z = 0;
    friend bool operator==(const GridPosition&, const GridPosition&) = default;
};

double distance(const GridPosition& a, const GridPosition& b);

/// Row-column flattening within a layer, layers stacked along z.
NeuronId neuron_id(const GridPosition& p, const GridDims& dims);
GridPosition position_of(NeuronId id, const GridDims& dims);

enum class NeuronKind : std::uint8_t { Excitatory = 0, Inhibitory = 1, Receptive = 2 };

std::string_view to_string(NeuronKind kind);
NeuronKind neuron_kind_from_string(std::string_view s);
/// Receptive neurons count as excitatory for their outgoing synapses.
neuro::Sign sign_of(NeuronKind kind);

struct ConnectivityParams {
    /// gamma[pre][post], indexed by NeuronKind.
    std::array<std::array<double, 3>, 3> gamma{};
    double lambda = 2.2;
    SimTime delay_per_unit = 20 * desim::kTauP;
    SimTime delay_sigma = 3 * desim::kTauP;
    SimTime delay_quantum = desim::kTauP;
    std::vector<int> weights{1, 2};
    double inhibitory_fraction = 0.2;
    int capacity_excitatory = 4;
    int capacity_inhibitory = 4;
    int capacity_receptive = 2;

    /// Reservoir defaults: E-I, I-E, R-E, R-I at 0.3, E-E at 0.15, everything else 0.
    static ConnectivityParams defaults();

    double gamma_of(NeuronKind pre, NeuronKind post) const {
        return gamma[static_cast<int>(pre)][static_cast<int>(post)];
    }
    int capacity_of(NeuronKind kind) const;
    void validate() const;
    friend bool operator==(const ConnectivityParams&, const ConnectivityParams&) = default;
};

struct NeuronInfo {
    NeuronId id = 0;
    GridPosition position;
    NeuronKind kind = NeuronKind::Excitatory;
    friend bool operator==(const NeuronInfo&, const NeuronInfo&) = default;
};

struct Synapse {
    NeuronId pre = 0;
    NeuronId post = 0;
    int weight = 1;
    neuro::Sign sign = neuro::Sign::Excitatory;
    SimTime delay = desim::kTauP;
    friend bool operator==(const Synapse&, const Synapse&) = default;
};

class SpecValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct NetworkSpec {
    GridDims dims;
    ConnectivityParams params = ConnectivityParams::defaults();
    std::uint64_t seed = 0;
    std::vector<NeuronInfo> neurons;
    std::vector<Synapse> synapses;
    /// input channel -> receptive neuron; weight 1, no added delay.
    std::vector<NeuronId> input_map;

    std::size_t neuron_count() const { return neurons.size(); }
    int capacity(NeuronId id) const { return params.capacity_of(neurons.at(id).kind); }
    /// Structural checks (ids, Dale's principle, self-loops, delay quantization).
    void validate() const;
    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Gamma(pair) * exp(-d^2 / lambda^2), clamped to [0, 1].
double connection_probability(const GridPosition& a, const GridPosition& b, NeuronKind pre,
                              NeuronKind post, const ConnectivityParams& params);

/// round_to_quantum(delay_per_unit * d + N(0, sigma)), at least one quantum.
SimTime sample_delay(double dist, const ConnectivityParams& params, std::mt19937_64& rng);

/// The seed is mandatory; std::nullopt throws std::invalid_argument.
NetworkSpec generate(const GridDims& dims, const ConnectivityParams& params,
                     std::optional<std::uint64_t> seed);

/// Network with explicit neurons and synapses (tests, hand-made motifs). The
/// input map covers the receptive neurons in id order.
NetworkSpec make_spec(const GridDims& dims, std::vector<NeuronInfo> neurons,
                      std::vector<Synapse> synapses,
                      const ConnectivityParams& params = ConnectivityParams::defaults());

struct AdjacencyMatrices {
    std::size_t n = 0;
    std::vector<SimTime> delay; // row = pre, column = post; 0 when absent
    std::vector<int> weight;    // signed
    SimTime delay_at(NeuronId pre, NeuronId post) const { return delay[pre * n + post]; }
    int weight_at(NeuronId pre, NeuronId post) const { return weight[pre * n + post]; }
};

AdjacencyMatrices adjacency_matrices(const NetworkSpec& spec);
void write_delay_csv(const AdjacencyMatrices& m, std::ostream& out);
void write_weight_csv(const AdjacencyMatrices& m, std::ostream& out);

/// Versioned JSON connectome.
std::string to_json_text(const NetworkSpec& spec);
NetworkSpec from_json_text(const std::string& text);
nlohmann::json params_to_json(const ConnectivityParams& params);
ConnectivityParams params_from_json(const nlohmann::json& j);

void save_spec(const NetworkSpec& spec, const std::string& path);
NetworkSpec load_spec(const std::string& path);

} // namespace bsnn::netgen
