// Picosecond discrete-event simulation of two-valued clockless logic.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bsnn::desim {

/// Simulation time in integer picoseconds.
using SimTime = std::int64_t;
using NetId = std::uint32_t;

inline constexpr NetId kNoNet = std::numeric_limits<NetId>::max();

inline constexpr SimTime kGateDelay = 280;     // one logic element
inline constexpr SimTime kTauP = 2 * kGateDelay; // one inverter pair
inline constexpr SimTime kClockStep = 10'000;  // synchronous peripherals

class NetlistError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class SimulationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised when the event budget is exhausted; names the busiest net.
class OscillationError : public SimulationError {
  public:
    OscillationError(const std::string& what, NetId net) : SimulationError(what), net_(net) {}
    NetId net() const { return net_; }

  private:
    NetId net_;
};

enum class GateKind : std::uint8_t {
    Inv,
    Xor2,
    Or2,
    And2,
    Dff,     // inputs: D, CLK (rising edge)
    SrLatch, // inputs: S, R (level)
    TLatch,  // input: T (toggles on rising edge)
};

std::size_t arity(GateKind kind);
bool is_sequential(GateKind kind);
std::string_view to_string(GateKind kind);
GateKind gate_kind_from_string(std::string_view name);

struct LatchState {
    bool q = false;
    bool last_clock = false; // previous CLK / T input level
};

enum class SrConflictPolicy { Hold, Set, Reset, Error };

struct GateEval {
    bool value = false;
    LatchState state;
    bool conflict = false; // S and R both high
};

/// Pure gate evaluation. Combinational kinds ignore and pass through `state`.
GateEval eval_gate(GateKind kind, std::span<const bool> inputs, LatchState state,
                   SrConflictPolicy policy = SrConflictPolicy::Hold);

struct GateInstance {
    GateKind kind = GateKind::Inv;
    std::array<NetId, 2> inputs{kNoNet, kNoNet};
    NetId output = kNoNet;
    NetId output_n = kNoNet; // optional complement output (sequential kinds)
    SimTime delay = kGateDelay;
    SimTime reject_window = kGateDelay;
    std::uint32_t group = 0;
};

struct Probe {
    NetId net = kNoNet;
    std::string label;
};

enum class Driver : std::uint8_t { None, Gate, Port };

/// Flat gate-level circuit. Nets start at 0; every net has exactly one driver.
class Netlist {
  public:
    Netlist();

    NetId add_net(std::string name);
    /// Externally driven net (stimulus port).
    NetId add_port(std::string name);
    /// Shared never-driven port that stays 0.
    NetId tie_low();

    std::size_t add_gate(const GateInstance& gate);
    /// Convenience: creates the output net and returns it.
    NetId add_gate(GateKind kind, std::span<const NetId> inputs, std::string out_name,
                   SimTime delay = kGateDelay);
    NetId add_gate(GateKind kind, std::initializer_list<NetId> inputs, std::string out_name,
                   SimTime delay = kGateDelay) {
        return add_gate(kind, std::span<const NetId>(inputs.begin(), inputs.size()),
                        std::move(out_name), delay);
    }

    void add_probe(NetId net, std::string label);
    std::uint32_t add_group(std::string name);
    void set_current_group(std::uint32_t group) { current_group_ = group; }
    std::uint32_t current_group() const { return current_group_; }

    std::size_t net_count() const { return net_names_.size(); }
    const std::string& net_name(NetId net) const { return net_names_.at(net); }
    Driver driver(NetId net) const { return drivers_.at(net); }
    const std::vector<GateInstance>& gates() const { return gates_; }
    std::vector<GateInstance>& mutable_gates() { return gates_; }
    const std::vector<Probe>& probes() const { return probes_; }
    const std::vector<NetId>& ports() const { return ports_; }
    const std::vector<std::string>& groups() const { return groups_; }
    NetId find_net(std::string_view name) const;

    /// Checks the single-driver and arity invariants; throws NetlistError.
    void validate() const;

  private:
    void claim_driver(NetId net, Driver kind);

    std::vector<std::string> net_names_;
    std::vector<Driver> drivers_;
    std::vector<GateInstance> gates_;
    std::vector<Probe> probes_;
    std::vector<NetId> ports_;
    std::vector<std::string> groups_;
    std::uint32_t current_group_ = 0;
    NetId tie_low_ = kNoNet;
};

/// Redraws every gate delay from N(mean, sigma), rounded to 1 ps and kept >= 1 ps.
/// The reject window follows the delay. sigma == 0 restores the nominal delay.
void apply_delay_jitter(Netlist& netlist, double sigma_ps, std::uint64_t seed,
                        SimTime mean = kGateDelay);

struct Event {
    SimTime time = 0;
    NetId net = kNoNet;
    bool new_value = false;
    std::uint64_t serial = 0;
};

struct Transition {
    SimTime time = 0;
    bool value = false;
    friend bool operator==(const Transition&, const Transition&) = default;
};

std::ostream& operator<<(std::ostream& os, const Transition& t);

struct ProbeTrace {
    std::string label;
    NetId net = kNoNet;
    std::vector<Transition> transitions;
    friend bool operator==(const ProbeTrace&, const ProbeTrace&) = default;
};

struct WaveTrace {
    std::vector<ProbeTrace> probes;

    const ProbeTrace& at(std::string_view label) const;
    /// Rising-edge times of one probe.
    std::vector<SimTime> rising_edges(std::string_view label) const;
    friend bool operator==(const WaveTrace&, const WaveTrace&) = default;
};

void write_vcd(const WaveTrace& trace, std::ostream& out, std::string_view module = "bsnn");
void write_trace_csv(const WaveTrace& trace, std::ostream& out);

struct SimOptions {
    std::uint64_t max_events = 200'000'000;
    SrConflictPolicy sr_policy = SrConflictPolicy::Hold;
    /// Log the first S=R=1 conflict; sr_conflicts() counts them either way.
    bool log_sr_conflicts = true;
    /// Also record transitions of these nets (labelled by net name).
    std::vector<NetId> extra_probes;
};

/// One simulation instance: a sequential event loop over an immutable netlist.
class Simulator {
  public:
    explicit Simulator(std::shared_ptr<const Netlist> netlist, SimOptions options = {});

    /// External transition on a port net. Same-time events on a net collapse to the last one.
    void schedule(const Event& ev);
    void schedule(NetId net, SimTime time, bool value) { schedule(Event{time, net, value, 0}); }
    /// Convenience: rising edge at `start`, falling edge at `start + width`.
    void schedule_pulse(NetId net, SimTime start, SimTime width);

    /// Processes every event with time <= t_end. Returns the probe transitions of this call.
    WaveTrace run_until(SimTime t_end);

    /// Cumulative probe transitions since construction.
    const WaveTrace& trace() const { return trace_; }

    bool value(NetId net) const { return values_.at(net) != 0; }
    SimTime now() const { return now_; }
    std::uint64_t events_processed() const { return events_processed_; }
    std::uint64_t sr_conflicts() const { return sr_conflicts_; }
    const Netlist& netlist() const { return *netlist_; }

  private:
    struct Pending {
        SimTime time;
        std::uint64_t serial;
        bool value;
    };
    struct QueueEntry {
        SimTime time;
        std::uint64_t serial;
        NetId net;
        bool value;
        bool operator>(const QueueEntry& o) const {
            return time != o.time ? time > o.time : serial > o.serial;
        }
    };

    static constexpr SimTime kRingSize = 4096; // ps; near-future events live in buckets
    static constexpr SimTime kRingMask = kRingSize - 1;

    void push_event(const QueueEntry& e);
    /// Earliest pending event time, or false when nothing is queued.
    bool next_time(SimTime& t) const;
    void settle();
    void evaluate(std::size_t gate_index, SimTime t);
    void drive(NetId net, bool v, SimTime t, SimTime delay, SimTime reject);
    void apply(NetId net, bool v, SimTime t);
    [[noreturn]] void raise_oscillation() const;

    std::shared_ptr<const Netlist> netlist_;
    SimOptions options_;
    std::vector<std::uint32_t> fanout_offsets_;
    std::vector<std::uint32_t> fanout_gates_;
    std::vector<std::uint8_t> values_;
    std::vector<LatchState> latch_;
    std::vector<std::vector<Pending>> pending_;
    std::vector<std::int32_t> probe_slot_;
    std::vector<std::uint32_t> net_events_;
    std::vector<std::vector<QueueEntry>> ring_;
    std::array<std::uint64_t, kRingSize / 64> ring_bits_{};
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> far_;
    std::vector<QueueEntry> batch_;
    WaveTrace trace_;
    SimTime now_ = 0;
    std::uint64_t serial_ = 0;
    std::uint64_t events_processed_ = 0;
    std::uint64_t sr_conflicts_ = 0;
    bool shared_probes_ = false;
};

} // namespace bsnn::desim
