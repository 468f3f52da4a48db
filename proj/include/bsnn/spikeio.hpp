// Synchronous peripherals around the clockless core: spike generator, time
// tagger, raster export and the UDP event protocol.
#pragma once

#include "bsnn/desim.hpp"
#include "bsnn/elaborator.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsnn::spikeio {

using desim::SimTime;

inline constexpr SimTime kStep = desim::kClockStep;         // 10 ns
inline constexpr SimTime kInputPulseWidth = 4 * desim::kTauP; // 2.24 ns
inline constexpr int kWindowBins = 1024;
inline constexpr std::size_t kMaxProbes = 200;
inline constexpr int kMaxInputChannels = 128;

struct InputEvent {
    std::uint32_t step = 0;
    std::uint16_t channel = 0;
    friend bool operator==(const InputEvent&, const InputEvent&) = default;
    friend auto operator<=>(const InputEvent&, const InputEvent&) = default;
};

struct SpikeTrainInput {
    int channels = 0;
    std::vector<InputEvent> events;

    void validate() const;
    friend bool operator==(const SpikeTrainInput&, const SpikeTrainInput&) = default;
};

/// One 4*tau_p pulse per event on the mapped input port at offset + step * 10 ns.
void inject(const SpikeTrainInput& input, const elab::ElaboratedNetwork& network,
            desim::Simulator& sim, SimTime offset = 0);

struct WindowParams {
    SimTime start = 0;
    SimTime bin = kStep;
    int bins = kWindowBins;

    SimTime end() const { return start + bin * bins; }
};

/// Bit-packed T x N binary matrix; rows are time bins.
class ObservationMatrix {
  public:
    ObservationMatrix() = default;
    ObservationMatrix(int bins, int channels);

    int bins() const { return bins_; }
    int channels() const { return channels_; }
    bool get(int bin, int channel) const;
    void set(int bin, int channel, bool v = true);
    std::size_t count() const;
    /// Set bins of one channel, ascending.
    std::vector<int> channel_bins(int channel) const;

    friend bool operator==(const ObservationMatrix&, const ObservationMatrix&) = default;

  private:
    std::size_t words_per_row() const { return (static_cast<std::size_t>(channels_) + 63) / 64; }
    int bins_ = 0;
    int channels_ = 0;
    std::vector<std::uint64_t> bits_;
};

/// O[t][n] = 1 iff probe n rose inside bin t. Columns follow `labels`.
ObservationMatrix tag(const desim::WaveTrace& trace, std::span<const std::string> labels,
                      const WindowParams& window = {});
/// Columns follow the trace's probe order.
ObservationMatrix tag(const desim::WaveTrace& trace, const WindowParams& window = {});

struct WindowConfig {
    WindowParams window{};
    double jitter_sigma_ps = 0.0;
    std::uint64_t jitter_seed = 0;
};

/// Fresh simulation of one observation window (jitter drawn from the config seed).
ObservationMatrix simulate_window(const elab::ElaboratedNetwork& network,
                                  const SpikeTrainInput& input, const WindowConfig& config);

struct RasterEvent {
    double time_ns = 0;
    int channel = 0;
    friend bool operator==(const RasterEvent&, const RasterEvent&) = default;
};

struct RasterWindow {
    double duration_ns = 0;
    std::vector<std::string> labels;
    std::vector<RasterEvent> events;
};

/// Events at bin start times; keeps bins that start before `duration_ns`.
RasterWindow raster_from_matrix(const ObservationMatrix& m, const WindowParams& window,
                                double duration_ns, std::vector<std::string> labels = {});
/// Rising edges inside [start, start + duration) of every probe.
RasterWindow raster_from_trace(const desim::WaveTrace& trace, SimTime start, SimTime duration);
RasterWindow raster_from_input(const SpikeTrainInput& input, double duration_ns);

void write_raster_csv(const RasterWindow& raster, std::ostream& out);
std::vector<RasterEvent> read_raster_csv(std::istream& in);
void write_raster_svg(const RasterWindow& raster, std::ostream& out, const std::string& title = {});

// ---------------------------------------------------------------------------
// Wire format

enum class PacketKind : std::uint8_t {
    Input = 0,
    Output = 1,
    Start = 2,
    End = 3,
    Ack = 4,
    Error = 5,
};

inline constexpr std::uint8_t kPacketVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;
inline constexpr std::size_t kEventBytes = 6;
inline constexpr std::size_t kMaxDatagram = 1472;
inline constexpr std::size_t kMaxEventsPerPacket = (kMaxDatagram - kHeaderBytes) / kEventBytes;

struct SpikePacket {
    PacketKind kind = PacketKind::Input;
    std::uint32_t session = 0;
    std::uint32_t sequence = 0;
    std::vector<InputEvent> events;
    friend bool operator==(const SpikePacket&, const SpikePacket&) = default;
};

class PacketError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode(const SpikePacket& packet);
SpikePacket decode(std::span<const std::uint8_t> datagram);

// ---------------------------------------------------------------------------
// UDP service

/// Runs one window; the session id lets the runner derive per-window seeds.
using WindowRunner = std::function<ObservationMatrix(const SpikeTrainInput&, std::uint32_t session)>;

struct ServerOptions {
    std::string bind_address = "127.0.0.1";
    std::uint16_t port = 0; // 0 picks an ephemeral port
    int input_channels = 49;
    int workers = 1;
    std::chrono::milliseconds retransmit_after{40};
    int max_retransmissions = 250;
};

struct ServerStats {
    std::uint64_t packets_received = 0;
    std::uint64_t malformed = 0;
    std::uint64_t unknown_session = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t windows_completed = 0;
    std::uint64_t windows_rejected = 0;
    std::uint64_t retransmissions = 0;
};

/// One I/O thread (poll loop) plus worker threads running windows. Per-session state
/// is only touched by the I/O thread.
class SpikeServer {
  public:
    SpikeServer(WindowRunner runner, ServerOptions options = {});
    ~SpikeServer();
    SpikeServer(const SpikeServer&) = delete;
    SpikeServer& operator=(const SpikeServer&) = delete;

    void start();
    void stop();
    std::uint16_t port() const;
    ServerStats stats() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct ClientOptions {
    std::size_t max_in_flight = 8;
    std::size_t events_per_packet = kMaxEventsPerPacket;
    std::chrono::milliseconds retransmit_after{40};
    int max_retransmissions = 250;
    std::chrono::milliseconds result_timeout{600'000};
};

struct ClientStats {
    std::uint64_t packets_sent = 0;
    std::uint64_t retransmissions = 0;
    std::uint64_t acks_received = 0;
    std::uint64_t results_received = 0;
    std::size_t max_in_flight = 0;
};

class WindowRejected : public std::runtime_error {
  public:
    WindowRejected(const std::string& what, std::uint32_t missing)
        : std::runtime_error(what), missing_(missing) {}
    std::uint32_t missing_sequence() const { return missing_; }

  private:
    std::uint32_t missing_;
};

class SpikeClient {
  public:
    SpikeClient(const std::string& host, std::uint16_t port, ClientOptions options = {});
    ~SpikeClient();
    SpikeClient(const SpikeClient&) = delete;
    SpikeClient& operator=(const SpikeClient&) = delete;

    /// Streams one window and returns the server's observation matrix.
    ObservationMatrix run_window(const SpikeTrainInput& input, std::uint32_t session);
    const ClientStats& stats() const { return stats_; }

    /// Raw datagram access for protocol tests.
    void send_raw(std::span<const std::uint8_t> datagram);
    bool receive_raw(std::vector<std::uint8_t>& datagram, std::chrono::milliseconds timeout);

  private:
    int fd_ = -1;
    ClientOptions options_;
    ClientStats stats_;
};

} // namespace bsnn::spikeio
