#include "bsnn/spikeio.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <queue>
#include <set>
#include <thread>
#include <unordered_map>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace bsnn::spikeio {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint32_t kInvalidContent = 0xFFFFFFFFu;
constexpr std::size_t kServerWindow = 8;
constexpr std::size_t kRememberedSessions = 4096;

[[noreturn]] void sys_fail(const std::string& what) {
    throw std::runtime_error(what + ": " + std::strerror(errno));
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_DGRAM;
    addrinfo* res = nullptr;
    if (const int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &res); rc != 0 || !res) {
        throw std::runtime_error("cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    sockaddr_in addr{};
    std::memcpy(&addr, res->ai_addr, sizeof addr);
    ::freeaddrinfo(res);
    addr.sin_port = htons(port);
    return addr;
}

int open_socket() {
    const int fd = ::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0);
    if (fd < 0) sys_fail("socket");
    const int buf = 4 << 20;
    ::setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &buf, sizeof buf);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &buf, sizeof buf);
    return fd;
}

void send_to(int fd, const sockaddr_in& to, std::span<const std::uint8_t> bytes) {
    ::sendto(fd, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&to), sizeof to);
}

SpikePacket control(PacketKind kind, std::uint32_t session, std::uint32_t sequence) {
    SpikePacket p;
    p.kind = kind;
    p.session = session;
    p.sequence = sequence;
    return p;
}

// Outgoing reliable packets: at most `window` unacknowledged, the last one only after the
// rest are acknowledged.
struct ReliableSender {
    std::vector<std::vector<std::uint8_t>> wire;
    std::size_t next = 0;
    std::map<std::uint32_t, std::pair<Clock::time_point, int>> in_flight;
    std::set<std::uint32_t> acked;

    bool done() const { return acked.size() == wire.size(); }

    // Returns the number of packets transmitted for the first time.
    template <class Send>
    std::size_t pump(std::size_t window, Clock::time_point now, Send&& send) {
        std::size_t sent = 0;
        while (next < wire.size() && in_flight.size() < window) {
            const bool last = next + 1 == wire.size();
            if (last && next > 0 && acked.size() < next) break;
            send(wire[next]);
            in_flight[static_cast<std::uint32_t>(next)] = {now, 0};
            ++next;
            ++sent;
        }
        return sent;
    }

    void ack(std::uint32_t seq) {
        if (seq >= wire.size() || seq >= next) return;
        in_flight.erase(seq);
        acked.insert(seq);
    }

    // Returns retransmission count, or nullopt once one packet used up its budget.
    template <class Send>
    std::optional<std::size_t> retransmit(Clock::time_point now, std::chrono::milliseconds after,
                                          int max_attempts, Send&& send) {
        std::size_t count = 0;
        for (auto& [seq, state] : in_flight) {
            if (now - state.first < after) continue;
            if (++state.second > max_attempts) return std::nullopt;
            state.first = now;
            send(wire[seq]);
            ++count;
        }
        return count;
    }
};

} // namespace

// ---------------------------------------------------------------------------
// Server

struct SpikeServer::Impl {
    enum class Phase { Receiving, Running, Sending };

    struct Session {
        sockaddr_in peer{};
        Phase phase = Phase::Receiving;
        std::map<std::uint32_t, std::vector<InputEvent>> inputs;
        ReliableSender results;
    };

    struct Remembered {
        bool rejected = false;
        std::uint32_t missing = 0;
        sockaddr_in peer{};
    };

    struct Job {
        std::uint32_t session;
        SpikeTrainInput input;
    };

    struct Finished {
        std::uint32_t session;
        std::optional<ObservationMatrix> matrix;
    };

    WindowRunner runner;
    ServerOptions options;
    int fd = -1;
    int wake[2] = {-1, -1};
    std::uint16_t bound_port = 0;
    std::atomic<bool> running{false};
    std::thread io;
    std::vector<std::thread> workers;

    mutable std::mutex stats_mutex;
    ServerStats counters;

    std::mutex job_mutex;
    std::condition_variable job_cv;
    std::deque<Job> jobs;
    bool stopping = false;

    std::mutex outbox_mutex;
    std::vector<Finished> outbox;

    // Touched by the I/O thread only.
    std::unordered_map<std::uint32_t, Session> sessions;
    std::unordered_map<std::uint32_t, Remembered> remembered;
    std::deque<std::uint32_t> remembered_order;

    template <class F>
    void count(F&& f) {
        std::lock_guard lock(stats_mutex);
        f(counters);
    }

    void send_packet(const sockaddr_in& to, const SpikePacket& p) { send_to(fd, to, encode(p)); }

    void remember(std::uint32_t session, Remembered r) {
        if (remembered.emplace(session, r).second) {
            remembered_order.push_back(session);
            if (remembered_order.size() > kRememberedSessions) {
                remembered.erase(remembered_order.front());
                remembered_order.pop_front();
            }
        }
    }

    void reject(std::uint32_t session, const sockaddr_in& peer, std::uint32_t missing) {
        send_packet(peer, control(PacketKind::Error, session, missing));
        sessions.erase(session);
        remember(session, Remembered{true, missing, peer});
        count([](ServerStats& s) { ++s.windows_rejected; });
    }

    void on_datagram(std::span<const std::uint8_t> bytes, const sockaddr_in& from) {
        count([](ServerStats& s) { ++s.packets_received; });
        SpikePacket p;
        try {
            p = decode(bytes);
        } catch (const PacketError&) {
            count([](ServerStats& s) { ++s.malformed; });
            return;
        }
        const auto ack = [&] { send_packet(from, control(PacketKind::Ack, p.session, p.sequence)); };
        const auto duplicate = [&] {
            count([](ServerStats& s) { ++s.duplicates; });
            ack();
        };

        if (auto old = remembered.find(p.session); old != remembered.end()) {
            if (p.kind == PacketKind::Ack) return;
            if (old->second.rejected && p.kind == PacketKind::End) {
                send_packet(from, control(PacketKind::Error, p.session, old->second.missing));
                count([](ServerStats& s) { ++s.duplicates; });
                return;
            }
            duplicate();
            return;
        }

        auto it = sessions.find(p.session);
        if (it == sessions.end()) {
            if (p.kind == PacketKind::Start && p.sequence == 0) {
                Session s;
                s.peer = from;
                sessions.emplace(p.session, std::move(s));
                ack();
            } else {
                count([](ServerStats& s) { ++s.unknown_session; });
            }
            return;
        }
        Session& s = it->second;

        switch (p.kind) {
        case PacketKind::Start:
            duplicate();
            return;
        case PacketKind::Input:
            if (s.phase != Phase::Receiving || p.sequence == 0 || s.inputs.count(p.sequence)) {
                duplicate();
                return;
            }
            s.inputs.emplace(p.sequence, std::move(p.events));
            ack();
            return;
        case PacketKind::End: {
            if (s.phase != Phase::Receiving) {
                duplicate();
                return;
            }
            for (std::uint32_t seq = 1; seq < p.sequence; ++seq) {
                if (!s.inputs.count(seq)) {
                    reject(p.session, from, seq);
                    return;
                }
            }
            if (!s.inputs.empty() && s.inputs.rbegin()->first >= p.sequence) {
                reject(p.session, from, kInvalidContent);
                return;
            }
            ack();
            SpikeTrainInput input;
            input.channels = options.input_channels;
            for (auto& [seq, events] : s.inputs) {
                input.events.insert(input.events.end(), events.begin(), events.end());
            }
            s.inputs.clear();
            s.phase = Phase::Running;
            {
                std::lock_guard lock(job_mutex);
                jobs.push_back(Job{p.session, std::move(input)});
            }
            job_cv.notify_one();
            return;
        }
        case PacketKind::Ack:
            if (s.phase == Phase::Sending) {
                s.results.ack(p.sequence);
                if (s.results.done()) {
                    const auto peer = s.peer;
                    sessions.erase(it);
                    remember(p.session, Remembered{false, 0, peer});
                    count([](ServerStats& st) { ++st.windows_completed; });
                }
            }
            return;
        case PacketKind::Output:
        case PacketKind::Error:
            count([](ServerStats& st) { ++st.malformed; });
            return;
        }
    }

    void on_finished(Finished f) {
        auto it = sessions.find(f.session);
        if (it == sessions.end()) return;
        Session& s = it->second;
        if (!f.matrix) {
            reject(f.session, s.peer, kInvalidContent);
            return;
        }
        const ObservationMatrix& m = *f.matrix;
        std::vector<SpikePacket> packets;
        SpikePacket head = control(PacketKind::Start, f.session, 0);
        head.events.push_back(InputEvent{static_cast<std::uint32_t>(m.bins()),
                                         static_cast<std::uint16_t>(m.channels())});
        packets.push_back(std::move(head));
        SpikePacket chunk = control(PacketKind::Output, f.session, 1);
        for (int t = 0; t < m.bins(); ++t) {
            for (int c = 0; c < m.channels(); ++c) {
                if (!m.get(t, c)) continue;
                chunk.events.push_back(
                    InputEvent{static_cast<std::uint32_t>(t), static_cast<std::uint16_t>(c)});
                if (chunk.events.size() == kMaxEventsPerPacket) {
                    packets.push_back(chunk);
                    chunk.events.clear();
                    chunk.sequence = static_cast<std::uint32_t>(packets.size());
                }
            }
        }
        if (!chunk.events.empty()) packets.push_back(chunk);
        packets.push_back(control(PacketKind::End, f.session, static_cast<std::uint32_t>(packets.size())));
        for (const auto& p : packets) s.results.wire.push_back(encode(p));
        s.phase = Phase::Sending;
        s.results.pump(kServerWindow, Clock::now(), [&](const auto& w) { send_to(fd, s.peer, w); });
    }

    void service_timers() {
        const auto now = Clock::now();
        std::vector<std::uint32_t> abandoned;
        for (auto& [id, s] : sessions) {
            if (s.phase != Phase::Sending) continue;
            auto sent = s.results.retransmit(now, options.retransmit_after,
                                             options.max_retransmissions,
                                             [&](const auto& w) { send_to(fd, s.peer, w); });
            if (!sent) {
                abandoned.push_back(id);
                continue;
            }
            if (*sent) count([n = *sent](ServerStats& st) { st.retransmissions += n; });
            s.results.pump(kServerWindow, now, [&](const auto& w) { send_to(fd, s.peer, w); });
        }
        for (auto id : abandoned) sessions.erase(id);
    }

    void io_loop() {
        std::vector<std::uint8_t> buf(65536);
        pollfd fds[2] = {{fd, POLLIN, 0}, {wake[0], POLLIN, 0}};
        const int tick = std::max<int>(1, static_cast<int>(options.retransmit_after.count() / 4));
        while (running.load()) {
            ::poll(fds, 2, tick);
            if (fds[1].revents & POLLIN) {
                char drain[64];
                while (::read(wake[0], drain, sizeof drain) > 0) {}
            }
            for (;;) {
                sockaddr_in from{};
                socklen_t len = sizeof from;
                const ssize_t n = ::recvfrom(fd, buf.data(), buf.size(), MSG_DONTWAIT,
                                             reinterpret_cast<sockaddr*>(&from), &len);
                if (n < 0) break;
                on_datagram(std::span(buf.data(), static_cast<std::size_t>(n)), from);
            }
            std::vector<Finished> done;
            {
                std::lock_guard lock(outbox_mutex);
                done.swap(outbox);
            }
            for (auto& f : done) on_finished(std::move(f));
            service_timers();
        }
    }

    void worker_loop() {
        for (;;) {
            Job job;
            {
                std::unique_lock lock(job_mutex);
                job_cv.wait(lock, [&] { return stopping || !jobs.empty(); });
                if (stopping) return;
                job = std::move(jobs.front());
                jobs.pop_front();
            }
            Finished f{job.session, std::nullopt};
            try {
                job.input.validate();
                std::sort(job.input.events.begin(), job.input.events.end());
                f.matrix = runner(job.input, job.session);
            } catch (const std::exception&) {
                f.matrix.reset();
            }
            {
                std::lock_guard lock(outbox_mutex);
                outbox.push_back(std::move(f));
            }
            const char one = 1;
            [[maybe_unused]] auto r = ::write(wake[1], &one, 1);
        }
    }
};

SpikeServer::SpikeServer(WindowRunner runner, ServerOptions options)
    : impl_(std::make_unique<Impl>()) {
    impl_->runner = std::move(runner);
    impl_->options = std::move(options);
}

SpikeServer::~SpikeServer() { stop(); }

void SpikeServer::start() {
    Impl& s = *impl_;
    if (s.running.load()) return;
    s.fd = open_socket();
    sockaddr_in addr = resolve(s.options.bind_address, s.options.port);
    if (::bind(s.fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(s.fd);
        sys_fail("bind " + s.options.bind_address + ":" + std::to_string(s.options.port));
    }
    socklen_t len = sizeof addr;
    ::getsockname(s.fd, reinterpret_cast<sockaddr*>(&addr), &len);
    s.bound_port = ntohs(addr.sin_port);
    if (::pipe2(s.wake, O_NONBLOCK | O_CLOEXEC) != 0) sys_fail("pipe");
    s.stopping = false;
    s.running = true;
    for (int i = 0; i < std::max(1, s.options.workers); ++i) {
        s.workers.emplace_back([&s] { s.worker_loop(); });
    }
    s.io = std::thread([&s] { s.io_loop(); });
}

void SpikeServer::stop() {
    Impl& s = *impl_;
    if (!s.running.exchange(false)) return;
    {
        std::lock_guard lock(s.job_mutex);
        s.stopping = true;
    }
    s.job_cv.notify_all();
    if (s.io.joinable()) s.io.join();
    for (auto& w : s.workers) w.join();
    s.workers.clear();
    ::close(s.fd);
    ::close(s.wake[0]);
    ::close(s.wake[1]);
    s.fd = -1;
}

std::uint16_t SpikeServer::port() const { return impl_->bound_port; }

ServerStats SpikeServer::stats() const {
    std::lock_guard lock(impl_->stats_mutex);
    return impl_->counters;
}

// ---------------------------------------------------------------------------
// Client

SpikeClient::SpikeClient(const std::string& host, std::uint16_t port, ClientOptions options)
    : options_(options) {
    if (options_.max_in_flight == 0) throw std::invalid_argument("max_in_flight must be positive");
    if (options_.events_per_packet == 0 || options_.events_per_packet > kMaxEventsPerPacket) {
        throw std::invalid_argument("events_per_packet must be in 1.." +
                                    std::to_string(kMaxEventsPerPacket));
    }
    fd_ = open_socket();
    sockaddr_in server = resolve(host, port);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&server), sizeof server) != 0) {
        ::close(fd_);
        sys_fail("connect");
    }
}

SpikeClient::~SpikeClient() {
    if (fd_ >= 0) ::close(fd_);
}

void SpikeClient::send_raw(std::span<const std::uint8_t> datagram) {
    ::send(fd_, datagram.data(), datagram.size(), 0);
    ++stats_.packets_sent;
}

bool SpikeClient::receive_raw(std::vector<std::uint8_t>& datagram, std::chrono::milliseconds timeout) {
    pollfd pfd{fd_, POLLIN, 0};
    if (::poll(&pfd, 1, static_cast<int>(timeout.count())) <= 0) return false;
    datagram.resize(65536);
    const ssize_t n = ::recv(fd_, datagram.data(), datagram.size(), MSG_DONTWAIT);
    if (n < 0) return false;
    datagram.resize(static_cast<std::size_t>(n));
    return true;
}

ObservationMatrix SpikeClient::run_window(const SpikeTrainInput& input, std::uint32_t session) {
    input.validate();
    std::vector<InputEvent> events = input.events;
    std::sort(events.begin(), events.end());

    ReliableSender out;
    out.wire.push_back(encode(control(PacketKind::Start, session, 0)));
    for (std::size_t i = 0; i < events.size(); i += options_.events_per_packet) {
        SpikePacket p = control(PacketKind::Input, session, static_cast<std::uint32_t>(out.wire.size()));
        const auto last = std::min(events.size(), i + options_.events_per_packet);
        p.events.assign(events.begin() + static_cast<std::ptrdiff_t>(i),
                        events.begin() + static_cast<std::ptrdiff_t>(last));
        out.wire.push_back(encode(p));
    }
    out.wire.push_back(
        encode(control(PacketKind::End, session, static_cast<std::uint32_t>(out.wire.size()))));

    const auto send = [&](const std::vector<std::uint8_t>& w) { send_raw(w); };

    std::optional<std::pair<int, int>> shape;
    std::map<std::uint32_t, std::vector<InputEvent>> outputs;
    std::optional<std::uint32_t> end_seq;
    const auto results_complete = [&] {
        if (!shape || !end_seq) return false;
        for (std::uint32_t s = 1; s < *end_seq; ++s) {
            if (!outputs.count(s)) return false;
        }
        return true;
    };

    Clock::time_point deadline = Clock::time_point::max();
    std::vector<std::uint8_t> buf;
    const int tick = std::max<int>(1, static_cast<int>(options_.retransmit_after.count() / 4));
    for (;;) {
        const auto now = Clock::now();
        out.pump(options_.max_in_flight, now, send);
        stats_.max_in_flight = std::max(stats_.max_in_flight, out.in_flight.size());
        if (out.done() && results_complete()) break;
        if (out.done() && deadline == Clock::time_point::max()) {
            deadline = now + options_.result_timeout;
        }
        if (now > deadline) throw std::runtime_error("timed out waiting for window results");
        auto sent = out.retransmit(now, options_.retransmit_after, options_.max_retransmissions,
                                   [&](const auto& w) {
                                       send_raw(w);
                                       ++stats_.retransmissions;
                                   });
        if (!sent) throw std::runtime_error("server stopped acknowledging packets");

        if (!receive_raw(buf, std::chrono::milliseconds(tick))) continue;
        SpikePacket p;
        try {
            p = decode(buf);
        } catch (const PacketError&) {
            continue;
        }
        switch (p.kind) {
        case PacketKind::Ack:
            if (p.session == session) {
                ++stats_.acks_received;
                out.ack(p.sequence);
            }
            break;
        case PacketKind::Error:
            if (p.session == session) {
                throw WindowRejected(p.sequence == kInvalidContent
                                         ? "server rejected window contents"
                                         : "server reported missing packet " +
                                               std::to_string(p.sequence),
                                     p.sequence);
            }
            break;
        case PacketKind::Start:
        case PacketKind::Output:
        case PacketKind::End:
            send_raw(encode(control(PacketKind::Ack, p.session, p.sequence)));
            if (p.session != session) break;
            ++stats_.results_received;
            if (p.kind == PacketKind::Start && !p.events.empty()) {
                shape = {static_cast<int>(p.events[0].step), static_cast<int>(p.events[0].channel)};
            } else if (p.kind == PacketKind::Output) {
                outputs.emplace(p.sequence, std::move(p.events));
            } else if (p.kind == PacketKind::End) {
                end_seq = p.sequence;
            }
            break;
        case PacketKind::Input:
            break;
        }
    }

    ObservationMatrix m(shape->first, shape->second);
    for (const auto& [seq, evs] : outputs) {
        for (const auto& e : evs) {
            if (static_cast<int>(e.step) < m.bins() && e.channel < m.channels()) {
                m.set(static_cast<int>(e.step), e.channel);
            }
        }
    }
    return m;
}

} // namespace bsnn::spikeio
