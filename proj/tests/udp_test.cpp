#include "bsnn/spikeio.hpp"

#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <random>
#include <thread>

namespace bsnn::spikeio {
namespace {

using namespace std::chrono_literals;

struct Fixture {
    elab::ElaboratedNetwork net = elab::elaborate(
        netgen::generate({3, 3, 2}, netgen::ConnectivityParams::defaults(), 11));
    WindowRunner runner() const {
        return [this](const SpikeTrainInput& in, std::uint32_t) { return simulate_window(net, in, {}); };
    }
};

SpikeTrainInput random_input(int channels, int events, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SpikeTrainInput in{channels, {}};
    for (int i = 0; i < events; ++i) {
        in.events.push_back({static_cast<std::uint32_t>(rng() % 1000),
                             static_cast<std::uint16_t>(rng() % channels)});
    }
    std::sort(in.events.begin(), in.events.end());
    in.events.erase(std::unique(in.events.begin(), in.events.end()), in.events.end());
    return in;
}

template <class Pred>
bool eventually(Pred pred) {
    for (int i = 0; i < 400; ++i) {
        if (pred()) return true;
        std::this_thread::sleep_for(5ms);
    }
    return pred();
}

SpikePacket packet(PacketKind kind, std::uint32_t session, std::uint32_t seq,
                   std::vector<InputEvent> events = {}) {
    return SpikePacket{kind, session, seq, std::move(events)};
}

std::optional<SpikePacket> next_packet(SpikeClient& c) {
    std::vector<std::uint8_t> buf;
    if (!c.receive_raw(buf, 2000ms)) return std::nullopt;
    return decode(buf);
}

TEST(Udp, LoopbackMatchesInProcess) {
    Fixture f;
    SpikeServer server(f.runner(), ServerOptions{"127.0.0.1", 0, 9});
    server.start();
    ClientOptions opts;
    opts.events_per_packet = 50;
    SpikeClient client("127.0.0.1", server.port(), opts);
    const auto input = random_input(9, 800, 3);
    const auto remote = client.run_window(input, 1);
    EXPECT_EQ(remote, simulate_window(f.net, input, {}));
    EXPECT_GT(remote.count(), 0u);
    EXPECT_TRUE(eventually([&] { return server.stats().windows_completed == 1; }));
}

TEST(Udp, EmptyWindow) {
    Fixture f;
    SpikeServer server(f.runner(), ServerOptions{"127.0.0.1", 0, 9});
    server.start();
    SpikeClient client("127.0.0.1", server.port());
    const auto m = client.run_window(SpikeTrainInput{9, {}}, 42);
    EXPECT_EQ(m.bins(), kWindowBins);
    EXPECT_EQ(m.channels(), 18);
    EXPECT_EQ(m.count(), 0u);
    EXPECT_EQ(client.stats().packets_sent, 2u + 2u); // START, END and two result acks
}

TEST(Udp, InFlightPacketsStayBounded) {
    Fixture f;
    SpikeServer server(f.runner(), ServerOptions{"127.0.0.1", 0, 9});
    server.start();
    ClientOptions opts;
    opts.max_in_flight = 3;
    opts.events_per_packet = 1;
    SpikeClient client("127.0.0.1", server.port(), opts);
    const auto input = random_input(9, 100, 5);
    EXPECT_EQ(client.run_window(input, 7), simulate_window(f.net, input, {}));
    EXPECT_LE(client.stats().max_in_flight, 3u);
    EXPECT_GE(client.stats().max_in_flight, 2u);
    EXPECT_GE(client.stats().acks_received, input.events.size() + 2);
}

TEST(Udp, SequentialAndConcurrentWindows) {
    Fixture f;
    ServerOptions so{"127.0.0.1", 0, 9};
    so.workers = 2;
    SpikeServer server(f.runner(), so);
    server.start();
    std::atomic<int> mismatches{0};
    std::vector<std::thread> clients;
    for (int k = 0; k < 3; ++k) {
        clients.emplace_back([&, k] {
            SpikeClient client("127.0.0.1", server.port());
            for (int w = 0; w < 3; ++w) {
                const auto input = random_input(9, 300, 100 * k + w);
                const auto session = static_cast<std::uint32_t>(1000 * (k + 1) + w);
                if (client.run_window(input, session) != simulate_window(f.net, input, {})) {
                    ++mismatches;
                }
            }
        });
    }
    for (auto& t : clients) t.join();
    EXPECT_EQ(mismatches.load(), 0);
    EXPECT_TRUE(eventually([&] { return server.stats().windows_completed == 9; }));
}

TEST(Udp, DuplicatesAreAcknowledgedAgain) {
    Fixture f;
    SpikeServer server(f.runner(), ServerOptions{"127.0.0.1", 0, 9});
    server.start();
    SpikeClient client("127.0.0.1", server.port());
    client.send_raw(encode(packet(PacketKind::Start, 5, 0)));
    auto ack = next_packet(client);
    ASSERT_TRUE(ack);
    EXPECT_EQ(ack->kind, PacketKind::Ack);
    EXPECT_EQ(ack->sequence, 0u);
    for (int i = 0; i < 2; ++i) {
        client.send_raw(encode(packet(PacketKind::Input, 5, 1, {{4, 2}})));
        ack = next_packet(client);
        ASSERT_TRUE(ack);
        EXPECT_EQ(ack->kind, PacketKind::Ack);
        EXPECT_EQ(ack->session, 5u);
        EXPECT_EQ(ack->sequence, 1u);
    }
    EXPECT_TRUE(eventually([&] { return server.stats().duplicates == 1; }));
}

TEST(Udp, GapBeforeEndIsReported) {
    Fixture f;
    SpikeServer server(f.runner(), ServerOptions{"127.0.0.1", 0, 9});
    server.start();
    SpikeClient client("127.0.0.1", server.port());
    client.send_raw(encode(packet(PacketKind::Start, 9, 0)));
    client.send_raw(encode(packet(PacketKind::Input, 9, 1, {{1, 1}})));
    client.send_raw(encode(packet(PacketKind::Input, 9, 3, {{9, 1}})));
    client.send_raw(encode(packet(PacketKind::End, 9, 4)));
    std::optional<SpikePacket> error;
    while (auto p = next_packet(client)) {
        if (p->kind == PacketKind::Error) {
            error = p;
            break;
        }
    }
    ASSERT_TRUE(error);
    EXPECT_EQ(error->session, 9u);
    EXPECT_EQ(error->sequence, 2u);
    EXPECT_TRUE(eventually([&] { return server.stats().windows_rejected == 1; }));
    EXPECT_EQ(server.stats().windows_completed, 0u);
}

TEST(Udp, InvalidContentsRaiseWindowRejected) {
    Fixture f;
    SpikeServer server(f.runner(), ServerOptions{"127.0.0.1", 0, 4});
    server.start();
    SpikeClient client("127.0.0.1", server.port());
    EXPECT_THROW(client.run_window(SpikeTrainInput{9, {{0, 8}}}, 3), WindowRejected);
}

TEST(Udp, MalformedAndUnknownSessionsAreDropped) {
    Fixture f;
    SpikeServer server(f.runner(), ServerOptions{"127.0.0.1", 0, 9});
    server.start();
    SpikeClient client("127.0.0.1", server.port());
    const std::vector<std::uint8_t> junk{'n', 'o', 'p', 'e'};
    client.send_raw(junk);
    auto bad_count = encode(packet(PacketKind::Input, 1, 1, {{0, 0}}));
    bad_count.pop_back();
    client.send_raw(bad_count);
    client.send_raw(encode(packet(PacketKind::Input, 77, 1, {{0, 0}})));
    client.send_raw(encode(packet(PacketKind::End, 78, 1)));
    EXPECT_TRUE(eventually([&] {
        const auto s = server.stats();
        return s.malformed == 2 && s.unknown_session == 2;
    }));
    std::vector<std::uint8_t> buf;
    EXPECT_FALSE(client.receive_raw(buf, 100ms));
    // The server keeps serving afterwards.
    EXPECT_EQ(client.run_window(SpikeTrainInput{9, {}}, 79).count(), 0u);
}

// Forwards datagrams between one client and the server, dropping a fraction of them.
class LossyRelay {
  public:
    LossyRelay(std::uint16_t server_port, double drop, std::uint64_t seed)
        : drop_(drop), rng_(seed) {
        fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
        sockaddr_in a{};
        a.sin_family = AF_INET;
        a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        ::bind(fd_, reinterpret_cast<sockaddr*>(&a), sizeof a);
        socklen_t len = sizeof a;
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&a), &len);
        port_ = ntohs(a.sin_port);
        server_ = a;
        server_.sin_port = htons(server_port);
        thread_ = std::thread([this] { loop(); });
    }
    ~LossyRelay() {
        running_ = false;
        thread_.join();
        ::close(fd_);
    }
    std::uint16_t port() const { return port_; }
    int dropped() const { return dropped_.load(); }

  private:
    void loop() {
        std::vector<std::uint8_t> buf(2048);
        pollfd pfd{fd_, POLLIN, 0};
        while (running_) {
            if (::poll(&pfd, 1, 10) <= 0) continue;
            sockaddr_in from{};
            socklen_t len = sizeof from;
            const auto n = ::recvfrom(fd_, buf.data(), buf.size(), 0,
                                      reinterpret_cast<sockaddr*>(&from), &len);
            if (n <= 0) continue;
            const bool from_server = from.sin_port == server_.sin_port;
            if (!from_server) client_ = from;
            if (std::uniform_real_distribution<>(0, 1)(rng_) < drop_) {
                ++dropped_;
                continue;
            }
            const sockaddr_in& to = from_server ? client_ : server_;
            ::sendto(fd_, buf.data(), static_cast<std::size_t>(n), 0,
                     reinterpret_cast<const sockaddr*>(&to), sizeof to);
        }
    }

    int fd_ = -1;
    std::uint16_t port_ = 0;
    sockaddr_in server_{}, client_{};
    double drop_;
    std::mt19937_64 rng_;
    std::atomic<bool> running_{true};
    std::atomic<int> dropped_{0};
    std::thread thread_;
};

TEST(Udp, SurvivesPacketLoss) {
    Fixture f;
    ServerOptions so{"127.0.0.1", 0, 9};
    so.retransmit_after = 10ms;
    SpikeServer server(f.runner(), so);
    server.start();
    LossyRelay relay(server.port(), 0.2, 99);
    ClientOptions opts;
    opts.events_per_packet = 20;
    opts.retransmit_after = 10ms;
    SpikeClient client("127.0.0.1", relay.port(), opts);
    for (std::uint32_t w = 0; w < 3; ++w) {
        const auto input = random_input(9, 600, 40 + w);
        EXPECT_EQ(client.run_window(input, 500 + w), simulate_window(f.net, input, {}));
    }
    EXPECT_GT(relay.dropped(), 0);
    EXPECT_GT(client.stats().retransmissions, 0u);
}

} // namespace
} // namespace bsnn::spikeio
