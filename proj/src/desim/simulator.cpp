#include "bsnn/desim.hpp"

#include <algorithm>
#include <bit>
#include <iostream>

namespace bsnn::desim {

Simulator::Simulator(std::shared_ptr<const Netlist> netlist, SimOptions options)
    : netlist_(std::move(netlist)), options_(std::move(options)) {
    if (!netlist_) {
        throw SimulationError("simulator needs a netlist");
    }
    const Netlist& nl = *netlist_;
    nl.validate();
    const std::size_t n_nets = nl.net_count();
    const auto& gates = nl.gates();

    // Fanout in CSR form: net -> gates reading it.
    std::vector<std::uint32_t> counts(n_nets + 1, 0);
    for (const auto& g : gates) {
        for (std::size_t i = 0; i < arity(g.kind); ++i) {
            if (i == 1 && g.inputs[1] == g.inputs[0]) {
                continue;
            }
            ++counts[g.inputs[i] + 1];
        }
    }
    for (std::size_t i = 1; i <= n_nets; ++i) {
        counts[i] += counts[i - 1];
    }
    fanout_offsets_ = counts;
    fanout_gates_.resize(counts.back());
    std::vector<std::uint32_t> fill(counts.begin(), counts.end() - 1);
    for (std::uint32_t gi = 0; gi < gates.size(); ++gi) {
        const auto& g = gates[gi];
        for (std::size_t i = 0; i < arity(g.kind); ++i) {
            if (i == 1 && g.inputs[1] == g.inputs[0]) {
                continue;
            }
            fanout_gates_[fill[g.inputs[i]]++] = gi;
        }
    }

    ring_.resize(static_cast<std::size_t>(kRingSize));
    values_.assign(n_nets, 0);
    latch_.assign(gates.size(), LatchState{});
    pending_.resize(n_nets);
    net_events_.assign(n_nets, 0);
    probe_slot_.assign(n_nets, -1);
    auto add_probe = [&](NetId net, const std::string& label) {
        if (probe_slot_[net] < 0) {
            probe_slot_[net] = static_cast<std::int32_t>(trace_.probes.size());
        } else {
            shared_probes_ = true;
        }
        trace_.probes.push_back(ProbeTrace{label, net, {}});
    };
    for (const auto& p : nl.probes()) {
        add_probe(p.net, p.label);
    }
    for (NetId net : options_.extra_probes) {
        add_probe(net, nl.net_name(net));
    }
    settle();
}

// Zero-time relaxation of the all-zero power-up state to a consistent DC state.
// Oscillating loops stop after a bounded number of evaluations and are left for
// the timed pass to pick up.
void Simulator::settle() {
    const auto& gates = netlist_->gates();
    std::vector<std::uint32_t> work(gates.size());
    for (std::uint32_t i = 0; i < gates.size(); ++i) {
        work[i] = static_cast<std::uint32_t>(gates.size() - 1 - i);
    }
    std::vector<std::uint8_t> queued(gates.size(), 1);
    std::uint64_t budget = 64 * static_cast<std::uint64_t>(gates.size()) + 1024;
    auto set_net = [&](NetId net, bool v) {
        if (values_[net] == static_cast<std::uint8_t>(v)) {
            return;
        }
        values_[net] = v;
        for (auto k = fanout_offsets_[net]; k < fanout_offsets_[net + 1]; ++k) {
            const auto gi = fanout_gates_[k];
            if (!queued[gi]) {
                queued[gi] = 1;
                work.push_back(gi);
            }
        }
    };
    while (!work.empty() && budget > 0) {
        --budget;
        const auto gi = work.back();
        work.pop_back();
        queued[gi] = 0;
        const auto& g = gates[gi];
        std::array<bool, 2> in{};
        for (std::size_t i = 0; i < arity(g.kind); ++i) {
            in[i] = values_[g.inputs[i]] != 0;
        }
        bool v = false;
        switch (g.kind) {
        case GateKind::Dff:
            latch_[gi].last_clock = in[1];
            v = latch_[gi].q;
            break;
        case GateKind::TLatch:
            latch_[gi].last_clock = in[0];
            v = latch_[gi].q;
            break;
        default: {
            const auto r = eval_gate(g.kind, std::span<const bool>(in.data(), arity(g.kind)),
                                     latch_[gi], options_.sr_policy);
            latch_[gi] = r.state;
            v = r.value;
        }
        }
        set_net(g.output, v);
        if (g.output_n != kNoNet) {
            set_net(g.output_n, !v);
        }
    }
    for (std::size_t gi = 0; gi < gates.size(); ++gi) {
        evaluate(gi, 0);
    }
}

void Simulator::schedule(const Event& ev) {
    if (ev.time < now_) {
        throw SimulationError("cannot schedule at t=" + std::to_string(ev.time) +
                              " ps, simulation is at t=" + std::to_string(now_) + " ps");
    }
    if (ev.net >= values_.size()) {
        throw SimulationError("schedule on unknown net");
    }
    if (netlist_->driver(ev.net) != Driver::Port) {
        throw SimulationError("net '" + netlist_->net_name(ev.net) + "' is not a stimulus port");
    }
    auto& pend = pending_[ev.net];
    auto it = std::lower_bound(pend.begin(), pend.end(), ev.time,
                               [](const Pending& p, SimTime t) { return p.time < t; });
    if (it != pend.end() && it->time == ev.time) {
        it = pend.erase(it);
    }
    const std::uint64_t serial = ++serial_;
    pend.insert(it, Pending{ev.time, serial, ev.new_value});
    push_event(QueueEntry{ev.time, serial, ev.net, ev.new_value});
}

void Simulator::schedule_pulse(NetId net, SimTime start, SimTime width) {
    schedule(net, start, true);
    schedule(net, start + width, false);
}

void Simulator::drive(NetId net, bool v, SimTime t, SimTime delay, SimTime reject) {
    const SimTime t_new = t + delay;
    auto& pend = pending_[net];
    while (!pend.empty() && pend.back().time >= t_new) {
        pend.pop_back();
    }
    // Inertial rejection: inside (t_new - reject, t_new) keep only the trailing run of
    // transactions that already carry the new value.
    if (!pend.empty() && reject > 0) {
        const SimTime lo = t_new - reject;
        std::size_t first = pend.size();
        while (first > 0 && pend[first - 1].time > lo) {
            --first;
        }
        std::size_t last_diff = pend.size();
        for (std::size_t k = first; k < pend.size(); ++k) {
            if (pend[k].value != v) {
                last_diff = k;
            }
        }
        if (last_diff != pend.size()) {
            pend.erase(pend.begin() + static_cast<std::ptrdiff_t>(first),
                       pend.begin() + static_cast<std::ptrdiff_t>(last_diff) + 1);
        }
    }
    const bool projected = pend.empty() ? values_[net] != 0 : pend.back().value;
    if (projected == v) {
        return;
    }
    const std::uint64_t serial = ++serial_;
    pend.push_back(Pending{t_new, serial, v});
    push_event(QueueEntry{t_new, serial, net, v});
}

void Simulator::evaluate(std::size_t gi, SimTime t) {
    const auto& g = netlist_->gates()[gi];
    std::array<bool, 2> in{};
    const std::size_t n = arity(g.kind);
    for (std::size_t i = 0; i < n; ++i) {
        in[i] = values_[g.inputs[i]] != 0;
    }
    bool v = false;
    switch (g.kind) {
    case GateKind::Inv:
        v = !in[0];
        break;
    case GateKind::Xor2:
        v = in[0] != in[1];
        break;
    case GateKind::Or2:
        v = in[0] || in[1];
        break;
    case GateKind::And2:
        v = in[0] && in[1];
        break;
    default: {
        const auto r = eval_gate(g.kind, std::span<const bool>(in.data(), n), latch_[gi],
                                 options_.sr_policy);
        latch_[gi] = r.state;
        v = r.value;
        if (r.conflict) {
            if (sr_conflicts_++ == 0 && options_.log_sr_conflicts) {
                std::clog << "warning: SR latch driving '" << netlist_->net_name(g.output)
                          << "' saw S=R=1 at t=" << t << " ps; holding state\n";
            }
        }
    }
    }
    drive(g.output, v, t, g.delay, g.reject_window);
    if (g.output_n != kNoNet) {
        drive(g.output_n, !v, t, g.delay, g.reject_window);
    }
}

void Simulator::apply(NetId net, bool v, SimTime t) {
    values_[net] = v;
    ++net_events_[net];
    if (const auto slot = probe_slot_[net]; slot >= 0) {
        trace_.probes[static_cast<std::size_t>(slot)].transitions.push_back(Transition{t, v});
        if (shared_probes_) {
            for (std::size_t p = static_cast<std::size_t>(slot) + 1; p < trace_.probes.size(); ++p) {
                if (trace_.probes[p].net == net) {
                    trace_.probes[p].transitions.push_back(Transition{t, v});
                }
            }
        }
    }
    for (auto k = fanout_offsets_[net]; k < fanout_offsets_[net + 1]; ++k) {
        evaluate(fanout_gates_[k], t);
    }
}

void Simulator::raise_oscillation() const {
    const auto it = std::max_element(net_events_.begin(), net_events_.end());
    const auto net = static_cast<NetId>(it - net_events_.begin());
    throw OscillationError("event budget of " + std::to_string(options_.max_events) +
                               " exceeded at t=" + std::to_string(now_) +
                               " ps; net '" + netlist_->net_name(net) + "' toggled " +
                               std::to_string(*it) + " times",
                           net);
}

void Simulator::push_event(const QueueEntry& e) {
    if (e.time - now_ < kRingSize) {
        const auto b = static_cast<std::size_t>(e.time & kRingMask);
        ring_[b].push_back(e);
        ring_bits_[b >> 6] |= std::uint64_t{1} << (b & 63);
    } else {
        far_.push(e);
    }
}

bool Simulator::next_time(SimTime& t) const {
    bool found = false;
    // Scan the bucket bitmap cyclically starting at now_.
    const auto start = static_cast<std::size_t>(now_ & kRingMask);
    constexpr std::size_t words = kRingSize / 64;
    for (std::size_t k = 0; k <= words; ++k) {
        const std::size_t w = ((start >> 6) + k) % words;
        std::uint64_t bits = ring_bits_[w];
        if (k == 0) {
            bits &= ~std::uint64_t{0} << (start & 63);
        } else if (k == words) {
            bits &= (start & 63) == 0 ? 0 : (~std::uint64_t{0} >> (64 - (start & 63)));
        }
        if (bits != 0) {
            const std::size_t b = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
            t = now_ + static_cast<SimTime>((b - start + kRingSize) & kRingMask);
            found = true;
            break;
        }
    }
    if (!far_.empty() && (!found || far_.top().time < t)) {
        t = far_.top().time;
        found = true;
    }
    return found;
}

WaveTrace Simulator::run_until(SimTime t_end) {
    std::vector<std::size_t> start(trace_.probes.size());
    for (std::size_t p = 0; p < start.size(); ++p) {
        start[p] = trace_.probes[p].transitions.size();
    }
    SimTime t = 0;
    while (next_time(t) && t <= t_end) {
        // All events at time t in serial order: the bucket is already sorted, far
        // entries are merged in.
        const auto b = static_cast<std::size_t>(t & kRingMask);
        batch_.swap(ring_[b]);
        ring_bits_[b >> 6] &= ~(std::uint64_t{1} << (b & 63));
        if (!far_.empty() && far_.top().time == t) {
            const std::size_t near = batch_.size();
            while (!far_.empty() && far_.top().time == t) {
                batch_.push_back(far_.top());
                far_.pop();
            }
            std::inplace_merge(batch_.begin(), batch_.begin() + static_cast<std::ptrdiff_t>(near),
                               batch_.end(), [](const QueueEntry& a, const QueueEntry& c) {
                                   return a.serial < c.serial;
                               });
        }
        now_ = t;
        for (const QueueEntry& e : batch_) {
            auto& pend = pending_[e.net];
            if (pend.empty() || pend.front().serial != e.serial) {
                continue; // cancelled
            }
            pend.erase(pend.begin());
            if ((values_[e.net] != 0) == e.value) {
                continue;
            }
            if (++events_processed_ > options_.max_events) {
                raise_oscillation();
            }
            apply(e.net, e.value, e.time);
        }
        // Hand the storage back so the bucket keeps its capacity.
        batch_.clear();
        ring_[b].swap(batch_);
    }
    now_ = std::max(now_, t_end);

    WaveTrace out;
    out.probes.reserve(trace_.probes.size());
    for (std::size_t p = 0; p < start.size(); ++p) {
        const auto& src = trace_.probes[p];
        out.probes.push_back(ProbeTrace{
            src.label, src.net,
            std::vector<Transition>(src.transitions.begin() + static_cast<std::ptrdiff_t>(start[p]),
                                    src.transitions.end())});
    }
    return out;
}

} // namespace bsnn::desim
