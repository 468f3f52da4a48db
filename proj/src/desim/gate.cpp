#include "bsnn/desim.hpp"

#include <array>

namespace bsnn::desim {

namespace {

constexpr std::array<std::string_view, 7> kNames{"INV", "XOR2", "OR2", "AND2",
                                                 "DFF", "SRLATCH", "TLATCH"};

} // namespace

std::size_t arity(GateKind kind) {
    switch (kind) {
    case GateKind::Inv:
    case GateKind::TLatch:
        return 1;
    case GateKind::Xor2:
    case GateKind::Or2:
    case GateKind::And2:
    case GateKind::Dff:
    case GateKind::SrLatch:
        return 2;
    }
    return 0;
}

bool is_sequential(GateKind kind) {
    return kind == GateKind::Dff || kind == GateKind::SrLatch || kind == GateKind::TLatch;
}

std::string_view to_string(GateKind kind) { return kNames.at(static_cast<std::size_t>(kind)); }

GateKind gate_kind_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == name) {
            return static_cast<GateKind>(i);
        }
    }
    throw NetlistError("unknown gate kind '" + std::string(name) + "'");
}

GateEval eval_gate(GateKind kind, std::span<const bool> in, LatchState state,
                   SrConflictPolicy policy) {
    if (in.size() != arity(kind)) {
        throw NetlistError("gate " + std::string(to_string(kind)) + " expects " +
                           std::to_string(arity(kind)) + " inputs, got " +
                           std::to_string(in.size()));
    }
    GateEval r;
    r.state = state;
    switch (kind) {
    case GateKind::Inv:
        r.value = !in[0];
        break;
    case GateKind::Xor2:
        r.value = in[0] != in[1];
        break;
    case GateKind::Or2:
        r.value = in[0] || in[1];
        break;
    case GateKind::And2:
        r.value = in[0] && in[1];
        break;
    case GateKind::Dff:
        if (in[1] && !state.last_clock) {
            r.state.q = in[0];
        }
        r.state.last_clock = in[1];
        r.value = r.state.q;
        break;
    case GateKind::TLatch:
        if (in[0] && !state.last_clock) {
            r.state.q = !state.q;
        }
        r.state.last_clock = in[0];
        r.value = r.state.q;
        break;
    case GateKind::SrLatch:
        if (in[0] && in[1]) {
            r.conflict = true;
            switch (policy) {
            case SrConflictPolicy::Hold:
                break;
            case SrConflictPolicy::Set:
                r.state.q = true;
                break;
            case SrConflictPolicy::Reset:
                r.state.q = false;
                break;
            case SrConflictPolicy::Error:
                throw SimulationError("SR latch driven with S=R=1");
            }
        } else if (in[0]) {
            r.state.q = true;
        } else if (in[1]) {
            r.state.q = false;
        }
        r.value = r.state.q;
        break;
    }
    return r;
}

} // namespace bsnn::desim
