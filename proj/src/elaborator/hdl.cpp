#include "bsnn/elaborator.hpp"

#include <algorithm>
#include <ostream>
#include <set>

namespace bsnn::elab {

namespace {

using desim::GateKind;

std::string wire(NetId n) { return "w" + std::to_string(n); }

std::string module_name(const Netlist& nl, std::uint32_t group) {
    std::string s = "grp" + std::to_string(group) + "_";
    for (char c : nl.groups().at(group)) {
        s.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    }
    return s;
}

const char* primitive(GateKind k) {
    switch (k) {
    case GateKind::Inv: return "not";
    case GateKind::Xor2: return "xor";
    case GateKind::Or2: return "or";
    case GateKind::And2: return "and";
    case GateKind::Dff: return "bsnn_dff";
    case GateKind::SrLatch: return "bsnn_srlatch";
    case GateKind::TLatch: return "bsnn_tlatch";
    }
    return "?";
}

void emit_cells(std::ostream& out, const std::set<GateKind>& used) {
    if (used.count(GateKind::Dff)) {
        out << "module bsnn_dff #(parameter DELAY = 280) (input d, input clk, output q, output qn);\n"
               "  reg state = 1'b0;\n"
               "  always @(posedge clk) state <= d;\n"
               "  assign #DELAY q = state;\n"
               "  assign #DELAY qn = ~state;\n"
               "endmodule\n\n";
    }
    if (used.count(GateKind::SrLatch)) {
        out << "module bsnn_srlatch #(parameter DELAY = 280) (input s, input r, output q, output qn);\n"
               "  reg state = 1'b0;\n"
               "  always @(s or r) if (s && !r) state <= 1'b1; else if (r && !s) state <= 1'b0;\n"
               "  assign #DELAY q = state;\n"
               "  assign #DELAY qn = ~state;\n"
               "endmodule\n\n";
    }
    if (used.count(GateKind::TLatch)) {
        out << "module bsnn_tlatch #(parameter DELAY = 280) (input t, output q, output qn);\n"
               "  reg state = 1'b0;\n"
               "  always @(posedge t) state <= ~state;\n"
               "  assign #DELAY q = state;\n"
               "  assign #DELAY qn = ~state;\n"
               "endmodule\n\n";
    }
}

void emit_gate(std::ostream& out, const desim::GateInstance& g, std::size_t index) {
    const std::string name = "g" + std::to_string(index);
    const auto opt = [](NetId n) { return n == desim::kNoNet ? std::string() : wire(n); };
    switch (g.kind) {
    case GateKind::Inv:
        out << "  not #" << g.delay << ' ' << name << " (" << wire(g.output) << ", "
            << wire(g.inputs[0]) << ");\n";
        break;
    case GateKind::Xor2:
    case GateKind::Or2:
    case GateKind::And2:
        out << "  " << primitive(g.kind) << " #" << g.delay << ' ' << name << " ("
            << wire(g.output) << ", " << wire(g.inputs[0]) << ", " << wire(g.inputs[1]) << ");\n";
        break;
    case GateKind::Dff:
        out << "  bsnn_dff #(.DELAY(" << g.delay << ")) " << name << " (.d(" << wire(g.inputs[0])
            << "), .clk(" << wire(g.inputs[1]) << "), .q(" << wire(g.output) << "), .qn("
            << opt(g.output_n) << "));\n";
        break;
    case GateKind::SrLatch:
        out << "  bsnn_srlatch #(.DELAY(" << g.delay << ")) " << name << " (.s("
            << wire(g.inputs[0]) << "), .r(" << wire(g.inputs[1]) << "), .q(" << wire(g.output)
            << "), .qn(" << opt(g.output_n) << "));\n";
        break;
    case GateKind::TLatch:
        out << "  bsnn_tlatch #(.DELAY(" << g.delay << ")) " << name << " (.t("
            << wire(g.inputs[0]) << "), .q(" << wire(g.output) << "), .qn(" << opt(g.output_n)
            << "));\n";
        break;
    }
}

} // namespace

void emit_hdl(const Netlist& nl, std::ostream& out, const std::string& top) {
    const auto& gates = nl.gates();
    out << "// Structural gate-level netlist\n"
        << "// nets: " << nl.net_count() << ", gates: " << gates.size()
        << ", probes: " << nl.probes().size() << "\n";
    if (gates.empty() && nl.ports().empty()) {
        return;
    }
    out << "`timescale 1ps/1ps\n\n";

    std::set<GateKind> used;
    for (const auto& g : gates) used.insert(g.kind);
    emit_cells(out, used);

    const std::size_t n_groups = nl.groups().size();
    const std::size_t n_nets = nl.net_count();
    // Owner group of each gate-driven net; readers per group.
    std::vector<std::int64_t> owner(n_nets, -1);
    std::vector<std::set<NetId>> reads(n_groups);
    std::vector<std::vector<std::size_t>> members(n_groups);
    for (std::size_t i = 0; i < gates.size(); ++i) {
        const auto& g = gates[i];
        owner[g.output] = g.group;
        if (g.output_n != desim::kNoNet) owner[g.output_n] = g.group;
        for (std::size_t k = 0; k < desim::arity(g.kind); ++k) reads[g.group].insert(g.inputs[k]);
        members[g.group].push_back(i);
    }
    std::set<NetId> probed;
    for (const auto& p : nl.probes()) probed.insert(p.net);

    // A net leaves its group when another group reads it or it is probed.
    std::vector<bool> exported(n_nets, false);
    for (std::size_t grp = 0; grp < n_groups; ++grp) {
        for (NetId r : reads[grp]) {
            if (owner[r] != static_cast<std::int64_t>(grp)) exported[r] = true;
        }
    }
    for (NetId p : probed) exported[p] = true;

    std::vector<std::vector<NetId>> inputs(n_groups), outputs(n_groups);
    for (std::size_t grp = 0; grp < n_groups; ++grp) {
        if (members[grp].empty()) continue;
        for (NetId r : reads[grp]) {
            if (owner[r] != static_cast<std::int64_t>(grp)) inputs[grp].push_back(r);
        }
        for (NetId net = 0; net < n_nets; ++net) {
            if (owner[net] == static_cast<std::int64_t>(grp) && exported[net]) {
                outputs[grp].push_back(net);
            }
        }
        out << "module " << module_name(nl, static_cast<std::uint32_t>(grp)) << " (";
        bool first = true;
        for (NetId w : inputs[grp]) {
            out << (first ? "" : ", ") << "input " << wire(w);
            first = false;
        }
        for (NetId w : outputs[grp]) {
            out << (first ? "" : ", ") << "output " << wire(w);
            first = false;
        }
        out << ");\n";
        for (NetId net = 0; net < n_nets; ++net) {
            if (owner[net] == static_cast<std::int64_t>(grp) && !exported[net]) {
                out << "  wire " << wire(net) << "; /* synthesis keep */ // " << nl.net_name(net)
                    << '\n';
            }
        }
        for (std::size_t i : members[grp]) emit_gate(out, gates[i], i);
        out << "endmodule\n\n";
    }

    out << "module " << top << " (";
    bool first = true;
    for (NetId p : nl.ports()) {
        out << (first ? "" : ", ") << "input " << wire(p);
        first = false;
    }
    for (NetId p : probed) {
        if (nl.driver(p) == desim::Driver::Port) continue;
        out << (first ? "" : ", ") << "output " << wire(p);
        first = false;
    }
    out << ");\n";
    for (NetId net = 0; net < n_nets; ++net) {
        if (exported[net] && owner[net] >= 0 && !probed.count(net)) {
            out << "  wire " << wire(net) << "; /* synthesis keep */ // " << nl.net_name(net) << '\n';
        }
    }
    for (std::size_t grp = 0; grp < n_groups; ++grp) {
        if (members[grp].empty()) continue;
        out << "  " << module_name(nl, static_cast<std::uint32_t>(grp)) << " u" << grp << " (";
        bool f = true;
        for (const auto* list : {&inputs[grp], &outputs[grp]}) {
            for (NetId w : *list) {
                out << (f ? "" : ", ") << '.' << wire(w) << '(' << wire(w) << ')';
                f = false;
            }
        }
        out << ");\n";
    }
    out << "endmodule\n";
}

} // namespace bsnn::elab
