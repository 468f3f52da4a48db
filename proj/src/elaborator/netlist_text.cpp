#include "bsnn/elaborator.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace bsnn::elab {

namespace {

constexpr const char* kHeader = "bsnn-netlist 1";

std::string net_field(NetId n) { return n == desim::kNoNet ? "-" : std::to_string(n); }

NetId parse_net(const std::string& s) {
    return s == "-" ? desim::kNoNet : static_cast<NetId>(std::stoul(s));
}

std::string rest_of_line(std::istringstream& ls) {
    std::string rest;
    std::getline(ls >> std::ws, rest);
    return rest;
}

void expect(bool ok, const std::string& what) {
    if (!ok) throw desim::NetlistError("netlist text: " + what);
}

} // namespace

void write_netlist_text(const Netlist& nl, std::ostream& out) {
    out << kHeader << '\n';
    out << "groups " << nl.groups().size() << '\n';
    for (const auto& g : nl.groups()) out << "group " << g << '\n';
    out << "nets " << nl.net_count() << '\n';
    for (NetId i = 0; i < nl.net_count(); ++i) {
        const char* kind = nl.driver(i) == desim::Driver::Port ? "port" : "wire";
        out << "net " << i << ' ' << kind << ' ' << nl.net_name(i) << '\n';
    }
    out << "gates " << nl.gates().size() << '\n';
    for (const auto& g : nl.gates()) {
        out << "gate " << desim::to_string(g.kind) << ' ' << net_field(g.inputs[0]) << ' '
            << net_field(g.inputs[1]) << ' ' << net_field(g.output) << ' ' << net_field(g.output_n)
            << ' ' << g.delay << ' ' << g.reject_window << ' ' << g.group << '\n';
    }
    out << "probes " << nl.probes().size() << '\n';
    for (const auto& p : nl.probes()) out << "probe " << p.net << ' ' << p.label << '\n';
    out << "end\n";
}

Netlist read_netlist_text(std::istream& in) {
    std::string line;
    expect(std::getline(in, line) && line == kHeader, "bad header");
    Netlist nl;
    auto next = [&](const std::string& keyword) {
        expect(static_cast<bool>(std::getline(in, line)), "truncated before " + keyword);
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        expect(word == keyword, "expected '" + keyword + "', got '" + word + "'");
        return ls;
    };
    std::size_t count = 0;
    {
        auto ls = next("groups");
        ls >> count;
    }
    for (std::size_t i = 0; i < count; ++i) {
        auto ls = next("group");
        const std::string name = rest_of_line(ls);
        if (i > 0) nl.add_group(name);
    }
    {
        auto ls = next("nets");
        ls >> count;
    }
    for (std::size_t i = 0; i < count; ++i) {
        auto ls = next("net");
        NetId id = 0;
        std::string kind;
        ls >> id >> kind;
        expect(id == i, "net ids must be dense and ordered");
        const std::string name = rest_of_line(ls);
        if (kind == "port") {
            nl.add_port(name);
        } else {
            expect(kind == "wire", "unknown net kind " + kind);
            nl.add_net(name);
        }
    }
    {
        auto ls = next("gates");
        ls >> count;
    }
    for (std::size_t i = 0; i < count; ++i) {
        auto ls = next("gate");
        std::string kind, a, b, o, on;
        desim::GateInstance g;
        ls >> kind >> a >> b >> o >> on >> g.delay >> g.reject_window >> g.group;
        expect(!ls.fail(), "malformed gate line: " + line);
        g.kind = desim::gate_kind_from_string(kind);
        g.inputs = {parse_net(a), parse_net(b)};
        g.output = parse_net(o);
        g.output_n = parse_net(on);
        expect(g.group < nl.groups().size(), "gate group out of range");
        nl.add_gate(g);
    }
    {
        auto ls = next("probes");
        ls >> count;
    }
    for (std::size_t i = 0; i < count; ++i) {
        auto ls = next("probe");
        NetId net = 0;
        ls >> net;
        nl.add_probe(net, rest_of_line(ls));
    }
    next("end");
    return nl;
}

} // namespace bsnn::elab
