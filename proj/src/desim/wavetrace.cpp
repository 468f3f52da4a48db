#include "bsnn/desim.hpp"

#include <ostream>

namespace bsnn::desim {

std::ostream& operator<<(std::ostream& os, const Transition& t) {
    return os << '(' << t.time << " ps, " << (t.value ? 1 : 0) << ')';
}

const ProbeTrace& WaveTrace::at(std::string_view label) const {
    for (const auto& p : probes) {
        if (p.label == label) {
            return p;
        }
    }
    throw std::out_of_range("no probe labelled '" + std::string(label) + "'");
}

std::vector<SimTime> WaveTrace::rising_edges(std::string_view label) const {
    std::vector<SimTime> out;
    for (const auto& tr : at(label).transitions) {
        if (tr.value) {
            out.push_back(tr.time);
        }
    }
    return out;
}

namespace {

// VCD short identifiers from the printable range '!'..'~'.
std::string vcd_id(std::size_t index) {
    std::string id;
    do {
        id.push_back(static_cast<char>('!' + index % 94));
        index /= 94;
    } while (index > 0);
    return id;
}

std::string sanitize(std::string s) {
    for (char& c : s) {
        if (c == ' ' || c == '\t') {
            c = '_';
        }
    }
    return s;
}

} // namespace

void write_vcd(const WaveTrace& trace, std::ostream& out, std::string_view module) {
    out << "$timescale 1ps $end\n";
    out << "$scope module " << module << " $end\n";
    for (std::size_t p = 0; p < trace.probes.size(); ++p) {
        out << "$var wire 1 " << vcd_id(p) << ' ' << sanitize(trace.probes[p].label) << " $end\n";
    }
    out << "$upscope $end\n$enddefinitions $end\n";
    out << "#0\n$dumpvars\n";
    for (std::size_t p = 0; p < trace.probes.size(); ++p) {
        out << '0' << vcd_id(p) << '\n';
    }
    out << "$end\n";

    // Merge all probe transitions in time order (stable by probe index).
    std::vector<std::size_t> cursor(trace.probes.size(), 0);
    SimTime last = -1;
    while (true) {
        SimTime t_min = -1;
        for (std::size_t p = 0; p < trace.probes.size(); ++p) {
            const auto& tr = trace.probes[p].transitions;
            if (cursor[p] < tr.size() && (t_min < 0 || tr[cursor[p]].time < t_min)) {
                t_min = tr[cursor[p]].time;
            }
        }
        if (t_min < 0) {
            break;
        }
        if (t_min != last) {
            out << '#' << t_min << '\n';
            last = t_min;
        }
        for (std::size_t p = 0; p < trace.probes.size(); ++p) {
            const auto& tr = trace.probes[p].transitions;
            while (cursor[p] < tr.size() && tr[cursor[p]].time == t_min) {
                out << (tr[cursor[p]].value ? '1' : '0') << vcd_id(p) << '\n';
                ++cursor[p];
            }
        }
    }
}

void write_trace_csv(const WaveTrace& trace, std::ostream& out) {
    out << "time_ps,net,value\n";
    std::vector<std::size_t> cursor(trace.probes.size(), 0);
    while (true) {
        std::size_t best = trace.probes.size();
        for (std::size_t p = 0; p < trace.probes.size(); ++p) {
            const auto& tr = trace.probes[p].transitions;
            if (cursor[p] < tr.size() &&
                (best == trace.probes.size() ||
                 tr[cursor[p]].time < trace.probes[best].transitions[cursor[best]].time)) {
                best = p;
            }
        }
        if (best == trace.probes.size()) {
            break;
        }
        const auto& t = trace.probes[best].transitions[cursor[best]++];
        out << t.time << ',' << trace.probes[best].label << ',' << (t.value ? 1 : 0) << '\n';
    }
}

} // namespace bsnn::desim
