#include "bsnn/spikeio.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace bsnn::spikeio {

namespace {

void sort_events(std::vector<RasterEvent>& events) {
    std::sort(events.begin(), events.end(), [](const RasterEvent& a, const RasterEvent& b) {
        return a.time_ns != b.time_ns ? a.time_ns < b.time_ns : a.channel < b.channel;
    });
}

std::string fmt_ns(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

} // namespace

RasterWindow raster_from_matrix(const ObservationMatrix& m, const WindowParams& window,
                                double duration_ns, std::vector<std::string> labels) {
    RasterWindow r;
    r.duration_ns = duration_ns;
    r.labels = std::move(labels);
    if (r.labels.empty()) {
        for (int c = 0; c < m.channels(); ++c) r.labels.push_back(std::to_string(c));
    }
    for (int t = 0; t < m.bins(); ++t) {
        const double time_ns = static_cast<double>(t) * static_cast<double>(window.bin) / 1000.0;
        if (time_ns >= duration_ns) break;
        for (int c = 0; c < m.channels(); ++c) {
            if (m.get(t, c)) r.events.push_back(RasterEvent{time_ns, c});
        }
    }
    return r;
}

RasterWindow raster_from_trace(const desim::WaveTrace& trace, SimTime start, SimTime duration) {
    RasterWindow r;
    r.duration_ns = static_cast<double>(duration) / 1000.0;
    for (std::size_t c = 0; c < trace.probes.size(); ++c) {
        r.labels.push_back(trace.probes[c].label);
        for (const auto& tr : trace.probes[c].transitions) {
            if (tr.value && tr.time >= start && tr.time < start + duration) {
                r.events.push_back(RasterEvent{static_cast<double>(tr.time - start) / 1000.0,
                                               static_cast<int>(c)});
            }
        }
    }
    sort_events(r.events);
    return r;
}

RasterWindow raster_from_input(const SpikeTrainInput& input, double duration_ns) {
    RasterWindow r;
    r.duration_ns = duration_ns;
    for (int c = 0; c < input.channels; ++c) r.labels.push_back("in" + std::to_string(c));
    for (const auto& e : input.events) {
        const double t = static_cast<double>(e.step) * static_cast<double>(kStep) / 1000.0;
        if (t < duration_ns) r.events.push_back(RasterEvent{t, e.channel});
    }
    sort_events(r.events);
    return r;
}

void write_raster_csv(const RasterWindow& raster, std::ostream& out) {
    out << "time_ns,channel\n";
    for (const auto& e : raster.events) out << fmt_ns(e.time_ns) << ',' << e.channel << '\n';
}

std::vector<RasterEvent> read_raster_csv(std::istream& in) {
    std::string line;
    while (std::getline(in, line) && !line.empty() && line.front() == '#') {}
    if (!in || line != "time_ns,channel") {
        throw std::runtime_error("raster CSV must start with 'time_ns,channel'");
    }
    std::vector<RasterEvent> events;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw std::runtime_error("bad raster row: " + line);
        events.push_back(RasterEvent{std::stod(line.substr(0, comma)),
                                     std::stoi(line.substr(comma + 1))});
    }
    return events;
}

void write_raster_svg(const RasterWindow& raster, std::ostream& out, const std::string& title) {
    const int rows = std::max<int>(1, static_cast<int>(raster.labels.size()));
    const double left = 60, top = 30, plot_w = 800;
    const double row_h = std::clamp(600.0 / rows, 2.0, 12.0);
    const double plot_h = row_h * rows;
    const double width = left + plot_w + 20, height = top + plot_h + 45;
    const double span = raster.duration_ns > 0 ? raster.duration_ns : 1.0;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty()) {
        out << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">" << title << "</text>\n";
    }
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (const auto& e : raster.events) {
        const double x = left + plot_w * e.time_ns / span;
        const double y = top + row_h * e.channel;
        out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"1.5\" height=\""
            << std::max(1.0, row_h - 0.5) << "\" fill=\"black\"/>\n";
    }
    for (int k = 0; k <= 4; ++k) {
        const double x = left + plot_w * k / 4.0;
        out << "<text x=\"" << x << "\" y=\"" << top + plot_h + 15 << "\" text-anchor=\"middle\">"
            << fmt_ns(span * k / 4.0 / 1000.0) << "</text>\n";
    }
    out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << top + plot_h + 35
        << "\" text-anchor=\"middle\">time (us)</text>\n";
    out << "<text x=\"15\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 15 "
        << top + plot_h / 2 << ")\" text-anchor=\"middle\">channel</text>\n";
    out << "</svg>\n";
}

} // namespace bsnn::spikeio
