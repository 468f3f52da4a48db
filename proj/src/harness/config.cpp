#include "bsnn/harness.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace bsnn::harness {

using nlohmann::json;

namespace {

const char* source_name(DatasetSource s) { return s == DatasetSource::Shd ? "shd" : "surrogate"; }

DatasetSource source_from(const std::string& s) {
    if (s == "shd") return DatasetSource::Shd;
    if (s == "surrogate") return DatasetSource::Surrogate;
    throw std::invalid_argument("dataset.source must be 'shd' or 'surrogate', got '" + s + "'");
}

const char* transport_name(Transport t) { return t == Transport::Udp ? "udp" : "inprocess"; }

Transport transport_from(const std::string& s) {
    if (s == "udp") return Transport::Udp;
    if (s == "inprocess") return Transport::InProcess;
    throw std::invalid_argument("transport.mode must be 'inprocess' or 'udp', got '" + s + "'");
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw std::invalid_argument("unknown config key '" + where + key + "'");
    }
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

void ExperimentConfig::validate() const {
    if (dims.x < 1 || dims.y < 1 || dims.z < 1) throw std::invalid_argument("grid dimensions must be positive");
    if (dims.layer_size() != static_cast<std::size_t>(shd::kChannels)) {
        throw std::invalid_argument("the receptive layer must have 49 neurons, one per input channel");
    }
    if (dims.size() > spikeio::kMaxProbes) {
        throw std::invalid_argument("the time tagger observes at most 200 neurons");
    }
    connectivity.validate();
    if (jitter_sigma_ps < 0) throw std::invalid_argument("jitter_sigma_ps must be non-negative");
    if (runs_per_sample < 1 || runs_per_sample > 8) throw std::invalid_argument("runs_per_sample must lie in 1..8");
    if (repeats < 1 || repeats > 16) throw std::invalid_argument("repeats must lie in 1..16");
    if (!(train.C > 0)) throw std::invalid_argument("train.C must be positive");
    if (train.optimizer.max_iterations < 1) throw std::invalid_argument("train.max_iterations must be positive");
    if (dataset.classes.size() < 2) throw std::invalid_argument("need at least two classes");
    std::set<int> seen;
    for (int c : dataset.classes) {
        if (c < 0 || c >= shd::kClasses || !seen.insert(c).second) {
            throw std::invalid_argument("dataset.classes must be distinct labels in 0..19");
        }
    }
    if (dataset.train_per_class < 1 || dataset.test_per_class < 1) {
        throw std::invalid_argument("per-class sample counts must be positive");
    }
    if (dataset.source == DatasetSource::Shd && dataset.shd_dir.empty()) {
        throw std::invalid_argument("dataset.shd_dir is required for the shd source");
    }
    if (dataset.augment_sigma < 0) throw std::invalid_argument("dataset.augment_sigma must be non-negative");
    if (workers < 0) throw std::invalid_argument("workers must be non-negative");
}

json to_json(const ExperimentConfig& c) {
    return json{
        {"grid", {{"x", c.dims.x}, {"y", c.dims.y}, {"z", c.dims.z}}},
        {"connectivity", netgen::params_to_json(c.connectivity)},
        {"seeds",
         {{"topology", c.topology_seed},
          {"jitter", c.jitter_seed},
          {"augmentation", c.augmentation_seed},
          {"dataset", c.dataset_seed}}},
        {"jitter_sigma_ps", c.jitter_sigma_ps},
        {"runs_per_sample", c.runs_per_sample},
        {"repeats", c.repeats},
        {"encoding", readout::to_string(c.encoding)},
        {"compare_encodings", c.compare_encodings},
        {"train",
         {{"C", c.train.C},
          {"max_iterations", c.train.optimizer.max_iterations},
          {"tolerance", c.train.optimizer.gradient_tolerance},
          {"history", c.train.optimizer.history}}},
        {"dataset",
         {{"source", source_name(c.dataset.source)},
          {"shd_dir", c.dataset.shd_dir},
          {"classes", c.dataset.classes},
          {"train_per_class", c.dataset.train_per_class},
          {"test_per_class", c.dataset.test_per_class},
          {"augment", c.dataset.augment},
          {"augment_sigma", c.dataset.augment_sigma}}},
        {"transport", {{"mode", transport_name(c.transport)}, {"host", c.udp_host}, {"port", c.udp_port}}},
        {"output_dir", c.output_dir},
        {"workers", c.workers},
    };
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    try {
        reject_unknown(j, {"grid", "connectivity", "seeds", "jitter_sigma_ps", "runs_per_sample",
                           "repeats", "encoding", "compare_encodings", "train", "dataset",
                           "transport", "output_dir", "workers", "config_hash"},
                       "");
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            reject_unknown(g, {"x", "y", "z"}, "grid.");
            read_if(g, "x", c.dims.x);
            read_if(g, "y", c.dims.y);
            read_if(g, "z", c.dims.z);
        }
        if (j.contains("connectivity")) c.connectivity = netgen::params_from_json(j.at("connectivity"));
        if (j.contains("seeds")) {
            const auto& s = j.at("seeds");
            reject_unknown(s, {"topology", "jitter", "augmentation", "dataset"}, "seeds.");
            read_if(s, "topology", c.topology_seed);
            read_if(s, "jitter", c.jitter_seed);
            read_if(s, "augmentation", c.augmentation_seed);
            read_if(s, "dataset", c.dataset_seed);
        }
        read_if(j, "jitter_sigma_ps", c.jitter_sigma_ps);
        read_if(j, "runs_per_sample", c.runs_per_sample);
        read_if(j, "repeats", c.repeats);
        if (j.contains("encoding")) c.encoding = readout::encoding_from_string(j.at("encoding").get<std::string>());
        read_if(j, "compare_encodings", c.compare_encodings);
        if (j.contains("train")) {
            const auto& t = j.at("train");
            reject_unknown(t, {"C", "max_iterations", "tolerance", "history"}, "train.");
            read_if(t, "C", c.train.C);
            read_if(t, "max_iterations", c.train.optimizer.max_iterations);
            read_if(t, "tolerance", c.train.optimizer.gradient_tolerance);
            read_if(t, "history", c.train.optimizer.history);
        }
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            reject_unknown(d, {"source", "shd_dir", "classes", "train_per_class", "test_per_class",
                               "augment", "augment_sigma"},
                           "dataset.");
            if (d.contains("source")) c.dataset.source = source_from(d.at("source").get<std::string>());
            read_if(d, "shd_dir", c.dataset.shd_dir);
            read_if(d, "classes", c.dataset.classes);
            read_if(d, "train_per_class", c.dataset.train_per_class);
            read_if(d, "test_per_class", c.dataset.test_per_class);
            read_if(d, "augment", c.dataset.augment);
            read_if(d, "augment_sigma", c.dataset.augment_sigma);
        }
        if (j.contains("transport")) {
            const auto& t = j.at("transport");
            reject_unknown(t, {"mode", "host", "port"}, "transport.");
            if (t.contains("mode")) c.transport = transport_from(t.at("mode").get<std::string>());
            read_if(t, "host", c.udp_host);
            read_if(t, "port", c.udp_port);
        }
        read_if(j, "output_dir", c.output_dir);
        read_if(j, "workers", c.workers);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error(file.string() + ": cannot open config");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(file.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error(file.string() + ": cannot open for writing");
    json j = to_json(config);
    j["config_hash"] = config_hash(config);
    out << j.dump(2) << '\n';
}

std::string config_hash(const ExperimentConfig& config) {
    // Placement and plumbing fields do not change results.
    json j = to_json(config);
    j.erase("output_dir");
    j.erase("workers");
    j.erase("transport");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace bsnn::harness
