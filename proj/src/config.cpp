#include "parcelforge/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <set>
#include <sstream>

#include "parcelforge/error.hpp"
#include "parcelforge/io.hpp"

namespace parcelforge {

namespace {

namespace pt = boost::property_tree;

// Shortest text that parses back to the same double.
std::string fmt(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::string& v) { return v; }

std::string fmt(const Coord& c) { return fmt(c[0]) + "," + fmt(c[1]) + "," + fmt(c[2]); }

std::string fmt(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
    return out;
}

std::string fmt(CorrelationMode m) { return m == CorrelationMode::absolute ? "absolute" : "signed"; }
std::string fmt(Eq6Form f) { return f == Eq6Form::standard ? "standard" : "literal"; }

[[noreturn]] void bad(const std::string& key, const std::string& text) {
    throw ParameterError("config: cannot parse '" + text + "' for " + key);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const char* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end) bad(key, text);
    return v;
}

void parse(const std::string& key, const std::string& t, double& v) { v = parse_number<double>(key, t); }
void parse(const std::string& key, const std::string& t, int& v) { v = parse_number<int>(key, t); }
void parse(const std::string& key, const std::string& t, std::uint64_t& v) { v = parse_number<std::uint64_t>(key, t); }
void parse(const std::string&, const std::string& t, std::string& v) { v = t; }

void parse(const std::string& key, const std::string& t, bool& v) {
    if (t == "true" || t == "1") v = true;
    else if (t == "false" || t == "0") v = false;
    else bad(key, t);
}

std::vector<int> parse_list(const std::string& key, const std::string& t) {
    std::vector<int> out;
    if (t.empty()) return out;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, item));
    return out;
}

void parse(const std::string& key, const std::string& t, std::vector<int>& v) { v = parse_list(key, t); }

void parse(const std::string& key, const std::string& t, Coord& v) {
    auto l = parse_list(key, t);
    if (l.size() != 3) bad(key, t);
    v = {l[0], l[1], l[2]};
}

void parse(const std::string& key, const std::string& t, CorrelationMode& v) {
    if (t == "absolute") v = CorrelationMode::absolute;
    else if (t == "signed") v = CorrelationMode::signed_corr;
    else bad(key, t);
}

void parse(const std::string& key, const std::string& t, Eq6Form& v) {
    if (t == "standard") v = Eq6Form::standard;
    else if (t == "literal") v = Eq6Form::literal;
    else bad(key, t);
}

// One place lists every field; writing and reading both walk it.
template <class F>
void visit(PipelineConfig& c, F&& f) {
    f("input", "path", c.input_path);
    f("input", "synthetic", c.synthetic);

    auto& s = c.synth;
    f("synthetic", "n_subjects", s.n_subjects);
    f("synthetic", "dims", s.dims);
    f("synthetic", "n_true_parcels", s.n_true_parcels);
    f("synthetic", "n_task_parcels", s.n_task_parcels);
    f("synthetic", "n_conditions", s.n_conditions);
    f("synthetic", "n_timepoints", s.n_timepoints);
    f("synthetic", "tr_seconds", s.tr_seconds);
    f("synthetic", "task_period_seconds", s.task_period_seconds);
    f("synthetic", "parcel_latency_step_seconds", s.parcel_latency_step_seconds);
    f("synthetic", "hrf_latency_jitter_seconds", s.hrf_latency_jitter_seconds);
    f("synthetic", "noise_sigma", s.noise_sigma);
    f("synthetic", "task_amplitude", s.task_amplitude);
    f("synthetic", "drift_amplitude", s.drift_amplitude);
    f("synthetic", "physio_amplitude", s.physio_amplitude);
    f("synthetic", "physio_period_seconds", s.physio_period_seconds);
    f("synthetic", "rng_seed", s.rng_seed);

    f("ica", "n_components", c.n_components);
    f("ica", "max_iterations", c.fastica.max_iterations);
    f("ica", "tolerance", c.fastica.tolerance);
    f("ica", "rng_seed", c.ica_seed);
    f("ica", "correlation_mode", c.mode);
    f("ica", "n_clusters", c.n_clusters);
    f("ica", "n_select", c.n_select);
    f("ica", "ic_indices", c.ic_indices);

    f("seeds", "radius", c.seed_radius);
    f("seeds", "n_seeds", c.n_seeds);

    f("pca", "drop_leading", c.truncation.drop_leading);
    f("pca", "drop_trailing", c.truncation.drop_trailing);
    f("pca", "variance_floor_fraction", c.truncation.variance_floor_fraction);

    f("pls", "n_latents", c.n_latents);

    f("parcellate", "n_parcels", c.n_parcels);
    f("parcellate", "embed_dims", c.embed_dims);
    f("parcellate", "rng_seed", c.parcel_seed);
    f("parcellate", "restarts", c.kmeans.restarts);
    f("parcellate", "max_iterations", c.kmeans.max_iterations);
    f("parcellate", "tolerance", c.kmeans.tolerance);

    f("evaluate", "glm_threshold", c.glm_threshold);
    f("evaluate", "pls_threshold", c.pls_threshold);
    f("evaluate", "eq6", c.eq6);
}

}  // namespace

std::string to_ini(const PipelineConfig& config) {
    PipelineConfig c = config;
    std::ostringstream out;
    std::string section;
    visit(c, [&](const char* sec, const char* key, auto& value) {
        if (section != sec) {
            out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
            section = sec;
        }
        out << key << " = " << fmt(value) << '\n';
    });
    return out.str();
}

PipelineConfig parse_ini(const std::string& text) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParameterError(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
    }

    PipelineConfig c;
    std::set<std::string> known;
    visit(c, [&](const char* sec, const char* key, auto& value) {
        const std::string path = std::string(sec) + "." + key;
        known.insert(path);
        if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) parse(path, *v, value);
    });
    for (const auto& [sec, body] : tree) {
        if (body.empty() && !body.data().empty()) throw ParameterError("config: key '" + sec + "' outside a section");
        for (const auto& [key, _] : body)
            if (!known.count(sec + "." + key)) throw ParameterError("config: unknown key " + sec + "." + key);
    }
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ParameterError("config file not found: " + path.string());
    return parse_ini(io::read_text(path));
}

}  // namespace parcelforge
