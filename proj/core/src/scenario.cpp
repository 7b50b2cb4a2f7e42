#include "nfsim/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nfsim/error.hpp"

namespace nfsim {

using nlohmann::json;

namespace {

const std::set<std::string> kTopLevel = {"physics",       "layers",      "feed",  "thresholds",
                                         "imperfections", "calibration", "sweep"};

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError("'" + where + "' must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
}

double get_number(const json& obj, const std::string& where, const char* key, double fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number()) throw ConfigError("'" + where + "." + key + "' must be a number");
    return it->get<double>();
}

double require_number(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) throw ConfigError("missing key '" + where + "." + key + "'");
    return get_number(obj, where, key, 0.0);
}

int get_int(const json& obj, const std::string& where, const char* key, int fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_integer())
        throw ConfigError("'" + where + "." + key + "' must be an integer");
    return it->get<int>();
}

bool get_bool(const json& obj, const std::string& where, const char* key, bool fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_boolean()) throw ConfigError("'" + where + "." + key + "' must be a boolean");
    return it->get<bool>();
}

std::string get_string(const json& obj, const std::string& where, const char* key,
                       const std::string& fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_string()) throw ConfigError("'" + where + "." + key + "' must be a string");
    return it->get<std::string>();
}

json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return json(text);
    }
}

void apply_override(json& doc, const std::string& spec) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + spec + "' is not of the form KEY=VALUE");
    std::string key = spec.substr(0, eq);
    json value = parse_value(spec.substr(eq + 1));
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string part; std::getline(ss, part, '.');) {
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        parts.push_back(part);
    }
    if (!kTopLevel.count(parts.front())) throw ConfigError("unknown key '" + key + "'");
    json* node = &doc;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        json& child = (*node)[parts[i]];
        if (child.is_null()) child = json::object();
        if (!child.is_object())
            throw ConfigError("override key '" + key + "' descends into a non-object");
        node = &child;
    }
    (*node)[parts.back()] = value;
}

void parse_physics(const json& p, SystemConfig& c) {
    check_keys(p, "physics",
               {"wavelength", "frequency_hz", "aperture_diameter", "element_pitch",
                "retention_baseline", "engine", "rx_phase"});
    bool has_lambda = p.contains("wavelength");
    bool has_freq = p.contains("frequency_hz");
    if (has_lambda == has_freq)
        throw ConfigError("physics needs exactly one of 'wavelength' or 'frequency_hz'");
    if (has_lambda) {
        c.wavelength = require_number(p, "physics", "wavelength");
    } else {
        double f = require_number(p, "physics", "frequency_hz");
        if (!(f > 0)) throw ConfigError("physics.frequency_hz must be > 0");
        c.wavelength = kSpeedOfLight / f;
    }
    c.aperture_diameter = require_number(p, "physics", "aperture_diameter");
    c.element_pitch = get_number(p, "physics", "element_pitch", c.wavelength / 2.0);
    std::string rb = get_string(p, "physics", "retention_baseline", "ideal_aperture");
    if (rb == "ideal_aperture")
        c.retention_baseline = RetentionBaseline::ideal_aperture;
    else if (rb == "closed_form")
        c.retention_baseline = RetentionBaseline::closed_form;
    else
        throw ConfigError("physics.retention_baseline must be 'ideal_aperture' or 'closed_form'");
    std::string eng = get_string(p, "physics", "engine", "green");
    if (eng == "green")
        c.engine = PropagationEngine::green;
    else if (eng == "fresnel")
        c.engine = PropagationEngine::fresnel;
    else
        throw ConfigError("physics.engine must be 'green' or 'fresnel'");
    c.rx_phase = get_number(p, "physics", "rx_phase", 0.0);
}

void parse_layers(const json& l, SystemConfig& c) {
    check_keys(l, "layers", {"count", "spacing", "spacings", "optimizer"});
    if (!l.contains("count")) throw ConfigError("missing key 'layers.count'");
    c.layer_count = get_int(l, "layers", "count", 1);
    if (c.layer_count < 1) throw ConfigError("layers.count must be >= 1");
    if (l.contains("spacing") && l.contains("spacings"))
        throw ConfigError("layers accepts 'spacing' or 'spacings', not both");
    if (l.contains("spacings")) {
        const json& s = l.at("spacings");
        if (!s.is_array()) throw ConfigError("layers.spacings must be an array");
        c.layer_spacings.clear();
        for (const auto& v : s) {
            if (!v.is_number()) throw ConfigError("layers.spacings entries must be numbers");
            c.layer_spacings.push_back(v.get<double>());
        }
    } else {
        double d = get_number(l, "layers", "spacing", 5.0 * c.wavelength);
        c.layer_spacings.assign(static_cast<std::size_t>(c.layer_count - 1), d);
    }
    if (l.contains("optimizer")) {
        const json& o = l.at("optimizer");
        const std::string w = "layers.optimizer";
        check_keys(o, w,
                   {"max_sweeps", "tol", "refine", "refine_steps", "step_size", "history",
                    "random_init"});
        auto& s = c.optimizer;
        s.max_sweeps = get_int(o, w, "max_sweeps", s.max_sweeps);
        s.tol = get_number(o, w, "tol", s.tol);
        s.refine = get_bool(o, w, "refine", s.refine);
        s.refine_steps = get_int(o, w, "refine_steps", s.refine_steps);
        s.step_size = get_number(o, w, "step_size", s.step_size);
        s.history = get_int(o, w, "history", s.history);
        s.random_init = get_bool(o, w, "random_init", s.random_init);
    }
}

void parse_feed(const json& f, SystemConfig& c) {
    check_keys(f, "feed", {"kind", "distance", "power"});
    std::string kind = get_string(f, "feed", "kind", "point_source");
    if (kind == "point_source")
        c.feed.kind = FeedKind::point_source;
    else if (kind == "uniform_plane")
        c.feed.kind = FeedKind::uniform_plane;
    else
        throw ConfigError("feed.kind must be 'point_source' or 'uniform_plane'");
    c.feed.feed_distance = get_number(f, "feed", "distance", 0.2 * c.aperture_diameter);
    c.feed.power = get_number(f, "feed", "power", 1.0);
}

void parse_thresholds(const json& t, SystemConfig& c) {
    const std::string w = "thresholds";
    check_keys(t, w,
               {"gain_loss_db", "lateral_retention", "axial_retention", "residual_phase",
                "trunc_phase"});
    auto& th = c.thresholds;
    th.gain_loss_db = get_number(t, w, "gain_loss_db", th.gain_loss_db);
    th.lateral_retention = get_number(t, w, "lateral_retention", th.lateral_retention);
    th.axial_retention = get_number(t, w, "axial_retention", th.axial_retention);
    th.residual_phase = get_number(t, w, "residual_phase", th.residual_phase);
    th.trunc_phase = get_number(t, w, "trunc_phase", th.trunc_phase);
}

void parse_imperfections(const json& i, SystemConfig& c) {
    const std::string w = "imperfections";
    check_keys(i, w,
               {"misalignment", "transmission_efficiency", "phase_bits", "spacing_deviation",
                "rng_seed"});
    auto& im = c.imperfections;
    im.misalignment = get_number(i, w, "misalignment", 0.0);
    im.transmission_efficiency = get_number(i, w, "transmission_efficiency", 1.0);
    if (i.contains("phase_bits") && !i.at("phase_bits").is_null()) {
        im.phase_bits = get_int(i, w, "phase_bits", 0);
        if (im.phase_bits < 1) throw ConfigError("imperfections.phase_bits must be >= 1 or null");
    } else {
        im.phase_bits = 0;
    }
    im.spacing_deviation = get_number(i, w, "spacing_deviation", 0.0);
    if (i.contains("rng_seed")) {
        const json& s = i.at("rng_seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
            throw ConfigError("imperfections.rng_seed must be a nonnegative integer");
        im.rng_seed = s.get<std::uint64_t>();
    }
}

void parse_calibration(const json& k, SystemConfig& c) {
    const std::string w = "calibration";
    check_keys(k, w,
               {"xi_lat", "xi_ax", "chi_lat", "mu", "nu", "gamma_loss", "gamma_quant",
                "gamma_gap", "c_lat", "c_ax", "beta", "xi_ax2", "xi_ax4", "xi_ali_ax",
                "eta_aper0"});
    auto& cc = c.calibration;
    cc.xi_lat = get_number(k, w, "xi_lat", cc.xi_lat);
    cc.xi_ax = get_number(k, w, "xi_ax", cc.xi_ax);
    cc.chi_lat = get_number(k, w, "chi_lat", cc.chi_lat);
    cc.mu = get_number(k, w, "mu", cc.mu);
    cc.nu = get_number(k, w, "nu", cc.nu);
    cc.gamma_loss = get_number(k, w, "gamma_loss", cc.gamma_loss);
    cc.gamma_quant = get_number(k, w, "gamma_quant", cc.gamma_quant);
    cc.gamma_gap = get_number(k, w, "gamma_gap", cc.gamma_gap);
    cc.c_lat = get_number(k, w, "c_lat", cc.c_lat);
    cc.c_ax = get_number(k, w, "c_ax", cc.c_ax);
    cc.beta = get_number(k, w, "beta", cc.beta);
    cc.xi_ax2 = get_number(k, w, "xi_ax2", cc.xi_ax2);
    cc.xi_ax4 = get_number(k, w, "xi_ax4", cc.xi_ax4);
    cc.xi_ali_ax = get_number(k, w, "xi_ali_ax", cc.xi_ali_ax);
    if (k.contains("eta_aper0")) {
        const json& e = k.at("eta_aper0");
        cc.eta_aper0.clear();
        if (e.is_number()) {
            cc.eta_aper0.push_back(e.get<double>());
        } else if (e.is_array()) {
            for (const auto& v : e) {
                if (!v.is_number()) throw ConfigError("calibration.eta_aper0 entries must be numbers");
                cc.eta_aper0.push_back(v.get<double>());
            }
        } else {
            throw ConfigError("calibration.eta_aper0 must be a number or an array");
        }
    }
}

void parse_sweep(const json& s, SystemConfig& c) {
    const std::string w = "sweep";
    check_keys(s, w,
               {"r_min_frac", "r_max_frac", "num_points", "spacing", "layer_counts",
                "focal_distance"});
    auto& sp = c.sweep;
    sp = SweepPlan{};
    sp.r_min_frac = get_number(s, w, "r_min_frac", sp.r_min_frac);
    sp.r_max_frac = get_number(s, w, "r_max_frac", sp.r_max_frac);
    sp.num_points = get_int(s, w, "num_points", sp.num_points);
    std::string spacing = get_string(s, w, "spacing", "linear");
    if (spacing == "linear")
        sp.spacing = SweepSpacing::linear;
    else if (spacing == "geometric")
        sp.spacing = SweepSpacing::geometric;
    else
        throw ConfigError("sweep.spacing must be 'linear' or 'geometric'");
    if (s.contains("layer_counts")) {
        const json& lc = s.at("layer_counts");
        if (!lc.is_array()) throw ConfigError("sweep.layer_counts must be an array");
        for (const auto& v : lc) {
            if (!v.is_number_integer()) throw ConfigError("sweep.layer_counts entries must be integers");
            sp.layer_counts.push_back(v.get<int>());
        }
    }
    if (s.contains("focal_distance") && !s.at("focal_distance").is_null())
        sp.focal_distance = get_number(s, w, "focal_distance", 0.0);
}

}  // namespace

SystemConfig parse_scenario(const std::string& text, const std::vector<std::string>& overrides) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }
    check_keys(doc, "", kTopLevel);
    for (const auto& o : overrides) apply_override(doc, o);

    for (const char* key : {"physics", "layers", "sweep"})
        if (!doc.contains(key)) throw ConfigError(std::string("missing '") + key + "' block");

    SystemConfig c;
    try {
        parse_physics(doc.at("physics"), c);
        parse_layers(doc.at("layers"), c);
        if (doc.contains("feed"))
            parse_feed(doc.at("feed"), c);
        else
            c.feed.feed_distance = 0.2 * c.aperture_diameter;
        if (doc.contains("thresholds")) parse_thresholds(doc.at("thresholds"), c);
        if (doc.contains("imperfections")) parse_imperfections(doc.at("imperfections"), c);
        if (doc.contains("calibration")) parse_calibration(doc.at("calibration"), c);
        parse_sweep(doc.at("sweep"), c);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario value error: ") + e.what());
    }
    c.validate();
    return c;
}

SystemConfig load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), overrides);
}

std::string scenario_to_json(const SystemConfig& c, int indent) {
    json doc;
    doc["physics"] = {
        {"wavelength", c.wavelength},
        {"aperture_diameter", c.aperture_diameter},
        {"element_pitch", c.element_pitch},
        {"retention_baseline",
         c.retention_baseline == RetentionBaseline::ideal_aperture ? "ideal_aperture" : "closed_form"},
        {"engine", c.engine == PropagationEngine::green ? "green" : "fresnel"},
        {"rx_phase", c.rx_phase},
    };
    const auto& o = c.optimizer;
    doc["layers"] = {
        {"count", c.layer_count},
        {"spacings", c.layer_spacings},
        {"optimizer",
         {{"max_sweeps", o.max_sweeps},
          {"tol", o.tol},
          {"refine", o.refine},
          {"refine_steps", o.refine_steps},
          {"step_size", o.step_size},
          {"history", o.history},
          {"random_init", o.random_init}}},
    };
    doc["feed"] = {
        {"kind", c.feed.kind == FeedKind::point_source ? "point_source" : "uniform_plane"},
        {"distance", c.feed.feed_distance},
        {"power", c.feed.power},
    };
    const auto& t = c.thresholds;
    doc["thresholds"] = {
        {"gain_loss_db", t.gain_loss_db},
        {"lateral_retention", t.lateral_retention},
        {"axial_retention", t.axial_retention},
        {"residual_phase", t.residual_phase},
        {"trunc_phase", t.trunc_phase},
    };
    const auto& im = c.imperfections;
    doc["imperfections"] = {
        {"misalignment", im.misalignment},
        {"transmission_efficiency", im.transmission_efficiency},
        {"phase_bits", im.quantized() ? json(im.phase_bits) : json(nullptr)},
        {"spacing_deviation", im.spacing_deviation},
        {"rng_seed", im.rng_seed},
    };
    const auto& k = c.calibration;
    doc["calibration"] = {
        {"xi_lat", k.xi_lat},         {"xi_ax", k.xi_ax},           {"chi_lat", k.chi_lat},
        {"mu", k.mu},                 {"nu", k.nu},                 {"gamma_loss", k.gamma_loss},
        {"gamma_quant", k.gamma_quant}, {"gamma_gap", k.gamma_gap}, {"c_lat", k.c_lat},
        {"c_ax", k.c_ax},             {"beta", k.beta},             {"xi_ax2", k.xi_ax2},
        {"xi_ax4", k.xi_ax4},         {"xi_ali_ax", k.xi_ali_ax},   {"eta_aper0", k.eta_aper0},
    };
    const auto& s = c.sweep;
    doc["sweep"] = {
        {"r_min_frac", s.r_min_frac},
        {"r_max_frac", s.r_max_frac},
        {"num_points", s.num_points},
        {"spacing", s.spacing == SweepSpacing::linear ? "linear" : "geometric"},
        {"layer_counts", s.layer_counts},
        {"focal_distance", s.focal_distance ? json(*s.focal_distance) : json(nullptr)},
    };
    return doc.dump(indent);
}

std::uint64_t scenario_hash(const SystemConfig& config) {
    std::string text = scenario_to_json(config, -1);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string scenario_hash_hex(const SystemConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(scenario_hash(config)));
    return buf;
}

}  // namespace nfsim
