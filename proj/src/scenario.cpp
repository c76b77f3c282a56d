#include "radar2/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace radar2 {

namespace {

using nlohmann::json;

// Walks one JSON object, recording consumed keys so that leftovers can be
// reported as unknown. Problems accumulate in `issues` instead of throwing.
class Reader {
public:
    Reader(const json& j, std::string path, std::vector<std::string>& issues)
        : j_(j), path_(std::move(path)), issues_(issues) {
        if (!j_.is_object()) issue("", "expected an object");
    }

    bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

    template <class T>
    bool get(const char* key, T& out) {
        if (!has(key)) return false;
        seen_.insert(key);
        try {
            out = j_.at(key).get<T>();
            return true;
        } catch (const json::exception&) {
            issue(key, std::string("expected ") + type_name<T>());
            return false;
        }
    }

    template <class T>
    void get(const char* key, std::optional<T>& out) {
        T v{};
        if (get(key, v)) out = v;
    }

    void require(const char* key) {
        if (!has(key)) issue(key, "is required");
    }

    const json* raw(const char* key) {
        if (!has(key)) return nullptr;
        seen_.insert(key);
        return &j_.at(key);
    }

    Reader child(const char* key) {
        seen_.insert(key);
        return Reader(j_.is_object() && j_.contains(key) ? j_.at(key) : empty(),
                      join(key), issues_);
    }

    std::string join(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    void issue(const std::string& key, const std::string& msg) {
        const std::string where = key.empty() ? path_ : join(key);
        issues_.push_back((where.empty() ? std::string("<root>") : where) + ": " + msg);
    }

    void finish() {
        if (!j_.is_object()) return;
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) issue(k, "unknown key");
        }
    }

private:
    template <class T>
    static const char* type_name() {
        if constexpr (std::is_same_v<T, bool>) return "a boolean";
        else if constexpr (std::is_same_v<T, std::string>) return "a string";
        else if constexpr (std::is_integral_v<T>) return "an integer";
        else if constexpr (std::is_floating_point_v<T>) return "a number";
        else return "a different type";
    }

    static const json& empty() {
        static const json e = json::object();
        return e;
    }

    const json& j_;
    std::string path_;
    std::vector<std::string>& issues_;
    std::set<std::string> seen_;
};

std::optional<Position> read_position(const json& j, const std::string& where,
                                      std::vector<std::string>& issues) {
    if (!j.is_array() || j.size() < 2 || j.size() > 3 ||
        !std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_number(); })) {
        issues.push_back(where + ": expected [x, y] or [x, y, z] in metres");
        return std::nullopt;
    }
    Position p{j[0].get<double>(), j[1].get<double>(), j.size() == 3 ? j[2].get<double>() : 0.0};
    return p;
}

json position_json(const Position& p) { return json::array({p.x, p.y, p.z}); }

std::optional<PhaseWaveform> read_waveform(Reader r, double amplitude,
                                           std::vector<std::string>& issues) {
    std::string kind_name;
    r.require("kind");
    if (!r.get("kind", kind_name)) return std::nullopt;
    WaveformKind kind;
    try {
        kind = waveform_kind_from_string(kind_name);
    } catch (const std::exception&) {
        r.issue("kind", "unknown waveform kind '" + kind_name + "' (cw, fsk, fmcw, pulse, wigig)");
        return std::nullopt;
    }

    const std::size_t before = issues.size();
    std::optional<PhaseWaveform> out;
    try {
        switch (kind) {
        case WaveformKind::CW: {
            double f0 = 0, phase = 0;
            r.require("f0");
            r.get("f0", f0);
            r.get("phase", phase);
            r.finish();
            if (issues.size() == before) out = PhaseWaveform::cw(f0, phase, amplitude);
            break;
        }
        case WaveformKind::FSK: {
            double fa = 0, fb = 0, period = 0, t1 = 0, t2 = 0;
            for (const char* k : {"fa", "fb", "period"}) r.require(k);
            r.get("fa", fa);
            r.get("fb", fb);
            r.get("period", period);
            r.get("theta1", t1);
            r.get("theta2", t2);
            r.finish();
            if (issues.size() == before) out = PhaseWaveform::fsk(fa, fb, period, t1, t2, amplitude);
            break;
        }
        case WaveformKind::FMCW: {
            double f_start = 0, period = 0, phase = 0;
            std::optional<double> slope, bandwidth;
            r.require("f_start");
            r.require("sweep_period");
            r.get("f_start", f_start);
            r.get("sweep_period", period);
            r.get("slope", slope);
            r.get("bandwidth", bandwidth);
            r.get("phase", phase);
            r.finish();
            if (slope.has_value() == bandwidth.has_value()) {
                r.issue("", "give exactly one of 'slope' (Hz/s) or 'bandwidth' (Hz)");
            }
            if (issues.size() == before) {
                const double s = slope ? *slope : *bandwidth / period;
                out = PhaseWaveform::fmcw(f_start, s, period, phase, amplitude);
            }
            break;
        }
        case WaveformKind::Pulse: {
            PulseParams p;
            r.require("f0");
            r.get("f0", p.f0);
            r.get("width", p.width);
            r.get("prf", p.prf);
            r.get("phase", p.phase);
            r.finish();
            if (issues.size() == before) out = PhaseWaveform::pulse(p.f0, p.width, p.prf, p.phase, amplitude);
            break;
        }
        case WaveformKind::WiGigOFDM: {
            OfdmParams p;
            r.require("center");
            r.get("center", p.center);
            r.get("spacing", p.spacing);
            r.get("subcarriers", p.active_subcarriers);
            r.get("symbol_duration", p.symbol_duration);
            r.get("seed", p.seed);
            r.finish();
            if (issues.size() == before) {
                out = PhaseWaveform::ofdm(p.center, p.seed, p.active_subcarriers, p.spacing,
                                          p.symbol_duration, amplitude);
            }
            break;
        }
        }
    } catch (const std::exception& e) {
        r.issue("", e.what());
        out.reset();
    }
    return out;
}

json waveform_json(const PhaseWaveform& w) {
    json j;
    j["kind"] = std::string(to_string(w.kind()));
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, CwParams>) {
                j["f0"] = p.f0;
                j["phase"] = p.phase;
            } else if constexpr (std::is_same_v<P, FskParams>) {
                j["fa"] = p.fa;
                j["fb"] = p.fb;
                j["period"] = p.period;
                j["theta1"] = p.theta1;
                j["theta2"] = p.theta2;
            } else if constexpr (std::is_same_v<P, FmcwParams>) {
                j["f_start"] = p.f_start;
                j["slope"] = p.slope;
                j["sweep_period"] = p.sweep_period;
                j["phase"] = p.phase;
            } else if constexpr (std::is_same_v<P, PulseParams>) {
                j["f0"] = p.f0;
                j["width"] = p.width;
                j["prf"] = p.prf;
                j["phase"] = p.phase;
            } else {
                j["center"] = p.center;
                j["spacing"] = p.spacing;
                j["subcarriers"] = p.active_subcarriers;
                j["symbol_duration"] = p.symbol_duration;
                j["seed"] = p.seed;
            }
        },
        w.params);
    return j;
}

std::string line_context(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

template <class F>
void collect(std::vector<std::string>& issues, F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        issues.push_back(e.what());
    }
}

}  // namespace

std::string_view to_string(SweepAxis a) {
    switch (a) {
    case SweepAxis::Distance: return "distance";
    case SweepAxis::Angle: return "angle";
    case SweepAxis::Anchors: return "anchors";
    case SweepAxis::Height: return "height";
    }
    return "distance";
}

void ScenarioConfig::validate() const {
    std::vector<std::string> issues;
    collect(issues, [&] { receiver.validate(); });
    collect(issues, [&] { detection.validate(); });
    collect(issues, [&] { array.validate(); });
    collect(issues, [&] { path_loss.validate(); });
    if (!(noise_power >= 0.0)) issues.push_back("noise_power must be >= 0");
    if (trials < 1) issues.push_back("trials must be >= 1");
    if (workers < 1) issues.push_back("workers must be >= 1");
    if (!(bearing_noise_deg >= 0.0)) issues.push_back("bearing_noise_deg must be >= 0");
    for (std::size_t i = 0; i < emitters.size(); ++i) {
        const auto& e = emitters[i];
        const std::string where = "emitters[" + std::to_string(i) + "]";
        collect(issues, [&] { e.waveform.validate(); });
        if (!e.position && !emitter_region) {
            issues.push_back(where + ": needs a position or a scenario emitter_region");
        }
        if (e.clock_offset && !(*e.clock_offset >= 0.0)) {
            issues.push_back(where + ": clock_offset must be >= 0");
        }
    }
    if (emitter_region) {
        if (!(emitter_region->x_min < emitter_region->x_max) ||
            !(emitter_region->y_min < emitter_region->y_max)) {
            issues.push_back("emitter_region: need x_min < x_max and y_min < y_max");
        }
    }
    if (anchors.empty()) issues.push_back("at least one anchor (detector position) is required");
    if (localize) {
        const std::size_t need = detection.multi_device ? 3 : 2;
        if (anchors.size() < need) {
            issues.push_back("localization needs at least " + std::to_string(need) + " anchors, got " +
                             std::to_string(anchors.size()));
        }
    }
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        for (std::size_t k = 0; k < emitters.size(); ++k) {
            const auto& p = emitters[k].position;
            if (p && p->x == anchors[i].position.x && p->y == anchors[i].position.y) {
                issues.push_back("anchors[" + std::to_string(i) + "] shares its position with emitters[" +
                                 std::to_string(k) + "]");
            }
        }
    }
    if (sweep) {
        if (sweep->values.empty()) issues.push_back("sweep: values must not be empty");
        for (double v : sweep->values) {
            if (sweep->axis == SweepAxis::Anchors &&
                (v != std::floor(v) || v < 2 || v > static_cast<double>(anchors.size()))) {
                issues.push_back("sweep: anchor counts must be integers in [2, anchors]");
                break;
            }
            if (sweep->axis == SweepAxis::Distance && !(v > 0.0)) {
                issues.push_back("sweep: distances must be > 0");
                break;
            }
        }
        if ((sweep->axis == SweepAxis::Distance || sweep->axis == SweepAxis::Angle) &&
            std::any_of(emitters.begin(), emitters.end(), [](const auto& e) { return !e.position; })) {
            issues.push_back("sweep: distance and angle sweeps need fixed emitter positions");
        }
    }
    if (!issues.empty()) {
        std::string msg = "invalid scenario:";
        for (const auto& i : issues) msg += "\n  - " + i;
        throw ConfigError(msg);
    }
}

std::vector<std::string> ScenarioConfig::warnings() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < emitters.size(); ++i) {
        const auto [lo, hi] = emitters[i].waveform.frequency_span();
        if (hi < detection.f_min || lo > detection.f_max) {
            out.push_back("emitters[" + std::to_string(i) + "] lies entirely outside the detector band");
        } else if (lo < detection.f_min || hi > detection.f_max) {
            out.push_back("emitters[" + std::to_string(i) + "] extends beyond the detector band");
        }
    }
    return out;
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& source) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(source + ": parse error at " + line_context(text, e.byte) + ": " + e.what());
    }

    std::vector<std::string> issues;
    ScenarioConfig cfg;
    Reader r(root, "", issues);

    std::string schema;
    if (r.get("schema", schema) && schema != "radar2-scenario/1") {
        r.issue("schema", "unsupported schema '" + schema + "'");
    }
    r.get("seed", cfg.seed);
    r.get("trials", cfg.trials);
    r.get("workers", cfg.workers);
    r.get("noise_power", cfg.noise_power);
    r.get("bearing_noise_deg", cfg.bearing_noise_deg);
    r.get("localize", cfg.localize);
    r.get("model", cfg.model_path);
    std::string mode = "pipeline";
    if (r.get("mode", mode) && mode != "pipeline" && mode != "bearings") {
        r.issue("mode", "expected 'pipeline' or 'bearings'");
    }
    cfg.mode = mode == "bearings" ? ScenarioMode::Bearings : ScenarioMode::Pipeline;

    {
        auto rr = r.child("receiver");
        auto& rx = cfg.receiver;
        rr.get("adc_rate", rx.adc_rate);
        rr.get("adc_samples", rx.adc_samples);
        rr.get("sweep_time", rx.sweep_time);
        rr.get("idle_time", rx.idle_time);
        rr.get("chirps_per_frame", rx.chirps_per_frame);
        rr.get("frame_period", rx.frame_period);
        rr.get("frames", rx.frames);
        rr.get("cutoff", rx.cutoff);
        rr.get("filter_order", rx.filter_order);
        rr.get("oversample", rx.oversample);
        rr.finish();
    }
    {
        auto dr = r.child("detection");
        auto& d = cfg.detection;
        dr.get("ratio_threshold", d.ratio_threshold);
        dr.get("power_threshold", d.power_threshold);
        dr.get("power_margin_db", d.power_margin_db);
        if (const json* band = dr.raw("band")) {
            if (band->is_array() && band->size() == 2 && (*band)[0].is_number() &&
                (*band)[1].is_number()) {
                d.f_min = (*band)[0].get<double>();
                d.f_max = (*band)[1].get<double>();
            } else {
                dr.issue("band", "expected [f_min, f_max] in Hz");
            }
        }
        dr.get("tone_step", d.tone_step);
        // Default sweep spans the band over the sweep time.
        d.sweep = ProbeSignal::sweep(d.f_min, (d.f_max - d.f_min) / cfg.receiver.sweep_time);
        if (dr.has("sweep")) {
            auto sr = dr.child("sweep");
            double start = d.sweep.start_frequency, slope = d.sweep.slope;
            sr.get("start_frequency", start);
            sr.get("slope", slope);
            sr.finish();
            d.sweep = ProbeSignal::sweep(start, slope);
        }
        d.frames_per_detection = cfg.receiver.frames;
        dr.get("frames_per_detection", d.frames_per_detection);
        dr.get("smoothing", d.smoothing);
        dr.get("max_sweep_peaks", d.max_sweep_peaks);
        dr.get("multi_device", d.multi_device);
        dr.get("direction_merge_deg", d.direction_merge_deg);
        dr.get("music_floor_factor", d.music_floor_factor);
        if (dr.has("music")) {
            auto mr = dr.child("music");
            mr.get("grid_step_deg", d.music.grid_step_deg);
            mr.get("min_peak_db", d.music.min_peak_db);
            mr.get("eigen_gap", d.music.eigen_gap);
            mr.finish();
        }
        dr.finish();
    }

    const double centre = 0.5 * (cfg.detection.f_min + cfg.detection.f_max);
    const double wavelength = centre > 0.0 ? kSpeedOfLight / centre : 1.0;
    cfg.array = ArrayGeometry::for_wavelength(wavelength);
    {
        auto ar = r.child("array");
        ar.get("elements", cfg.array.elements);
        ar.get("spacing", cfg.array.spacing);
        ar.get("kappa", cfg.array.kappa);
        ar.finish();
    }
    cfg.path_loss.wavelength = wavelength;
    {
        auto pr = r.child("path_loss");
        pr.get("tx_power", cfg.path_loss.tx_power);
        pr.get("effective_area", cfg.path_loss.effective_area);
        pr.get("scattering", cfg.path_loss.scattering);
        pr.get("wavelength", cfg.path_loss.wavelength);
        pr.finish();
    }

    if (const json* region = r.raw("emitter_region")) {
        Reader rr(*region, "emitter_region", issues);
        Region g;
        std::vector<double> xs, ys;
        rr.require("x");
        rr.require("y");
        if (rr.get("x", xs) && xs.size() != 2) rr.issue("x", "expected [min, max]");
        if (rr.get("y", ys) && ys.size() != 2) rr.issue("y", "expected [min, max]");
        rr.get("z", g.z);
        rr.finish();
        if (xs.size() == 2 && ys.size() == 2) {
            g.x_min = xs[0];
            g.x_max = xs[1];
            g.y_min = ys[0];
            g.y_max = ys[1];
            cfg.emitter_region = g;
        }
    }

    if (const json* list = r.raw("emitters")) {
        if (!list->is_array()) {
            r.issue("emitters", "expected an array");
        } else {
            for (std::size_t i = 0; i < list->size(); ++i) {
                const std::string where = "emitters[" + std::to_string(i) + "]";
                Reader er((*list)[i], where, issues);
                EmitterSpec e;
                double amplitude = 1.0;
                er.get("amplitude", amplitude);
                er.get("snr_db", e.snr_db);
                er.get("clock_offset", e.clock_offset);
                if (const json* pos = er.raw("position")) e.position = read_position(*pos, where + ".position", issues);
                er.require("waveform");
                auto w = read_waveform(er.child("waveform"), amplitude, issues);
                er.finish();
                if (w) {
                    e.waveform = *w;
                    cfg.emitters.push_back(std::move(e));
                }
            }
        }
    }

    if (const json* list = r.raw("anchors")) {
        if (!list->is_array()) {
            r.issue("anchors", "expected an array");
        } else {
            for (std::size_t i = 0; i < list->size(); ++i) {
                const std::string where = "anchors[" + std::to_string(i) + "]";
                Reader ar((*list)[i], where, issues);
                AnchorSpec a;
                ar.require("position");
                if (const json* pos = ar.raw("position")) {
                    if (auto p = read_position(*pos, where + ".position", issues)) a.position = *p;
                }
                if (const json* h = ar.raw("heading")) {
                    if (h->is_number()) {
                        a.heading_deg = h->get<double>();
                    } else if (!(h->is_string() && h->get<std::string>() == "centroid")) {
                        ar.issue("heading", "expected degrees or \"centroid\"");
                    }
                }
                ar.finish();
                cfg.anchors.push_back(a);
            }
        }
    }

    if (r.has("sweep")) {
        auto sr = r.child("sweep");
        SweepSpec s;
        std::string axis;
        sr.require("axis");
        sr.require("values");
        if (sr.get("axis", axis)) {
            if (axis == "distance") s.axis = SweepAxis::Distance;
            else if (axis == "angle") s.axis = SweepAxis::Angle;
            else if (axis == "anchors") s.axis = SweepAxis::Anchors;
            else if (axis == "height") s.axis = SweepAxis::Height;
            else sr.issue("axis", "expected distance, angle, anchors or height");
        }
        sr.get("values", s.values);
        sr.finish();
        cfg.sweep = s;
    }
    r.finish();

    if (!issues.empty()) {
        std::string msg = source + ": invalid scenario:";
        for (const auto& i : issues) msg += "\n  - " + i;
        throw ConfigError(msg);
    }
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open scenario file " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_scenario(ss.str(), path);
}

json scenario_to_json(const ScenarioConfig& cfg) {
    json j;
    j["schema"] = "radar2-scenario/1";
    j["seed"] = cfg.seed;
    j["trials"] = cfg.trials;
    j["workers"] = cfg.workers;
    j["noise_power"] = cfg.noise_power;
    j["bearing_noise_deg"] = cfg.bearing_noise_deg;
    j["localize"] = cfg.localize;
    j["model"] = cfg.model_path;
    j["mode"] = cfg.mode == ScenarioMode::Bearings ? "bearings" : "pipeline";
    const auto& rx = cfg.receiver;
    j["receiver"] = {{"adc_rate", rx.adc_rate},
                     {"adc_samples", rx.adc_samples},
                     {"sweep_time", rx.sweep_time},
                     {"idle_time", rx.idle_time},
                     {"chirps_per_frame", rx.chirps_per_frame},
                     {"frame_period", rx.frame_period},
                     {"frames", rx.frames},
                     {"cutoff", rx.cutoff},
                     {"filter_order", rx.filter_order},
                     {"oversample", rx.oversample}};
    const auto& d = cfg.detection;
    json det = {{"ratio_threshold", d.ratio_threshold},
                {"power_margin_db", d.power_margin_db},
                {"band", {d.f_min, d.f_max}},
                {"tone_step", d.tone_step},
                {"sweep", {{"start_frequency", d.sweep.start_frequency}, {"slope", d.sweep.slope}}},
                {"frames_per_detection", d.frames_per_detection},
                {"smoothing", d.smoothing},
                {"max_sweep_peaks", d.max_sweep_peaks},
                {"multi_device", d.multi_device},
                {"direction_merge_deg", d.direction_merge_deg},
                {"music_floor_factor", d.music_floor_factor},
                {"music",
                 {{"grid_step_deg", d.music.grid_step_deg},
                  {"min_peak_db", d.music.min_peak_db},
                  {"eigen_gap", d.music.eigen_gap}}}};
    if (d.power_threshold) det["power_threshold"] = *d.power_threshold;
    j["detection"] = det;
    j["array"] = {{"elements", cfg.array.elements},
                  {"spacing", cfg.array.spacing},
                  {"kappa", cfg.array.kappa}};
    j["path_loss"] = {{"tx_power", cfg.path_loss.tx_power},
                      {"effective_area", cfg.path_loss.effective_area},
                      {"scattering", cfg.path_loss.scattering},
                      {"wavelength", cfg.path_loss.wavelength}};
    if (cfg.emitter_region) {
        const auto& g = *cfg.emitter_region;
        j["emitter_region"] = {{"x", {g.x_min, g.x_max}}, {"y", {g.y_min, g.y_max}}, {"z", g.z}};
    }
    json emitters = json::array();
    for (const auto& e : cfg.emitters) {
        json ej;
        ej["waveform"] = waveform_json(e.waveform);
        ej["amplitude"] = e.waveform.amplitude;
        if (e.position) ej["position"] = position_json(*e.position);
        if (e.snr_db) ej["snr_db"] = *e.snr_db;
        if (e.clock_offset) ej["clock_offset"] = *e.clock_offset;
        emitters.push_back(ej);
    }
    j["emitters"] = emitters;
    json anchors = json::array();
    for (const auto& a : cfg.anchors) {
        json aj;
        aj["position"] = position_json(a.position);
        if (a.heading_deg) aj["heading"] = *a.heading_deg;
        else aj["heading"] = "centroid";
        anchors.push_back(aj);
    }
    j["anchors"] = anchors;
    if (cfg.sweep) j["sweep"] = {{"axis", std::string(to_string(cfg.sweep->axis))}, {"values", cfg.sweep->values}};
    return j;
}

}  // namespace radar2
