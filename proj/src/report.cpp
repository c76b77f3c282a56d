#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "radar2/scenario.hpp"

namespace radar2 {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// NaN and inf are not valid JSON numbers.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json pos(const Position& p) { return json::array({p.x, p.y, p.z}); }

json percentiles_json(const Percentiles& p) {
    if (p.count == 0) return json{{"count", 0}};
    return {{"count", p.count}, {"mean", num(p.mean)}, {"p50", num(p.p50)},
            {"p90", num(p.p90)}, {"p95", num(p.p95)}, {"max", num(p.max)}};
}

json aggregate_json(const Aggregate& a) {
    return {{"trials", a.trials},
            {"failures", a.failures},
            {"confusion", {{"tp", a.tp}, {"tn", a.tn}, {"fp", a.fp}, {"fn", a.fn}}},
            {"detection_rate", opt(a.detection_rate)},
            {"false_alarm_rate", opt(a.false_alarm_rate)},
            {"angle_error_deg", percentiles_json(a.angle_error)},
            {"localization_error_m", percentiles_json(a.localization_error)},
            {"wigig_leaks", a.wigig_leaks}};
}

json trial_json(const TrialResult& t) {
    json j;
    j["index"] = t.index;
    j["seed"] = t.seed;
    json em = json::array();
    for (std::size_t k = 0; k < t.emitter_positions.size(); ++k) {
        em.push_back({{"kind", std::string(to_string(t.emitter_kinds[k]))},
                      {"position", pos(t.emitter_positions[k])}});
    }
    j["emitters"] = em;
    j["radar_present"] = t.radar_present;
    j["mmwave_detected"] = t.mmwave_detected;
    j["spy_radar_present"] = t.spy_radar_present;
    j["estimated_count"] = t.estimated_count;
    json obs = json::array();
    for (const auto& o : t.observations) {
        obs.push_back({{"position", pos(o.position)}, {"bearings_deg", o.bearings_deg}});
    }
    j["observations"] = obs;
    j["detection"] = t.detection ? detection_to_json(*t.detection) : json(nullptr);
    j["localization"] = t.localization ? localization_to_json(*t.localization) : json(nullptr);
    j["localization_errors_m"] = t.localization_errors;
    j["angle_errors_deg"] = t.angle_errors;
    j["wigig_bearing_used"] = t.wigig_bearing_used;
    j["error"] = t.error.empty() ? json(nullptr) : json(t.error);
    return j;
}

std::string csv_num(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return "";
    std::ostringstream os;
    os << std::setprecision(10) << *v;
    return os.str();
}

std::optional<double> stat(const Percentiles& p, double Percentiles::*field) {
    if (p.count == 0) return std::nullopt;
    return p.*field;
}

void csv_row(std::ostream& os, const std::string& value, const Aggregate& a) {
    os << value << ',' << a.trials << ',' << a.failures << ',' << a.tp << ',' << a.tn << ',' << a.fp
       << ',' << a.fn << ',' << csv_num(a.detection_rate) << ',' << csv_num(a.false_alarm_rate);
    for (auto f : {&Percentiles::mean, &Percentiles::p50, &Percentiles::p90}) {
        os << ',' << csv_num(stat(a.angle_error, f));
    }
    for (auto f : {&Percentiles::mean, &Percentiles::p50, &Percentiles::p90, &Percentiles::p95}) {
        os << ',' << csv_num(stat(a.localization_error, f));
    }
    os << ',' << a.wigig_leaks << '\n';
}

}  // namespace

json detection_to_json(const DetectionReport& d) {
    json probes = json::array();
    for (const auto& p : d.probes) {
        probes.push_back({{"id", p.id},
                          {"probe", p.probe.describe()},
                          {"detected", p.decision.detected},
                          {"trigger", std::string(to_string(p.decision.trigger))},
                          {"ratio", num(p.decision.ratio)},
                          {"max_power", num(p.decision.max_power)},
                          {"mean_power", num(p.decision.mean_power)},
                          {"t_max", num(p.decision.t_max)}});
    }
    json signals = json::array();
    for (const auto& s : d.signals) {
        signals.push_back({{"frequency", s.frequency},
                           {"source", s.source},
                           {"label", std::string(to_string(s.label))},
                           {"probability", num(s.probability)},
                           {"low_confidence", s.low_confidence},
                           {"aoa_deg", opt(s.aoa_deg)}});
    }
    json gaps = json::array();
    for (const auto& [lo, hi] : d.coverage_gaps) gaps.push_back({lo, hi});
    return {{"mmwave_detected", d.mmwave_detected},
            {"spy_radar_present", d.spy_radar_present},
            {"spy_radar_count", d.spy_radar_count},
            {"radar_directions_deg", d.radar_directions_deg},
            {"signals", signals},
            {"probes", probes},
            {"coverage_gaps", gaps},
            {"power_threshold", num(d.power_threshold)},
            {"noise_floor", num(d.noise_floor)}};
}

json localization_to_json(const LocalizationResult& l) {
    json em = json::array();
    for (const auto& e : l.emitters) {
        json refs = json::array();
        for (const auto& b : e.bearings) refs.push_back({b.anchor, b.bearing});
        em.push_back({{"position", json::array({e.position.x, e.position.y})},
                      {"residual", num(e.residual)},
                      {"line_distances", e.line_distances},
                      {"bearings", refs}});
    }
    return {{"estimated_count", l.estimated_count},
            {"emitters", em},
            {"singular_values", l.singular_values},
            {"condition", num(l.condition)},
            {"combinations", l.combinations}};
}

json report_to_json(const RunReport& r) {
    json j;
    j["schema"] = RunReport::kSchema;
    j["seed"] = r.seed;
    j["config"] = r.config;
    j["aggregate"] = aggregate_json(r.aggregate);
    json trials = json::array();
    for (const auto& t : r.trials) trials.push_back(trial_json(t));
    j["trials"] = trials;
    if (r.sweep_axis) {
        json rows = json::array();
        for (const auto& row : r.sweep) {
            json a = aggregate_json(row.aggregate);
            a["value"] = row.value;
            rows.push_back(a);
        }
        j["sweep"] = {{"axis", std::string(to_string(*r.sweep_axis))}, {"rows", rows}};
    } else {
        j["sweep"] = nullptr;
    }
    return j;
}

void emit_report(const RunReport& r, ReportFormat format, std::ostream& os) {
    if (format == ReportFormat::Json) {
        os << report_to_json(r).dump(2) << '\n';
        return;
    }
    os << "value,trials,failures,tp,tn,fp,fn,detection_rate,false_alarm_rate,"
          "angle_error_mean,angle_error_p50,angle_error_p90,"
          "loc_error_mean,loc_error_p50,loc_error_p90,loc_error_p95,wigig_leaks\n";
    if (r.sweep.empty()) {
        csv_row(os, "all", r.aggregate);
    } else {
        for (const auto& row : r.sweep) csv_row(os, csv_num(row.value), row.aggregate);
    }
}

void emit_report(const RunReport& r, ReportFormat format, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    emit_report(r, format, os);
    if (!os) throw std::runtime_error("write to " + path + " failed");
}

}  // namespace radar2
