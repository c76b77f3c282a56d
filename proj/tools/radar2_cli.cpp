#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "radar2/dataset.hpp"
#include "radar2/scenario.hpp"
#include "radar2/spectrum.hpp"

using namespace radar2;
using nlohmann::json;

namespace {

// detect: 0 clean, 10 spy radar; every failure exits above 63.
constexpr int kExitSpyRadar = 10;
constexpr int kExitConfig = 64;
constexpr int kExitRuntime = 65;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;
    std::string format = "json";
};

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << text;
}

ScenarioConfig scenario_from(const Globals& g) {
    if (g.config.empty()) throw ConfigError("--config is required");
    auto cfg = load_scenario(g.config);
    if (g.seed) cfg.seed = *g.seed;
    for (const auto& w : cfg.warnings()) std::cerr << "warning: " << w << '\n';
    return cfg;
}

ReportFormat report_format(const std::string& f) {
    if (f == "json") return ReportFormat::Json;
    if (f == "csv") return ReportFormat::Csv;
    throw ConfigError("unknown format '" + f + "', expected json or csv");
}

std::optional<SpectrumCnn> model_for(const ScenarioConfig& cfg, const std::string& flag) {
    const std::string path = flag.empty() ? cfg.model_path : flag;
    if (path.empty()) {
        if (cfg.mode == ScenarioMode::Pipeline) {
            throw ConfigError("pipeline mode needs a classifier model (--model or \"model\" in the scenario)");
        }
        return std::nullopt;
    }
    return SpectrumCnn::load(path);
}

ProbeSignal parse_probe(const std::string& s, const ScenarioConfig& cfg) {
    if (s == "sweep") return cfg.detection.sweep;
    if (s.rfind("tone:", 0) == 0) return ProbeSignal::tone(std::stod(s.substr(5)));
    throw ConfigError("probe must be 'sweep' or 'tone:<Hz>'");
}

// Rows of x, y, bearing in degrees. Rows sharing an anchor position are grouped.
std::vector<AnchorObservation> read_bearings(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open bearing file " + path);
    std::vector<AnchorObservation> obs;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r,") == std::string::npos) continue;
        for (char& c : line) {
            if (c == ',') c = ' ';
        }
        std::istringstream ls(line);
        double x, y, theta;
        if (!(ls >> x >> y >> theta)) {
            // tolerate a header row
            if (lineno == 1) continue;
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected x, y, bearing_deg");
        }
        std::string extra;
        if (ls >> extra) throw ConfigError(path + ":" + std::to_string(lineno) + ": unexpected field '" + extra + "'");
        auto it = std::find_if(obs.begin(), obs.end(), [&](const AnchorObservation& o) {
            return o.position.x == x && o.position.y == y;
        });
        if (it == obs.end()) {
            obs.push_back({});
            it = obs.end() - 1;
            it->position = {x, y, 0.0};
        }
        it->bearings_deg.push_back(theta);
    }
    return obs;
}

int cmd_simulate(const Globals& g, int anchor, const std::string& probe_arg, int trial) {
    const auto cfg = scenario_from(g);
    if (anchor < 0 || anchor >= static_cast<int>(cfg.anchors.size())) {
        throw ConfigError("--anchor out of range");
    }
    if (g.out.empty()) throw ConfigError("--out is required (record base path)");
    // Reuse the pipeline's placement so simulate shows the scene a trial sees.
    auto one = cfg;
    one.localize = false;
    one.mode = ScenarioMode::Bearings;
    const auto t = run_pipeline(one, nullptr, static_cast<std::size_t>(trial));
    if (!t.error.empty()) throw std::runtime_error(t.error);

    const Position a = cfg.anchors[anchor].position;
    double heading = 0.0;
    if (cfg.anchors[anchor].heading_deg) {
        heading = *cfg.anchors[anchor].heading_deg;
    } else if (!t.emitter_positions.empty()) {
        Position c;
        for (const auto& p : t.emitter_positions) {
            c.x += p.x / static_cast<double>(t.emitter_positions.size());
            c.y += p.y / static_cast<double>(t.emitter_positions.size());
        }
        if (c.x != a.x || c.y != a.y) heading = global_bearing_deg(a, c);
    }
    DevicePose det{a, DeviceRole::Detector, heading};
    ReceivedScene scene;
    scene.noise_power = cfg.noise_power;
    scene.antennas = cfg.array.elements;
    for (std::size_t k = 0; k < cfg.emitters.size(); ++k) {
        SceneEmitter se;
        se.waveform = cfg.emitters[k].waveform;
        se.clock_offset = cfg.emitters[k].clock_offset.value_or(0.0);
        try {
            se.link = make_link({t.emitter_positions[k], DeviceRole::Emitter, 0.0}, det, cfg.array, cfg.path_loss);
        } catch (const std::invalid_argument& e) {
            std::cerr << "warning: emitter " << k << " skipped: " << e.what() << '\n';
            continue;
        }
        if (cfg.emitters[k].snr_db) {
            se.link.path_gain = std::sqrt(cfg.noise_power * std::pow(10.0, *cfg.emitters[k].snr_db / 10.0)) /
                                se.waveform.amplitude;
        }
        scene.emitters.push_back(se);
    }
    auto rx = cfg.receiver;
    rx.frames = cfg.detection.frames_per_detection;
    const auto rec = mix_and_filter(scene, parse_probe(probe_arg, cfg), rx, derive_seed(t.seed, anchor));
    if (g.format == "csv") {
        std::ofstream os(g.out, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + g.out);
        const auto power = if_power_series(rec);
        write_power_csv(os, rec, power);
    } else {
        write_if_record(rec, g.out);
    }
    return 0;
}

int cmd_detect(const Globals& g, const std::string& model_path, int trial) {
    auto cfg = scenario_from(g);
    cfg.localize = false;
    if (cfg.mode != ScenarioMode::Pipeline) throw ConfigError("detect needs a pipeline-mode scenario");
    const auto model = model_for(cfg, model_path);
    const auto t = run_pipeline(cfg, &*model, static_cast<std::size_t>(trial));
    if (!t.error.empty()) throw std::runtime_error(t.error);
    json j = detection_to_json(*t.detection);
    j["seed"] = t.seed;
    write_text(g.out, j.dump(2) + "\n");
    return t.spy_radar_present ? kExitSpyRadar : 0;
}

int cmd_localize(const Globals& g, const std::string& bearings, bool multi) {
    const auto obs = read_bearings(bearings);
    LocalizationResult res;
    if (multi) {
        res = multi_device_localize(obs);
    } else {
        for (const auto& o : obs) {
            if (o.bearings_deg.size() != 1) {
                throw ConfigError("anchor (" + std::to_string(o.position.x) + ", " + std::to_string(o.position.y) +
                                  ") has several bearings; use --multi");
            }
        }
        res = triangulate(obs);
    }
    if (g.format == "csv") {
        std::ostringstream os;
        os << std::setprecision(12) << "x,y,residual\n";
        for (const auto& e : res.emitters) os << e.position.x << ',' << e.position.y << ',' << e.residual << '\n';
        write_text(g.out, os.str());
    } else {
        write_text(g.out, localization_to_json(res).dump(2) + "\n");
    }
    return 0;
}

int cmd_dataset(const Globals& g, DatasetSpec spec) {
    if (g.out.empty()) throw ConfigError("--out is required");
    if (g.seed) spec.seed = *g.seed;
    spec.validate();
    const auto ds = generate_dataset(spec);
    write_dataset(ds, g.out);
    std::cerr << "wrote " << ds.size() << " features (" << ds.train_count << " train), hash " << std::hex
              << ds.hash() << std::dec << '\n';
    return 0;
}

int cmd_train(const Globals& g, const std::string& dataset, TrainConfig tc, const std::string& curve_path) {
    if (g.out.empty()) throw ConfigError("--out is required");
    if (g.seed) tc.seed = *g.seed;
    const auto ds = read_dataset(dataset);
    std::vector<EpochStats> curve;
    const auto model = SpectrumCnn::train(ds, tc, &curve);
    model.save(g.out);
    std::ostringstream os;
    os << "epoch,loss,train_accuracy,validation_accuracy\n";
    for (std::size_t e = 0; e < curve.size(); ++e) {
        os << e + 1 << ',' << curve[e].loss << ',' << curve[e].train_accuracy << ',' << curve[e].validation_accuracy
           << '\n';
    }
    if (!curve_path.empty()) write_text(curve_path, os.str());
    std::cerr << "validation accuracy " << model.metadata().validation_accuracy << '\n';
    return 0;
}

int cmd_classify(const Globals& g, const std::string& model_path, const std::string& record,
                 const std::string& dataset) {
    if (model_path.empty()) throw ConfigError("--model is required");
    if (record.empty() == dataset.empty()) throw ConfigError("give exactly one of --record or --dataset");
    const auto model = SpectrumCnn::load(model_path);
    json j;
    if (!record.empty()) {
        const auto feature = extract_spectrum(read_if_record(record));
        const auto c = classify(model, feature);
        j = {{"label", std::string(to_string(c.label))},
             {"probability", c.probability},
             {"probabilities", c.probabilities},
             {"low_confidence", c.low_confidence}};
    } else {
        const auto ds = read_dataset(dataset);
        const std::size_t begin = ds.train_count < ds.size() ? ds.train_count : 0;
        std::size_t confusion[2][2] = {};
        for (std::size_t i = begin; i < ds.size(); ++i) {
            const auto c = classify(model, ds.features[i]);
            if (ds.features[i].label) ++confusion[static_cast<int>(*ds.features[i].label)][static_cast<int>(c.label)];
        }
        j = {{"rows", ds.size() - begin},
             {"accuracy", accuracy(model, ds, begin, ds.size())},
             {"confusion", {{"radar_as_radar", confusion[0][0]}, {"radar_as_wigig", confusion[0][1]},
                            {"wigig_as_radar", confusion[1][0]}, {"wigig_as_wigig", confusion[1][1]}}}};
    }
    write_text(g.out, j.dump(2) + "\n");
    return 0;
}

int cmd_montecarlo(const Globals& g, const std::string& model_path, std::optional<int> trials,
                   std::optional<int> workers) {
    auto cfg = scenario_from(g);
    if (trials) cfg.trials = *trials;
    if (workers) cfg.workers = *workers;
    const auto model = model_for(cfg, model_path);
    const auto report = monte_carlo(cfg, model ? &*model : nullptr);
    if (report.aggregate.failures > 0) {
        std::cerr << "warning: " << report.aggregate.failures << " of " << report.aggregate.trials
                  << " trials failed\n";
    }
    std::ostringstream os;
    emit_report(report, report_format(g.format), os);
    write_text(g.out, os.str());
    return 0;
}

// Re-emits a stored JSON report, as CSV rows or as a short summary.
int cmd_report(const Globals& g, const std::string& input) {
    std::ifstream is(input);
    if (!is) throw std::runtime_error("cannot open report " + input);
    json r;
    try {
        r = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(input + ": " + e.what());
    }
    if (r.value("schema", "") != RunReport::kSchema) throw ConfigError(input + ": not a radar2-report/1 document");

    auto cell = [](const json& v) -> std::string {
        if (v.is_null()) return "";
        std::ostringstream os;
        os << std::setprecision(10) << v.get<double>();
        return os.str();
    };
    auto row = [&](std::ostream& os, const std::string& value, const json& a) {
        const auto& c = a.at("confusion");
        os << value << ',' << a.at("trials") << ',' << a.at("failures") << ',' << c.at("tp") << ',' << c.at("tn")
           << ',' << c.at("fp") << ',' << c.at("fn") << ',' << cell(a.at("detection_rate")) << ','
           << cell(a.at("false_alarm_rate"));
        const auto& ang = a.at("angle_error_deg");
        for (const char* k : {"mean", "p50", "p90"}) os << ',' << cell(ang.value(k, json(nullptr)));
        const auto& loc = a.at("localization_error_m");
        for (const char* k : {"mean", "p50", "p90", "p95"}) os << ',' << cell(loc.value(k, json(nullptr)));
        os << ',' << a.at("wigig_leaks") << '\n';
    };

    std::ostringstream os;
    if (g.format == "csv") {
        os << "value,trials,failures,tp,tn,fp,fn,detection_rate,false_alarm_rate,"
              "angle_error_mean,angle_error_p50,angle_error_p90,"
              "loc_error_mean,loc_error_p50,loc_error_p90,loc_error_p95,wigig_leaks\n";
        if (r.at("sweep").is_null()) {
            row(os, "all", r.at("aggregate"));
        } else {
            for (const auto& s : r.at("sweep").at("rows")) row(os, cell(s.at("value")), s);
        }
    } else if (g.format == "json") {
        json summary = {{"schema", r.at("schema")}, {"seed", r.at("seed")}, {"aggregate", r.at("aggregate")}};
        if (!r.at("sweep").is_null()) summary["sweep"] = r.at("sweep");
        os << summary.dump(2) << '\n';
    } else {
        throw ConfigError("unknown format '" + g.format + "'");
    }
    write_text(g.out, os.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"radar2: spy-radar detection and localization"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Master seed (overrides the scenario)");
    app.add_option("--config", g.config, "Scenario file");
    app.add_option("--out", g.out, "Output path, - for stdout");
    app.add_option("--format", g.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    app.fallthrough();

    auto* sim = app.add_subcommand("simulate", "Write the IF capture of one probe at one anchor");
    int anchor = 0, trial = 0;
    std::string probe = "sweep";
    sim->add_option("--anchor", anchor, "Anchor index");
    sim->add_option("--probe", probe, "sweep or tone:<Hz>");
    sim->add_option("--trial", trial, "Trial index for seeding and placement");

    auto* det = app.add_subcommand("detect", "Run detection at the first anchor; exit 10 on spy radar");
    std::string model_path;
    det->add_option("--model", model_path, "Classifier model file");
    det->add_option("--trial", trial, "Trial index");

    auto* loc = app.add_subcommand("localize", "Triangulate from a bearing file (x, y, bearing_deg rows)");
    std::string bearings;
    bool multi = false;
    loc->add_option("bearings", bearings, "Bearing file")->required();
    loc->add_flag("--multi", multi, "Several bearings per anchor, unknown emitter count");

    auto* dsc = app.add_subcommand("dataset", "Generate a labelled spectrum dataset");
    DatasetSpec spec;
    dsc->add_option("--per-class", spec.per_class, "Features per waveform template");
    dsc->add_option("--snr-min", spec.snr_min_db);
    dsc->add_option("--snr-max", spec.snr_max_db);
    dsc->add_option("--validation", spec.validation_fraction);
    dsc->add_flag("--balance", spec.balance_binary, "Equal radar and WiGig counts");
    dsc->add_option("--beam-fraction", spec.beam_fraction, "Share of features taken from one beamformed channel");

    auto* tr = app.add_subcommand("train", "Train the spectrum classifier");
    std::string dataset;
    std::string curve;
    TrainConfig tc;
    tr->add_option("--dataset", dataset)->required();
    tr->add_option("--epochs", tc.epochs);
    tr->add_option("--batch", tc.batch_size);
    tr->add_option("--lr", tc.learning_rate);
    tr->add_option("--curve", curve, "CSV learning curve output");

    auto* cl = app.add_subcommand("classify", "Classify a tone capture or a dataset's validation split");
    std::string record;
    cl->add_option("--model", model_path)->required();
    cl->add_option("--record", record, "IF record base path");
    cl->add_option("--dataset", dataset);

    auto* mc = app.add_subcommand("montecarlo", "Run the scenario's Monte-Carlo campaign");
    std::optional<int> trials, workers;
    mc->add_option("--model", model_path);
    mc->add_option("--trials", trials);
    mc->add_option("--workers", workers);

    auto* rep = app.add_subcommand("report", "Re-emit a stored report");
    std::string input;
    rep->add_option("report", input, "Report JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*sim) return cmd_simulate(g, anchor, probe, trial);
        if (*det) return cmd_detect(g, model_path, trial);
        if (*loc) return cmd_localize(g, bearings, multi);
        if (*dsc) return cmd_dataset(g, spec);
        if (*tr) return cmd_train(g, dataset, tc, curve);
        if (*cl) return cmd_classify(g, model_path, record, dataset);
        if (*mc) return cmd_montecarlo(g, model_path, trials, workers);
        if (*rep) return cmd_report(g, input);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitConfig;
}
