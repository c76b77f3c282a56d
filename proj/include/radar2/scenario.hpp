#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "radar2/channel.hpp"
#include "radar2/classifier.hpp"
#include "radar2/detection.hpp"
#include "radar2/frontend.hpp"
#include "radar2/localize.hpp"
#include "radar2/waveforms.hpp"

namespace radar2 {

enum class ScenarioMode {
    Pipeline,  // simulate IF at every anchor, detect, estimate AoA, localize
    Bearings,  // skip the signal chain: true bearings plus Gaussian noise
};

enum class SweepAxis { Distance, Angle, Anchors, Height };

std::string_view to_string(SweepAxis a);

struct EmitterSpec {
    PhaseWaveform waveform;
    std::optional<Position> position;  // unset: drawn from the emitter region per trial
    // Post-mixing SNR at every anchor, replacing path loss when set.
    std::optional<double> snr_db;
    std::optional<double> clock_offset;  // s; unset: random per trial and anchor
};

struct AnchorSpec {
    Position position;
    std::optional<double> heading_deg;  // unset: face the emitter centroid
};

struct Region {
    double x_min = 0.0, x_max = 0.0;
    double y_min = 0.0, y_max = 0.0;
    double z = 0.0;
};

struct SweepSpec {
    SweepAxis axis = SweepAxis::Distance;
    std::vector<double> values;
};

struct ScenarioConfig {
    ReceiverConfig receiver;
    DetectionConfig detection;
    // defaults match what parse_scenario derives from the detector band centre
    ArrayGeometry array = ArrayGeometry::for_wavelength(kSpeedOfLight / 79e9);
    PathLossParams path_loss{1.0, 1.0, 1.0, kSpeedOfLight / 79e9};
    std::vector<EmitterSpec> emitters;
    std::optional<Region> emitter_region;
    std::vector<AnchorSpec> anchors;
    double noise_power = 1.0;
    std::uint64_t seed = 1;
    int trials = 1;
    int workers = 1;
    ScenarioMode mode = ScenarioMode::Pipeline;
    double bearing_noise_deg = 0.0;
    bool localize = true;
    std::string model_path;
    std::optional<SweepSpec> sweep;

    /// Throws ConfigError listing every violation.
    void validate() const;
    /// Non-fatal findings, e.g. emitters whose band misses the detector band.
    std::vector<std::string> warnings() const;
};

/// Parses and validates a scenario document. Unknown keys are errors; parse
/// errors carry the line and column, field errors the JSON path.
ScenarioConfig parse_scenario(const std::string& text, const std::string& source = "<scenario>");
ScenarioConfig load_scenario(const std::string& path);

/// Canonical form with every default spelled out; parse_scenario of its
/// dump reproduces the same config.
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);

/// Stage-tagged failure from run_pipeline.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct TrialResult {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::vector<Position> emitter_positions;
    std::vector<WaveformKind> emitter_kinds;
    bool radar_present = false;  // ground truth
    bool mmwave_detected = false;
    bool spy_radar_present = false;  // q
    int estimated_count = 0;         // n-hat, or n_i at the first anchor
    std::optional<DetectionReport> detection;  // first anchor, pipeline mode
    std::vector<AnchorObservation> observations;
    std::optional<LocalizationResult> localization;
    std::vector<double> localization_errors;  // m, per true radar matched
    std::vector<double> angle_errors;         // deg, per anchor and true radar
    bool wigig_bearing_used = false;  // a WiGig direction reached localization
    std::string error;                // stage-tagged, empty on success
};

/// One trial with seed derive_seed(cfg.seed, index). `model` may be null in
/// bearing mode.
TrialResult run_pipeline(const ScenarioConfig& cfg, const SpectrumCnn* model, std::size_t index);

struct Percentiles {
    std::size_t count = 0;
    double mean = 0.0, p50 = 0.0, p90 = 0.0, p95 = 0.0, max = 0.0;
};

Percentiles percentiles(std::vector<double> values);

struct Aggregate {
    std::size_t trials = 0;
    std::size_t failures = 0;
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::optional<double> detection_rate;    // TP / (TP + FN)
    std::optional<double> false_alarm_rate;  // FP / (TN + FP)
    Percentiles angle_error;
    Percentiles localization_error;
    std::size_t wigig_leaks = 0;
};

Aggregate aggregate(const std::vector<TrialResult>& trials);

struct SweepRow {
    double value = 0.0;
    Aggregate aggregate;
};

struct RunReport {
    static constexpr const char* kSchema = "radar2-report/1";
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::vector<TrialResult> trials;  // without a sweep
    Aggregate aggregate;
    std::optional<SweepAxis> sweep_axis;
    std::vector<SweepRow> sweep;
};

/// Applies one sweep value to a copy of the config.
ScenarioConfig apply_sweep_value(const ScenarioConfig& cfg, SweepAxis axis, double value);

/// Runs cfg.trials trials (per sweep value when a sweep is declared) on up to
/// cfg.workers threads. The result does not depend on the worker count.
RunReport monte_carlo(const ScenarioConfig& cfg, const SpectrumCnn* model);

enum class ReportFormat { Json, Csv };

nlohmann::json report_to_json(const RunReport& r);
void emit_report(const RunReport& r, ReportFormat format, std::ostream& os);
void emit_report(const RunReport& r, ReportFormat format, const std::string& path);

nlohmann::json detection_to_json(const DetectionReport& d);
nlohmann::json localization_to_json(const LocalizationResult& l);

}  // namespace radar2
