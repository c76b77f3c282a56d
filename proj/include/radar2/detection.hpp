#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "radar2/classifier.hpp"
#include "radar2/frontend.hpp"
#include "radar2/localize.hpp"

namespace radar2 {

struct DetectionConfig {
    double ratio_threshold = 4.4;
    // Absolute threshold on smoothed power. Unset: calibrated noise floor
    // plus power_margin_db.
    std::optional<double> power_threshold;
    double power_margin_db = 15.0;
    double f_min = 77.0e9;
    double f_max = 81.0e9;
    double tone_step = 800e6;
    ProbeSignal sweep = ProbeSignal::sweep(77.0e9, 39.9756e12);
    int frames_per_detection = 25;
    // Moving-average length applied to the power series before thresholding.
    int smoothing = 4;
    int max_sweep_peaks = 4;
    bool multi_device = false;
    double direction_merge_deg = 3.0;
    // MUSIC keeps snapshots above this multiple of the noise floor.
    double music_floor_factor = 4.0;
    MusicConfig music;

    void validate() const;
};

enum class Trigger { None, Ratio, Power };
std::string_view to_string(Trigger t);

struct ProbeDecision {
    bool detected = false;
    Trigger trigger = Trigger::None;
    double ratio = 0.0;      // max / mean of the smoothed series, 0 if mean is 0
    double max_power = 0.0;
    double mean_power = 0.0;
    std::size_t index = 0;   // argmax in the flattened series
    double t_max = 0.0;      // argmax time within its chirp, s
};

/// Smooths `power` with cfg.smoothing, then tests max/mean against the ratio
/// threshold and max against the power threshold. Samples are grouped into
/// chirps of `samples_per_chirp` to turn the argmax into a time.
ProbeDecision probe_decision(std::span<const double> power, const DetectionConfig& cfg,
                             int samples_per_chirp = 1024, double adc_rate = 12e6);

/// f0 + S * t_max, clamped to the sweep span.
double estimate_frequency_component(double t_max, const ProbeSignal& sweep,
                                     double sweep_time = 100e-6);

/// Tones at f_min + k * step for every value not above f_max.
std::vector<ProbeSignal> plan_single_tone_probes(const DetectionConfig& cfg);

enum class Deployment { Indoor, Outdoor };

/// Indoor: the smallest expected bandwidth. Outdoor: a quarter of it.
double recommend_step_size(Deployment target, double min_bandwidth, double max_bandwidth);

struct ProbeVerdict {
    std::string id;
    ProbeSignal probe;
    ProbeDecision decision;
};

struct DetectedSignal {
    double frequency = 0.0;  // estimated component, Hz
    std::string source;      // probe id that found it
    SignalClass label = SignalClass::Radar;
    double probability = 0.0;
    bool low_confidence = false;
    // Relative to the array broadside: per beam in multi-device mode, the
    // strongest source for radar-labelled signals otherwise.
    std::optional<double> aoa_deg;
};

struct DetectionReport {
    bool mmwave_detected = false;
    std::vector<ProbeVerdict> probes;
    std::vector<DetectedSignal> signals;
    bool spy_radar_present = false;
    int spy_radar_count = 0;
    std::vector<double> radar_directions_deg;  // multi-device mode
    std::vector<std::pair<double, double>> coverage_gaps;  // Hz intervals
    double power_threshold = 0.0;
    double noise_floor = 0.0;
};

/// Captures the IF record for a probe. `probe_index` is unique per call
/// within one detection run and is meant for seeding.
using CaptureFn = std::function<IfRecord(const ProbeSignal& probe, std::uint64_t probe_index)>;

/// Mean power of an emitter-free capture.
double measure_noise_floor(const IfRecord& rec);

/// Parts of [f_min, f_max] that neither the sweep's ADC window nor any tone
/// passband reaches.
std::vector<std::pair<double, double>> coverage_gaps(const DetectionConfig& cfg,
                                                     const ReceiverConfig& receiver);

/// Sweep probe, then every planned tone; triggered sweep peaks are re-probed
/// with a tone at the estimated frequency. Each distinct signal is classified
/// (per direction in multi-device mode). Full scan, no early exit.
DetectionReport run_detection(const CaptureFn& capture, const ReceiverConfig& receiver,
                              const DetectionConfig& cfg, const SpectrumCnn& model,
                              double noise_floor, const ArrayGeometry& array);

/// Convenience form: simulates `scene` with noise seeds derived from `seed`
/// and calibrates the noise floor on an emitter-free capture.
DetectionReport run_detection(const ReceivedScene& scene, const ReceiverConfig& receiver,
                              const DetectionConfig& cfg, const SpectrumCnn& model,
                              const ArrayGeometry& array, std::uint64_t seed);

}  // namespace radar2
