#include "radar2/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "radar2/spectrum.hpp"

namespace radar2 {

namespace {

constexpr std::uint64_t kCalibrationTag = 0xCA11B4A7E0ull;

std::vector<double> moving_average(std::span<const double> p, int length) {
    if (length <= 1 || p.size() < static_cast<std::size_t>(length)) {
        return {p.begin(), p.end()};
    }
    std::vector<double> out(p.size() - length + 1);
    double acc = std::accumulate(p.begin(), p.begin() + length, 0.0);
    out[0] = acc / length;
    for (std::size_t i = 1; i < out.size(); ++i) {
        acc += p[i + length - 1] - p[i - 1];
        out[i] = acc / length;
    }
    return out;
}

struct SweepPeak {
    double value;
    double t;
};

// Distinct crossing times in the sweep capture, strongest first.
std::vector<double> sweep_peaks(std::span<const double> power, const DetectionConfig& cfg,
                                const ReceiverConfig& rx, double threshold_ratio_mean) {
    const auto smooth = moving_average(power, cfg.smoothing);
    const double p_th = cfg.power_threshold.value_or(std::numeric_limits<double>::infinity());
    const double offset = 0.5 * (std::max(cfg.smoothing, 1) - 1);
    std::vector<SweepPeak> hits;
    for (std::size_t i = 0; i < smooth.size(); ++i) {
        if (smooth[i] >= threshold_ratio_mean || smooth[i] >= p_th) {
            const double sample = std::fmod(static_cast<double>(i) + offset, rx.adc_samples);
            hits.push_back({smooth[i], sample / rx.adc_rate});
        }
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const SweepPeak& a, const SweepPeak& b) { return a.value > b.value; });
    const double merge = 2.0 * rx.cutoff / cfg.sweep.slope;
    std::vector<double> accepted;
    for (const auto& h : hits) {
        if (static_cast<int>(accepted.size()) >= cfg.max_sweep_peaks) break;
        const bool near = std::any_of(accepted.begin(), accepted.end(),
                                      [&](double t) { return std::abs(t - h.t) <= merge; });
        if (!near) accepted.push_back(h.t);
    }
    return accepted;
}

std::string tone_id(const char* prefix, std::size_t k) { return prefix + std::to_string(k); }

struct Candidate {
    double frequency;
    std::string source;
    std::optional<IfRecord> record;
};

}  // namespace

void DetectionConfig::validate() const {
    std::vector<std::string> issues;
    if (!(ratio_threshold > 1.0)) issues.push_back("ratio threshold must be > 1");
    if (power_threshold && !(*power_threshold > 0.0)) issues.push_back("power threshold must be > 0");
    if (!(tone_step > 0.0)) issues.push_back("tone step must be > 0");
    if (!(f_min < f_max)) issues.push_back("band must satisfy f_min < f_max");
    if (!sweep.is_sweep() || !(sweep.slope > 0.0)) {
        issues.push_back("sweep probe must be a sweep with positive slope");
    }
    if (frames_per_detection < 1) issues.push_back("frames per detection must be >= 1");
    if (smoothing < 1) issues.push_back("smoothing length must be >= 1");
    if (max_sweep_peaks < 1) issues.push_back("max sweep peaks must be >= 1");
    if (!(direction_merge_deg >= 0.0)) issues.push_back("direction merge angle must be >= 0");
    if (!(music_floor_factor >= 0.0)) issues.push_back("MUSIC floor factor must be >= 0");
    if (!issues.empty()) {
        std::string msg = "invalid detection config:";
        for (const auto& i : issues) msg += "\n  - " + i;
        throw ConfigError(msg);
    }
    music.validate();
}

std::string_view to_string(Trigger t) {
    switch (t) {
    case Trigger::None: return "none";
    case Trigger::Ratio: return "ratio";
    case Trigger::Power: return "power";
    }
    return "none";
}

ProbeDecision probe_decision(std::span<const double> power, const DetectionConfig& cfg,
                             int samples_per_chirp, double adc_rate) {
    ProbeDecision d;
    if (power.empty()) return d;
    const auto smooth = moving_average(power, cfg.smoothing);
    const auto it = std::max_element(smooth.begin(), smooth.end());
    d.max_power = *it;
    d.mean_power = std::accumulate(smooth.begin(), smooth.end(), 0.0) / smooth.size();
    const double offset = 0.5 * (std::max(cfg.smoothing, 1) - 1);
    d.index = static_cast<std::size_t>(std::lround(static_cast<double>(it - smooth.begin()) + offset));
    d.t_max = std::fmod(static_cast<double>(it - smooth.begin()) + offset,
                        std::max(samples_per_chirp, 1)) /
              adc_rate;
    d.ratio = d.mean_power > 0.0 ? d.max_power / d.mean_power : 0.0;
    if (d.mean_power > 0.0 && d.ratio >= cfg.ratio_threshold) {
        d.trigger = Trigger::Ratio;
    } else if (cfg.power_threshold && d.max_power >= *cfg.power_threshold) {
        d.trigger = Trigger::Power;
    }
    d.detected = d.trigger != Trigger::None;
    return d;
}

double estimate_frequency_component(double t_max, const ProbeSignal& sweep, double sweep_time) {
    if (!sweep.is_sweep()) {
        throw std::invalid_argument("frequency component estimation needs a sweep probe");
    }
    const double t = std::clamp(t_max, 0.0, sweep_time);
    return sweep.start_frequency + sweep.slope * t;
}

std::vector<ProbeSignal> plan_single_tone_probes(const DetectionConfig& cfg) {
    if (!(cfg.f_min < cfg.f_max) || !(cfg.tone_step > 0.0)) {
        throw ConfigError("tone plan needs f_min < f_max and a positive step");
    }
    const auto count =
        static_cast<long>(std::floor((cfg.f_max - cfg.f_min) / cfg.tone_step * (1.0 + 1e-12))) + 1;
    std::vector<ProbeSignal> tones;
    for (long k = 0; k < count; ++k) tones.push_back(ProbeSignal::tone(cfg.f_min + k * cfg.tone_step));
    return tones;
}

double recommend_step_size(Deployment target, double min_bandwidth, double max_bandwidth) {
    if (!(min_bandwidth > 0.0) || !(max_bandwidth >= min_bandwidth)) {
        throw std::invalid_argument("bandwidth bounds must satisfy 0 < min <= max");
    }
    return target == Deployment::Indoor ? min_bandwidth : 0.25 * min_bandwidth;
}

double measure_noise_floor(const IfRecord& rec) {
    const auto p = if_power_series(rec);
    if (p.empty()) return 0.0;
    return std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
}

std::vector<std::pair<double, double>> coverage_gaps(const DetectionConfig& cfg,
                                                     const ReceiverConfig& receiver) {
    std::vector<std::pair<double, double>> covered;
    const double sweep_end = cfg.sweep.frequency_at(receiver.sample_time(receiver.adc_samples - 1));
    covered.emplace_back(cfg.sweep.start_frequency - receiver.cutoff, sweep_end + receiver.cutoff);
    for (const auto& t : plan_single_tone_probes(cfg)) {
        covered.emplace_back(t.start_frequency - receiver.cutoff, t.start_frequency + receiver.cutoff);
    }
    std::sort(covered.begin(), covered.end());
    std::vector<std::pair<double, double>> gaps;
    double cursor = cfg.f_min;
    for (const auto& [lo, hi] : covered) {
        if (lo > cursor && cursor < cfg.f_max) gaps.emplace_back(cursor, std::min(lo, cfg.f_max));
        cursor = std::max(cursor, hi);
    }
    if (cursor < cfg.f_max) gaps.emplace_back(cursor, cfg.f_max);
    return gaps;
}

DetectionReport run_detection(const CaptureFn& capture, const ReceiverConfig& receiver,
                              const DetectionConfig& cfg_in, const SpectrumCnn& model,
                              double noise_floor, const ArrayGeometry& array) {
    cfg_in.validate();
    receiver.validate();
    if (!model.trained()) throw std::logic_error("detection needs a trained classifier");
    if (!(noise_floor >= 0.0)) throw std::invalid_argument("noise floor must be >= 0");

    DetectionConfig cfg = cfg_in;
    if (!cfg.power_threshold) {
        if (!(noise_floor > 0.0)) {
            throw std::invalid_argument("power threshold unset and no calibrated noise floor");
        }
        cfg.power_threshold = noise_floor * std::pow(10.0, cfg.power_margin_db / 10.0);
    }

    DetectionReport report;
    report.power_threshold = *cfg.power_threshold;
    report.noise_floor = noise_floor;
    report.coverage_gaps = coverage_gaps(cfg, receiver);
    std::uint64_t probe_index = 0;

    std::vector<Candidate> candidates;
    auto add_candidate = [&](double f, std::string source, std::optional<IfRecord> rec) {
        const bool duplicate = std::any_of(candidates.begin(), candidates.end(), [&](const auto& c) {
            return std::abs(c.frequency - f) <= receiver.cutoff;
        });
        if (!duplicate) candidates.push_back({f, std::move(source), std::move(rec)});
    };

    // Sweep probe.
    {
        const auto rec = capture(cfg.sweep, probe_index++);
        const auto power = if_power_series(rec);
        const auto d = probe_decision(power, cfg, receiver.adc_samples, receiver.adc_rate);
        report.probes.push_back({"sweep", cfg.sweep, d});
        if (d.detected) {
            for (double t : sweep_peaks(power, cfg, receiver, cfg.ratio_threshold * d.mean_power)) {
                add_candidate(estimate_frequency_component(t, cfg.sweep, receiver.sweep_time),
                              "sweep", std::nullopt);
            }
        }
    }

    // Single-tone probes.
    const auto tones = plan_single_tone_probes(cfg);
    for (std::size_t k = 0; k < tones.size(); ++k) {
        auto rec = capture(tones[k], probe_index++);
        const auto d = probe_decision(if_power_series(rec), cfg, receiver.adc_samples,
                                      receiver.adc_rate);
        report.probes.push_back({tone_id("tone-", k), tones[k], d});
        if (d.detected) add_candidate(tones[k].start_frequency, tone_id("tone-", k), std::move(rec));
    }
    report.mmwave_detected = !candidates.empty();

    // Classification, with a fresh tone capture for sweep-found components.
    std::vector<double> radar_dirs;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        auto& c = candidates[k];
        if (!c.record) {
            const auto tone = ProbeSignal::tone(c.frequency);
            c.record = capture(tone, probe_index++);
            const auto d = probe_decision(if_power_series(*c.record), cfg, receiver.adc_samples,
                                          receiver.adc_rate);
            report.probes.push_back({tone_id("reprobe-", k), tone, d});
        }

        MusicConfig mc = cfg.music;
        mc.noise_floor = cfg.music_floor_factor * noise_floor;
        mc.carrier_frequency = c.frequency;

        if (!cfg.multi_device || c.record->antennas < 2) {
            const auto cls = classify(model, extract_spectrum(*c.record));
            DetectedSignal sig{c.frequency, c.source, cls.label, cls.probability,
                               cls.low_confidence, {}};
            if (cls.label != SignalClass::WiGig && c.record->antennas >= 2) {
                // Bearing of the single strongest source, for localization.
                mc.source_count = 1;
                try {
                    const auto music = music_spectrum(*c.record, array, mc);
                    if (!music.peaks.empty()) sig.aoa_deg = music.peaks.front().angle_deg;
                } catch (const std::invalid_argument&) {
                }
            }
            report.signals.push_back(std::move(sig));
            continue;
        }

        std::vector<double> directions;
        try {
            const auto music = music_spectrum(*c.record, array, mc);
            const int keep = std::min<int>(std::max(1, music.estimated_sources),
                                           c.record->antennas - 1);
            for (const auto& p : music.peaks) {
                if (static_cast<int>(directions.size()) >= keep) break;
                directions.push_back(p.angle_deg);
            }
        } catch (const std::invalid_argument&) {
            directions.clear();
        }
        if (directions.size() < 2) {
            // one source: nothing to separate, and all antennas go into the feature
            const auto cls = classify(model, extract_spectrum(*c.record));
            std::optional<double> aoa;
            if (!directions.empty()) aoa = directions.front();
            report.signals.push_back(
                {c.frequency, c.source, cls.label, cls.probability, cls.low_confidence, aoa});
            if (aoa && cls.label != SignalClass::WiGig) radar_dirs.push_back(*aoa);
            continue;
        }
        const auto beams = spatial_separation(*c.record, array, directions, c.frequency);
        for (std::size_t b = 0; b < beams.size(); ++b) {
            const auto cls = classify(model, extract_spectrum(beams[b]));
            report.signals.push_back({c.frequency, c.source, cls.label, cls.probability,
                                      cls.low_confidence, directions[b]});
            if (cls.label != SignalClass::WiGig) radar_dirs.push_back(directions[b]);
        }
    }

    report.spy_radar_present =
        std::any_of(report.signals.begin(), report.signals.end(),
                    [](const DetectedSignal& s) { return s.label != SignalClass::WiGig; });
    if (cfg.multi_device) {
        std::sort(radar_dirs.begin(), radar_dirs.end());
        for (double d : radar_dirs) {
            if (report.radar_directions_deg.empty() ||
                d - report.radar_directions_deg.back() > cfg.direction_merge_deg) {
                report.radar_directions_deg.push_back(d);
            }
        }
        report.spy_radar_count = static_cast<int>(report.radar_directions_deg.size());
        if (report.spy_radar_present && report.spy_radar_count == 0) report.spy_radar_count = 1;
    } else {
        report.spy_radar_count = report.spy_radar_present ? 1 : 0;
    }
    return report;
}

DetectionReport run_detection(const ReceivedScene& scene, const ReceiverConfig& receiver,
                              const DetectionConfig& cfg, const SpectrumCnn& model,
                              const ArrayGeometry& array, std::uint64_t seed) {
    ReceiverConfig rx = receiver;
    rx.frames = cfg.frames_per_detection;
    double floor = 0.0;
    if (!cfg.power_threshold || cfg.multi_device) {
        ReceivedScene quiet;
        quiet.noise_power = scene.noise_power;
        quiet.antennas = scene.antennas;
        floor = measure_noise_floor(mix_and_filter(quiet, cfg.sweep, rx, derive_seed(seed, kCalibrationTag)));
    }
    const CaptureFn capture = [&](const ProbeSignal& probe, std::uint64_t index) {
        return mix_and_filter(scene, probe, rx, derive_seed(seed, index));
    };
    return run_detection(capture, rx, cfg, model, floor, array);
}

}  // namespace radar2
