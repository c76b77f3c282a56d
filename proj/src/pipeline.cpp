#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "radar2/scenario.hpp"

namespace radar2 {

namespace {

constexpr std::uint64_t kPlacementTag = 0x504C4143ull;
constexpr std::uint64_t kAnchorTag = 0x414E4348ull;
constexpr std::uint64_t kBearingTag = 0x4245524Eull;

double line_error_deg(double a, double b) { return std::abs(fold_line_angle_deg(a - b)); }

// Global bearing line an array would report when the emitter sits at a
// different height, using the x-referenced distortion of bearing_with_height.
double bearing_with_height_global(const Position& anchor, const Position& emitter) {
    const double planar = global_bearing_deg(anchor, emitter);
    if (anchor.z == emitter.z) return planar;
    DevicePose det{anchor, DeviceRole::Detector, 0.0};
    DevicePose em{emitter, DeviceRole::Emitter, 0.0};
    const auto pair = bearing_with_height(det, em);
    return planar + (pair.ideal_deg - pair.distorted_deg);
}

Position centroid(const std::vector<Position>& ps) {
    Position c;
    for (const auto& p : ps) {
        c.x += p.x;
        c.y += p.y;
    }
    if (!ps.empty()) {
        c.x /= static_cast<double>(ps.size());
        c.y /= static_cast<double>(ps.size());
    }
    return c;
}

PhaseWaveform with_random_phase(PhaseWaveform w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    std::visit(
        [&](auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, FskParams>) {
                p.theta1 = u(rng);
                p.theta2 = u(rng);
            } else if constexpr (std::is_same_v<P, OfdmParams>) {
                p.seed = rng();
            } else {
                p.phase = u(rng);
            }
        },
        w.params);
    return w;
}

// Greedy nearest matching between true radar positions and estimates.
std::vector<double> match_errors(const std::vector<Position>& truth,
                                 const std::vector<LocatedEmitter>& est) {
    struct Pair {
        double d;
        std::size_t t, e;
    };
    std::vector<Pair> pairs;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        for (std::size_t e = 0; e < est.size(); ++e) {
            pairs.push_back({std::hypot(truth[t].x - est[e].position.x, truth[t].y - est[e].position.y), t, e});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });
    std::vector<bool> t_used(truth.size()), e_used(est.size());
    std::vector<double> out(truth.size(), std::nan(""));
    for (const auto& p : pairs) {
        if (t_used[p.t] || e_used[p.e]) continue;
        t_used[p.t] = e_used[p.e] = true;
        out[p.t] = p.d;
    }
    out.erase(std::remove_if(out.begin(), out.end(), [](double v) { return std::isnan(v); }), out.end());
    return out;
}

LocalizationResult localize_observations(const ScenarioConfig& cfg,
                                         const std::vector<AnchorObservation>& obs) {
    std::vector<AnchorObservation> usable;
    for (const auto& o : obs) {
        if (!o.bearings_deg.empty()) usable.push_back(o);
    }
    if (cfg.detection.multi_device) {
        if (usable.size() < 3) {
            throw std::runtime_error("only " + std::to_string(usable.size()) +
                                     " anchors produced bearings, multi-device mode needs 3");
        }
        return multi_device_localize(usable);
    }
    if (usable.size() < 2) {
        throw std::runtime_error("only " + std::to_string(usable.size()) +
                                 " anchors produced bearings, triangulation needs 2");
    }
    for (auto& o : usable) {
        o.bearings_deg.resize(1);
        if (!o.peak_heights.empty()) o.peak_heights.resize(1);
    }
    return triangulate(usable);
}

}  // namespace

TrialResult run_pipeline(const ScenarioConfig& cfg, const SpectrumCnn* model, std::size_t index) {
    TrialResult t;
    t.index = index;
    t.seed = derive_seed(cfg.seed, index);

    std::mt19937_64 place(derive_seed(t.seed, kPlacementTag));
    std::vector<Position> radars, wigigs;
    for (const auto& e : cfg.emitters) {
        Position p;
        if (e.position) {
            p = *e.position;
        } else {
            const auto& g = *cfg.emitter_region;
            p.x = std::uniform_real_distribution<double>(g.x_min, g.x_max)(place);
            p.y = std::uniform_real_distribution<double>(g.y_min, g.y_max)(place);
            p.z = g.z;
        }
        t.emitter_positions.push_back(p);
        t.emitter_kinds.push_back(e.waveform.kind());
        (e.waveform.kind() == WaveformKind::WiGigOFDM ? wigigs : radars).push_back(p);
    }
    t.radar_present = !radars.empty();

    const Position aim = centroid(t.emitter_positions.empty()
                                      ? std::vector<Position>{Position{0.0, 1.0, 0.0}}
                                      : t.emitter_positions);
    std::vector<DevicePose> poses;
    for (const auto& a : cfg.anchors) {
        double heading = 0.0;
        if (a.heading_deg) {
            heading = *a.heading_deg;
        } else if (aim.x != a.position.x || aim.y != a.position.y) {
            heading = global_bearing_deg(a.position, aim);
        }
        poses.push_back({a.position, DeviceRole::Detector, heading});
    }

    auto truth_errors = [&](std::size_t i, const std::vector<double>& bearings) {
        for (const auto& r : radars) {
            if (r.x == poses[i].position.x && r.y == poses[i].position.y) continue;
            const double truth = global_bearing_deg(poses[i].position, r);
            if (bearings.empty()) continue;
            double best = 180.0;
            for (double b : bearings) best = std::min(best, line_error_deg(b, truth));
            t.angle_errors.push_back(best);
        }
    };

    try {
        if (cfg.mode == ScenarioMode::Bearings) {
            std::normal_distribution<double> noise(0.0, 1.0);
            for (std::size_t i = 0; i < poses.size(); ++i) {
                AnchorObservation o;
                o.position = poses[i].position;
                for (std::size_t k = 0; k < cfg.emitters.size(); ++k) {
                    if (t.emitter_kinds[k] == WaveformKind::WiGigOFDM) continue;
                    std::mt19937_64 rng(derive_seed(t.seed, kBearingTag + i, k));
                    const double b = bearing_with_height_global(poses[i].position, t.emitter_positions[k]);
                    o.bearings_deg.push_back(b + cfg.bearing_noise_deg * noise(rng));
                }
                truth_errors(i, o.bearings_deg);
                t.observations.push_back(std::move(o));
            }
            t.mmwave_detected = t.radar_present || !wigigs.empty();
            t.spy_radar_present = t.radar_present;
            t.estimated_count = static_cast<int>(radars.size());
        } else {
            if (!model || !model->trained()) throw StageError("detection", "no trained classifier model");
            for (std::size_t i = 0; i < poses.size(); ++i) {
                if (i > 0 && (!t.spy_radar_present || !cfg.localize)) break;
                const std::uint64_t anchor_seed = derive_seed(t.seed, kAnchorTag, i);
                std::mt19937_64 rng(anchor_seed);
                ReceivedScene scene;
                scene.noise_power = cfg.noise_power;
                scene.antennas = cfg.array.elements;
                try {
                    for (std::size_t k = 0; k < cfg.emitters.size(); ++k) {
                        const auto& spec = cfg.emitters[k];
                        DevicePose em{t.emitter_positions[k], DeviceRole::Emitter, 0.0};
                        SceneEmitter se;
                        se.waveform = with_random_phase(spec.waveform, rng);
                        const double offset = std::uniform_real_distribution<double>(0.0, 1e-3)(rng);
                        se.clock_offset = spec.clock_offset.value_or(offset);
                        try {
                            se.link = make_link(em, poses[i], cfg.array, cfg.path_loss);
                        } catch (const std::invalid_argument&) {
                            continue;  // outside this anchor's field of view
                        }
                        if (spec.snr_db) {
                            se.link.path_gain = std::sqrt(cfg.noise_power * std::pow(10.0, *spec.snr_db / 10.0)) /
                                                se.waveform.amplitude;
                        }
                        scene.emitters.push_back(std::move(se));
                    }
                } catch (const std::exception& e) {
                    throw StageError("simulate", e.what());
                }

                DetectionReport rep;
                try {
                    rep = run_detection(scene, cfg.receiver, cfg.detection, *model, cfg.array,
                                        derive_seed(anchor_seed, 0x444554ull));
                } catch (const std::exception& e) {
                    throw StageError("detection", e.what());
                }

                AnchorObservation o;
                o.position = poses[i].position;
                if (cfg.detection.multi_device) {
                    for (double rel : rep.radar_directions_deg) o.bearings_deg.push_back(poses[i].heading_deg + rel);
                } else {
                    const DetectedSignal* best = nullptr;
                    for (const auto& s : rep.signals) {
                        if (s.label == SignalClass::WiGig || !s.aoa_deg) continue;
                        if (!best || s.probability > best->probability) best = &s;
                    }
                    if (best) o.bearings_deg.push_back(poses[i].heading_deg + *best->aoa_deg);
                }
                for (double b : o.bearings_deg) {
                    double to_radar = 180.0, to_wigig = 180.0;
                    for (const auto& r : radars) to_radar = std::min(to_radar, line_error_deg(b, global_bearing_deg(o.position, r)));
                    for (const auto& w : wigigs) to_wigig = std::min(to_wigig, line_error_deg(b, global_bearing_deg(o.position, w)));
                    if (to_wigig < to_radar) t.wigig_bearing_used = true;
                }
                truth_errors(i, o.bearings_deg);
                t.observations.push_back(std::move(o));

                if (i == 0) {
                    t.mmwave_detected = rep.mmwave_detected;
                    t.spy_radar_present = rep.spy_radar_present;
                    t.estimated_count = rep.spy_radar_count;
                    t.detection = std::move(rep);
                }
            }
        }

        if (cfg.localize && t.spy_radar_present) {
            try {
                t.localization = localize_observations(cfg, t.observations);
            } catch (const std::exception& e) {
                throw StageError("localization", e.what());
            }
            if (cfg.detection.multi_device) t.estimated_count = t.localization->estimated_count;
            t.localization_errors = match_errors(radars, t.localization->emitters);
        }
    } catch (const StageError& e) {
        t.error = e.what();
    } catch (const std::exception& e) {
        t.error = std::string("pipeline: ") + e.what();
    }
    return t;
}

Percentiles percentiles(std::vector<double> v) {
    Percentiles p;
    p.count = v.size();
    if (v.empty()) return p;
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    p.mean = sum / static_cast<double>(v.size());
    // Linear interpolation between closest ranks.
    auto at = [&](double q) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    p.p50 = at(0.5);
    p.p90 = at(0.9);
    p.p95 = at(0.95);
    p.max = v.back();
    return p;
}

Aggregate aggregate(const std::vector<TrialResult>& trials) {
    Aggregate a;
    a.trials = trials.size();
    std::vector<double> angles, locs;
    for (const auto& t : trials) {
        if (!t.error.empty()) ++a.failures;
        if (t.radar_present) (t.spy_radar_present ? a.tp : a.fn)++;
        else (t.spy_radar_present ? a.fp : a.tn)++;
        if (t.wigig_bearing_used) ++a.wigig_leaks;
        angles.insert(angles.end(), t.angle_errors.begin(), t.angle_errors.end());
        locs.insert(locs.end(), t.localization_errors.begin(), t.localization_errors.end());
    }
    if (a.tp + a.fn > 0) a.detection_rate = static_cast<double>(a.tp) / static_cast<double>(a.tp + a.fn);
    if (a.tn + a.fp > 0) a.false_alarm_rate = static_cast<double>(a.fp) / static_cast<double>(a.tn + a.fp);
    a.angle_error = percentiles(std::move(angles));
    a.localization_error = percentiles(std::move(locs));
    return a;
}

ScenarioConfig apply_sweep_value(const ScenarioConfig& cfg, SweepAxis axis, double value) {
    ScenarioConfig out = cfg;
    out.sweep.reset();
    if (cfg.anchors.empty()) throw ConfigError("sweep needs at least one anchor");
    const Position a0 = cfg.anchors.front().position;
    switch (axis) {
    case SweepAxis::Distance:
        for (auto& e : out.emitters) {
            const double b = deg_to_rad(global_bearing_deg(a0, *e.position));
            e.position->x = a0.x + value * std::sin(b);
            e.position->y = a0.y + value * std::cos(b);
        }
        break;
    case SweepAxis::Angle: {
        const double base = cfg.anchors.front().heading_deg.value_or(0.0);
        for (auto& e : out.emitters) {
            const double r = std::hypot(e.position->x - a0.x, e.position->y - a0.y);
            const double b = deg_to_rad(base + value);
            e.position->x = a0.x + r * std::sin(b);
            e.position->y = a0.y + r * std::cos(b);
        }
        // Fixed headings keep the swept angle relative to the first array.
        for (auto& a : out.anchors) {
            if (!a.heading_deg) a.heading_deg = base;
        }
        break;
    }
    case SweepAxis::Anchors:
        out.anchors.resize(static_cast<std::size_t>(value));
        break;
    case SweepAxis::Height:
        for (auto& e : out.emitters) {
            if (e.position) e.position->z = a0.z + value;
        }
        if (out.emitter_region) out.emitter_region->z = a0.z + value;
        break;
    }
    return out;
}

namespace {

std::vector<TrialResult> run_trials(const ScenarioConfig& cfg, const SpectrumCnn* model) {
    const auto n = static_cast<std::size_t>(cfg.trials);
    std::vector<TrialResult> results(n);
    const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(n)));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k = next++; k < n; k = next++) results[k] = run_pipeline(cfg, model, k);
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    return results;
}

}  // namespace

RunReport monte_carlo(const ScenarioConfig& cfg, const SpectrumCnn* model) {
    cfg.validate();
    RunReport r;
    r.config = scenario_to_json(cfg);
    r.seed = cfg.seed;
    if (!cfg.sweep) {
        r.trials = run_trials(cfg, model);
        r.aggregate = aggregate(r.trials);
        return r;
    }
    r.sweep_axis = cfg.sweep->axis;
    std::vector<TrialResult> all;
    for (double v : cfg.sweep->values) {
        const auto swept = apply_sweep_value(cfg, cfg.sweep->axis, v);
        auto trials = run_trials(swept, model);
        r.sweep.push_back({v, aggregate(trials)});
        all.insert(all.end(), std::make_move_iterator(trials.begin()), std::make_move_iterator(trials.end()));
    }
    r.aggregate = aggregate(all);
    return r;
}

}  // namespace radar2
