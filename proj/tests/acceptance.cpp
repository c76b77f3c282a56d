// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "radar2/classifier.hpp"
#include "radar2/common.hpp"
#include "radar2/dataset.hpp"
#include "radar2/detection.hpp"
#include "radar2/localize.hpp"
#include "radar2/scenario.hpp"
#include "radar2/spectrum.hpp"

using namespace radar2;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double dist2d(const Position& a, const Position& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::vector<double> if_power(const IfRecord& rec, int frame, int chirp) {
    std::vector<double> p(rec.samples);
    for (int s = 0; s < rec.samples; ++s) {
        double acc = 0.0;
        for (int a = 0; a < rec.antennas; ++a) acc += std::norm(std::complex<double>(rec.at(frame, chirp, s, a)));
        p[s] = acc / rec.antennas;
    }
    return p;
}

// ---- 1: frequency gating -------------------------------------------------

Outcome frequency_gating() {
    const auto t0 = Clock::now();
    ReceiverConfig rx;
    rx.frames = 1;
    rx.chirps_per_frame = 2;
    const double f0 = 77e9, slope = 39.9756e12, f_rx = 77.5e9;
    ReceivedScene scene;
    SceneEmitter e;
    e.waveform = PhaseWaveform::cw(f_rx);
    e.link.path_gain = 1.0;
    e.link.array = ArrayGeometry::for_wavelength(kSpeedOfLight / f_rx);
    scene.emitters.push_back(e);
    const auto rec = mix_and_filter(scene, ProbeSignal::sweep(f0, slope), rx, 1);
    const auto p = if_power(rec, 0, 1);
    const int peak = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    const double expect = (f_rx - f0) / slope * rx.adc_rate;
    const double offset = std::abs(peak - expect);

    const double half = 0.5 * p[peak];
    auto crossing = [&](int dir) {
        int i = peak;
        while (i + dir >= 0 && i + dir < rec.samples && p[i + dir] >= half) i += dir;
        const double frac = (p[i] - half) / (p[i] - p[i + dir]);
        return i + dir * frac;
    };
    const double half_width = 0.5 * (crossing(1) - crossing(-1)) / rx.adc_rate;
    const double width_err = std::abs(half_width / (rx.cutoff / slope) - 1.0);
    const double t = seconds_since(t0);
    return {offset <= 2.0 && width_err <= 0.25 && t < 5.0,
            "peak offset " + fmt("%.2f", offset) + " samples (<= 2), half-width error " +
                fmt("%.1f", 100 * width_err) + "% (<= 25%), " + fmt("%.2f", t) + " s (< 5 s)"};
}

// ---- 3: classifier ---------------------------------------------------------

SpectrumCnn g_model;

Outcome classifier(const fs::path& workdir) {
    const auto t0 = Clock::now();
    DatasetSpec spec;  // 400 per template, SNR 5 to 25 dB
    spec.seed = 2024;
    const auto ds = generate_dataset(spec);
    TrainConfig tc;
    tc.seed = 3;
    g_model = SpectrumCnn::train(ds, tc);
    g_model.save((workdir / "model.bin").string());
    const double acc = accuracy(g_model, ds, ds.train_count, ds.size());

    // gradient check on a fresh model and a small batch
    const SpectrumFeature* batch[4] = {&ds.features[0], &ds.features[401], &ds.features[1203],
                                       &ds.features[1650]};
    auto probe = SpectrumCnn::initialized(77);
    std::vector<double> grad;
    probe.loss(batch, &grad);
    // The step shrinks while forward and backward differences disagree, i.e.
    // while a ReLU or max-pool switch lies inside [p - h, p + h]. The choice
    // never looks at the analytic gradient.
    std::mt19937_64 rng(5);
    double worst = 0.0;
    int compared = 0, shrunk = 0, kinked = 0;
    for (const auto& block : SpectrumCnn::layout()) {
        for (auto [offset, count] : {std::pair{block.weight_offset, block.weight_count},
                                     std::pair{block.bias_offset, block.bias_count}}) {
            for (int s = 0; s < 20; ++s) {
                const std::size_t i = offset + rng() % count;
                auto prm = probe.parameters();
                const double keep = prm[i];
                const double centre = probe.loss(batch, nullptr);
                std::optional<double> numeric;
                for (double h : {1e-6, 1e-7, 1e-8}) {
                    prm[i] = keep + h;
                    const double up = probe.loss(batch, nullptr);
                    prm[i] = keep - h;
                    const double down = probe.loss(batch, nullptr);
                    prm[i] = keep;
                    const double fwd = (up - centre) / h, bwd = (centre - down) / h;
                    if (std::abs(fwd - bwd) <= 1e-3 * std::max({std::abs(fwd), std::abs(bwd), 1e-3})) {
                        numeric = (up - down) / (2.0 * h);
                        shrunk += h < 1e-6;
                        break;
                    }
                }
                if (!numeric) {
                    ++kinked;
                    continue;
                }
                const double scale = std::max(std::abs(*numeric), std::abs(grad[i]));
                ++compared;
                if (scale < 1e-6) continue;  // finite differences are noise down here
                worst = std::max(worst, std::abs(*numeric - grad[i]) / scale);
            }
        }
    }
    const double t = seconds_since(t0);
    return {acc >= 0.95 && worst <= 1e-4 && kinked <= 20 && t < 600.0,
            "validation accuracy " + fmt("%.4f", acc) + " (>= 0.95) on " + std::to_string(ds.size()) +
                " features, gradient rel. error " + fmt("%.2e", worst) + " (<= 1e-4) over " +
                std::to_string(compared) + " parameters (" + std::to_string(shrunk) + " at a reduced step, " +
                std::to_string(kinked) + " on a kink skipped), " + fmt("%.0f", t) +
                " s (< 600 s)"};
}

// ---- 2: end-to-end detection ------------------------------------------------

Outcome detection() {
    const auto t0 = Clock::now();
    const auto rx = dataset_receiver();
    DetectionConfig dc;
    dc.frames_per_detection = rx.frames;
    const auto array = ArrayGeometry::for_wavelength(kSpeedOfLight / 79e9);
    const int trials = 200;
    const char* names[] = {"cw", "fsk", "fmcw", "pulse"};
    std::vector<int> hits(4, 0);
    int false_alarms = 0;
    for (int kind = 0; kind < 5; ++kind) {
        for (int t = 0; t < trials; ++t) {
            std::mt19937_64 r(derive_seed(99, kind, t));
            auto u = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(r); };
            ReceivedScene scene;
            scene.noise_power = 1.0;
            const double amp = std::sqrt(10.0);  // 10 dB over unit noise inside the passband
            if (kind < 4) {
                const double f = u(77.05e9, 80.35e9);
                PhaseWaveform w;
                if (kind == 0) {
                    w = PhaseWaveform::cw(f, u(0, kTwoPi), amp);
                } else if (kind == 1) {
                    w = PhaseWaveform::fsk(f, f + u(1e6, 3e6), u(20e-6, 200e-6), u(0, kTwoPi), u(0, kTwoPi), amp);
                } else if (kind == 2) {
                    const double bw = u(1e9, 4e9);
                    const double lo = u(77e9, 81e9 - bw);
                    const double period = u(25e-6, 100e-6);
                    w = PhaseWaveform::fmcw(lo, bw / period, period, u(0, kTwoPi), amp);
                } else {
                    w = PhaseWaveform::pulse(f, 2e-6, u(40e3, 50e3), u(0, kTwoPi), amp);
                }
                SceneEmitter e;
                e.waveform = w;
                e.clock_offset = u(0, 1e-3);
                e.link.path_gain = 1.0;
                e.link.aoa_deg = u(-60, 60);
                e.link.array = array;
                scene.emitters.push_back(e);
            }
            const auto rep = run_detection(scene, rx, dc, g_model, array, derive_seed(7, kind, t));
            if (kind < 4) hits[kind] += rep.spy_radar_present;
            else false_alarms += rep.spy_radar_present;
        }
    }
    const double t = seconds_since(t0);
    bool pass = t < 300.0;
    std::string detail;
    for (int k = 0; k < 4; ++k) {
        const double rate = static_cast<double>(hits[k]) / trials;
        pass = pass && rate >= 0.96;
        detail += std::string(names[k]) + " " + fmt("%.1f", 100 * rate) + "%, ";
    }
    const double fa = static_cast<double>(false_alarms) / trials;
    pass = pass && fa <= 0.05;
    return {pass, "detection " + detail + "(>= 96%), false alarm " + fmt("%.1f", 100 * fa) + "% (<= 5%), " +
                      fmt("%.0f", t) + " s (< 300 s)"};
}

// ---- 4: spectrum shift covariance -------------------------------------------

Outcome shift_covariance() {
    auto rx = dataset_receiver();
    std::mt19937_64 rng(404);
    auto u = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    const double bin = rx.adc_rate / 1024.0;
    int worst = 0;
    for (int i = 0; i < 20; ++i) {
        const double f0 = 78e9 + u(-2e6, 2e6);
        const double delta = u(-1.5e6, 1.5e6);
        PhaseWaveform w;
        switch (i % 3) {
        case 0: w = PhaseWaveform::cw(f0, u(0, kTwoPi)); break;
        case 1: w = PhaseWaveform::fsk(f0, f0 + u(0.3e6, 0.8e6), u(40e-6, 120e-6)); break;
        default: w = PhaseWaveform::pulse(f0, 2e-6, 10e3, u(0, kTwoPi)); break;
        }
        ReceivedScene scene;
        SceneEmitter e;
        e.waveform = w;
        e.clock_offset = u(0, 1e-3);
        e.link.path_gain = 1.0;
        e.link.aoa_deg = u(-40, 40);
        e.link.array = ArrayGeometry::for_wavelength(kSpeedOfLight / 78e9);
        scene.emitters.push_back(e);
        const auto a = extract_spectrum(mix_and_filter(scene, ProbeSignal::tone(78e9), rx, 7));
        const auto b = extract_spectrum(mix_and_filter(scene, ProbeSignal::tone(78e9 + delta), rx, 7));
        // tuning the probe up moves the content down by delta / bin
        const int expect = -static_cast<int>(std::lround(delta / bin));
        int best = 0;
        double best_score = -1.0;
        for (int s = -200; s <= 200; ++s) {
            double score = 0.0;
            for (int k = 0; k < 1024; ++k) score += a.values[k] * b.values[((k + s) % 1024 + 1024) % 1024];
            if (score > best_score) {
                best_score = score;
                best = s;
            }
        }
        worst = std::max(worst, std::abs(best - expect));
    }
    return {worst <= 1, "worst shift error " + std::to_string(worst) + " bins over 20 pairs (<= 1)"};
}

// ---- 5: triangulation exactness ---------------------------------------------

Outcome triangulation() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(5005);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    double worst_err = 0.0, worst_eps = 0.0;
    int done = 0;
    while (done < 100) {
        const Position target{u(rng), u(rng), 0.0};
        const int n = 2 + done % 5;
        std::vector<AnchorObservation> obs;
        bool ok = true;
        for (int i = 0; i < n; ++i) {
            AnchorObservation o;
            o.position = {u(rng), u(rng), 0.0};
            if (dist2d(o.position, target) < 0.5) ok = false;
            o.bearings_deg = {global_bearing_deg(o.position, target)};
            obs.push_back(o);
        }
        if (n == 2 && std::abs(fold_line_angle_deg(obs[0].bearings_deg[0] - obs[1].bearings_deg[0])) < 5.0) ok = false;
        if (!ok) continue;
        const auto r = triangulate(obs);
        worst_err = std::max(worst_err, dist2d(r.emitters[0].position, target));
        worst_eps = std::max(worst_eps, r.emitters[0].residual);
        ++done;
    }

    // grid search plus pattern refinement of the summed squared line distances
    std::normal_distribution<double> noise(0.0, 0.5);
    double worst_gap = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Position target{u(rng) * 0.4 + 5.0, u(rng) * 0.4 + 5.0, 0.0};
        std::vector<Position> anchors;
        std::vector<double> bearings;
        std::vector<AnchorObservation> obs;
        const int n = 3 + trial % 4;
        for (int i = 0; i < n; ++i) {
            const double a = kTwoPi * i / n + 0.3;
            const Position p{5.0 + 7.0 * std::cos(a), 5.0 + 7.0 * std::sin(a), 0.0};
            anchors.push_back(p);
            bearings.push_back(global_bearing_deg(p, target) + noise(rng));
            obs.push_back({p, {bearings.back()}, {}});
        }
        auto eps = [&](double x, double y) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                const double b = deg_to_rad(bearings[i]);
                const double d = (x - anchors[i].x) * std::cos(b) - (y - anchors[i].y) * std::sin(b);
                s += d * d;
            }
            return s;
        };
        double bx = target.x, by = target.y, best = eps(bx, by);
        for (double x = target.x - 1.5; x <= target.x + 1.5; x += 0.01) {
            for (double y = target.y - 1.5; y <= target.y + 1.5; y += 0.01) {
                const double e = eps(x, y);
                if (e < best) {
                    best = e;
                    bx = x;
                    by = y;
                }
            }
        }
        for (double step = 0.005; step > 1e-7; step *= 0.5) {
            for (bool moved = true; moved;) {
                moved = false;
                for (auto [dx, dy] : {std::pair{step, 0.0}, {-step, 0.0}, {0.0, step}, {0.0, -step}}) {
                    const double e = eps(bx + dx, by + dy);
                    if (e < best) {
                        best = e;
                        bx += dx;
                        by += dy;
                        moved = true;
                    }
                }
            }
        }
        const auto r = triangulate(obs);
        worst_gap = std::max(worst_gap, dist2d(r.emitters[0].position, {bx, by, 0.0}));
    }
    const double t = seconds_since(t0);
    return {worst_err <= 1e-6 && worst_eps <= 1e-10 && worst_gap <= 0.02 && t < 60.0,
            "noiseless max error " + fmt("%.1e", worst_err) + " m (<= 1e-6), max residual " + fmt("%.1e", worst_eps) +
                " (<= 1e-10), oracle gap " + fmt("%.4f", worst_gap) + " m (<= 0.02), " + fmt("%.1f", t) +
                " s (< 60 s)"};
}

// ---- 6 and 7: bearing-noise Monte Carlo -------------------------------------

ScenarioConfig square_field(int trials) {
    ScenarioConfig cfg;
    cfg.mode = ScenarioMode::Bearings;
    cfg.bearing_noise_deg = 0.5;
    cfg.trials = trials;
    cfg.seed = 606;
    cfg.emitter_region = Region{0.0, 10.0, 0.0, 10.0, 0.0};
    for (Position p : {Position{0, 0, 0}, Position{10, 10, 0}, Position{10, 0, 0}, Position{0, 10, 0},
                       Position{5, 5, 0}}) {
        cfg.anchors.push_back({p, std::nullopt});
    }
    EmitterSpec e;
    e.waveform = PhaseWaveform::fmcw(77.5e9, 2e9 / 50e-6, 50e-6);
    cfg.emitters.push_back(e);
    return cfg;
}

Outcome localization_error() {
    const auto t0 = Clock::now();
    const auto r = monte_carlo(square_field(1000), nullptr);
    const double t = seconds_since(t0);
    const auto& le = r.aggregate.localization_error;
    const auto& ae = r.aggregate.angle_error;
    return {le.count == 1000 && le.p90 <= 0.3 && t < 120.0,
            "p90 localization error " + fmt("%.4f", le.p90) + " m (<= 0.3) over " + std::to_string(le.count) +
                " trials, p90 angle error " + fmt("%.3f", ae.p90) + " deg, " + fmt("%.1f", t) + " s (< 120 s)"};
}

Outcome anchor_trend() {
    auto cfg = square_field(1000);
    cfg.sweep = SweepSpec{SweepAxis::Anchors, {2, 3, 4, 5}};
    const auto r = monte_carlo(cfg, nullptr);
    bool pass = r.sweep.size() == 4;
    std::string means;
    double prev = INFINITY;
    for (const auto& row : r.sweep) {
        const double m = row.aggregate.localization_error.mean;
        pass = pass && m <= prev && row.aggregate.failures == 0;
        prev = m;
        means += (means.empty() ? "" : " -> ") + fmt("%.3f", m);
    }
    return {pass, "mean error for 2..5 anchors " + means + " m (non-increasing)"};
}

// ---- 8: height distortion ---------------------------------------------------

Outcome height() {
    bool monotone = true;
    double at_ten = 0.0;
    double worst_oracle = 0.0;
    for (double az = 10.0; az <= 80.0; az += 10.0) {
        double prev = INFINITY;
        for (double r = 1.0; r <= 20.0; r += 0.5) {
            const double a = deg_to_rad(az);
            const Position emitter{r * std::cos(a), r * std::sin(a), 0.0};
            const DevicePose det{{0.0, 0.0, 1.0}, DeviceRole::Detector, 0.0};
            const DevicePose em{emitter, DeviceRole::Emitter, 0.0};
            const auto pair = bearing_with_height(det, em);
            const double err = pair.error_deg();
            // the same angles from the sine of the true and projected directions
            const double dx = -emitter.x, dy = -emitter.y, dz = 1.0;
            const double ideal = rad_to_deg(std::asin(dy / std::hypot(dx, dy)));
            const double distorted = rad_to_deg(std::asin(dy / std::sqrt(dx * dx + dy * dy + dz * dz)));
            worst_oracle = std::max(worst_oracle, std::abs(err - std::abs(ideal - distorted)));
            monotone = monotone && err < prev;
            prev = err;
        }
    }
    {
        const double a = deg_to_rad(45.0);
        const DevicePose det{{0.0, 0.0, 1.0}, DeviceRole::Detector, 0.0};
        const DevicePose em{{10.0 * std::cos(a), 10.0 * std::sin(a), 0.0}, DeviceRole::Emitter, 0.0};
        at_ten = bearing_with_height(det, em).error_deg();
    }
    return {monotone && at_ten <= 0.8 && worst_oracle < 1e-9,
            std::string("error decreasing with distance for azimuths 10..80 deg: ") + (monotone ? "yes" : "no") +
                ", 45 deg at 10 m " + fmt("%.3f", at_ten) + " deg (<= 0.8), oracle mismatch " +
                fmt("%.1e", worst_oracle)};
}

// ---- 9: MUSIC ---------------------------------------------------------------

IfRecord tone_scene(const std::vector<std::pair<double, double>>& sources, double gain, std::uint64_t seed) {
    const double carrier = 78e9;
    ReceivedScene scene;
    scene.noise_power = 1.0;
    std::mt19937_64 rng(seed);
    for (const auto& [aoa, offset] : sources) {
        SceneEmitter e;
        e.waveform = PhaseWaveform::cw(carrier + offset, std::uniform_real_distribution<double>(0, kTwoPi)(rng));
        e.link.path_gain = gain;
        e.link.aoa_deg = aoa;
        e.link.array = ArrayGeometry::for_wavelength(kSpeedOfLight / carrier);
        scene.emitters.push_back(e);
    }
    ReceiverConfig rx;
    rx.frames = 1;
    rx.chirps_per_frame = 32;
    return mix_and_filter(scene, ProbeSignal::tone(carrier), rx, seed);
}

Outcome music() {
    const auto array = ArrayGeometry::for_wavelength(kSpeedOfLight / 78e9);
    int within = 0;
    for (int s = 0; s < 100; ++s) {
        MusicConfig cfg;
        cfg.source_count = 1;
        const auto r = music_spectrum(tone_scene({{30.0, 0.5e6}}, 10.0, 9000 + s), array, cfg);
        within += !r.peaks.empty() && std::abs(r.peaks.front().angle_deg - 30.0) <= 0.5;
    }
    int resolved = 0;
    for (int s = 0; s < 20; ++s) {
        const auto r = music_spectrum(tone_scene({{20.0, 1e6}, {-20.0, -2e6}}, 10.0, 9500 + s), array);
        if (r.peaks.size() < 2) continue;
        std::vector<double> top = {r.peaks[0].angle_deg, r.peaks[1].angle_deg};
        std::sort(top.begin(), top.end());
        resolved += std::abs(top[0] + 20.0) <= 1.0 && std::abs(top[1] - 20.0) <= 1.0;
    }
    return {within >= 95 && resolved == 20,
            "single source within 0.5 deg in " + std::to_string(within) + "/100 (>= 95), +-20 deg pair resolved in " +
                std::to_string(resolved) + "/20"};
}

// ---- 10: multi-device pipeline ----------------------------------------------

Outcome multi_device() {
    const auto t0 = Clock::now();
    const std::vector<PhaseWaveform> radars = {
        PhaseWaveform::cw(77.3e9), PhaseWaveform::fsk(77.8e9, 77.802e9, 80e-6),
        PhaseWaveform::fmcw(77.1e9, 1e9 / 50e-6, 50e-6), PhaseWaveform::pulse(78.2e9, 2e-6, 45e3)};
    int good = 0, total = 0;
    for (std::size_t k = 0; k < radars.size(); ++k) {
        ScenarioConfig cfg;
        cfg.receiver = dataset_receiver();
        cfg.detection.multi_device = true;
        cfg.detection.frames_per_detection = cfg.receiver.frames;
        cfg.trials = 25;
        cfg.seed = 1000 + k;
        cfg.localize = true;
        cfg.emitter_region = Region{2.0, 8.0, 3.0, 9.0, 0.0};
        cfg.anchors = {{{0, 0, 0}, std::nullopt}, {{10, 0, 0}, std::nullopt}, {{5, -3, 0}, std::nullopt}};
        EmitterSpec radar, wigig;
        radar.waveform = radars[k];
        radar.snr_db = 15.0;
        wigig.waveform = PhaseWaveform::ofdm(80.2e9, 40 + k);
        wigig.snr_db = 15.0;
        cfg.emitters = {radar, wigig};
        const auto r = monte_carlo(cfg, &g_model);
        for (const auto& t : r.trials) {
            good += t.error.empty() && t.spy_radar_present && !t.wigig_bearing_used;
            ++total;
        }
    }
    const double coexist = static_cast<double>(good) / total;

    auto two = square_field(200);
    two.detection.multi_device = true;
    two.seed = 1010;
    two.emitters.push_back(two.emitters.front());
    two.emitters.back().waveform = PhaseWaveform::cw(78.9e9);
    const auto r = monte_carlo(two, nullptr);
    int both = 0;
    for (const auto& t : r.trials) {
        both += t.error.empty() && t.localization_errors.size() == 2 && t.localization_errors[0] <= 0.3 &&
                t.localization_errors[1] <= 0.3;
    }
    const double pair_rate = static_cast<double>(both) / r.trials.size();
    const double t = seconds_since(t0);
    return {coexist >= 0.95 && pair_rate >= 0.90,
            "radar+WiGig q=true without WiGig bearing in " + fmt("%.1f", 100 * coexist) + "% of " +
                std::to_string(total) + " (>= 95%), two radars both within 0.3 m in " + fmt("%.1f", 100 * pair_rate) +
                "% of " + std::to_string(r.trials.size()) + " (>= 90%), " + fmt("%.0f", t) + " s"};
}

// ---- 11: CLI determinism ----------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

Outcome determinism(const std::string& cli, const fs::path& workdir) {
    const auto in = workdir / "inputs";
    fs::create_directories(in);

    nlohmann::json det = {
        {"seed", 21},
        {"receiver", {{"frames", 2}, {"chirps_per_frame", 32}}},
        {"detection", {{"multi_device", true}}},
        {"emitters",
         {{{"waveform", {{"kind", "fmcw"}, {"f_start", 77.2e9}, {"bandwidth", 1e9}, {"sweep_period", 50e-6}}},
           {"position", {2, 5}},
           {"snr_db", 15}},
          {{"waveform", {{"kind", "wigig"}, {"center", 80.2e9}}}, {"position", {-1, 4}}, {"snr_db", 15}}}},
        {"anchors", {{{"position", {0, 0}}}, {{"position", {6, 0}}}, {{"position", {-3, 1}}}}}};
    spit(in / "detect.json", det.dump(2));

    nlohmann::json mc = {
        {"seed", 22},
        {"mode", "bearings"},
        {"bearing_noise_deg", 0.5},
        {"trials", 50},
        {"workers", 2},
        {"emitter_region", {{"x", {0, 10}}, {"y", {0, 10}}}},
        {"emitters", {{{"waveform", {{"kind", "cw"}, {"f0", 78e9}}}}}},
        {"anchors",
         {{{"position", {0, 0}}}, {{"position", {10, 10}}}, {{"position", {10, 0}}}, {{"position", {0, 10}}}}},
        {"sweep", {{"axis", "anchors"}, {"values", {2, 3, 4}}}}};
    spit(in / "montecarlo.json", mc.dump(2));

    {
        std::ostringstream os;
        os << "x,y,bearing_deg\n";
        os.precision(17);
        const std::vector<Position> targets = {{3, 4, 0}, {-2, 5, 0}};
        for (Position a : {Position{0, 0, 0}, Position{6, 0, 0}, Position{-5, 1, 0}}) {
            for (const auto& t : targets) os << a.x << "," << a.y << "," << global_bearing_deg(a, t) << "\n";
        }
        spit(in / "bearings.csv", os.str());
    }

    const std::string model = quote(workdir / "model.bin");
    struct Command {
        std::string name;
        std::string args;  // {out} is replaced by the per-run output directory
    };
    const std::vector<Command> commands = {
        {"simulate", "--config " + quote(in / "detect.json") + " --out {out}/if simulate --anchor 1 --probe sweep"},
        {"detect", "--config " + quote(in / "detect.json") + " --out {out}/detect.json detect --model " + model},
        {"localize", "--out {out}/loc.json localize --multi " + quote(in / "bearings.csv")},
        {"dataset", "--seed 8 --out {out}/ds.bin dataset --per-class 8"},
        {"train", "--out {out}/model.bin train --dataset " + quote(in / "ds.bin") + " --epochs 2 --curve {out}/curve.csv"},
        {"classify", "--out {out}/classify.json classify --model " + model + " --dataset " + quote(in / "ds.bin")},
        {"montecarlo", "--config " + quote(in / "montecarlo.json") + " --out {out}/mc.json montecarlo"},
        {"report", "--format csv --out {out}/report.csv report " + quote(in / "mc.json")},
    };

    std::string failed;
    for (const auto& c : commands) {
        std::vector<std::string> snapshots;
        int first_status = -1;
        for (int run = 0; run < 2; ++run) {
            const auto out = workdir / "cli" / (c.name + "-" + std::to_string(run));
            fs::remove_all(out);
            fs::create_directories(out);
            std::string args = c.args;
            for (auto pos = args.find("{out}"); pos != std::string::npos; pos = args.find("{out}"))
                args.replace(pos, 5, quote(out));
            const std::string cmd = quote(cli) + " " + args + " > " + quote(out / "stdout") + " 2> " +
                                    quote(workdir / "cli" / (c.name + ".stderr"));
            const int status = std::system(cmd.c_str());
            if (run == 0) first_status = status;
            else if (status != first_status) failed += " " + c.name + "(status)";
            std::string snap;
            std::vector<fs::path> files;
            for (const auto& f : fs::directory_iterator(out)) files.push_back(f.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) snap += f.filename().string() + "\n" + slurp(f) + "\n";
            snapshots.push_back(snap);
            if (run == 0) {
                const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
                if (code != 0 && code != 10) failed += " " + c.name + "(exit " + std::to_string(code) + ")";
                // later commands read these
                if (c.name == "dataset") fs::copy_file(out / "ds.bin", in / "ds.bin", fs::copy_options::overwrite_existing);
                if (c.name == "montecarlo") fs::copy_file(out / "mc.json", in / "mc.json", fs::copy_options::overwrite_existing);
            }
        }
        if (snapshots[0] != snapshots[1]) failed += " " + c.name;
    }
    return {failed.empty(), failed.empty() ? std::to_string(commands.size()) + " commands byte-identical across two runs"
                                           : "differing or failing:" + failed};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"radar2 acceptance run"};
    std::string cli, workdir = "acceptance_work";
    std::vector<int> only;
    app.add_option("--cli", cli, "Path to the radar2 executable")->required();
    app.add_option("--workdir", workdir, "Scratch directory");
    app.add_option("--only", only, "Run only these criteria (3 still runs when 2, 10 or 11 need the model)");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(workdir);

    auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };
    const bool need_model = wanted(2) || wanted(3) || wanted(10) || wanted(11);

    struct Entry {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Entry> entries = {
        {1, "frequency gating", frequency_gating},
        {3, "classifier", [&] { return classifier(workdir); }},
        {2, "end-to-end detection", detection},
        {4, "spectrum shift covariance", shift_covariance},
        {5, "triangulation exactness", triangulation},
        {6, "localization error", localization_error},
        {7, "anchor-count trend", anchor_trend},
        {8, "height distortion", height},
        {9, "MUSIC accuracy", music},
        {10, "multi-device pipeline", multi_device},
        {11, "CLI determinism", [&] { return determinism(cli, workdir); }},
    };
    std::vector<std::pair<int, std::string>> lines;
    bool all = true;
    for (const auto& e : entries) {
        if (!wanted(e.id) && !(e.id == 3 && need_model)) continue;
        Outcome o;
        try {
            o = e.run();
        } catch (const std::exception& ex) {
            o = {false, std::string("threw: ") + ex.what()};
        }
        all = all && o.pass;
        char head[80];
        std::snprintf(head, sizeof head, "criterion %2d %s  %-26s ", e.id, o.pass ? "PASS" : "FAIL", e.name);
        std::cout << head << o.detail << std::endl;
        lines.emplace_back(e.id, head + o.detail);
    }
    std::sort(lines.begin(), lines.end());
    std::cout << "\nsummary\n";
    for (const auto& [id, line] : lines) std::cout << line << "\n";
    return all ? 0 : 1;
}
