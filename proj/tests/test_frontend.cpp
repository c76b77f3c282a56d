#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "radar2/common.hpp"
#include "radar2/frontend.hpp"

using namespace radar2;

namespace {

ReceiverConfig small_rx(int frames = 1, int chirps = 2) {
    ReceiverConfig rx;
    rx.frames = frames;
    rx.chirps_per_frame = chirps;
    return rx;
}

SceneEmitter emitter(const PhaseWaveform& w, double gain = 1.0, double aoa = 0.0) {
    SceneEmitter e;
    e.waveform = w;
    e.link.path_gain = gain;
    e.link.aoa_deg = aoa;
    e.link.array = ArrayGeometry::for_wavelength(kSpeedOfLight / 79e9);
    return e;
}

std::vector<double> chirp_power(const IfRecord& rec, int frame, int chirp) {
    std::vector<double> p(rec.samples);
    for (int s = 0; s < rec.samples; ++s) {
        double acc = 0.0;
        for (int a = 0; a < rec.antennas; ++a) acc += std::norm(std::complex<double>(rec.at(frame, chirp, s, a)));
        p[s] = acc / rec.antennas;
    }
    return p;
}

}  // namespace

TEST_CASE("receiver config defaults and invariants") {
    ReceiverConfig rx;
    CHECK(rx.sweep_time == 100e-6);
    CHECK(rx.idle_time == 10e-6);
    CHECK(rx.adc_rate == 12e6);
    CHECK(rx.adc_samples == 1024);
    CHECK(rx.chirps_per_frame == 128);
    CHECK(rx.frame_period == doctest::Approx(33.3e-3));
    CHECK(rx.frames == 25);
    CHECK_NOTHROW(rx.validate());

    auto bad = rx;
    bad.cutoff = 7e6;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = rx;
    bad.adc_samples = 2048;  // 170 us of samples in a 100 us sweep
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("low-pass response") {
    ReceiverConfig rx;
    CHECK(lowpass_gain(rx, 0.0) == doctest::Approx(1.0));
    CHECK(lowpass_gain(rx, rx.cutoff) * lowpass_gain(rx, rx.cutoff) == doctest::Approx(0.5));
    double prev = 1.0;
    for (double f = 0.0; f < 60e6; f += 0.25e6) {
        const double g = lowpass_gain(rx, f);
        CHECK(g <= prev);
        prev = g;
    }
}

TEST_CASE("cw through a sweep gives a time-domain peak") {
    const auto rx = small_rx();
    const double slope = 39.9756e12, f_rx = 77.5e9;
    ReceivedScene scene;
    scene.emitters.push_back(emitter(PhaseWaveform::cw(f_rx)));
    const auto rec = mix_and_filter(scene, ProbeSignal::sweep(77e9, slope), rx, 1);
    const auto p = chirp_power(rec, 0, 1);
    const auto peak = std::max_element(p.begin(), p.end()) - p.begin();
    const double t_expect = (f_rx - 77e9) / slope;
    CHECK(t_expect == doctest::Approx(12.51e-6).epsilon(1e-3));
    CHECK(std::abs(peak - t_expect * rx.adc_rate) <= 2.0);

    // half-power width from interpolated crossings
    const double half = 0.5 * p[peak];
    auto crossing = [&](int dir) {
        int i = static_cast<int>(peak);
        while (p[i + dir] >= half) i += dir;
        const double frac = (p[i] - half) / (p[i] - p[i + dir]);
        return i + dir * frac;
    };
    const double half_width = 0.5 * (crossing(1) - crossing(-1)) / rx.adc_rate;
    CHECK(half_width == doctest::Approx(rx.cutoff / slope).epsilon(0.25));

    // outside the window the IF is at least 40 dB down
    const double guard = 4.0 * rx.cutoff / slope * rx.adc_rate;
    for (int s = 0; s < rec.samples; ++s) {
        if (std::abs(s - t_expect * rx.adc_rate) > guard) CHECK(p[s] <= 1e-4 * p[peak]);
    }
}

TEST_CASE("empty scene without noise is all zero") {
    ReceivedScene scene;
    const auto rec = mix_and_filter(scene, ProbeSignal::sweep(77e9, 39.9756e12), small_rx(), 3);
    CHECK(rec.data.size() == rec.snapshot_count() * 4);
    CHECK(std::all_of(rec.data.begin(), rec.data.end(), [](auto z) { return z == std::complex<float>(0, 0); }));
    const auto power = if_power_series(rec);
    CHECK(std::all_of(power.begin(), power.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("out-of-band emitter stays at the noise floor") {
    const auto rx = small_rx(1, 8);
    const auto sweep = ProbeSignal::sweep(77e9, 4e9 / 100e-6);
    ReceivedScene noise_only;
    noise_only.noise_power = 1.0;
    ReceivedScene scene = noise_only;
    scene.emitters.push_back(emitter(PhaseWaveform::cw(82e9), std::sqrt(1e4)));
    const auto a = mix_and_filter(noise_only, sweep, rx, 17);
    const auto b = mix_and_filter(scene, sweep, rx, 17);
    for (int c = 0; c < rx.chirps_per_frame; ++c) {
        const auto pa = chirp_power(a, 0, c), pb = chirp_power(b, 0, c);
        const double ma = std::accumulate(pa.begin(), pa.end(), 0.0);
        const double mb = std::accumulate(pb.begin(), pb.end(), 0.0);
        CHECK(std::abs(10.0 * std::log10(mb / ma)) < 3.0);
    }
}

TEST_CASE("far off-tune emitter is suppressed by 40 dB") {
    const auto rx = small_rx();
    const auto tone = ProbeSignal::tone(78e9);
    ReceivedScene in, out;
    in.emitters.push_back(emitter(PhaseWaveform::cw(78e9 + 1e6)));
    out.emitters.push_back(emitter(PhaseWaveform::cw(78e9 + 10.0 * rx.cutoff)));
    const auto pi = if_power_series(mix_and_filter(in, tone, rx, 1));
    const auto po = if_power_series(mix_and_filter(out, tone, rx, 1));
    const double mi = std::accumulate(pi.begin(), pi.end(), 0.0);
    const double mo = std::accumulate(po.begin(), po.end(), 0.0);
    CHECK(mo <= 1e-4 * mi);
}

TEST_CASE("mixing is linear in the emitters") {
    const auto rx = small_rx();
    const auto sweep = ProbeSignal::sweep(77e9, 39.9756e12);
    const auto ea = emitter(PhaseWaveform::cw(77.3e9, 0.4), 1.0, 12.0);
    auto eb = emitter(PhaseWaveform::fmcw(77.2e9, 2e9 / 50e-6, 50e-6, 1.3), 0.7, -25.0);
    eb.clock_offset = 3.7e-6;
    ReceivedScene a, b, ab;
    a.emitters = {ea};
    b.emitters = {eb};
    ab.emitters = {ea, eb};
    const auto ra = mix_and_filter(a, sweep, rx, 1);
    const auto rb = mix_and_filter(b, sweep, rx, 1);
    const auto rab = mix_and_filter(ab, sweep, rx, 1);
    double worst = 0.0;
    for (std::size_t i = 0; i < rab.data.size(); ++i) {
        worst = std::max(worst, std::abs(std::complex<double>(rab.data[i]) - std::complex<double>(ra.data[i]) -
                                         std::complex<double>(rb.data[i])));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("broadside noiseless emitter is identical on every antenna") {
    ReceivedScene scene;
    scene.emitters.push_back(emitter(PhaseWaveform::cw(77.3e9)));
    const auto rec = mix_and_filter(scene, ProbeSignal::sweep(77e9, 39.9756e12), small_rx(), 1);
    for (std::size_t n = 0; n < rec.snapshot_count(); ++n) {
        const auto s = rec.snapshot(n);
        for (int a = 1; a < rec.antennas; ++a) REQUIRE(s[a] == s[0]);
    }
}

TEST_CASE("power series") {
    IfRecord rec(small_rx(1, 1), ProbeSignal::tone(78e9), 4);
    const auto zero = if_power_series(rec);
    CHECK(zero.size() == 1024);
    for (int a = 0; a < 4; ++a) rec.at(0, 0, 100, a) = {1.0f, 0.0f};
    const auto p = if_power_series(rec);
    CHECK(*std::max_element(p.begin(), p.end()) == 1.0);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) / p.size() == doctest::Approx(1.0 / 1024));

    ReceivedScene noise;
    noise.noise_power = 2.5;
    const auto rn = if_power_series(mix_and_filter(noise, ProbeSignal::tone(78e9), small_rx(1, 256), 5));
    REQUIRE(rn.size() >= 250000);
    // 4 antennas per entry, so >= 1e6 complex samples
    CHECK(std::accumulate(rn.begin(), rn.end(), 0.0) / rn.size() == doctest::Approx(2.5).epsilon(0.01));
}

TEST_CASE("noise is seeded per frame") {
    ReceivedScene noise;
    noise.noise_power = 1.0;
    const auto tone = ProbeSignal::tone(78e9);
    const auto a = mix_and_filter(noise, tone, small_rx(2, 4), 8);
    const auto b = mix_and_filter(noise, tone, small_rx(2, 4), 8);
    const auto c = mix_and_filter(noise, tone, small_rx(2, 4), 9);
    CHECK(a.data == b.data);
    CHECK(a.data != c.data);
    // the first frame does not depend on how many frames follow
    const auto one = mix_and_filter(noise, tone, small_rx(1, 4), 8);
    CHECK(std::equal(one.data.begin(), one.data.end(), a.data.begin()));
}

TEST_CASE("if record round trip and csv export") {
    ReceivedScene scene;
    scene.noise_power = 0.1;
    scene.emitters.push_back(emitter(PhaseWaveform::cw(78.001e9), 1.0, 10.0));
    const auto rec = mix_and_filter(scene, ProbeSignal::tone(78e9), small_rx(1, 3), 2);
    const auto dir = std::filesystem::temp_directory_path() / "radar2_frontend_test";
    std::filesystem::create_directories(dir);
    const auto base = (dir / "rec").string();
    write_if_record(rec, base);
    const auto back = read_if_record(base);
    CHECK(back.frames == rec.frames);
    CHECK(back.chirps == rec.chirps);
    CHECK(back.samples == rec.samples);
    CHECK(back.antennas == rec.antennas);
    CHECK(back.config.adc_rate == rec.config.adc_rate);
    CHECK(back.probe.start_frequency == rec.probe.start_frequency);
    CHECK(!back.probe.is_sweep());
    CHECK(back.data == rec.data);
    CHECK(std::filesystem::file_size(base + ".bin") == rec.data.size() * 8);

    std::ostringstream os;
    const auto p = if_power_series(rec);
    write_power_csv(os, rec, p);
    const auto text = os.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(p.size()) + 1);
    std::filesystem::remove_all(dir);
}
