#include "radar2/frontend.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace radar2 {

namespace {

static_assert(std::endian::native == std::endian::little,
              "IF dumps are written as little-endian floats");

// Emitter clocks run ahead of the detector clock by this much so that
// waveform time never goes negative once propagation delay is subtracted.
constexpr double kSceneEpoch = 1e-3;

constexpr long double kTwoPiL = 6.283185307179586476925286766559L;

double wrap_phase(long double phase) {
    long double r = std::fmod(phase, kTwoPiL);
    return static_cast<double>(r);
}

void add_steered(std::complex<float>* out, int antennas, std::complex<double> base, double step) {
    const std::complex<double> rot = std::polar(1.0, step);
    std::complex<double> v = base;
    for (int k = 0; k < antennas; ++k) {
        out[k] += std::complex<float>(static_cast<float>(v.real()), static_cast<float>(v.imag()));
        v *= rot;
    }
}

double steering_step(const ChannelLink& link, double frequency) {
    return link.array.phase_step(link.aoa_deg, kSpeedOfLight / frequency);
}

void mix_phase_emitter(const SceneEmitter& e, const ProbeSignal& probe, const ReceiverConfig& cfg,
                       double chirp_start, IfRecord& rec, int frame, int chirp) {
    const double gate = cfg.gate_frequency();
    const double scale = e.link.path_gain * e.waveform.amplitude * probe.amplitude;
    for (int s = 0; s < rec.samples; ++s) {
        const double tc = cfg.sample_time(s);
        const double te = chirp_start + tc + kSceneEpoch + e.clock_offset - e.link.delay;
        const double env = envelope(e.waveform, te);
        if (env == 0.0) continue;
        const double f_rx = instantaneous_frequency(e.waveform, te);
        const double df = f_rx - probe.frequency_at(tc);
        if (std::abs(df) > gate) continue;
        const double gain = scale * env * lowpass_gain(cfg, std::abs(df));
        const double phase = wrap_phase(instantaneous_phase(e.waveform, te) - probe.phase_at(tc));
        add_steered(&rec.at(frame, chirp, s, 0), rec.antennas, std::polar(gain, phase),
                    steering_step(e.link, f_rx));
    }
}

void mix_ofdm_emitter(const SceneEmitter& e, const OfdmParams& p, const ProbeSignal& probe,
                      const ReceiverConfig& cfg, double chirp_start, IfRecord& rec, int frame,
                      int chirp) {
    if (p.active_subcarriers == 0) return;
    const double gate = cfg.gate_frequency();
    const double scale = e.link.path_gain * e.waveform.amplitude * probe.amplitude /
                         std::sqrt(static_cast<double>(p.active_subcarriers));
    const double centre_index = 0.5 * (p.active_subcarriers - 1);
    const double te0 = chirp_start + kSceneEpoch + e.clock_offset - e.link.delay;
    const double f0 = probe.start_frequency;
    std::vector<std::complex<double>> steer(rec.antennas);

    // Phase relative to the probe, in cycles:
    //   frac(f_sc * te0) + (f_sc - f0) * tc - slope * tc^2 / 2 - probe.phase / 2pi
    // so that only the first term needs extended precision.
    auto start_cycles = [&](double f_sc) {
        const long double c = static_cast<long double>(f_sc) * te0;
        return static_cast<double>(c - std::floor(c)) - probe.phase / kTwoPi;
    };
    auto fill_steering = [&](double f_sc) {
        const std::complex<double> rot = std::polar(1.0, steering_step(e.link, f_sc));
        std::complex<double> v{1.0, 0.0};
        for (int a = 0; a < rec.antennas; ++a) {
            steer[a] = v;
            v *= rot;
        }
    };
    auto accumulate = [&](int s, std::complex<double> v) {
        std::complex<float>* out = &rec.at(frame, chirp, s, 0);
        for (int a = 0; a < rec.antennas; ++a) {
            const auto w = v * steer[a];
            out[a] += std::complex<float>(static_cast<float>(w.real()), static_cast<float>(w.imag()));
        }
    };
    auto subcarrier_range = [&](double fp) {
        const int lo = std::max(
            0, static_cast<int>(std::ceil((fp - gate - p.center) / p.spacing + centre_index)));
        const int hi = std::min(
            p.active_subcarriers - 1,
            static_cast<int>(std::floor((fp + gate - p.center) / p.spacing + centre_index)));
        return std::pair{lo, hi};
    };

    if (!probe.is_sweep()) {
        // Constant offset per subcarrier: rotate a phasor sample to sample.
        const auto [k_lo, k_hi] = subcarrier_range(f0);
        for (int k = k_lo; k <= k_hi; ++k) {
            const double f_sc = p.center + ofdm_subcarrier_offset(p, k);
            const double df = f_sc - f0;
            if (std::abs(df) > gate) continue;
            fill_steering(f_sc);
            const double gain = scale * lowpass_gain(cfg, std::abs(df));
            std::complex<double> phasor = std::polar(gain, kTwoPi * start_cycles(f_sc));
            const std::complex<double> rot = std::polar(1.0, kTwoPi * df / cfg.adc_rate);
            for (int s = 0; s < rec.samples; ++s) {
                const double te = te0 + cfg.sample_time(s);
                const auto m = static_cast<std::int64_t>(std::floor(te / p.symbol_duration));
                accumulate(s, ofdm_symbol(p, k, m) * phasor);
                phasor *= rot;
            }
        }
        return;
    }

    for (int s = 0; s < rec.samples; ++s) {
        const double tc = cfg.sample_time(s);
        const double fp = probe.frequency_at(tc);
        const auto [k_lo, k_hi] = subcarrier_range(fp);
        if (k_lo > k_hi) continue;
        const auto m = static_cast<std::int64_t>(std::floor((te0 + tc) / p.symbol_duration));
        for (int k = k_lo; k <= k_hi; ++k) {
            const double f_sc = p.center + ofdm_subcarrier_offset(p, k);
            const double df = f_sc - fp;
            if (std::abs(df) > gate) continue;
            const double gain = scale * lowpass_gain(cfg, std::abs(df));
            const double cycles =
                start_cycles(f_sc) + (f_sc - f0) * tc - 0.5 * probe.slope * tc * tc;
            fill_steering(f_sc);
            accumulate(s, ofdm_symbol(p, k, m) *
                              std::polar(gain, kTwoPi * (cycles - std::floor(cycles))));
        }
    }
}

// Cheap rejection of emitters that cannot enter the gate during a chirp.
bool may_overlap(const SceneEmitter& e, const ProbeSignal& probe, const ReceiverConfig& cfg) {
    const auto [lo, hi] = e.waveform.frequency_span();
    const double t_end = cfg.sample_time(cfg.adc_samples - 1);
    const double p0 = probe.frequency_at(0.0);
    const double p1 = probe.frequency_at(t_end);
    const double gate = cfg.gate_frequency();
    return !(hi + gate < std::min(p0, p1) || lo - gate > std::max(p0, p1));
}

nlohmann::json probe_to_json(const ProbeSignal& p) {
    return {{"kind", p.is_sweep() ? "sweep" : "tone"},
            {"start_frequency", p.start_frequency},
            {"slope", p.slope},
            {"amplitude", p.amplitude},
            {"phase", p.phase}};
}

}  // namespace

void ReceiverConfig::validate() const {
    std::vector<std::string> issues;
    if (!(adc_rate > 0.0)) issues.push_back("adc_rate must be > 0");
    if (adc_samples < 1) issues.push_back("adc_samples must be >= 1");
    if (chirps_per_frame < 1) issues.push_back("chirps_per_frame must be >= 1");
    if (frames < 1) issues.push_back("frames must be >= 1");
    if (!(sweep_time > 0.0)) issues.push_back("sweep_time must be > 0");
    if (!(idle_time >= 0.0)) issues.push_back("idle_time must be >= 0");
    if (!(cutoff > 0.0)) issues.push_back("cutoff must be > 0");
    if (filter_order < 1) issues.push_back("filter_order must be >= 1");
    if (oversample < 1) issues.push_back("oversample must be >= 1");
    if (adc_rate > 0.0 && cutoff > 0.5 * adc_rate) {
        std::ostringstream os;
        os << "cutoff (" << cutoff << " Hz) must not exceed half the ADC sampling rate ("
           << 0.5 * adc_rate << " Hz)";
        issues.push_back(os.str());
    }
    if (adc_rate > 0.0 && adc_samples / adc_rate > sweep_time * (1.0 + 1e-12)) {
        issues.push_back("adc_samples / adc_rate must not exceed sweep_time");
    }
    if (chirps_per_frame * (idle_time + sweep_time) > frame_period * (1.0 + 1e-12)) {
        issues.push_back("chirps_per_frame * (idle_time + sweep_time) must fit in frame_period");
    }
    if (!issues.empty()) {
        std::string msg = "invalid receiver configuration:";
        for (const auto& s : issues) msg += "\n  - " + s;
        throw ConfigError(msg);
    }
}

double ReceiverConfig::chirp_start(int frame, int chirp) const {
    return frame * frame_period + chirp * (idle_time + sweep_time) + idle_time;
}

double lowpass_gain(const ReceiverConfig& cfg, double frequency) {
    const double ratio = std::abs(frequency) / cfg.cutoff;
    return 1.0 / std::sqrt(1.0 + std::pow(ratio, 2.0 * cfg.filter_order));
}

ProbeSignal ProbeSignal::sweep(double start_frequency, double slope, double amplitude) {
    if (!(start_frequency > 0.0) || !(slope > 0.0)) {
        throw ConfigError("sweep probe needs positive start frequency and slope");
    }
    return ProbeSignal{Kind::Sweep, start_frequency, slope, amplitude, 0.0};
}

ProbeSignal ProbeSignal::tone(double frequency, double amplitude) {
    if (!(frequency > 0.0)) throw ConfigError("tone probe needs a positive frequency");
    return ProbeSignal{Kind::SingleTone, frequency, 0.0, amplitude, 0.0};
}

double ProbeSignal::frequency_at(double t_in_chirp) const {
    return is_sweep() ? start_frequency + slope * t_in_chirp : start_frequency;
}

long double ProbeSignal::phase_at(double t_in_chirp) const {
    const long double t = t_in_chirp;
    if (is_sweep()) {
        return kTwoPiL * (start_frequency * t + 0.5L * slope * t * t) + phase;
    }
    return kTwoPiL * start_frequency * t + phase;
}

std::string ProbeSignal::describe() const {
    std::ostringstream os;
    os.precision(12);
    if (is_sweep()) {
        os << "sweep f0=" << start_frequency << " Hz slope=" << slope << " Hz/s";
    } else {
        os << "tone f=" << start_frequency << " Hz";
    }
    return os.str();
}

IfRecord::IfRecord(const ReceiverConfig& cfg, const ProbeSignal& p, int antenna_count)
    : config(cfg),
      probe(p),
      frames(cfg.frames),
      chirps(cfg.chirps_per_frame),
      samples(cfg.adc_samples),
      antennas(antenna_count),
      data(cfg.samples_per_window() * static_cast<std::size_t>(antenna_count)) {}

IfRecord mix_and_filter(const ReceivedScene& scene, const ProbeSignal& probe,
                        const ReceiverConfig& cfg, std::uint64_t noise_seed) {
    cfg.validate();
    int antennas = scene.antennas;
    for (const auto& e : scene.emitters) {
        e.waveform.validate();
        antennas = e.link.array.elements;
    }
    for (const auto& e : scene.emitters) {
        if (e.link.array.elements != antennas) {
            throw ConfigError("all emitter links must share the detector array");
        }
    }
    if (antennas < 1) throw ConfigError("detector needs at least one antenna");

    IfRecord rec(cfg, probe, antennas);
    for (int f = 0; f < rec.frames; ++f) {
        for (int c = 0; c < rec.chirps; ++c) {
            const double start = cfg.chirp_start(f, c);
            for (const auto& e : scene.emitters) {
                if (!may_overlap(e, probe, cfg)) continue;
                if (const auto* ofdm = std::get_if<OfdmParams>(&e.waveform.params)) {
                    mix_ofdm_emitter(e, *ofdm, probe, cfg, start, rec, f, c);
                } else {
                    mix_phase_emitter(e, probe, cfg, start, rec, f, c);
                }
            }
        }
        NoiseSource noise(scene.noise_power, derive_seed(noise_seed, static_cast<std::uint64_t>(f)));
        const std::size_t frame_len =
            static_cast<std::size_t>(rec.chirps) * rec.samples * rec.antennas;
        noise.add_to(std::span(rec.data).subspan(f * frame_len, frame_len));
    }
    return rec;
}

std::vector<double> if_power_series(const IfRecord& rec) {
    const std::size_t n = rec.snapshot_count();
    std::vector<double> power(n, 0.0);
    if (rec.antennas == 0) return power;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (const auto& v : rec.snapshot(i)) acc += std::norm(std::complex<double>(v));
        power[i] = acc / rec.antennas;
    }
    return power;
}

void write_if_record(const IfRecord& rec, const std::string& base_path) {
    std::ofstream bin(base_path + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open " + base_path + ".bin for writing");
    bin.write(reinterpret_cast<const char*>(rec.data.data()),
              static_cast<std::streamsize>(rec.data.size() * sizeof(std::complex<float>)));

    const auto& c = rec.config;
    nlohmann::json meta = {
        {"format", "radar2-if/1"},
        {"layout", "frame,chirp,sample,antenna"},
        {"sample_type", "complex64-le"},
        {"frames", rec.frames},
        {"chirps", rec.chirps},
        {"samples", rec.samples},
        {"antennas", rec.antennas},
        {"adc_rate", c.adc_rate},
        {"probe", probe_to_json(rec.probe)},
        {"receiver",
         {{"adc_rate", c.adc_rate},
          {"adc_samples", c.adc_samples},
          {"sweep_time", c.sweep_time},
          {"idle_time", c.idle_time},
          {"chirps_per_frame", c.chirps_per_frame},
          {"frame_period", c.frame_period},
          {"frames", c.frames},
          {"cutoff", c.cutoff},
          {"filter_order", c.filter_order},
          {"oversample", c.oversample}}},
    };
    std::ofstream js(base_path + ".json");
    if (!js) throw std::runtime_error("cannot open " + base_path + ".json for writing");
    js << meta.dump(2) << '\n';
    if (!bin || !js) throw std::runtime_error("failed writing IF record " + base_path);
}

IfRecord read_if_record(const std::string& base_path) {
    std::ifstream js(base_path + ".json");
    if (!js) throw std::runtime_error("cannot open " + base_path + ".json");
    const auto meta = nlohmann::json::parse(js);
    if (meta.value("format", "") != "radar2-if/1") {
        throw std::runtime_error(base_path + ".json is not a radar2-if/1 sidecar");
    }
    ReceiverConfig cfg;
    const auto& r = meta.at("receiver");
    cfg.adc_rate = r.at("adc_rate");
    cfg.adc_samples = r.at("adc_samples");
    cfg.sweep_time = r.at("sweep_time");
    cfg.idle_time = r.at("idle_time");
    cfg.chirps_per_frame = r.at("chirps_per_frame");
    cfg.frame_period = r.at("frame_period");
    cfg.frames = r.at("frames");
    cfg.cutoff = r.at("cutoff");
    cfg.filter_order = r.at("filter_order");
    cfg.oversample = r.at("oversample");

    const auto& p = meta.at("probe");
    ProbeSignal probe;
    probe.kind = p.at("kind") == "sweep" ? ProbeSignal::Kind::Sweep : ProbeSignal::Kind::SingleTone;
    probe.start_frequency = p.at("start_frequency");
    probe.slope = p.at("slope");
    probe.amplitude = p.at("amplitude");
    probe.phase = p.at("phase");

    IfRecord rec(cfg, probe, meta.at("antennas").get<int>());
    if (rec.frames != meta.at("frames") || rec.chirps != meta.at("chirps") ||
        rec.samples != meta.at("samples")) {
        throw std::runtime_error(base_path + ".json dimensions disagree with its receiver block");
    }
    std::ifstream bin(base_path + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open " + base_path + ".bin");
    bin.read(reinterpret_cast<char*>(rec.data.data()),
             static_cast<std::streamsize>(rec.data.size() * sizeof(std::complex<float>)));
    if (bin.gcount() != static_cast<std::streamsize>(rec.data.size() * sizeof(std::complex<float>))) {
        throw std::runtime_error(base_path + ".bin is shorter than its sidecar declares");
    }
    return rec;
}

void write_power_csv(std::ostream& os, const IfRecord& rec, std::span<const double> power) {
    os << "index,frame,chirp,sample,t_in_chirp_s,power\n";
    os.precision(10);
    for (std::size_t i = 0; i < power.size(); ++i) {
        const int sample = static_cast<int>(i % rec.samples);
        const int chirp = static_cast<int>((i / rec.samples) % rec.chirps);
        const int frame = static_cast<int>(i / (static_cast<std::size_t>(rec.samples) * rec.chirps));
        os << i << ',' << frame << ',' << chirp << ',' << sample << ','
           << rec.config.sample_time(sample) << ',' << power[i] << '\n';
    }
}

}  // namespace radar2
