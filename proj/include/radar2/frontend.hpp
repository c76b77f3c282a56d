#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "radar2/channel.hpp"
#include "radar2/waveforms.hpp"

namespace radar2 {

/// Detector receive-chain timing and filter settings. Defaults follow the
/// detector parameter table: 100 us sweep, 10 us idle, 12 Msps, 1024 samples,
/// 33.3 ms frames of 128 chirps, 25 frames per detection.
struct ReceiverConfig {
    double adc_rate = 12e6;
    int adc_samples = 1024;
    double sweep_time = 100e-6;
    double idle_time = 10e-6;
    int chirps_per_frame = 128;
    double frame_period = 33.3e-3;
    int frames = 25;
    double cutoff = 6e6;
    int filter_order = 4;
    int oversample = 8;

    /// Throws ConfigError listing every violated constraint.
    void validate() const;

    double chirp_start(int frame, int chirp) const;
    double sample_time(int sample) const { return sample / adc_rate; }
    double gate_frequency() const { return 0.5 * oversample * adc_rate; }
    std::size_t samples_per_window() const {
        return static_cast<std::size_t>(frames) * chirps_per_frame * adc_samples;
    }
};

/// Butterworth magnitude response |H(f)| of the IF low-pass filter.
double lowpass_gain(const ReceiverConfig& cfg, double frequency);

/// Locally generated signal the received RF is conjugate-mixed against.
struct ProbeSignal {
    enum class Kind { Sweep, SingleTone };

    Kind kind = Kind::Sweep;
    double start_frequency = 0.0;  // sweep start, or the tone frequency
    double slope = 0.0;            // Hz/s, sweep only
    double amplitude = 1.0;
    double phase = 0.0;

    static ProbeSignal sweep(double start_frequency, double slope, double amplitude = 1.0);
    static ProbeSignal tone(double frequency, double amplitude = 1.0);

    bool is_sweep() const { return kind == Kind::Sweep; }
    double frequency_at(double t_in_chirp) const;
    long double phase_at(double t_in_chirp) const;
    std::string describe() const;
};

/// One emitter as seen by a detector: transmit model, link, and clock offset.
struct SceneEmitter {
    PhaseWaveform waveform;
    ChannelLink link;
    double clock_offset = 0.0;  // s, emitter clock minus detector clock, >= 0
};

struct ReceivedScene {
    std::vector<SceneEmitter> emitters;
    double noise_power = 0.0;
    int antennas = 4;
};

/// Framed complex IF samples laid out [frame][chirp][sample][antenna].
struct IfRecord {
    ReceiverConfig config;
    ProbeSignal probe;
    int frames = 0;
    int chirps = 0;
    int samples = 0;
    int antennas = 0;
    std::vector<std::complex<float>> data;

    IfRecord() = default;
    IfRecord(const ReceiverConfig& cfg, const ProbeSignal& p, int antenna_count);

    std::size_t index(int frame, int chirp, int sample, int antenna) const {
        return ((static_cast<std::size_t>(frame) * chirps + chirp) * samples + sample) *
                   antennas + antenna;
    }
    std::complex<float>& at(int frame, int chirp, int sample, int antenna) {
        return data[index(frame, chirp, sample, antenna)];
    }
    const std::complex<float>& at(int frame, int chirp, int sample, int antenna) const {
        return data[index(frame, chirp, sample, antenna)];
    }
    std::size_t snapshot_count() const {
        return static_cast<std::size_t>(frames) * chirps * samples;
    }
    /// Antenna vector of flattened snapshot `n`.
    std::span<const std::complex<float>> snapshot(std::size_t n) const {
        return {data.data() + n * antennas, static_cast<std::size_t>(antennas)};
    }
};

/// Conjugate mixing, quasi-static low-pass shaping, and ADC sampling of all
/// emitters in `scene` against `probe`, plus receiver noise drawn from
/// `noise_seed` (one substream per frame).
IfRecord mix_and_filter(const ReceivedScene& scene, const ProbeSignal& probe,
                        const ReceiverConfig& cfg, std::uint64_t noise_seed);

/// |sample|^2 averaged across antennas, flattened in time order.
std::vector<double> if_power_series(const IfRecord& rec);

/// Writes `<base>.bin` (interleaved little-endian float32 re/im) and
/// `<base>.json` (dimensions, sample rate, probe description).
void write_if_record(const IfRecord& rec, const std::string& base_path);
IfRecord read_if_record(const std::string& base_path);

void write_power_csv(std::ostream& os, const IfRecord& rec, std::span<const double> power);

}  // namespace radar2
