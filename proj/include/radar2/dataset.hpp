#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radar2/frontend.hpp"
#include "radar2/spectrum.hpp"
#include "radar2/waveforms.hpp"

namespace radar2 {

SignalClass class_of(WaveformKind kind);

/// Capture used per feature: 2 frames of 32 chirps, so each spectrum
/// averages 64 chirps.
inline ReceiverConfig dataset_receiver() {
    ReceiverConfig rx;
    rx.frames = 2;
    rx.chirps_per_frame = 32;
    return rx;
}

struct DatasetSpec {
    ReceiverConfig receiver = dataset_receiver();
    std::vector<WaveformKind> templates = {WaveformKind::CW, WaveformKind::FSK,
                                           WaveformKind::FMCW, WaveformKind::Pulse,
                                           WaveformKind::WiGigOFDM};
    int per_class = 400;
    double snr_min_db = 5.0;
    double snr_max_db = 25.0;
    // Keep the total at per_class * templates but split it evenly between the
    // two binary labels, drawing extra WiGig examples as needed.
    bool balance_binary = false;
    double validation_fraction = 0.2;
    double probe_frequency = 78.0e9;
    int antennas = 4;
    // Share of features taken from a single conventional beam pointed (within
    // a couple of degrees) at the emitter, as multi-device detection sees them.
    double beam_fraction = 0.5;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Labelled features; rows [0, train_count) are the training split.
struct Dataset {
    std::vector<SpectrumFeature> features;
    std::vector<WaveformKind> sources;  // generating template per row, in memory only
    std::size_t train_count = 0;

    std::size_t size() const { return features.size(); }
    std::size_t count(SignalClass c) const;
    /// FNV-1a over feature bytes and labels.
    std::uint64_t hash() const;
};

/// Random emitter of the given template whose signal falls inside the IF
/// passband of a tone probe at `probe_frequency`, scaled to `snr_db`
/// relative to unit noise power.
PhaseWaveform random_emitter(WaveformKind kind, double probe_frequency, double snr_db,
                             std::uint64_t seed);

/// Simulates one single-tone capture of a random emitter and returns its
/// spectrum. The SNR is drawn per feature and applied after mixing: mean
/// signal power over the capture relative to unit noise power.
SpectrumFeature simulate_feature(WaveformKind kind, const DatasetSpec& spec, std::uint64_t seed);

Dataset generate_dataset(const DatasetSpec& spec);

/// Binary layout: "R2DS" magic, u32 version, u64 count, u32 feature length,
/// u64 train_count, u32 label count then (u8 id, u8 length, name) entries,
/// followed by `count` rows of 1024 little-endian float32 plus one label byte.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace radar2
