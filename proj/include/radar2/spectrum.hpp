#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "radar2/frontend.hpp"

namespace radar2 {

inline constexpr int kFeatureLength = 1024;

enum class SignalClass : std::uint8_t { Radar = 0, WiGig = 1 };

std::string_view to_string(SignalClass c);

struct SpectrumFeature {
    std::vector<float> values = std::vector<float>(kFeatureLength, 0.0f);
    double probe_frequency = 0.0;
    std::optional<SignalClass> label;
};

/// Hann-windowed 1024-point magnitude spectrum of each chirp, averaged over
/// chirps and antennas, DC moved to bin 512, and scaled to a peak of 1.
/// Records demodulated by a sweep probe are rejected.
SpectrumFeature extract_spectrum(const IfRecord& rec);

/// Expected circular bin shift for a tone offset of `delta_hz`.
int spectrum_bin_shift(double delta_hz, double adc_rate);

}  // namespace radar2
