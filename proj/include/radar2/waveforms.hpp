#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace radar2 {

enum class WaveformKind { CW, FSK, FMCW, Pulse, WiGigOFDM };

std::string_view to_string(WaveformKind kind);
WaveformKind waveform_kind_from_string(std::string_view name);

struct CwParams {
    double f0 = 0.0;
    double phase = 0.0;
};

// First half of every period at fa, second half at fb.
struct FskParams {
    double fa = 0.0;
    double fb = 0.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    double period = 0.0;
};

// Sawtooth chirp: frequency runs fL -> fL + slope * sweep_period, then restarts.
struct FmcwParams {
    double f_start = 0.0;
    double slope = 0.0;
    double sweep_period = 0.0;
    double phase = 0.0;

    double bandwidth() const { return slope * sweep_period; }
};

struct PulseParams {
    double f0 = 0.0;
    double phase = 0.0;
    double width = 1e-6;
    double prf = 10e3;

    double duty_cycle() const { return width * prf; }
};

struct OfdmParams {
    double center = 0.0;
    double spacing = 5e6;
    int active_subcarriers = 64;
    double symbol_duration = 0.2e-6;
    std::uint64_t seed = 0;

    double occupied_bandwidth() const { return active_subcarriers * spacing; }
};

/// Analytic transmit-signal model. Time arguments are in the emitter's own
/// clock; `amplitude` scales the complex envelope linearly.
struct PhaseWaveform {
    std::variant<CwParams, FskParams, FmcwParams, PulseParams, OfdmParams> params;
    double amplitude = 1.0;

    WaveformKind kind() const { return static_cast<WaveformKind>(params.index()); }

    static PhaseWaveform cw(double f0, double phase = 0.0, double amplitude = 1.0);
    static PhaseWaveform fsk(double fa, double fb, double period, double theta1 = 0.0,
                             double theta2 = 0.0, double amplitude = 1.0);
    static PhaseWaveform fmcw(double f_start, double slope, double sweep_period,
                              double phase = 0.0, double amplitude = 1.0);
    static PhaseWaveform pulse(double f0, double width = 1e-6, double prf = 10e3,
                               double phase = 0.0, double amplitude = 1.0);
    static PhaseWaveform ofdm(double center, std::uint64_t seed, int active_subcarriers = 64,
                              double spacing = 5e6, double symbol_duration = 0.2e-6,
                              double amplitude = 1.0);

    /// Throws ConfigError when a kind-specific invariant is broken.
    void validate() const;

    /// Lowest and highest instantaneous frequency the emitter can occupy.
    std::pair<double, double> frequency_span() const;
};

/// Instantaneous phase in radians. Returned in extended precision because
/// mmWave carriers accumulate ~1e7 rad within a chirp and callers difference
/// phases at picosecond spacing.
long double instantaneous_phase(const PhaseWaveform& w, double t);

double instantaneous_frequency(const PhaseWaveform& w, double t);

/// On/off gate: 0 outside pulse windows for Pulse, 1 for everything else.
double envelope(const PhaseWaveform& w, double t);

/// Frequency offset of OFDM subcarrier `k` relative to the band centre.
double ofdm_subcarrier_offset(const OfdmParams& p, int k);

/// Unit-modulus QPSK symbol carried by subcarrier `k` during OFDM symbol `m`.
std::complex<double> ofdm_symbol(const OfdmParams& p, int k, std::int64_t m);

/// Complex baseband of a WiGigOFDM waveform (band centre at 0 Hz).
std::vector<std::complex<double>> ofdm_baseband(const PhaseWaveform& w,
                                                std::span<const double> t_grid);

}  // namespace radar2
