#include "radar2/waveforms.hpp"

#include <cmath>
#include <string>

#include "radar2/common.hpp"

namespace radar2 {

namespace {

constexpr long double kTwoPiL = 6.283185307179586476925286766559L;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_time(double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw std::invalid_argument("waveform time must be finite and >= 0, got " +
                                    std::to_string(t));
    }
}

// Position inside the current period, in [0, period).
double wrap(double t, double period) {
    double r = std::fmod(t, period);
    return r < 0.0 ? r + period : r;
}

}  // namespace

std::string_view to_string(WaveformKind kind) {
    switch (kind) {
    case WaveformKind::CW: return "cw";
    case WaveformKind::FSK: return "fsk";
    case WaveformKind::FMCW: return "fmcw";
    case WaveformKind::Pulse: return "pulse";
    case WaveformKind::WiGigOFDM: return "wigig";
    }
    return "unknown";
}

WaveformKind waveform_kind_from_string(std::string_view name) {
    if (name == "cw") return WaveformKind::CW;
    if (name == "fsk") return WaveformKind::FSK;
    if (name == "fmcw") return WaveformKind::FMCW;
    if (name == "pulse") return WaveformKind::Pulse;
    if (name == "wigig" || name == "ofdm") return WaveformKind::WiGigOFDM;
    throw ConfigError("unknown waveform kind '" + std::string(name) + "'");
}

PhaseWaveform PhaseWaveform::cw(double f0, double phase, double amplitude) {
    PhaseWaveform w{CwParams{f0, phase}, amplitude};
    w.validate();
    return w;
}

PhaseWaveform PhaseWaveform::fsk(double fa, double fb, double period, double theta1,
                                 double theta2, double amplitude) {
    PhaseWaveform w{FskParams{fa, fb, theta1, theta2, period}, amplitude};
    w.validate();
    return w;
}

PhaseWaveform PhaseWaveform::fmcw(double f_start, double slope, double sweep_period,
                                  double phase, double amplitude) {
    PhaseWaveform w{FmcwParams{f_start, slope, sweep_period, phase}, amplitude};
    w.validate();
    return w;
}

PhaseWaveform PhaseWaveform::pulse(double f0, double width, double prf, double phase,
                                   double amplitude) {
    PhaseWaveform w{PulseParams{f0, phase, width, prf}, amplitude};
    w.validate();
    return w;
}

PhaseWaveform PhaseWaveform::ofdm(double center, std::uint64_t seed, int active_subcarriers,
                                  double spacing, double symbol_duration, double amplitude) {
    PhaseWaveform w{OfdmParams{center, spacing, active_subcarriers, symbol_duration, seed},
                    amplitude};
    w.validate();
    return w;
}

void PhaseWaveform::validate() const {
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
        throw ConfigError("waveform amplitude must be finite and >= 0");
    }
    std::visit(overloaded{
                   [](const CwParams& p) {
                       if (!(p.f0 > 0.0)) throw ConfigError("cw: f0 must be > 0");
                   },
                   [](const FskParams& p) {
                       if (!(p.fa > 0.0) || !(p.fb > 0.0))
                           throw ConfigError("fsk: fa and fb must be > 0");
                       if (p.fa == p.fb) throw ConfigError("fsk: fa and fb must differ");
                       if (!(p.period > 0.0)) throw ConfigError("fsk: period must be > 0");
                   },
                   [](const FmcwParams& p) {
                       if (!(p.f_start > 0.0)) throw ConfigError("fmcw: f_start must be > 0");
                       if (!(p.slope > 0.0)) throw ConfigError("fmcw: slope must be > 0");
                       if (!(p.sweep_period > 0.0))
                           throw ConfigError("fmcw: sweep period must be > 0");
                   },
                   [](const PulseParams& p) {
                       if (!(p.f0 > 0.0)) throw ConfigError("pulse: f0 must be > 0");
                       if (!(p.width > 0.0) || !(p.prf > 0.0))
                           throw ConfigError("pulse: width and prf must be > 0");
                       if (p.duty_cycle() > 1.0)
                           throw ConfigError("pulse: duty cycle width*prf must be <= 1");
                   },
                   [](const OfdmParams& p) {
                       if (!(p.center > 0.0)) throw ConfigError("wigig: centre must be > 0");
                       if (p.active_subcarriers < 0)
                           throw ConfigError("wigig: subcarrier count must be >= 0");
                       if (!(p.spacing > 0.0)) throw ConfigError("wigig: spacing must be > 0");
                       if (!(p.symbol_duration > 0.0))
                           throw ConfigError("wigig: symbol duration must be > 0");
                   },
               },
               params);
}

std::pair<double, double> PhaseWaveform::frequency_span() const {
    return std::visit(
        overloaded{
            [](const CwParams& p) { return std::pair{p.f0, p.f0}; },
            [](const FskParams& p) { return std::pair{std::min(p.fa, p.fb), std::max(p.fa, p.fb)}; },
            [](const FmcwParams& p) { return std::pair{p.f_start, p.f_start + p.bandwidth()}; },
            [](const PulseParams& p) { return std::pair{p.f0, p.f0}; },
            [](const OfdmParams& p) {
                double half = 0.5 * p.occupied_bandwidth();
                return std::pair{p.center - half, p.center + half};
            },
        },
        params);
}

long double instantaneous_phase(const PhaseWaveform& w, double t) {
    require_time(t);
    return std::visit(
        overloaded{
            [t](const CwParams& p) -> long double {
                return kTwoPiL * static_cast<long double>(p.f0) * t + p.phase;
            },
            [t](const FskParams& p) -> long double {
                const long double local = wrap(t, p.period);
                if (local < 0.5L * p.period) return kTwoPiL * p.fa * local + p.theta1;
                return kTwoPiL * p.fb * local + p.theta2;
            },
            [t](const FmcwParams& p) -> long double {
                const long double local = wrap(t, p.sweep_period);
                return kTwoPiL * (p.f_start * local + 0.5L * p.slope * local * local) + p.phase;
            },
            [t](const PulseParams& p) -> long double {
                return kTwoPiL * static_cast<long double>(p.f0) * t + p.phase;
            },
            [t](const OfdmParams& p) -> long double {
                return kTwoPiL * static_cast<long double>(p.center) * t;
            },
        },
        w.params);
}

double instantaneous_frequency(const PhaseWaveform& w, double t) {
    require_time(t);
    return std::visit(overloaded{
                          [](const CwParams& p) { return p.f0; },
                          [t](const FskParams& p) {
                              return wrap(t, p.period) < 0.5 * p.period ? p.fa : p.fb;
                          },
                          [t](const FmcwParams& p) {
                              return p.f_start + p.slope * wrap(t, p.sweep_period);
                          },
                          [](const PulseParams& p) { return p.f0; },
                          [](const OfdmParams& p) { return p.center; },
                      },
                      w.params);
}

double envelope(const PhaseWaveform& w, double t) {
    if (const auto* p = std::get_if<PulseParams>(&w.params)) {
        return wrap(t, 1.0 / p->prf) < p->width ? 1.0 : 0.0;
    }
    return 1.0;
}

double ofdm_subcarrier_offset(const OfdmParams& p, int k) {
    return (k - 0.5 * (p.active_subcarriers - 1)) * p.spacing;
}

std::complex<double> ofdm_symbol(const OfdmParams& p, int k, std::int64_t m) {
    const std::uint64_t h =
        derive_seed(p.seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(m));
    const double s = 1.0 / std::sqrt(2.0);
    return {(h & 1u) ? s : -s, (h & 2u) ? s : -s};
}

std::vector<std::complex<double>> ofdm_baseband(const PhaseWaveform& w,
                                                std::span<const double> t_grid) {
    const auto* p = std::get_if<OfdmParams>(&w.params);
    if (!p) throw std::invalid_argument("ofdm_baseband requires a WiGigOFDM waveform");
    std::vector<std::complex<double>> out(t_grid.size());
    if (p->active_subcarriers == 0) return out;

    const double scale = w.amplitude / std::sqrt(static_cast<double>(p->active_subcarriers));
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const double t = t_grid[i];
        require_time(t);
        const auto m = static_cast<std::int64_t>(std::floor(t / p->symbol_duration));
        std::complex<double> acc{0.0, 0.0};
        for (int k = 0; k < p->active_subcarriers; ++k) {
            // Reduce the phase in cycles first so long records keep full precision.
            const long double cycles = static_cast<long double>(ofdm_subcarrier_offset(*p, k)) * t;
            const double frac = static_cast<double>(cycles - std::floor(cycles));
            acc += ofdm_symbol(*p, k, m) * std::polar(1.0, kTwoPi * frac);
        }
        out[i] = scale * acc;
    }
    return out;
}

}  // namespace radar2
