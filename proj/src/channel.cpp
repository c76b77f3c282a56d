#include "radar2/channel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace radar2 {

ArrayGeometry ArrayGeometry::for_wavelength(double wavelength, int elements) {
    ArrayGeometry a;
    a.elements = elements;
    a.spacing = wavelength / 4.0;
    a.kappa = 4.0 * kPi;
    return a;
}

void ArrayGeometry::validate() const {
    if (elements < 2) throw ConfigError("array needs at least 2 elements");
    if (!(spacing > 0.0)) throw ConfigError("array element spacing must be > 0");
    if (!(kappa > 0.0)) throw ConfigError("array steering factor must be > 0");
}

double ArrayGeometry::phase_step(double aoa_deg, double wavelength) const {
    return kappa * spacing * std::sin(deg_to_rad(aoa_deg)) / wavelength;
}

void PathLossParams::validate() const {
    if (!(tx_power > 0.0) || !(effective_area > 0.0) || !(scattering > 0.0) ||
        !(wavelength > 0.0)) {
        throw ConfigError("path loss parameters must all be strictly positive");
    }
}

double received_power(const PathLossParams& p, double distance) {
    p.validate();
    if (!(distance > 0.0)) throw std::invalid_argument("distance must be > 0");
    const double d2 = distance * distance;
    return p.tx_power * p.effective_area * p.effective_area * p.scattering /
           (4.0 * kPi * p.wavelength * p.wavelength * d2 * d2);
}

double max_range(const PathLossParams& p, double threshold) {
    p.validate();
    if (!(threshold > 0.0)) throw std::invalid_argument("power threshold must be > 0");
    return std::pow(p.tx_power * p.effective_area * p.effective_area * p.scattering /
                        (4.0 * kPi * p.wavelength * p.wavelength * threshold),
                    0.25);
}

std::vector<double> array_phases(const ArrayGeometry& a, double aoa_deg, double wavelength) {
    a.validate();
    if (!(std::abs(aoa_deg) < 90.0)) {
        throw std::invalid_argument("angle of arrival must lie in (-90, 90) degrees, got " +
                                    std::to_string(aoa_deg));
    }
    if (!(wavelength > 0.0)) throw std::invalid_argument("wavelength must be > 0");
    const double step = a.phase_step(aoa_deg, wavelength);
    std::vector<double> phases(a.elements);
    for (int k = 0; k < a.elements; ++k) phases[k] = k * step;
    return phases;
}

BearingPair bearing_with_height(const DevicePose& detector, const DevicePose& emitter) {
    const double dx = detector.position.x - emitter.position.x;
    const double dy = detector.position.y - emitter.position.y;
    const double dz = detector.position.z - emitter.position.z;
    if (dx == 0.0 && dy == 0.0) {
        throw std::invalid_argument("detector and emitter share the same planar position");
    }
    BearingPair out;
    out.ideal_deg = rad_to_deg(std::atan(dy / dx));
    // keep the sign of dx so both angles share a quadrant
    out.distorted_deg = rad_to_deg(std::atan(dy / std::copysign(std::sqrt(dx * dx + dz * dz), dx)));
    return out;
}

double global_bearing_deg(const Position& from, const Position& to) {
    return rad_to_deg(std::atan2(to.x - from.x, to.y - from.y));
}

double relative_aoa_deg(const DevicePose& detector, const Position& emitter) {
    double rel = global_bearing_deg(detector.position, emitter) - detector.heading_deg;
    rel = std::fmod(rel, 360.0);
    if (rel <= -180.0) rel += 360.0;
    if (rel > 180.0) rel -= 360.0;
    return rel;
}

double fold_line_angle_deg(double deg) {
    double a = std::fmod(deg, 180.0);
    if (a <= -90.0) a += 180.0;
    if (a > 90.0) a -= 180.0;
    return a;
}

std::vector<double> ChannelLink::steering_phases(double frequency) const {
    return array_phases(array, aoa_deg, kSpeedOfLight / frequency);
}

ChannelLink make_link(const DevicePose& emitter, const DevicePose& detector,
                      const ArrayGeometry& a, const PathLossParams& p) {
    a.validate();
    for (double v : {emitter.position.x, emitter.position.y, emitter.position.z,
                     detector.position.x, detector.position.y, detector.position.z}) {
        if (!std::isfinite(v)) throw std::invalid_argument("device coordinates must be finite");
    }
    const double dx = emitter.position.x - detector.position.x;
    const double dy = emitter.position.y - detector.position.y;
    const double dz = emitter.position.z - detector.position.z;
    const double distance = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (!(distance > 0.0)) throw std::invalid_argument("emitter and detector positions coincide");

    ChannelLink link;
    link.distance = distance;
    link.delay = distance / kSpeedOfLight;
    link.path_gain = std::sqrt(received_power(p, distance));
    link.aoa_deg = relative_aoa_deg(detector, emitter.position);
    link.array = a;
    if (!(std::abs(link.aoa_deg) < 90.0)) {
        throw std::invalid_argument("emitter lies outside the detector field of view (aoa " +
                                    std::to_string(link.aoa_deg) + " deg)");
    }
    return link;
}

NoiseSource::NoiseSource(double power, std::uint64_t seed)
    : power_(power), engine_(seed), normal_(0.0, std::sqrt(std::max(power, 0.0) / 2.0)) {
    if (!(power >= 0.0)) throw std::invalid_argument("noise power must be >= 0");
}

std::complex<double> NoiseSource::operator()() {
    if (power_ == 0.0) return {0.0, 0.0};
    const double re = normal_(engine_);
    return {re, normal_(engine_)};
}

void NoiseSource::add_to(std::span<std::complex<float>> samples) {
    if (power_ == 0.0) return;
    for (auto& s : samples) {
        const auto n = (*this)();
        s += std::complex<float>(static_cast<float>(n.real()), static_cast<float>(n.imag()));
    }
}

ChannelOutput apply_channel(const PhaseWaveform& w, const DevicePose& emitter,
                            const DevicePose& detector, const ArrayGeometry& a,
                            const PathLossParams& p, double noise_power, std::uint64_t seed) {
    w.validate();
    if (!(noise_power >= 0.0)) throw std::invalid_argument("noise power must be >= 0");
    return ChannelOutput{make_link(emitter, detector, a, p), NoiseSource(noise_power, seed)};
}

}  // namespace radar2
