#pragma once

#include <complex>
#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <span>
#include <vector>

#include "radar2/common.hpp"
#include "radar2/waveforms.hpp"

namespace radar2 {

struct Position {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

enum class DeviceRole { Emitter, Detector };

// Angles follow one convention everywhere: degrees measured from the +y axis
// toward +x, so a bearing theta points along (sin theta, cos theta).
// `heading_deg` is the broadside direction of a detector's array.
struct DevicePose {
    Position position;
    DeviceRole role = DeviceRole::Detector;
    double heading_deg = 0.0;
};

struct ArrayGeometry {
    int elements = 4;
    double spacing = 0.0;      // metres
    double kappa = 4.0 * kPi;  // steering phase factor, 2*pi or 4*pi

    /// Default layout for a carrier wavelength: d = lambda/4 with kappa = 4*pi,
    /// which gives a pi*sin(theta) phase step between neighbours.
    static ArrayGeometry for_wavelength(double wavelength, int elements = 4);

    void validate() const;

    /// Phase step between neighbouring elements for a plane wave at `aoa_deg`.
    double phase_step(double aoa_deg, double wavelength) const;
};

struct PathLossParams {
    double tx_power = 1.0;        // W
    double effective_area = 1.0;  // m^2
    double scattering = 1.0;
    double wavelength = 1.0;  // m

    void validate() const;
};

/// P_r = P_t A_e^2 sigma / (4 pi lambda^2 d^4)
double received_power(const PathLossParams& p, double distance);

/// Distance at which received_power drops to `threshold`.
double max_range(const PathLossParams& p, double threshold);

/// Element k gets k * kappa * d * sin(aoa) / lambda; element 0 is the reference.
std::vector<double> array_phases(const ArrayGeometry& a, double aoa_deg, double wavelength);

struct BearingPair {
    double ideal_deg = 0.0;
    double distorted_deg = 0.0;

    double error_deg() const { return std::abs(ideal_deg - distorted_deg); }
};

/// In-plane bearing and the bearing seen when detector and emitter sit at
/// different heights. Uses the x-referenced arctangent form of the height study.
BearingPair bearing_with_height(const DevicePose& detector, const DevicePose& emitter);

/// Bearing from detector to emitter in the global (+y referenced) convention.
double global_bearing_deg(const Position& from, const Position& to);

/// Bearing relative to the detector's broadside, wrapped to (-180, 180].
double relative_aoa_deg(const DevicePose& detector, const Position& emitter);

/// Folds a global bearing onto (-90, 90]; bearing lines have no direction.
double fold_line_angle_deg(double deg);

/// Per-emitter link descriptor: everything the frontend needs to turn the
/// transmit waveform into per-antenna received samples.
struct ChannelLink {
    double path_gain = 0.0;  // amplitude, sqrt(received power)
    double delay = 0.0;      // s
    double distance = 0.0;   // m
    double aoa_deg = 0.0;    // relative to the detector broadside
    ArrayGeometry array;

    /// Per-antenna phases evaluated at carrier frequency `frequency`.
    std::vector<double> steering_phases(double frequency) const;
};

ChannelLink make_link(const DevicePose& emitter, const DevicePose& detector,
                      const ArrayGeometry& a, const PathLossParams& p);

/// Seeded complex circular Gaussian noise, E|n|^2 = power.
class NoiseSource {
public:
    NoiseSource(double power, std::uint64_t seed);

    std::complex<double> operator()();
    void add_to(std::span<std::complex<float>> samples);
    double power() const { return power_; }

private:
    double power_;
    std::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_;
};

struct ChannelOutput {
    ChannelLink link;
    NoiseSource noise;
};

/// Link descriptor plus the noise generator for one emitter/detector pair.
ChannelOutput apply_channel(const PhaseWaveform& w, const DevicePose& emitter,
                            const DevicePose& detector, const ArrayGeometry& a,
                            const PathLossParams& p, double noise_power, std::uint64_t seed);

}  // namespace radar2
