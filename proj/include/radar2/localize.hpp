#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "radar2/channel.hpp"
#include "radar2/frontend.hpp"

namespace radar2 {

struct MusicConfig {
    double grid_step_deg = 0.1;
    double min_peak_db = 6.0;  // above the pseudo-spectrum median
    std::optional<int> source_count;
    // Snapshots whose antenna-averaged power is at or below this are left out
    // of the covariance. Unset: every non-zero snapshot is used.
    std::optional<double> noise_floor;
    // Steering wavelength is c / carrier. Unset: the record's probe frequency.
    std::optional<double> carrier_frequency;
    double eigen_gap = 10.0;  // signal eigenvalues exceed eigen_gap * smallest

    void validate() const;
};

struct AoaPeak {
    double angle_deg = 0.0;  // relative to the array broadside
    double height = 0.0;     // pseudo-spectrum value
};

struct MusicResult {
    std::vector<double> grid_deg;
    std::vector<double> spectrum;
    std::vector<AoaPeak> peaks;     // sorted by height, highest first
    int source_count = 0;           // subspace dimension used
    int estimated_sources = 0;      // eigenvalue-gap estimate, may be 0
    std::vector<double> eigenvalues;  // ascending
    std::size_t snapshots = 0;
};

MusicResult music_spectrum(const IfRecord& rec, const ArrayGeometry& array,
                           const MusicConfig& cfg = {});

/// Conventional beamformer per peak: y = a(theta)^H x / N for every snapshot.
/// Each output is a single-antenna record with the input's dimensions.
std::vector<IfRecord> spatial_separation(const IfRecord& rec, const ArrayGeometry& array,
                                         std::span<const double> peaks_deg,
                                         std::optional<double> carrier_frequency = {});

struct AnchorObservation {
    Position position;                  // only x and y are used
    std::vector<double> bearings_deg;   // global convention, from +y toward +x
    std::vector<double> peak_heights;   // optional, parallel to bearings_deg

    int device_count() const { return static_cast<int>(bearings_deg.size()); }
};

struct BearingRef {
    int anchor = 0;
    int bearing = 0;
};

struct LocatedEmitter {
    Position position;
    double residual = 0.0;               // sum of squared distances to the lines, m^2
    std::vector<double> line_distances;  // signed a_i along each bearing, m
    std::vector<BearingRef> bearings;
};

struct LocalizationResult {
    std::vector<LocatedEmitter> emitters;
    int estimated_count = 0;
    std::vector<double> singular_values;  // of G for the single-emitter solve
    double condition = 0.0;               // largest / smallest singular value
    std::size_t combinations = 0;         // combinations scored
};

class GeometryError : public std::runtime_error {
public:
    GeometryError(const std::string& what, std::vector<int> anchors)
        : std::runtime_error(what), anchors_(std::move(anchors)) {}
    const std::vector<int>& anchors() const { return anchors_; }

private:
    std::vector<int> anchors_;
};

/// Point nearest to all bearing lines via the SVD pseudo-inverse of G m = d,
/// with G of size 2N x (N+2). Every observation must carry exactly one bearing.
LocalizationResult triangulate(std::span<const AnchorObservation> observations);

struct MultiDeviceConfig {
    std::size_t max_combinations = 1'000'000;
    int min_bearings = 3;
};

/// Enumerates one-bearing-per-anchor combinations (anchors with fewer than
/// the maximum count may be skipped), scores each by its residual and
/// greedily keeps the best ones whose bearings are disjoint.
LocalizationResult multi_device_localize(std::span<const AnchorObservation> observations,
                                         const MultiDeviceConfig& cfg = {});

/// Sum of squared distances from `p` to every bearing line.
double line_residual(const Position& p, std::span<const Position> anchors,
                     std::span<const double> bearings_deg);

}  // namespace radar2
