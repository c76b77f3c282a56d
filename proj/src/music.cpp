#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "radar2/localize.hpp"

namespace radar2 {

namespace {

using cd = std::complex<double>;

double steering_wavelength(const IfRecord& rec, std::optional<double> carrier) {
    const double f = carrier.value_or(rec.probe.start_frequency);
    if (!(f > 0.0)) throw std::invalid_argument("steering carrier frequency must be > 0");
    return kSpeedOfLight / f;
}

Eigen::VectorXcd steering_vector(const ArrayGeometry& array, int antennas, double angle_deg,
                                 double wavelength) {
    const double step = array.phase_step(angle_deg, wavelength);
    Eigen::VectorXcd a(antennas);
    for (int k = 0; k < antennas; ++k) a[k] = std::polar(1.0, k * step);
    return a;
}

double snapshot_power(std::span<const std::complex<float>> x) {
    double p = 0.0;
    for (const auto& v : x) p += std::norm(cd(v));
    return p / static_cast<double>(x.size());
}

}  // namespace

void MusicConfig::validate() const {
    if (!(grid_step_deg > 0.0 && grid_step_deg < 90.0)) {
        throw ConfigError("MUSIC grid step must be in (0, 90) degrees");
    }
    if (!(eigen_gap > 1.0)) throw ConfigError("MUSIC eigenvalue gap factor must be > 1");
    if (source_count && *source_count < 1) throw ConfigError("MUSIC source count must be >= 1");
}

MusicResult music_spectrum(const IfRecord& rec, const ArrayGeometry& array,
                           const MusicConfig& cfg) {
    cfg.validate();
    const int n = rec.antennas;
    if (n < 2) throw std::invalid_argument("MUSIC needs at least 2 antennas");
    if (cfg.source_count && *cfg.source_count >= n) {
        throw std::invalid_argument("MUSIC source count must be below the antenna count");
    }
    const double wavelength = steering_wavelength(rec, cfg.carrier_frequency);

    auto accumulate = [&](double floor, Eigen::MatrixXcd& r) {
        r.setZero(n, n);
        std::size_t used = 0;
        Eigen::VectorXcd x(n);
        for (std::size_t s = 0; s < rec.snapshot_count(); ++s) {
            const auto snap = rec.snapshot(s);
            const double p = snapshot_power(snap);
            if (!(p > floor)) continue;
            for (int k = 0; k < n; ++k) x[k] = cd(snap[k]);
            r.noalias() += x * x.adjoint();
            ++used;
        }
        return used;
    };

    Eigen::MatrixXcd r;
    std::size_t used = accumulate(cfg.noise_floor.value_or(0.0), r);
    const std::size_t needed = static_cast<std::size_t>(cfg.source_count.value_or(1)) + 1;
    if (used < needed && cfg.noise_floor) used = accumulate(0.0, r);
    if (used == 0) throw std::invalid_argument("MUSIC covariance is rank deficient (all-zero record)");
    if (used < needed) throw std::invalid_argument("MUSIC needs more snapshots than sources");
    r /= static_cast<double>(used);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(r);
    if (eig.info() != Eigen::Success) throw std::runtime_error("MUSIC eigendecomposition failed");
    const Eigen::VectorXd lambda = eig.eigenvalues();
    if (!(lambda[n - 1] > 0.0)) {
        throw std::invalid_argument("MUSIC covariance is rank deficient (all-zero record)");
    }

    MusicResult out;
    out.snapshots = used;
    out.eigenvalues.assign(lambda.data(), lambda.data() + n);
    const double smallest = std::max(lambda[0], 0.0);
    for (int k = 0; k < n; ++k) {
        if (lambda[k] > cfg.eigen_gap * smallest && lambda[k] > 1e-9 * lambda[n - 1]) {
            ++out.estimated_sources;
        }
    }
    out.estimated_sources = std::min(out.estimated_sources, n - 1);
    out.source_count = cfg.source_count.value_or(std::max(1, out.estimated_sources));

    const int noise_dim = n - out.source_count;
    const Eigen::MatrixXcd en = eig.eigenvectors().leftCols(noise_dim);

    // Integer-indexed grid so that 0 and other multiples of the step are exact.
    const int half = static_cast<int>(std::ceil(90.0 / cfg.grid_step_deg)) - 1;
    out.grid_deg.reserve(2 * half + 1);
    out.spectrum.reserve(2 * half + 1);
    for (int k = -half; k <= half; ++k) {
        const double theta = k * cfg.grid_step_deg;
        if (!(std::abs(theta) < 90.0)) continue;
        const Eigen::VectorXcd a = steering_vector(array, n, theta, wavelength);
        const double proj = (en.adjoint() * a).squaredNorm();
        out.grid_deg.push_back(theta);
        out.spectrum.push_back(1.0 / std::max(proj, 1e-300));
    }

    std::vector<double> sorted = out.spectrum;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double threshold = sorted[sorted.size() / 2] * std::pow(10.0, cfg.min_peak_db / 10.0);
    const auto& p = out.spectrum;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const bool left = k == 0 || p[k] > p[k - 1];
        const bool right = k + 1 == p.size() || p[k] >= p[k + 1];
        if (left && right && p[k] >= threshold) out.peaks.push_back({out.grid_deg[k], p[k]});
    }
    std::stable_sort(out.peaks.begin(), out.peaks.end(),
                     [](const AoaPeak& a, const AoaPeak& b) { return a.height > b.height; });
    return out;
}

std::vector<IfRecord> spatial_separation(const IfRecord& rec, const ArrayGeometry& array,
                                         std::span<const double> peaks_deg,
                                         std::optional<double> carrier_frequency) {
    const int n = rec.antennas;
    if (static_cast<int>(peaks_deg.size()) >= n) {
        throw std::invalid_argument("spatial separation needs fewer peaks than antennas");
    }
    const double wavelength = steering_wavelength(rec, carrier_frequency);
    std::vector<IfRecord> out;
    out.reserve(peaks_deg.size());
    for (double theta : peaks_deg) {
        if (!(std::abs(theta) < 90.0)) {
            throw std::invalid_argument("beam direction must lie in (-90, 90) degrees");
        }
        const Eigen::VectorXcd a = steering_vector(array, n, theta, wavelength);
        IfRecord beam(rec.config, rec.probe, 1);
        beam.frames = rec.frames;
        beam.chirps = rec.chirps;
        beam.samples = rec.samples;
        beam.data.assign(rec.snapshot_count(), {});
        for (std::size_t s = 0; s < rec.snapshot_count(); ++s) {
            const auto snap = rec.snapshot(s);
            cd acc{0.0, 0.0};
            for (int k = 0; k < n; ++k) acc += std::conj(a[k]) * cd(snap[k]);
            acc /= static_cast<double>(n);
            beam.data[s] = std::complex<float>(static_cast<float>(acc.real()),
                                               static_cast<float>(acc.imag()));
        }
        out.push_back(std::move(beam));
    }
    return out;
}

}  // namespace radar2
