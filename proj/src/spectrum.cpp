#include "radar2/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <fftw3.h>

namespace radar2 {

namespace {

// FFTW's planner is not thread-safe; execution on a private plan is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class Fft1024 {
public:
    Fft1024() {
        buf_ = fftw_alloc_complex(kFeatureLength);
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_1d(kFeatureLength, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    ~Fft1024() {
        {
            std::lock_guard lock(planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(buf_);
    }
    Fft1024(const Fft1024&) = delete;
    Fft1024& operator=(const Fft1024&) = delete;

    fftw_complex* data() { return buf_; }
    void run() { fftw_execute(plan_); }

private:
    fftw_complex* buf_ = nullptr;
    fftw_plan plan_ = nullptr;
};

}  // namespace

std::string_view to_string(SignalClass c) {
    return c == SignalClass::Radar ? "radar" : "wigig";
}

SpectrumFeature extract_spectrum(const IfRecord& rec) {
    if (rec.probe.is_sweep()) {
        throw std::invalid_argument(
            "spectrum features need a single-tone record; sweep demodulation distorts the spectrum");
    }
    SpectrumFeature out;
    out.probe_frequency = rec.probe.start_frequency;
    if (rec.data.empty()) return out;

    std::vector<double> window(kFeatureLength, 0.0);
    const int n = std::min(rec.samples, kFeatureLength);
    for (int i = 0; i < n; ++i) {
        window[i] = n > 1 ? 0.5 - 0.5 * std::cos(2.0 * kPi * i / (n - 1)) : 1.0;
    }

    Fft1024 fft;
    std::vector<double> acc(kFeatureLength, 0.0);
    for (int f = 0; f < rec.frames; ++f) {
        for (int c = 0; c < rec.chirps; ++c) {
            for (int a = 0; a < rec.antennas; ++a) {
                fftw_complex* buf = fft.data();
                for (int i = 0; i < kFeatureLength; ++i) {
                    if (i < n) {
                        const auto v = rec.at(f, c, i, a);
                        buf[i][0] = window[i] * v.real();
                        buf[i][1] = window[i] * v.imag();
                    } else {
                        buf[i][0] = buf[i][1] = 0.0;
                    }
                }
                fft.run();
                for (int i = 0; i < kFeatureLength; ++i) {
                    acc[i] += std::hypot(buf[i][0], buf[i][1]);
                }
            }
        }
    }

    // fftshift: negative frequencies first.
    const int half = kFeatureLength / 2;
    double peak = 0.0;
    for (int i = 0; i < kFeatureLength; ++i) peak = std::max(peak, acc[i]);
    const double scale = peak > 0.0 ? 1.0 / peak : 0.0;
    for (int i = 0; i < kFeatureLength; ++i) {
        out.values[(i + half) % kFeatureLength] = static_cast<float>(acc[i] * scale);
    }
    return out;
}

int spectrum_bin_shift(double delta_hz, double adc_rate) {
    return static_cast<int>(std::lround(delta_hz * kFeatureLength / adc_rate));
}

}  // namespace radar2
