#include "radar2/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "radar2/common.hpp"
#include "radar2/localize.hpp"

namespace radar2 {

namespace {

constexpr char kMagic[4] = {'R', '2', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("dataset file truncated");
    return v;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

SignalClass class_of(WaveformKind kind) {
    return kind == WaveformKind::WiGigOFDM ? SignalClass::WiGig : SignalClass::Radar;
}

void DatasetSpec::validate() const {
    receiver.validate();
    if (per_class < 1) throw ConfigError("dataset: per-class count must be >= 1");
    if (templates.empty()) throw ConfigError("dataset: no waveform templates given");
    const bool has_radar = std::any_of(templates.begin(), templates.end(),
                                       [](auto k) { return class_of(k) == SignalClass::Radar; });
    const bool has_wigig = std::any_of(templates.begin(), templates.end(),
                                       [](auto k) { return class_of(k) == SignalClass::WiGig; });
    if (!has_radar || !has_wigig) {
        throw ConfigError("dataset: templates must cover both the radar and the WiGig class");
    }
    if (!(snr_min_db <= snr_max_db)) throw ConfigError("dataset: snr_min_db > snr_max_db");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("dataset: validation fraction must be in [0, 1)");
    }
    if (antennas < 1) throw ConfigError("dataset: antennas must be >= 1");
    if (!(beam_fraction >= 0.0 && beam_fraction <= 1.0)) {
        throw ConfigError("dataset: beam fraction must be in [0, 1]");
    }
}

std::size_t Dataset::count(SignalClass c) const {
    return static_cast<std::size_t>(std::count_if(
        features.begin(), features.end(), [c](const auto& f) { return f.label == c; }));
}

std::uint64_t Dataset::hash() const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    auto feed = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001B3ull;
        }
    };
    for (const auto& f : features) {
        feed(f.values.data(), f.values.size() * sizeof(float));
        const auto label = static_cast<std::uint8_t>(f.label.value_or(SignalClass::Radar));
        feed(&label, 1);
    }
    const auto train = static_cast<std::uint64_t>(train_count);
    feed(&train, sizeof(train));
    return h;
}

PhaseWaveform random_emitter(WaveformKind kind, double probe_frequency, double snr_db,
                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double amplitude = std::sqrt(std::pow(10.0, snr_db / 10.0));
    const double phase = uniform(rng, 0.0, kTwoPi);
    constexpr double kOffset = 4.5e6;  // keep narrowband lines inside the passband
    switch (kind) {
    case WaveformKind::CW:
        return PhaseWaveform::cw(probe_frequency + uniform(rng, -kOffset, kOffset), phase,
                                 amplitude);
    case WaveformKind::FSK: {
        const double fa = probe_frequency + uniform(rng, -kOffset, kOffset);
        double step = uniform(rng, 0.3e6, 3e6);
        if (fa + step > probe_frequency + 5e6) step = -step;
        const double period = uniform(rng, 20e-6, 200e-6);
        return PhaseWaveform::fsk(fa, fa + step, period, phase, uniform(rng, 0.0, kTwoPi),
                                  amplitude);
    }
    case WaveformKind::FMCW: {
        const double bandwidth = uniform(rng, 0.5e9, 4e9);
        const double period = uniform(rng, 25e-6, 200e-6);
        const double position = uniform(rng, 0.02, 0.98);
        return PhaseWaveform::fmcw(probe_frequency - position * bandwidth, bandwidth / period,
                                   period, phase, amplitude);
    }
    case WaveformKind::Pulse: {
        const double prf = uniform(rng, 5e3, 50e3);
        const double width = uniform(rng, 0.5e-6, std::min(5e-6, 0.5 / prf));
        return PhaseWaveform::pulse(probe_frequency + uniform(rng, -kOffset, kOffset), width, prf,
                                    phase, amplitude);
    }
    case WaveformKind::WiGigOFDM:
        return PhaseWaveform::ofdm(probe_frequency + uniform(rng, -150e6, 150e6), rng(), 64, 5e6,
                                   0.2e-6, amplitude);
    }
    throw std::logic_error("unhandled waveform kind");
}

SpectrumFeature simulate_feature(WaveformKind kind, const DatasetSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double snr_db = uniform(rng, spec.snr_min_db, spec.snr_max_db);
    const auto probe = ProbeSignal::tone(spec.probe_frequency);

    // The SNR is set after mixing: the noise-free capture is rescaled so that
    // its mean power over all samples sits snr_db above the unit noise floor.
    // Emitters that never reach the passband are redrawn.
    for (int attempt = 0; attempt < 16; ++attempt) {
        SceneEmitter e{random_emitter(kind, spec.probe_frequency, 0.0, rng()), {}, 0.0};
        e.link.path_gain = 1.0;
        e.link.aoa_deg = uniform(rng, -60.0, 60.0);
        e.link.array =
            ArrayGeometry::for_wavelength(kSpeedOfLight / spec.probe_frequency, spec.antennas);
        e.clock_offset = uniform(rng, 0.0, 1e-3);
        const double aoa = e.link.aoa_deg;
        const ArrayGeometry array = e.link.array;

        ReceivedScene scene;
        scene.emitters.push_back(std::move(e));
        scene.noise_power = 0.0;
        scene.antennas = spec.antennas;

        auto rec = mix_and_filter(scene, probe, spec.receiver, 0);
        const auto noise_seed = rng();
        double power = 0.0;
        for (const auto& v : rec.data) power += std::norm(std::complex<double>(v));
        power /= static_cast<double>(rec.data.size());
        if (!(power > 0.0)) continue;

        const auto gain = static_cast<float>(std::sqrt(std::pow(10.0, snr_db / 10.0) / power));
        for (auto& v : rec.data) v *= gain;
        NoiseSource(1.0, noise_seed).add_to(rec.data);

        const bool beam = uniform(rng, 0.0, 1.0) < spec.beam_fraction;
        const double pointing = aoa + uniform(rng, -2.0, 2.0);
        auto feature = beam && spec.antennas > 1
                           ? extract_spectrum(spatial_separation(rec, array, std::span(&pointing, 1),
                                                                 spec.probe_frequency)[0])
                           : extract_spectrum(rec);
        feature.label = class_of(kind);
        return feature;
    }
    throw std::runtime_error("dataset: emitter never entered the receiver passband");
}

Dataset generate_dataset(const DatasetSpec& spec) {
    spec.validate();

    std::vector<WaveformKind> radar, wigig;
    for (auto k : spec.templates) (class_of(k) == SignalClass::Radar ? radar : wigig).push_back(k);

    std::vector<WaveformKind> rows;
    if (spec.balance_binary) {
        const std::size_t total = static_cast<std::size_t>(spec.per_class) * spec.templates.size();
        const std::size_t half = total / 2;
        for (std::size_t i = 0; i < total - half; ++i) rows.push_back(radar[i % radar.size()]);
        for (std::size_t i = 0; i < half; ++i) rows.push_back(wigig[i % wigig.size()]);
    } else {
        for (auto k : spec.templates) rows.insert(rows.end(), spec.per_class, k);
    }

    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffler(derive_seed(spec.seed, 0x5348554646ull));
    std::shuffle(order.begin(), order.end(), shuffler);

    Dataset ds;
    ds.features.reserve(rows.size());
    ds.sources.reserve(rows.size());
    for (std::size_t idx : order) {
        ds.features.push_back(simulate_feature(rows[idx], spec, derive_seed(spec.seed, idx)));
        ds.sources.push_back(rows[idx]);
    }
    ds.train_count = rows.size() - static_cast<std::size_t>(std::floor(
                                       spec.validation_fraction * static_cast<double>(rows.size())));
    return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
    static_assert(std::endian::native == std::endian::little);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint64_t>(os, ds.size());
    put<std::uint32_t>(os, kFeatureLength);
    put<std::uint64_t>(os, ds.train_count);
    put<std::uint32_t>(os, 2);
    for (auto c : {SignalClass::Radar, SignalClass::WiGig}) {
        const auto name = to_string(c);
        put<std::uint8_t>(os, static_cast<std::uint8_t>(c));
        put<std::uint8_t>(os, static_cast<std::uint8_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (const auto& f : ds.features) {
        if (f.values.size() != static_cast<std::size_t>(kFeatureLength)) {
            throw std::invalid_argument("dataset feature has wrong length");
        }
        os.write(reinterpret_cast<const char*>(f.values.data()),
                 static_cast<std::streamsize>(kFeatureLength * sizeof(float)));
        put<std::uint8_t>(os, static_cast<std::uint8_t>(f.label.value_or(SignalClass::Radar)));
    }
    if (!os) throw std::runtime_error("failed writing " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error(path + " is not a radar2 dataset");
    }
    if (get<std::uint32_t>(is) != kVersion) throw std::runtime_error("unsupported dataset version");
    const auto count = get<std::uint64_t>(is);
    if (get<std::uint32_t>(is) != kFeatureLength) {
        throw std::runtime_error("dataset feature length mismatch");
    }
    Dataset ds;
    ds.train_count = get<std::uint64_t>(is);
    const auto labels = get<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < labels; ++i) {
        get<std::uint8_t>(is);
        const auto len = get<std::uint8_t>(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
    }
    ds.features.resize(count);
    for (auto& f : ds.features) {
        is.read(reinterpret_cast<char*>(f.values.data()),
                static_cast<std::streamsize>(kFeatureLength * sizeof(float)));
        const auto label = get<std::uint8_t>(is);
        if (label > 1) throw std::runtime_error("dataset label out of range");
        f.label = static_cast<SignalClass>(label);
    }
    if (ds.train_count > count) throw std::runtime_error("dataset train split exceeds row count");
    return ds;
}

}  // namespace radar2
