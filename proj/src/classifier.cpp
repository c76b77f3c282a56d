#include "radar2/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "radar2/common.hpp"

namespace radar2 {

namespace {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

constexpr char kMagic[8] = {'R', '2', 'C', 'N', 'N', 0, 0, 0};
constexpr std::uint32_t kVersion = 1;
constexpr int kPad = SpectrumCnn::kKernel / 2;

int stage_length(int stage) { return kFeatureLength >> stage; }

int flat_length() {
    return SpectrumCnn::kChannels[SpectrumCnn::kStages] * stage_length(SpectrumCnn::kStages);
}

struct Cache {
    std::array<Mat, SpectrumCnn::kStages> cols;
    std::array<Mat, SpectrumCnn::kStages> act;
    std::array<Mat, SpectrumCnn::kStages + 1> pooled;  // pooled[0] is the input
    std::array<std::vector<std::uint8_t>, SpectrumCnn::kStages> which;
    Eigen::VectorXd flat;
    std::array<double, 2> logits{};
};

Mat im2col(const Mat& in) {
    const int channels = static_cast<int>(in.rows());
    const int length = static_cast<int>(in.cols());
    Mat cols = Mat::Zero(channels * SpectrumCnn::kKernel, length);
    for (int c = 0; c < channels; ++c) {
        for (int k = 0; k < SpectrumCnn::kKernel; ++k) {
            const int shift = k - kPad;
            const int t0 = std::max(0, -shift);
            const int t1 = std::min(length, length - shift);
            const int row = c * SpectrumCnn::kKernel + k;
            for (int t = t0; t < t1; ++t) cols(row, t) = in(c, t + shift);
        }
    }
    return cols;
}

Mat col2im(const Mat& cols, int channels) {
    const int length = static_cast<int>(cols.cols());
    Mat out = Mat::Zero(channels, length);
    for (int c = 0; c < channels; ++c) {
        for (int k = 0; k < SpectrumCnn::kKernel; ++k) {
            const int shift = k - kPad;
            const int t0 = std::max(0, -shift);
            const int t1 = std::min(length, length - shift);
            const int row = c * SpectrumCnn::kKernel + k;
            for (int t = t0; t < t1; ++t) out(c, t + shift) += cols(row, t);
        }
    }
    return out;
}

void forward(const double* params, std::span<const float> input, Cache& cache) {
    if (input.size() != static_cast<std::size_t>(kFeatureLength)) {
        throw std::invalid_argument("classifier input must have 1024 values");
    }
    const auto blocks = SpectrumCnn::layout();
    cache.pooled[0].resize(1, kFeatureLength);
    for (int t = 0; t < kFeatureLength; ++t) cache.pooled[0](0, t) = input[t];

    for (int s = 0; s < SpectrumCnn::kStages; ++s) {
        const int cin = SpectrumCnn::kChannels[s];
        const int cout = SpectrumCnn::kChannels[s + 1];
        const int length = stage_length(s);
        const ConstRowMap w(params + blocks[s].weight_offset, cout, cin * SpectrumCnn::kKernel);
        const Eigen::Map<const Eigen::VectorXd> b(params + blocks[s].bias_offset, cout);

        cache.cols[s] = im2col(cache.pooled[s]);
        Mat& a = cache.act[s];
        a.noalias() = w * cache.cols[s];
        a.colwise() += b;
        a = a.cwiseMax(0.0);

        Mat& p = cache.pooled[s + 1];
        p.resize(cout, length / 2);
        auto& which = cache.which[s];
        which.assign(static_cast<std::size_t>(cout) * (length / 2), 0);
        for (int j = 0; j < length / 2; ++j) {
            for (int o = 0; o < cout; ++o) {
                const double l = a(o, 2 * j);
                const double r = a(o, 2 * j + 1);
                const bool right = r > l;
                p(o, j) = right ? r : l;
                which[static_cast<std::size_t>(j) * cout + o] = right;
            }
        }
    }

    const Mat& last = cache.pooled[SpectrumCnn::kStages];
    const int channels = static_cast<int>(last.rows());
    const int length = static_cast<int>(last.cols());
    cache.flat.resize(flat_length());
    for (int c = 0; c < channels; ++c) {
        for (int t = 0; t < length; ++t) cache.flat[c * length + t] = last(c, t);
    }
    const auto& fc = blocks[SpectrumCnn::kStages];
    const ConstRowMap w(params + fc.weight_offset, SpectrumCnn::kClasses, flat_length());
    const Eigen::Vector2d z = w * cache.flat;
    cache.logits = {z[0] + params[fc.bias_offset], z[1] + params[fc.bias_offset + 1]};
}

std::array<double, 2> softmax(const std::array<double, 2>& z) {
    const double m = std::max(z[0], z[1]);
    const double e0 = std::exp(z[0] - m);
    const double e1 = std::exp(z[1] - m);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

// Accumulates scale * d(cross-entropy)/d(params) for one forward pass.
void backward(const double* params, const Cache& cache, int label, double scale, double* grad) {
    const auto blocks = SpectrumCnn::layout();
    const auto p = softmax(cache.logits);
    const Eigen::Vector2d dz(scale * (p[0] - (label == 0 ? 1.0 : 0.0)),
                             scale * (p[1] - (label == 1 ? 1.0 : 0.0)));

    const auto& fc = blocks[SpectrumCnn::kStages];
    RowMap gw(grad + fc.weight_offset, SpectrumCnn::kClasses, flat_length());
    gw.noalias() += dz * cache.flat.transpose();
    grad[fc.bias_offset] += dz[0];
    grad[fc.bias_offset + 1] += dz[1];
    const ConstRowMap w(params + fc.weight_offset, SpectrumCnn::kClasses, flat_length());
    const Eigen::VectorXd dflat = w.transpose() * dz;

    const int last_channels = SpectrumCnn::kChannels[SpectrumCnn::kStages];
    const int last_length = stage_length(SpectrumCnn::kStages);
    Mat dpooled(last_channels, last_length);
    for (int c = 0; c < last_channels; ++c) {
        for (int t = 0; t < last_length; ++t) dpooled(c, t) = dflat[c * last_length + t];
    }

    for (int s = SpectrumCnn::kStages - 1; s >= 0; --s) {
        const int cin = SpectrumCnn::kChannels[s];
        const int cout = SpectrumCnn::kChannels[s + 1];
        const int length = stage_length(s);
        const Mat& a = cache.act[s];
        const auto& which = cache.which[s];

        Mat da = Mat::Zero(cout, length);
        for (int j = 0; j < length / 2; ++j) {
            for (int o = 0; o < cout; ++o) {
                const int t = 2 * j + which[static_cast<std::size_t>(j) * cout + o];
                if (a(o, t) > 0.0) da(o, t) = dpooled(o, j);
            }
        }

        RowMap gw_s(grad + blocks[s].weight_offset, cout, cin * SpectrumCnn::kKernel);
        gw_s.noalias() += da * cache.cols[s].transpose();
        Eigen::Map<Eigen::VectorXd>(grad + blocks[s].bias_offset, cout) += da.rowwise().sum();

        if (s > 0) {
            const ConstRowMap w_s(params + blocks[s].weight_offset, cout,
                                  cin * SpectrumCnn::kKernel);
            const Mat dcols = w_s.transpose() * da;
            dpooled = col2im(dcols, cin);
        }
    }
}

int predicted(const std::array<double, 2>& z) { return z[1] > z[0] ? 1 : 0; }

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("model file truncated");
    return v;
}

}  // namespace

void TrainConfig::validate() const {
    std::vector<std::string> issues;
    if (epochs < 1) issues.push_back("epochs must be >= 1");
    if (batch_size < 1) issues.push_back("batch size must be >= 1");
    if (!(learning_rate > 0.0)) issues.push_back("learning rate must be > 0");
    if (!issues.empty()) {
        std::string msg = "invalid training config:";
        for (const auto& i : issues) msg += "\n  - " + i;
        throw ConfigError(msg);
    }
}

SpectrumCnn::SpectrumCnn() : params_(parameter_count(), 0.0) {}

std::array<SpectrumCnn::Block, SpectrumCnn::kStages + 1> SpectrumCnn::layout() {
    std::array<Block, kStages + 1> out{};
    std::size_t offset = 0;
    for (int s = 0; s < kStages; ++s) {
        const std::size_t weights = static_cast<std::size_t>(kChannels[s + 1]) * kChannels[s] * kKernel;
        out[s] = {offset, weights, offset + weights, static_cast<std::size_t>(kChannels[s + 1])};
        offset += weights + kChannels[s + 1];
    }
    const std::size_t fc = static_cast<std::size_t>(kClasses) * flat_length();
    out[kStages] = {offset, fc, offset + fc, static_cast<std::size_t>(kClasses)};
    return out;
}

std::size_t SpectrumCnn::parameter_count() {
    const auto last = layout()[kStages];
    return last.bias_offset + last.bias_count;
}

SpectrumCnn SpectrumCnn::initialized(std::uint64_t seed) {
    SpectrumCnn m;
    std::mt19937_64 rng(derive_seed(seed, 0x494E4954ull));
    const auto blocks = layout();
    for (int s = 0; s <= kStages; ++s) {
        const double fan_in = s < kStages ? static_cast<double>(kChannels[s] * kKernel)
                                          : static_cast<double>(flat_length());
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < blocks[s].weight_count; ++i) {
            m.params_[blocks[s].weight_offset + i] = dist(rng);
        }
    }
    return m;
}

std::array<double, 2> SpectrumCnn::logits(std::span<const float> input) const {
    Cache cache;
    forward(params_.data(), input, cache);
    return cache.logits;
}

std::array<double, 2> SpectrumCnn::probabilities(std::span<const float> input) const {
    return softmax(logits(input));
}

double SpectrumCnn::loss(std::span<const SpectrumFeature* const> batch,
                         std::vector<double>* grad) const {
    if (batch.empty()) throw std::invalid_argument("loss needs a non-empty batch");
    if (grad) grad->assign(params_.size(), 0.0);
    const double scale = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    Cache cache;
    for (const auto* f : batch) {
        if (!f->label) throw std::invalid_argument("training feature has no label");
        const int label = static_cast<int>(*f->label);
        forward(params_.data(), f->values, cache);
        const double m = std::max(cache.logits[0], cache.logits[1]);
        const double lse =
            m + std::log(std::exp(cache.logits[0] - m) + std::exp(cache.logits[1] - m));
        total += lse - cache.logits[label];
        if (grad) backward(params_.data(), cache, label, scale, grad->data());
    }
    return total * scale;
}

double accuracy(const SpectrumCnn& model, const Dataset& ds, std::size_t begin, std::size_t end) {
    end = std::min(end, ds.size());
    if (begin >= end) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = begin; i < end; ++i) {
        const auto& f = ds.features[i];
        if (f.label && predicted(model.logits(f.values)) == static_cast<int>(*f.label)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(end - begin);
}

SpectrumCnn SpectrumCnn::train(const Dataset& ds, const TrainConfig& cfg,
                               std::vector<EpochStats>* curve) {
    cfg.validate();
    const std::size_t n = ds.train_count;
    if (n == 0) throw std::invalid_argument("training split is empty");
    bool seen[2] = {false, false};
    for (std::size_t i = 0; i < n; ++i) {
        if (!ds.features[i].label) throw std::invalid_argument("training feature has no label");
        seen[static_cast<int>(*ds.features[i].label)] = true;
    }
    if (!seen[0] || !seen[1]) {
        throw std::invalid_argument("training split must contain both radar and WiGig labels");
    }

    SpectrumCnn model = initialized(cfg.seed);
    const std::size_t count = model.params_.size();
    std::vector<double> m(count, 0.0), v(count, 0.0), grad;
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    long step = 0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffler(derive_seed(cfg.seed, 0x53485546ull));
    std::vector<const SpectrumFeature*> batch;
    if (curve) curve->clear();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffler);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(&ds.features[order[i]]);
            epoch_loss += model.loss(batch, &grad) * static_cast<double>(batch.size());

            ++step;
            const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
            for (std::size_t k = 0; k < count; ++k) {
                m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * grad[k];
                v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * grad[k] * grad[k];
                model.params_[k] -=
                    cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + kEps);
            }
        }
        EpochStats stats;
        stats.loss = epoch_loss / static_cast<double>(n);
        stats.train_accuracy = accuracy(model, ds, 0, n);
        stats.validation_accuracy = n < ds.size() ? accuracy(model, ds, n, ds.size()) : 0.0;
        if (curve) curve->push_back(stats);
        model.meta_.train_accuracy = stats.train_accuracy;
        model.meta_.validation_accuracy = stats.validation_accuracy;
    }

    model.trained_ = true;
    model.meta_.seed = cfg.seed;
    model.meta_.epochs = cfg.epochs;
    model.meta_.dataset_hash = ds.hash();
    model.meta_.learning_rate = cfg.learning_rate;
    return model;
}

void SpectrumCnn::save(const std::string& path) const {
    static_assert(std::endian::native == std::endian::little);
    if (!trained_) throw std::logic_error("refusing to save an untrained model");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kVersion);
    put<std::uint32_t>(os, kFeatureLength);
    put<std::uint32_t>(os, kKernel);
    put<std::uint32_t>(os, kStages);
    for (int c : kChannels) put<std::uint32_t>(os, static_cast<std::uint32_t>(c));
    put<std::uint32_t>(os, kClasses);
    put<std::uint64_t>(os, meta_.seed);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(meta_.epochs));
    put<std::uint64_t>(os, meta_.dataset_hash);
    put<double>(os, meta_.learning_rate);
    put<double>(os, meta_.train_accuracy);
    put<double>(os, meta_.validation_accuracy);
    put<std::uint64_t>(os, params_.size());
    os.write(reinterpret_cast<const char*>(params_.data()),
             static_cast<std::streamsize>(params_.size() * sizeof(double)));
    if (!os) throw std::runtime_error("failed writing " + path);
}

SpectrumCnn SpectrumCnn::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        throw std::runtime_error(path + " is not a radar2 model");
    }
    if (get<std::uint32_t>(is) != kVersion) throw std::runtime_error("unsupported model version");
    bool match = get<std::uint32_t>(is) == static_cast<std::uint32_t>(kFeatureLength);
    match = match && get<std::uint32_t>(is) == static_cast<std::uint32_t>(kKernel);
    match = match && get<std::uint32_t>(is) == static_cast<std::uint32_t>(kStages);
    for (int c : kChannels) match = match && get<std::uint32_t>(is) == static_cast<std::uint32_t>(c);
    match = match && get<std::uint32_t>(is) == static_cast<std::uint32_t>(kClasses);
    if (!match) throw std::runtime_error(path + ": model architecture does not match this build");

    SpectrumCnn model;
    model.meta_.seed = get<std::uint64_t>(is);
    model.meta_.epochs = static_cast<int>(get<std::uint32_t>(is));
    model.meta_.dataset_hash = get<std::uint64_t>(is);
    model.meta_.learning_rate = get<double>(is);
    model.meta_.train_accuracy = get<double>(is);
    model.meta_.validation_accuracy = get<double>(is);
    if (get<std::uint64_t>(is) != model.params_.size()) {
        throw std::runtime_error(path + ": parameter count mismatch");
    }
    is.read(reinterpret_cast<char*>(model.params_.data()),
            static_cast<std::streamsize>(model.params_.size() * sizeof(double)));
    if (!is) throw std::runtime_error("model file truncated");
    model.trained_ = true;
    return model;
}

Classification classify(const SpectrumCnn& model, const SpectrumFeature& feature) {
    if (!model.trained()) throw std::logic_error("classifier model has not been trained");
    Classification out;
    out.probabilities = model.probabilities(feature.values);
    out.label = out.probabilities[1] > out.probabilities[0] ? SignalClass::WiGig : SignalClass::Radar;
    out.probability = out.probabilities[static_cast<int>(out.label)];
    out.low_confidence = out.probability < 0.6;
    return out;
}

}  // namespace radar2
