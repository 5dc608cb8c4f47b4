#ifndef AIRTOPO_CLASSIFIER_HPP
#define AIRTOPO_CLASSIFIER_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "airtopo/core.hpp"
#include "airtopo/profile.hpp"
#include "airtopo/rng.hpp"

namespace airtopo {

// Three-class 1D CNN over intensity profiles: three conv blocks
// (same-padded conv, tanh, max-pool 2) with 16/32/64 channels, global
// average pooling and a dense head. Templated on the scalar type so the
// float production path and the double gradient-check path share one
// implementation.

template <typename T>
class Cnn1d {
public:
    static constexpr int kInputLen = 64;
    static constexpr int kNumClasses = 3;
    static constexpr int kKernel = 5;
    static constexpr int kPad = kKernel / 2;
    static constexpr std::array<int, 3> kChannels{16, 32, 64};
    static constexpr std::array<int, 3> kStageLen{64, 32, 16}; // conv input length per stage

    struct Cache {
        std::array<T, kInputLen> input{};
        std::array<std::vector<T>, 3> act;        // post-tanh, out_ch x len
        std::array<std::vector<T>, 3> pooled;     // out_ch x len/2
        std::array<std::vector<std::uint8_t>, 3> pool_arg; // winning offset (0 or 1)
        std::array<T, kChannels[2]> gap{};
        std::array<T, kNumClasses> logits{};
    };

    // Parameter blocks, in storage order.
    struct Block {
        const char* name;
        std::size_t offset;
        std::size_t size;
    };

    Cnn1d() : params_(param_count(), T(0)) {}

    static constexpr int stage_in_channels(int s) { return s == 0 ? 1 : kChannels[static_cast<std::size_t>(s - 1)]; }

    static constexpr std::size_t param_count() {
        std::size_t n = 0;
        for (int s = 0; s < 3; ++s) {
            n += static_cast<std::size_t>(kChannels[static_cast<std::size_t>(s)]) * stage_in_channels(s) * kKernel;
            n += static_cast<std::size_t>(kChannels[static_cast<std::size_t>(s)]);
        }
        n += static_cast<std::size_t>(kNumClasses) * kChannels[2];
        n += kNumClasses;
        return n;
    }

    static const std::array<Block, 8>& blocks() {
        static const std::array<Block, 8> b = [] {
            std::array<Block, 8> blocks{};
            const char* names[8] = {"conv1.w", "conv1.b", "conv2.w", "conv2.b",
                                    "conv3.w", "conv3.b", "dense.w", "dense.b"};
            std::size_t off = 0;
            int bi = 0;
            for (int s = 0; s < 3; ++s) {
                const std::size_t wsize =
                    static_cast<std::size_t>(kChannels[static_cast<std::size_t>(s)]) * stage_in_channels(s) * kKernel;
                blocks[bi] = {names[bi], off, wsize};
                off += wsize;
                ++bi;
                const std::size_t bsize = static_cast<std::size_t>(kChannels[static_cast<std::size_t>(s)]);
                blocks[bi] = {names[bi], off, bsize};
                off += bsize;
                ++bi;
            }
            blocks[6] = {names[6], off, static_cast<std::size_t>(kNumClasses) * kChannels[2]};
            off += blocks[6].size;
            blocks[7] = {names[7], off, static_cast<std::size_t>(kNumClasses)};
            return blocks;
        }();
        return b;
    }

    std::vector<T>& params() { return params_; }
    const std::vector<T>& params() const { return params_; }

    std::array<T, kNumClasses> forward(const T* input, Cache* cache = nullptr) const {
        Cache local;
        Cache& c = cache ? *cache : local;
        std::copy(input, input + kInputLen, c.input.begin());

        const T* x = c.input.data();
        int in_ch = 1;
        for (int s = 0; s < 3; ++s) {
            const int out_ch = kChannels[static_cast<std::size_t>(s)];
            const int len = kStageLen[static_cast<std::size_t>(s)];
            const T* w = params_.data() + blocks()[2 * s].offset;
            const T* b = params_.data() + blocks()[2 * s + 1].offset;

            auto& act = c.act[static_cast<std::size_t>(s)];
            act.assign(static_cast<std::size_t>(out_ch) * len, T(0));
            for (int o = 0; o < out_ch; ++o) {
                for (int i = 0; i < len; ++i) {
                    T acc = b[o];
                    for (int ci = 0; ci < in_ch; ++ci) {
                        const T* wrow = w + (static_cast<std::size_t>(o) * in_ch + ci) * kKernel;
                        const T* xrow = x + static_cast<std::size_t>(ci) * len;
                        for (int k = 0; k < kKernel; ++k) {
                            const int j = i + k - kPad;
                            if (j >= 0 && j < len) acc += wrow[k] * xrow[j];
                        }
                    }
                    act[static_cast<std::size_t>(o) * len + i] = std::tanh(acc);
                }
            }

            const int plen = len / 2;
            auto& pooled = c.pooled[static_cast<std::size_t>(s)];
            auto& arg = c.pool_arg[static_cast<std::size_t>(s)];
            pooled.assign(static_cast<std::size_t>(out_ch) * plen, T(0));
            arg.assign(static_cast<std::size_t>(out_ch) * plen, 0);
            for (int o = 0; o < out_ch; ++o) {
                for (int j = 0; j < plen; ++j) {
                    const T a0 = act[static_cast<std::size_t>(o) * len + 2 * j];
                    const T a1 = act[static_cast<std::size_t>(o) * len + 2 * j + 1];
                    const bool second = a1 > a0;
                    pooled[static_cast<std::size_t>(o) * plen + j] = second ? a1 : a0;
                    arg[static_cast<std::size_t>(o) * plen + j] = second ? 1 : 0;
                }
            }
            x = pooled.data();
            in_ch = out_ch;
        }

        // global average pool over the final length-8 maps
        const int glen = kStageLen[2] / 2;
        for (int ch = 0; ch < kChannels[2]; ++ch) {
            T acc = T(0);
            for (int j = 0; j < glen; ++j)
                acc += c.pooled[2][static_cast<std::size_t>(ch) * glen + j];
            c.gap[static_cast<std::size_t>(ch)] = acc / static_cast<T>(glen);
        }

        const T* dw = params_.data() + blocks()[6].offset;
        const T* db = params_.data() + blocks()[7].offset;
        for (int t = 0; t < kNumClasses; ++t) {
            T acc = db[t];
            for (int ch = 0; ch < kChannels[2]; ++ch)
                acc += dw[static_cast<std::size_t>(t) * kChannels[2] + ch] * c.gap[static_cast<std::size_t>(ch)];
            c.logits[static_cast<std::size_t>(t)] = acc;
        }
        return c.logits;
    }

    // Accumulates parameter gradients for one sample into `grad` (same flat
    // layout as params()). `dlogits` is dLoss/dlogits.
    void backward(const Cache& c, const std::array<T, kNumClasses>& dlogits, std::vector<T>& grad) const {
        const int glen = kStageLen[2] / 2;
        const T* dw = params_.data() + blocks()[6].offset;
        T* gdw = grad.data() + blocks()[6].offset;
        T* gdb = grad.data() + blocks()[7].offset;

        std::array<T, kChannels[2]> dgap{};
        for (int t = 0; t < kNumClasses; ++t) {
            gdb[t] += dlogits[static_cast<std::size_t>(t)];
            for (int ch = 0; ch < kChannels[2]; ++ch) {
                gdw[static_cast<std::size_t>(t) * kChannels[2] + ch] +=
                    dlogits[static_cast<std::size_t>(t)] * c.gap[static_cast<std::size_t>(ch)];
                dgap[static_cast<std::size_t>(ch)] +=
                    dlogits[static_cast<std::size_t>(t)] * dw[static_cast<std::size_t>(t) * kChannels[2] + ch];
            }
        }

        // gradient w.r.t. the last pooled maps
        std::vector<T> dpooled(static_cast<std::size_t>(kChannels[2]) * glen);
        for (int ch = 0; ch < kChannels[2]; ++ch)
            for (int j = 0; j < glen; ++j)
                dpooled[static_cast<std::size_t>(ch) * glen + j] = dgap[static_cast<std::size_t>(ch)] / static_cast<T>(glen);

        for (int s = 2; s >= 0; --s) {
            const int out_ch = kChannels[static_cast<std::size_t>(s)];
            const int len = kStageLen[static_cast<std::size_t>(s)];
            const int plen = len / 2;
            const int in_ch = stage_in_channels(s);
            const auto& act = c.act[static_cast<std::size_t>(s)];
            const auto& arg = c.pool_arg[static_cast<std::size_t>(s)];
            const T* w = params_.data() + blocks()[2 * s].offset;
            T* gw = grad.data() + blocks()[2 * s].offset;
            T* gb = grad.data() + blocks()[2 * s + 1].offset;

            // un-pool, then through tanh
            std::vector<T> dz(static_cast<std::size_t>(out_ch) * len, T(0));
            for (int o = 0; o < out_ch; ++o) {
                for (int j = 0; j < plen; ++j) {
                    const std::size_t pi = static_cast<std::size_t>(o) * plen + j;
                    const std::size_t ai = static_cast<std::size_t>(o) * len + 2 * j + arg[pi];
                    const T a = act[ai];
                    dz[ai] = dpooled[pi] * (T(1) - a * a);
                }
            }

            const T* x = (s == 0) ? c.input.data() : c.pooled[static_cast<std::size_t>(s - 1)].data();

            std::vector<T> dx;
            if (s > 0) dx.assign(static_cast<std::size_t>(in_ch) * len, T(0));

            for (int o = 0; o < out_ch; ++o) {
                const T* dzrow = dz.data() + static_cast<std::size_t>(o) * len;
                T acc_b = T(0);
                for (int i = 0; i < len; ++i) acc_b += dzrow[i];
                gb[o] += acc_b;
                for (int ci = 0; ci < in_ch; ++ci) {
                    T* gwrow = gw + (static_cast<std::size_t>(o) * in_ch + ci) * kKernel;
                    const T* wrow = w + (static_cast<std::size_t>(o) * in_ch + ci) * kKernel;
                    const T* xrow = x + static_cast<std::size_t>(ci) * len;
                    for (int k = 0; k < kKernel; ++k) {
                        T acc = T(0);
                        for (int i = 0; i < len; ++i) {
                            const int j = i + k - kPad;
                            if (j >= 0 && j < len) acc += dzrow[i] * xrow[j];
                        }
                        gwrow[k] += acc;
                        if (s > 0) {
                            T* dxrow = dx.data() + static_cast<std::size_t>(ci) * len;
                            for (int i = 0; i < len; ++i) {
                                const int j = i + k - kPad;
                                if (j >= 0 && j < len) dxrow[j] += dzrow[i] * wrow[k];
                            }
                        }
                    }
                }
            }

            if (s > 0) dpooled = std::move(dx);
        }
    }

private:
    std::vector<T> params_;
};

// Numerically stable softmax cross-entropy. Returns the loss and fills
// dLoss/dlogits.
template <typename T>
inline T softmax_cross_entropy(const std::array<T, 3>& logits, int label, std::array<T, 3>& dlogits) {
    const T m = std::max(logits[0], std::max(logits[1], logits[2]));
    T z = T(0);
    std::array<T, 3> e{};
    for (int i = 0; i < 3; ++i) {
        e[static_cast<std::size_t>(i)] = std::exp(logits[static_cast<std::size_t>(i)] - m);
        z += e[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < 3; ++i) {
        const T p = e[static_cast<std::size_t>(i)] / z;
        dlogits[static_cast<std::size_t>(i)] = p - (i == label ? T(1) : T(0));
    }
    return -(logits[static_cast<std::size_t>(label)] - m - std::log(z));
}

inline std::array<double, 3> softmax_probabilities(const std::array<float, 3>& logits) {
    const double m = std::max({static_cast<double>(logits[0]), static_cast<double>(logits[1]),
                               static_cast<double>(logits[2])});
    std::array<double, 3> e{};
    double z = 0.0;
    for (int i = 0; i < 3; ++i) {
        e[static_cast<std::size_t>(i)] = std::exp(static_cast<double>(logits[static_cast<std::size_t>(i)]) - m);
        z += e[static_cast<std::size_t>(i)];
    }
    for (auto& v : e) v /= z;
    return e;
}

// He-style initialization: weights ~ N(0, sqrt(2 / fan_in)), biases 0. The
// draw order (conv1.w, conv2.w, conv3.w, dense.w) is part of the
// reproducibility contract.
template <typename T>
inline void he_init(Cnn1d<T>& net, Rng& rng) {
    auto& p = net.params();
    std::fill(p.begin(), p.end(), T(0));
    for (int s = 0; s < 3; ++s) {
        const auto& blk = Cnn1d<T>::blocks()[2 * s];
        const double fan_in = Cnn1d<T>::stage_in_channels(s) * Cnn1d<T>::kKernel;
        const double sd = std::sqrt(2.0 / fan_in);
        for (std::size_t i = 0; i < blk.size; ++i)
            p[blk.offset + i] = static_cast<T>(rng.normal(0.0, sd));
    }
    const auto& dblk = Cnn1d<T>::blocks()[6];
    const double sd = std::sqrt(2.0 / Cnn1d<T>::kChannels[2]);
    for (std::size_t i = 0; i < dblk.size; ++i)
        p[dblk.offset + i] = static_cast<T>(rng.normal(0.0, sd));
}

// ---------------------------------------------------------------------------
// Model, training, inference, serialization
// ---------------------------------------------------------------------------

struct TrainHyper {
    double lr = 0.01;
    double momentum = 0.9;
    int batch = 32;
    int epochs = 20;
    std::uint64_t seed = 0;
    double val_fraction = 0.1;
    // when > 0, training stops at the first epoch whose validation accuracy
    // reaches the target
    double target_val_accuracy = 0.0;
};

struct ClassifierModel {
    Cnn1d<float> net;
    TrainHyper hyper;

    friend bool operator==(const ClassifierModel& a, const ClassifierModel& b) {
        return a.net.params() == b.net.params() && a.hyper.lr == b.hyper.lr &&
               a.hyper.momentum == b.hyper.momentum && a.hyper.batch == b.hyper.batch &&
               a.hyper.epochs == b.hyper.epochs && a.hyper.seed == b.hyper.seed &&
               a.hyper.val_fraction == b.hyper.val_fraction &&
               a.hyper.target_val_accuracy == b.hyper.target_val_accuracy;
    }
};

struct Classification {
    ClassLabel label;
    std::array<double, 3> probabilities;
};

// Argmax of the softmax; ties go to the earlier class in
// (true_airway, parenchyma, obstruction) order.
inline Classification classify(const ClassifierModel& model, const IntensityProfile& profile) {
    const auto logits = model.net.forward(profile.samples.data());
    int best = 0;
    for (int i = 1; i < 3; ++i)
        if (logits[static_cast<std::size_t>(i)] > logits[static_cast<std::size_t>(best)]) best = i;
    return {static_cast<ClassLabel>(best), softmax_probabilities(logits)};
}

struct TrainResult {
    ClassifierModel model;
    std::vector<double> train_loss;   // per epoch, mean over training samples
    std::vector<double> val_loss;     // per epoch (empty when no validation split)
    std::vector<double> val_accuracy; // per epoch
    int epochs_run = 0;
};

// Mini-batch SGD with momentum on mean cross-entropy. Single-threaded and
// bit-reproducible for a given (dataset, hyper) pair.
inline TrainResult train(const TrainingSet& data, const TrainHyper& hyper) {
    int class_counts[3] = {0, 0, 0};
    for (const auto l : data.labels) ++class_counts[static_cast<int>(l)];
    if (class_counts[0] < 1 || class_counts[1] < 1 || class_counts[2] < 1)
        throw ContractError("train: need at least one sample per class");

    Rng rng(hyper.seed);
    TrainResult result;
    result.model.hyper = hyper;
    he_init(result.model.net, rng);

    const std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    const auto val_n = static_cast<std::size_t>(static_cast<double>(n) * hyper.val_fraction);
    std::vector<std::size_t> val_idx(order.end() - static_cast<std::ptrdiff_t>(val_n), order.end());
    std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(val_n));
    if (train_idx.empty())
        throw ContractError("train: validation split leaves no training samples");

    auto& net = result.model.net;
    std::vector<float> grad(Cnn1d<float>::param_count(), 0.0f);
    std::vector<float> velocity(Cnn1d<float>::param_count(), 0.0f);
    typename Cnn1d<float>::Cache cache;

    const auto lr = static_cast<float>(hyper.lr);
    const auto mu = static_cast<float>(hyper.momentum);

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(train_idx);
        double epoch_loss = 0.0;

        for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(hyper.batch)) {
            const std::size_t stop = std::min(train_idx.size(), start + static_cast<std::size_t>(hyper.batch));
            const auto bn = static_cast<float>(stop - start);
            std::fill(grad.begin(), grad.end(), 0.0f);
            double batch_loss = 0.0;

            for (std::size_t bi = start; bi < stop; ++bi) {
                const std::size_t si = train_idx[bi];
                const auto logits = net.forward(data.profiles[si].samples.data(), &cache);
                std::array<float, 3> dlogits{};
                batch_loss += softmax_cross_entropy(logits, static_cast<int>(data.labels[si]), dlogits);
                for (auto& d : dlogits) d /= bn;
                net.backward(cache, dlogits, grad);
            }
            if (!std::isfinite(batch_loss))
                throw DivergenceError("train: non-finite loss", epoch);
            epoch_loss += batch_loss;

            auto& p = net.params();
            for (std::size_t i = 0; i < p.size(); ++i) {
                velocity[i] = mu * velocity[i] - lr * grad[i];
                p[i] += velocity[i];
            }
        }
        result.train_loss.push_back(epoch_loss / static_cast<double>(train_idx.size()));
        result.epochs_run = epoch + 1;

        if (!val_idx.empty()) {
            double vloss = 0.0;
            std::size_t correct = 0;
            for (const std::size_t si : val_idx) {
                const auto logits = net.forward(data.profiles[si].samples.data());
                std::array<float, 3> dl{};
                vloss += softmax_cross_entropy(logits, static_cast<int>(data.labels[si]), dl);
                int best = 0;
                for (int t = 1; t < 3; ++t)
                    if (logits[static_cast<std::size_t>(t)] > logits[static_cast<std::size_t>(best)]) best = t;
                if (best == static_cast<int>(data.labels[si])) ++correct;
            }
            result.val_loss.push_back(vloss / static_cast<double>(val_idx.size()));
            result.val_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(val_idx.size()));
            if (hyper.target_val_accuracy > 0.0 &&
                result.val_accuracy.back() >= hyper.target_val_accuracy)
                break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Model file format: magic "RPAR", version, architecture, hyperparameters,
// then one little-endian float32 blob per parameter block.
// ---------------------------------------------------------------------------

namespace model_io {

constexpr std::uint32_t kVersion = 1;

template <typename V>
void put(std::ofstream& out, const V& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::ifstream& in, const std::string& path) {
    V v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!in)
        throw FormatError(path + ": truncated model file");
    return v;
}

} // namespace model_io

inline void save_model(const ClassifierModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError(path + ": cannot open for writing");
    out.write("RPAR", 4);
    model_io::put(out, model_io::kVersion);
    model_io::put(out, static_cast<std::uint32_t>(Cnn1d<float>::kInputLen));
    model_io::put(out, static_cast<std::uint32_t>(Cnn1d<float>::kNumClasses));
    model_io::put(out, static_cast<std::uint32_t>(Cnn1d<float>::kKernel));
    for (int s = 0; s < 3; ++s)
        model_io::put(out, static_cast<std::uint32_t>(Cnn1d<float>::kChannels[static_cast<std::size_t>(s)]));
    model_io::put(out, model.hyper.lr);
    model_io::put(out, model.hyper.momentum);
    model_io::put(out, static_cast<std::int32_t>(model.hyper.batch));
    model_io::put(out, static_cast<std::int32_t>(model.hyper.epochs));
    model_io::put(out, model.hyper.seed);
    model_io::put(out, model.hyper.val_fraction);
    model_io::put(out, model.hyper.target_val_accuracy);

    for (const auto& blk : Cnn1d<float>::blocks()) {
        model_io::put(out, static_cast<std::uint64_t>(blk.size));
        out.write(reinterpret_cast<const char*>(model.net.params().data() + blk.offset),
                  static_cast<std::streamsize>(blk.size * sizeof(float)));
    }
    if (!out)
        throw IoError(path + ": write failed");
}

inline ClassifierModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(path + ": cannot open");
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "RPAR")
        throw FormatError(path + ": bad magic, not a classifier model file");
    const auto version = model_io::get<std::uint32_t>(in, path);
    if (version != model_io::kVersion)
        throw FormatError(path + ": unsupported model format version " + std::to_string(version));

    const auto input_len = model_io::get<std::uint32_t>(in, path);
    const auto num_classes = model_io::get<std::uint32_t>(in, path);
    const auto kernel = model_io::get<std::uint32_t>(in, path);
    std::uint32_t channels[3];
    for (auto& c : channels) c = model_io::get<std::uint32_t>(in, path);
    if (input_len != Cnn1d<float>::kInputLen || num_classes != Cnn1d<float>::kNumClasses ||
        kernel != Cnn1d<float>::kKernel || channels[0] != Cnn1d<float>::kChannels[0] ||
        channels[1] != Cnn1d<float>::kChannels[1] || channels[2] != Cnn1d<float>::kChannels[2])
        throw FormatError(path + ": architecture in file does not match this build");

    ClassifierModel model;
    model.hyper.lr = model_io::get<double>(in, path);
    model.hyper.momentum = model_io::get<double>(in, path);
    model.hyper.batch = model_io::get<std::int32_t>(in, path);
    model.hyper.epochs = model_io::get<std::int32_t>(in, path);
    model.hyper.seed = model_io::get<std::uint64_t>(in, path);
    model.hyper.val_fraction = model_io::get<double>(in, path);
    model.hyper.target_val_accuracy = model_io::get<double>(in, path);

    for (const auto& blk : Cnn1d<float>::blocks()) {
        const auto count = model_io::get<std::uint64_t>(in, path);
        if (count != blk.size)
            throw FormatError(path + ": parameter block " + blk.name + " has wrong size");
        in.read(reinterpret_cast<char*>(model.net.params().data() + blk.offset),
                static_cast<std::streamsize>(blk.size * sizeof(float)));
        if (!in)
            throw FormatError(path + ": truncated model file");
    }
    return model;
}

} // namespace airtopo

#endif // AIRTOPO_CLASSIFIER_HPP
