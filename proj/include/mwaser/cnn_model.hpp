#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mwaser/nn.hpp"
#include "mwaser/util.hpp"

namespace mwaser::nn {

constexpr uint32_t kModelFormatVersion = 1;

struct ConvBlockSpec {
    size_t kernels;
    size_t ksize;
};

// Architecture of the classifier: four conv->batchnorm->relu->maxpool blocks
// with (32,7x7), (64,5x5), (128,3x3), (256,1x1), then dense 128 and 32 with
// relu+dropout(0.23) each, and a final dense layer to the class logits.
struct ModelConfig {
    size_t classes = 4;
    size_t input_h = 200;
    size_t input_w = 34;
    std::vector<ConvBlockSpec> conv_blocks{{32, 7}, {64, 5}, {128, 3}, {256, 1}};
    std::vector<size_t> dense_units{128, 32};
    double dropout_p = 0.23;
    uint64_t seed = 42;
};

template <typename T>
class CnnModel {
public:
    explicit CnnModel(ModelConfig config) : config_(std::move(config)), rng_(config_.seed) {
        build();
        init_params();
    }

    const ModelConfig& config() const { return config_; }
    size_t classes() const { return config_.classes; }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) {
        check_input(x);
        Tensor<T> h = x;
        for (auto& layer : layers_) h = layer->forward(h, mode, &rng_);
        return h;
    }

    // Forward in train mode, cross-entropy loss, full backward pass. Fills
    // every parameter gradient; returns (loss, correct prediction count).
    std::pair<double, size_t> compute_gradients(const Tensor<T>& x, const std::vector<int>& labels) {
        const Tensor<T> logits = forward(x, Mode::Train);
        const Tensor<T> targets = onehot(labels);
        auto [loss, grad] = softmax_cross_entropy(logits, targets);
        zero_grads();
        Tensor<T> g = grad;
        for (size_t i = layers_.size(); i > 0; --i) g = layers_[i - 1]->backward(g);
        return {loss, count_correct(logits, labels)};
    }

    std::pair<double, size_t> train_batch(const Tensor<T>& x, const std::vector<int>& labels,
                                          const RmspropConfig& opt) {
        auto result = compute_gradients(x, labels);
        auto refs = params();
        for (size_t i = 0; i < refs.size(); ++i)
            rmsprop_step(*refs[i].value, *refs[i].grad, opt_state_[i], opt);
        return result;
    }

    std::vector<int> predict(const Tensor<T>& x) {
        const Tensor<T> logits = forward(x, Mode::Infer);
        const size_t B = logits.dim(0), C = logits.dim(1);
        std::vector<int> out(B);
        for (size_t b = 0; b < B; ++b) {
            size_t best = 0;
            for (size_t c = 1; c < C; ++c)
                if (logits[b * C + c] > logits[b * C + best]) best = c;
            out[b] = int(best);
        }
        return out;
    }

    Tensor<T> predict_proba(const Tensor<T>& x) { return softmax(forward(x, Mode::Infer)); }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> refs;
        for (auto& layer : layers_)
            for (auto& p : layer->params()) refs.push_back(p);
        return refs;
    }

    size_t param_count() {
        size_t n = 0;
        for (auto& p : params()) n += p.value->size();
        return n;
    }

    void zero_grads() {
        for (auto& p : params()) p.grad->fill(T(0));
    }

    void set_threads(unsigned n) {
        threads_ = n;
        for (auto& layer : layers_) layer->set_threads(n);
    }

    std::mt19937_64& rng() { return rng_; }
    std::vector<std::unique_ptr<Layer<T>>>& layers() { return layers_; }

    void freeze_batchnorm_stats(bool frozen) {
        for (auto& layer : layers_)
            if (auto* bn = dynamic_cast<BatchNorm<T>*>(layer.get())) bn->freeze_stats(frozen);
    }

    // Checkpoint layout, little-endian: magic "MWAM", version u32, classes
    // u32, input_h u32, input_w u32, seed u64, layer count u32, then one
    // descriptor per layer (kind u32 + kind-specific u32/f32 fields), then
    // all parameters and batchnorm running statistics as f32 in declaration
    // order (conv: weights, bias; batchnorm: gamma, beta, running mean,
    // running var; dense: weights, bias).
    void save(const std::filesystem::path& path) {
        std::filesystem::path tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw DataError("cannot write model checkpoint: " + path.string());
            out.write("MWAM", 4);
            util::write_le<uint32_t>(out, kModelFormatVersion);
            util::write_le<uint32_t>(out, uint32_t(config_.classes));
            util::write_le<uint32_t>(out, uint32_t(config_.input_h));
            util::write_le<uint32_t>(out, uint32_t(config_.input_w));
            util::write_le<uint64_t>(out, config_.seed);
            util::write_le<uint32_t>(out, uint32_t(layers_.size()));
            for (auto& layer : layers_) write_descriptor(out, *layer);
            for (auto& layer : layers_)
                for (Tensor<T>* t : serialized_tensors(*layer))
                    for (const T& v : t->data) util::write_le<float>(out, float(v));
            if (!out) throw DataError("failed writing model checkpoint: " + path.string());
        }
        std::filesystem::rename(tmp, path);
    }

    static CnnModel load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open model checkpoint: " + path.string());
        char magic[4];
        in.read(magic, 4);
        if (!in || std::memcmp(magic, "MWAM", 4) != 0)
            throw DataError("bad model checkpoint magic: " + path.string());
        const auto version = util::read_le<uint32_t>(in);
        if (version != kModelFormatVersion)
            throw DataError("unsupported model checkpoint version " + std::to_string(version));

        ModelConfig cfg;
        cfg.classes = util::read_le<uint32_t>(in);
        cfg.input_h = util::read_le<uint32_t>(in);
        cfg.input_w = util::read_le<uint32_t>(in);
        cfg.seed = util::read_le<uint64_t>(in);
        const auto n_layers = util::read_le<uint32_t>(in);

        cfg.conv_blocks.clear();
        cfg.dense_units.clear();
        std::vector<uint32_t> kinds;
        std::vector<std::vector<double>> fields;
        size_t dense_count = 0;
        for (uint32_t i = 0; i < n_layers; ++i) {
            const auto kind = util::read_le<uint32_t>(in);
            kinds.push_back(kind);
            std::vector<double> f;
            switch (kind) {
                case 1: {  // conv: ksize, cin, cout
                    f = {double(util::read_le<uint32_t>(in)), double(util::read_le<uint32_t>(in)),
                         double(util::read_le<uint32_t>(in))};
                    cfg.conv_blocks.push_back({size_t(f[2]), size_t(f[0])});
                    break;
                }
                case 2:  // batchnorm: channels
                    f = {double(util::read_le<uint32_t>(in))};
                    break;
                case 6: {  // dense: in, out
                    f = {double(util::read_le<uint32_t>(in)), double(util::read_le<uint32_t>(in))};
                    ++dense_count;
                    break;
                }
                case 7:  // dropout: p
                    f = {double(util::read_le<float>(in))};
                    cfg.dropout_p = f[0];
                    break;
                default:
                    break;  // relu/maxpool/flatten carry no fields
            }
            fields.push_back(std::move(f));
        }
        if (!in) throw DataError("truncated model checkpoint: " + path.string());
        // the final dense layer maps to the classes; the rest are hidden units
        size_t seen = 0;
        for (uint32_t i = 0; i < n_layers; ++i) {
            if (kinds[i] == 6 && ++seen < dense_count) cfg.dense_units.push_back(size_t(fields[i][1]));
        }

        CnnModel model(cfg);
        if (model.layers_.size() != n_layers)
            throw DataError("model checkpoint descriptor does not match architecture");
        for (auto& layer : model.layers_)
            for (Tensor<T>* t : model.serialized_tensors(*layer))
                for (T& v : t->data) v = T(util::read_le<float>(in));
        if (!in) throw DataError("truncated model checkpoint parameters: " + path.string());
        return model;
    }

private:
    void build() {
        if (config_.classes < 2) throw std::invalid_argument("CnnModel: need at least 2 classes");
        size_t h = config_.input_h, w = config_.input_w, c = 1;
        for (const auto& block : config_.conv_blocks) {
            layers_.push_back(std::make_unique<Conv2d<T>>(block.ksize, c, block.kernels));
            layers_.push_back(std::make_unique<BatchNorm<T>>(block.kernels));
            layers_.push_back(std::make_unique<Relu<T>>());
            layers_.push_back(std::make_unique<MaxPool2<T>>());
            c = block.kernels;
            if (h < 2 || w < 2)
                throw std::invalid_argument("CnnModel: input too small for the pooling chain");
            h /= 2;
            w /= 2;
        }
        layers_.push_back(std::make_unique<Flatten<T>>());
        size_t units = h * w * c;
        for (size_t dense : config_.dense_units) {
            layers_.push_back(std::make_unique<Dense<T>>(units, dense));
            layers_.push_back(std::make_unique<Relu<T>>());
            layers_.push_back(std::make_unique<Dropout<T>>(config_.dropout_p));
            units = dense;
        }
        layers_.push_back(std::make_unique<Dense<T>>(units, config_.classes));

        for (auto& p : params()) opt_state_.push_back(Tensor<T>(p.value->shape));
    }

    void init_params() {
        for (auto& layer : layers_) {
            if (auto* conv = dynamic_cast<Conv2d<T>*>(layer.get()))
                conv->init_he_uniform(rng_);
            else if (auto* dense = dynamic_cast<Dense<T>*>(layer.get()))
                dense->init_he_uniform(rng_);
        }
    }

    void check_input(const Tensor<T>& x) const {
        if (x.shape.size() != 4 || x.dim(1) != config_.input_h || x.dim(2) != config_.input_w ||
            x.dim(3) != 1)
            throw std::invalid_argument("CnnModel: expected input [B," +
                                        std::to_string(config_.input_h) + "," +
                                        std::to_string(config_.input_w) + ",1]");
    }

    Tensor<T> onehot(const std::vector<int>& labels) const {
        Tensor<T> y({labels.size(), config_.classes});
        for (size_t b = 0; b < labels.size(); ++b) {
            if (labels[b] < 0 || size_t(labels[b]) >= config_.classes)
                throw std::invalid_argument("CnnModel: label out of range");
            y[b * config_.classes + size_t(labels[b])] = T(1);
        }
        return y;
    }

    static size_t count_correct(const Tensor<T>& logits, const std::vector<int>& labels) {
        const size_t B = logits.dim(0), C = logits.dim(1);
        size_t correct = 0;
        for (size_t b = 0; b < B; ++b) {
            size_t best = 0;
            for (size_t c = 1; c < C; ++c)
                if (logits[b * C + c] > logits[b * C + best]) best = c;
            if (int(best) == labels[b]) ++correct;
        }
        return correct;
    }

    void write_descriptor(std::ostream& out, Layer<T>& layer) {
        if (auto* conv = dynamic_cast<Conv2d<T>*>(&layer)) {
            util::write_le<uint32_t>(out, 1);
            util::write_le<uint32_t>(out, uint32_t(conv->ksize()));
            util::write_le<uint32_t>(out, uint32_t(conv->cin()));
            util::write_le<uint32_t>(out, uint32_t(conv->cout()));
        } else if (auto* bn = dynamic_cast<BatchNorm<T>*>(&layer)) {
            util::write_le<uint32_t>(out, 2);
            util::write_le<uint32_t>(out, uint32_t(bn->channels()));
        } else if (dynamic_cast<Relu<T>*>(&layer)) {
            util::write_le<uint32_t>(out, 3);
        } else if (dynamic_cast<MaxPool2<T>*>(&layer)) {
            util::write_le<uint32_t>(out, 4);
        } else if (dynamic_cast<Flatten<T>*>(&layer)) {
            util::write_le<uint32_t>(out, 5);
        } else if (auto* dense = dynamic_cast<Dense<T>*>(&layer)) {
            util::write_le<uint32_t>(out, 6);
            util::write_le<uint32_t>(out, uint32_t(dense->in_features()));
            util::write_le<uint32_t>(out, uint32_t(dense->out_features()));
        } else if (auto* drop = dynamic_cast<Dropout<T>*>(&layer)) {
            util::write_le<uint32_t>(out, 7);
            util::write_le<float>(out, float(drop->p()));
        } else {
            throw std::logic_error("unknown layer kind in checkpoint writer");
        }
    }

    std::vector<Tensor<T>*> serialized_tensors(Layer<T>& layer) {
        std::vector<Tensor<T>*> out;
        for (auto& p : layer.params()) out.push_back(p.value);
        if (auto* bn = dynamic_cast<BatchNorm<T>*>(&layer)) {
            out.push_back(&bn->running_mean());
            out.push_back(&bn->running_var());
        }
        return out;
    }

    ModelConfig config_;
    std::mt19937_64 rng_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    std::vector<Tensor<T>> opt_state_;
    unsigned threads_ = 1;
};

}  // namespace mwaser::nn
