#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mwaser/tensor.hpp"
#include "mwaser/util.hpp"

namespace mwaser::nn {

enum class Mode { Train, Infer };

template <typename T>
struct ParamRef {
    Tensor<T>* value;
    Tensor<T>* grad;
    std::string name;
};

struct RmspropConfig {
    double lr = 0.0004;
    double rho = 0.9;
    double eps = 1e-7;
};

// v <- rho*v + (1-rho)*g^2; p <- p - lr*g/(sqrt(v)+eps)
template <typename T>
void rmsprop_step(Tensor<T>& param, const Tensor<T>& grad, Tensor<T>& v,
                  const RmspropConfig& cfg) {
    if (!param.same_shape(grad) || !param.same_shape(v))
        throw std::invalid_argument("rmsprop_step: shape mismatch");
    const T rho = T(cfg.rho);
    const T one_minus_rho = T(1.0 - cfg.rho);
    const T lr = T(cfg.lr);
    const T eps = T(cfg.eps);
    for (size_t i = 0; i < param.size(); ++i) {
        const T g = grad[i];
        v[i] = rho * v[i] + one_minus_rho * g * g;
        param[i] -= lr * g / (std::sqrt(v[i]) + eps);
    }
}

// Mean softmax cross-entropy over the batch with max-subtraction for
// stability. Returns the loss and d(loss)/d(logits) = (softmax - y)/B.
template <typename T>
std::pair<double, Tensor<T>> softmax_cross_entropy(const Tensor<T>& logits,
                                                   const Tensor<T>& onehot) {
    if (logits.shape.size() != 2 || !logits.same_shape(onehot))
        throw std::invalid_argument("softmax_cross_entropy: need matching [B,C] tensors");
    const size_t B = logits.dim(0), C = logits.dim(1);
    for (size_t b = 0; b < B; ++b) {
        int ones = 0;
        for (size_t c = 0; c < C; ++c) {
            const T v = onehot[b * C + c];
            if (v == T(1))
                ++ones;
            else if (v != T(0))
                throw std::invalid_argument("softmax_cross_entropy: labels must be one-hot");
        }
        if (ones != 1) throw std::invalid_argument("softmax_cross_entropy: labels must be one-hot");
    }

    Tensor<T> grad(logits.shape);
    double loss = 0.0;
    for (size_t b = 0; b < B; ++b) {
        const T* row = logits.data.data() + b * C;
        T max_logit = row[0];
        for (size_t c = 1; c < C; ++c) max_logit = std::max(max_logit, row[c]);
        double denom = 0.0;
        for (size_t c = 0; c < C; ++c) denom += std::exp(double(row[c] - max_logit));
        const double log_denom = std::log(denom);
        for (size_t c = 0; c < C; ++c) {
            const double logp = double(row[c] - max_logit) - log_denom;
            const double p = std::exp(logp);
            grad[b * C + c] = T((p - double(onehot[b * C + c])) / double(B));
            if (onehot[b * C + c] == T(1)) loss -= logp;
        }
    }
    return {loss / double(B), std::move(grad)};
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    if (logits.shape.size() != 2) throw std::invalid_argument("softmax: need [B,C]");
    const size_t B = logits.dim(0), C = logits.dim(1);
    Tensor<T> probs(logits.shape);
    for (size_t b = 0; b < B; ++b) {
        const T* row = logits.data.data() + b * C;
        T max_logit = row[0];
        for (size_t c = 1; c < C; ++c) max_logit = std::max(max_logit, row[c]);
        double denom = 0.0;
        for (size_t c = 0; c < C; ++c) denom += std::exp(double(row[c] - max_logit));
        for (size_t c = 0; c < C; ++c)
            probs[b * C + c] = T(std::exp(double(row[c] - max_logit)) / denom);
    }
    return probs;
}

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, std::mt19937_64* rng) = 0;
    virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
    virtual std::vector<ParamRef<T>> params() { return {}; }
    virtual std::string kind() const = 0;

    void set_threads(unsigned n) { threads_ = n; }

protected:
    void require_forward(const char* who) const {
        if (!forward_done_) throw std::logic_error(std::string(who) + ": backward without forward");
    }
    bool forward_done_ = false;
    unsigned threads_ = 1;
};

// 2-D cross-correlation, stride 1, zero "same" padding, NHWC layout.
// Weights are stored as the [s*s*cin, cout] matrix used by the im2col GEMM;
// logically that is [s][s][cin][cout] row-major.
template <typename T>
class Conv2d : public Layer<T> {
public:
    Conv2d(size_t ksize, size_t cin, size_t cout) : ksize_(ksize), cin_(cin), cout_(cout) {
        if (ksize == 0 || (ksize != 1 && ksize % 2 == 0))
            throw std::invalid_argument("Conv2d: kernel size must be odd or 1");
        weights_ = Tensor<T>({ksize, ksize, cin, cout});
        bias_ = Tensor<T>({cout});
        grad_weights_ = Tensor<T>(weights_.shape);
        grad_bias_ = Tensor<T>(bias_.shape);
    }

    void init_he_uniform(std::mt19937_64& rng) {
        const double fan_in = double(ksize_ * ksize_ * cin_);
        const double limit = std::sqrt(6.0 / fan_in);
        for (auto& w : weights_.data) w = T((util::uniform_unit(rng) * 2.0 - 1.0) * limit);
        bias_.fill(T(0));
    }

    Tensor<T> forward(const Tensor<T>& x, Mode, std::mt19937_64*) override {
        check_input(x);
        input_ = x;
        this->forward_done_ = true;
        const size_t B = x.dim(0), H = x.dim(1), W = x.dim(2);
        const size_t K = ksize_ * ksize_ * cin_;
        const size_t HW = H * W;
        Tensor<T> out({B, H, W, cout_});
        col_.assign(HW * K, T(0));
        for (size_t b = 0; b < B; ++b) {
            im2col(x.data.data() + b * HW * cin_, H, W, col_.data());
            detail::gemm(HW, cout_, K, col_.data(), weights_.data.data(),
                         out.data.data() + b * HW * cout_, this->threads_);
            T* o = out.data.data() + b * HW * cout_;
            for (size_t p = 0; p < HW; ++p)
                for (size_t c = 0; c < cout_; ++c) o[p * cout_ + c] += bias_[c];
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        this->require_forward("Conv2d");
        const size_t B = input_.dim(0), H = input_.dim(1), W = input_.dim(2);
        if (grad_out.shape != std::vector<size_t>{B, H, W, cout_})
            throw std::invalid_argument("Conv2d: gradient shape mismatch");
        const size_t K = ksize_ * ksize_ * cin_;
        const size_t HW = H * W;

        Tensor<T> grad_in({B, H, W, cin_});
        std::vector<T> dcol(HW * K);
        for (size_t b = 0; b < B; ++b) {
            const T* dy = grad_out.data.data() + b * HW * cout_;
            for (size_t p = 0; p < HW; ++p)
                for (size_t c = 0; c < cout_; ++c) grad_bias_[c] += dy[p * cout_ + c];

            im2col(input_.data.data() + b * HW * cin_, H, W, col_.data());
            detail::gemm_at_b_acc(HW, cout_, K, col_.data(), dy, grad_weights_.data.data(),
                                  this->threads_);

            detail::gemm_a_bt(HW, cout_, K, dy, weights_.data.data(), dcol.data(),
                              this->threads_);
            col2im(dcol.data(), H, W, grad_in.data.data() + b * HW * cin_);
        }
        return grad_in;
    }

    std::vector<ParamRef<T>> params() override {
        return {{&weights_, &grad_weights_, "conv.weights"}, {&bias_, &grad_bias_, "conv.bias"}};
    }

    std::string kind() const override { return "conv"; }

    size_t ksize() const { return ksize_; }
    size_t cin() const { return cin_; }
    size_t cout() const { return cout_; }
    Tensor<T>& weights() { return weights_; }
    Tensor<T>& bias() { return bias_; }

private:
    void check_input(const Tensor<T>& x) const {
        if (x.shape.size() != 4 || x.dim(3) != cin_)
            throw std::invalid_argument("Conv2d: expected [B,H,W," + std::to_string(cin_) + "]");
    }

    void im2col(const T* img, size_t H, size_t W, T* col) const {
        const long pad = long(ksize_ - 1) / 2;
        const size_t K = ksize_ * ksize_ * cin_;
        for (size_t y = 0; y < H; ++y) {
            for (size_t x = 0; x < W; ++x) {
                T* dst = col + (y * W + x) * K;
                size_t idx = 0;
                for (long dy = -pad; dy <= pad; ++dy) {
                    const long sy = long(y) + dy;
                    for (long dx = -pad; dx <= pad; ++dx) {
                        const long sx = long(x) + dx;
                        if (sy >= 0 && sy < long(H) && sx >= 0 && sx < long(W)) {
                            const T* src = img + (size_t(sy) * W + size_t(sx)) * cin_;
                            for (size_t c = 0; c < cin_; ++c) dst[idx++] = src[c];
                        } else {
                            for (size_t c = 0; c < cin_; ++c) dst[idx++] = T(0);
                        }
                    }
                }
            }
        }
    }

    void col2im(const T* dcol, size_t H, size_t W, T* dimg) const {
        const long pad = long(ksize_ - 1) / 2;
        const size_t K = ksize_ * ksize_ * cin_;
        std::fill(dimg, dimg + H * W * cin_, T(0));
        for (size_t y = 0; y < H; ++y) {
            for (size_t x = 0; x < W; ++x) {
                const T* src = dcol + (y * W + x) * K;
                size_t idx = 0;
                for (long dy = -pad; dy <= pad; ++dy) {
                    const long sy = long(y) + dy;
                    for (long dx = -pad; dx <= pad; ++dx) {
                        const long sx = long(x) + dx;
                        if (sy >= 0 && sy < long(H) && sx >= 0 && sx < long(W)) {
                            T* dst = dimg + (size_t(sy) * W + size_t(sx)) * cin_;
                            for (size_t c = 0; c < cin_; ++c) dst[c] += src[idx++];
                        } else {
                            idx += cin_;
                        }
                    }
                }
            }
        }
    }

    size_t ksize_, cin_, cout_;
    Tensor<T> weights_, bias_, grad_weights_, grad_bias_;
    Tensor<T> input_;
    std::vector<T> col_;
};

// Per-channel batch normalization over all leading dimensions. Running
// statistics use momentum 0.99 and are consumed at inference; freezing the
// statistics makes the layer differentiate as a fixed affine map, which the
// gradient checks rely on.
template <typename T>
class BatchNorm : public Layer<T> {
public:
    explicit BatchNorm(size_t channels, double momentum = 0.99, double eps = 1e-5)
        : channels_(channels), momentum_(momentum), eps_(eps) {
        gamma_ = Tensor<T>({channels});
        gamma_.fill(T(1));
        beta_ = Tensor<T>({channels});
        grad_gamma_ = Tensor<T>({channels});
        grad_beta_ = Tensor<T>({channels});
        running_mean_ = Tensor<T>({channels});
        running_var_ = Tensor<T>({channels});
        running_var_.fill(T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, std::mt19937_64*) override {
        if (x.shape.empty() || x.shape.back() != channels_)
            throw std::invalid_argument("BatchNorm: trailing dimension must match channels");
        const size_t C = channels_;
        const size_t m = x.size() / C;
        const bool use_batch_stats = (mode == Mode::Train) && !frozen_stats_;
        if (use_batch_stats && x.dim(0) < 2)
            throw std::invalid_argument("BatchNorm: train mode needs batch size >= 2");

        mean_.assign(C, 0.0);
        var_.assign(C, 0.0);
        if (use_batch_stats) {
            for (size_t i = 0; i < x.size(); ++i) mean_[i % C] += double(x[i]);
            for (double& v : mean_) v /= double(m);
            for (size_t i = 0; i < x.size(); ++i) {
                const double d = double(x[i]) - mean_[i % C];
                var_[i % C] += d * d;
            }
            for (double& v : var_) v /= double(m);
            for (size_t c = 0; c < C; ++c) {
                running_mean_[c] = T(momentum_ * double(running_mean_[c]) +
                                     (1.0 - momentum_) * mean_[c]);
                running_var_[c] =
                    T(momentum_ * double(running_var_[c]) + (1.0 - momentum_) * var_[c]);
            }
        } else {
            for (size_t c = 0; c < C; ++c) {
                mean_[c] = double(running_mean_[c]);
                var_[c] = double(running_var_[c]);
            }
        }

        invstd_.resize(C);
        for (size_t c = 0; c < C; ++c) invstd_[c] = 1.0 / std::sqrt(var_[c] + eps_);

        xhat_ = Tensor<T>(x.shape);
        Tensor<T> out(x.shape);
        util::parallel_for(C, this->threads_, [&](size_t c) {
            const double mu = mean_[c], is = invstd_[c];
            const double g = double(gamma_[c]), b = double(beta_[c]);
            for (size_t i = c; i < x.size(); i += C) {
                const double h = (double(x[i]) - mu) * is;
                xhat_[i] = T(h);
                out[i] = T(g * h + b);
            }
        });
        batch_elements_ = m;
        trained_with_batch_stats_ = use_batch_stats;
        this->forward_done_ = true;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        this->require_forward("BatchNorm");
        if (!grad_out.same_shape(xhat_))
            throw std::invalid_argument("BatchNorm: gradient shape mismatch");
        const size_t C = channels_;
        const double m = double(batch_elements_);

        Tensor<T> grad_in(grad_out.shape);
        util::parallel_for(C, this->threads_, [&](size_t c) {
            double dg = 0.0, db = 0.0;
            for (size_t i = c; i < grad_out.size(); i += C) {
                dg += double(grad_out[i]) * double(xhat_[i]);
                db += double(grad_out[i]);
            }
            grad_gamma_[c] += T(dg);
            grad_beta_[c] += T(db);

            const double g_is = double(gamma_[c]) * invstd_[c];
            if (trained_with_batch_stats_) {
                for (size_t i = c; i < grad_out.size(); i += C) {
                    const double dy = double(grad_out[i]);
                    grad_in[i] =
                        T(g_is / m * (m * dy - db - double(xhat_[i]) * dg));
                }
            } else {
                for (size_t i = c; i < grad_out.size(); i += C)
                    grad_in[i] = T(double(grad_out[i]) * g_is);
            }
        });
        return grad_in;
    }

    std::vector<ParamRef<T>> params() override {
        return {{&gamma_, &grad_gamma_, "bn.gamma"}, {&beta_, &grad_beta_, "bn.beta"}};
    }

    std::string kind() const override { return "batchnorm"; }

    void freeze_stats(bool frozen) { frozen_stats_ = frozen; }
    Tensor<T>& running_mean() { return running_mean_; }
    Tensor<T>& running_var() { return running_var_; }
    size_t channels() const { return channels_; }

private:
    size_t channels_;
    double momentum_, eps_;
    bool frozen_stats_ = false;
    Tensor<T> gamma_, beta_, grad_gamma_, grad_beta_;
    Tensor<T> running_mean_, running_var_;
    Tensor<T> xhat_;
    std::vector<double> mean_, var_, invstd_;
    size_t batch_elements_ = 0;
    bool trained_with_batch_stats_ = false;
};

template <typename T>
class Relu : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode, std::mt19937_64*) override {
        mask_.assign(x.size(), 0);
        Tensor<T> out(x.shape);
        for (size_t i = 0; i < x.size(); ++i) {
            if (x[i] > T(0)) {
                out[i] = x[i];
                mask_[i] = 1;
            }
        }
        this->forward_done_ = true;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        this->require_forward("Relu");
        if (grad_out.size() != mask_.size())
            throw std::invalid_argument("Relu: gradient shape mismatch");
        Tensor<T> grad_in(grad_out.shape);
        for (size_t i = 0; i < grad_out.size(); ++i)
            grad_in[i] = mask_[i] ? grad_out[i] : T(0);
        return grad_in;
    }

    std::string kind() const override { return "relu"; }

private:
    std::vector<unsigned char> mask_;
};

// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
template <typename T>
class MaxPool2 : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode, std::mt19937_64*) override {
        if (x.shape.size() != 4) throw std::invalid_argument("MaxPool2: expected [B,H,W,C]");
        const size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
        if (H < 2 || W < 2)
            throw std::invalid_argument("MaxPool2: spatial dimensions must be >= 2");
        const size_t OH = H / 2, OW = W / 2;
        in_shape_ = x.shape;
        Tensor<T> out({B, OH, OW, C});
        argmax_.assign(out.size(), 0);
        util::parallel_for(B, this->threads_, [&](size_t b) {
            const T* src = x.data.data() + b * H * W * C;
            T* dst = out.data.data() + b * OH * OW * C;
            size_t* arg = argmax_.data() + b * OH * OW * C;
            for (size_t oy = 0; oy < OH; ++oy) {
                for (size_t ox = 0; ox < OW; ++ox) {
                    for (size_t c = 0; c < C; ++c) {
                        size_t best_idx = (2 * oy * W + 2 * ox) * C + c;
                        T best = src[best_idx];
                        for (size_t dy = 0; dy < 2; ++dy) {
                            for (size_t dx = 0; dx < 2; ++dx) {
                                const size_t idx = ((2 * oy + dy) * W + (2 * ox + dx)) * C + c;
                                if (src[idx] > best) {
                                    best = src[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        dst[(oy * OW + ox) * C + c] = best;
                        arg[(oy * OW + ox) * C + c] = b * H * W * C + best_idx;
                    }
                }
            }
        });
        this->forward_done_ = true;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        this->require_forward("MaxPool2");
        if (grad_out.size() != argmax_.size())
            throw std::invalid_argument("MaxPool2: gradient shape mismatch");
        Tensor<T> grad_in(in_shape_);
        for (size_t i = 0; i < grad_out.size(); ++i) grad_in[argmax_[i]] += grad_out[i];
        return grad_in;
    }

    std::string kind() const override { return "maxpool"; }

private:
    std::vector<size_t> argmax_;
    std::vector<size_t> in_shape_;
};

template <typename T>
class Flatten : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode, std::mt19937_64*) override {
        if (x.shape.empty()) throw std::invalid_argument("Flatten: empty tensor");
        in_shape_ = x.shape;
        this->forward_done_ = true;
        return x.reshaped({x.dim(0), x.size() / x.dim(0)});
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        this->require_forward("Flatten");
        return grad_out.reshaped(in_shape_);
    }

    std::string kind() const override { return "flatten"; }

private:
    std::vector<size_t> in_shape_;
};

template <typename T>
class Dense : public Layer<T> {
public:
    Dense(size_t in, size_t out) : in_(in), out_(out) {
        weights_ = Tensor<T>({in, out});
        bias_ = Tensor<T>({out});
        grad_weights_ = Tensor<T>(weights_.shape);
        grad_bias_ = Tensor<T>(bias_.shape);
    }

    void init_he_uniform(std::mt19937_64& rng) {
        const double limit = std::sqrt(6.0 / double(in_));
        for (auto& w : weights_.data) w = T((util::uniform_unit(rng) * 2.0 - 1.0) * limit);
        bias_.fill(T(0));
    }

    Tensor<T> forward(const Tensor<T>& x, Mode, std::mt19937_64*) override {
        if (x.shape.size() != 2 || x.dim(1) != in_)
            throw std::invalid_argument("Dense: expected [B," + std::to_string(in_) + "]");
        input_ = x;
        const size_t B = x.dim(0);
        Tensor<T> out({B, out_});
        detail::gemm(B, out_, in_, x.data.data(), weights_.data.data(), out.data.data(),
                     this->threads_);
        for (size_t b = 0; b < B; ++b)
            for (size_t j = 0; j < out_; ++j) out[b * out_ + j] += bias_[j];
        this->forward_done_ = true;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        this->require_forward("Dense");
        const size_t B = input_.dim(0);
        if (grad_out.shape != std::vector<size_t>{B, out_})
            throw std::invalid_argument("Dense: gradient shape mismatch");
        for (size_t b = 0; b < B; ++b)
            for (size_t j = 0; j < out_; ++j) grad_bias_[j] += grad_out[b * out_ + j];
        detail::gemm_at_b_acc(B, out_, in_, input_.data.data(), grad_out.data.data(),
                              grad_weights_.data.data(), this->threads_);
        Tensor<T> grad_in({B, in_});
        detail::gemm_a_bt(B, out_, in_, grad_out.data.data(), weights_.data.data(),
                          grad_in.data.data(), this->threads_);
        return grad_in;
    }

    std::vector<ParamRef<T>> params() override {
        return {{&weights_, &grad_weights_, "dense.weights"}, {&bias_, &grad_bias_, "dense.bias"}};
    }

    std::string kind() const override { return "dense"; }

    size_t in_features() const { return in_; }
    size_t out_features() const { return out_; }
    Tensor<T>& weights() { return weights_; }
    Tensor<T>& bias() { return bias_; }

private:
    size_t in_, out_;
    Tensor<T> weights_, bias_, grad_weights_, grad_bias_;
    Tensor<T> input_;
};

// Inverted dropout: units are zeroed with probability p during training and
// survivors scaled by 1/(1-p); inference is the identity.
template <typename T>
class Dropout : public Layer<T> {
public:
    explicit Dropout(double p) : p_(p) {
        if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("Dropout: p must lie in [0, 1)");
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, std::mt19937_64* rng) override {
        this->forward_done_ = true;
        if (mode == Mode::Infer || p_ == 0.0) {
            identity_ = true;
            return x;
        }
        identity_ = false;
        const T scale = T(1.0 / (1.0 - p_));
        mask_.assign(x.size(), T(0));
        if (fixed_mask_) {
            if (fixed_mask_->size() != x.size())
                throw std::invalid_argument("Dropout: fixed mask size mismatch");
            mask_ = fixed_mask_->data;
        } else {
            if (rng == nullptr) throw std::invalid_argument("Dropout: train mode needs an rng");
            for (size_t i = 0; i < x.size(); ++i)
                mask_[i] = util::uniform_unit(*rng) < p_ ? T(0) : scale;
        }
        Tensor<T> out(x.shape);
        for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask_[i];
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        this->require_forward("Dropout");
        if (identity_) return grad_out;
        if (grad_out.size() != mask_.size())
            throw std::invalid_argument("Dropout: gradient shape mismatch");
        Tensor<T> grad_in(grad_out.shape);
        for (size_t i = 0; i < grad_out.size(); ++i) grad_in[i] = grad_out[i] * mask_[i];
        return grad_in;
    }

    std::string kind() const override { return "dropout"; }

    double p() const { return p_; }

    // Test hook: freeze the mask (values must be 0 or 1/(1-p)).
    void set_fixed_mask(std::optional<Tensor<T>> mask) { fixed_mask_ = std::move(mask); }

private:
    double p_;
    bool identity_ = true;
    std::vector<T> mask_;
    std::optional<Tensor<T>> fixed_mask_;
};

}  // namespace mwaser::nn
