#ifndef NOISEATTACK_NN_HPP
#define NOISEATTACK_NN_HPP

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

#include "noiseattack/common.hpp"

// Minimal CNN training stack: dense batch matrices (features x batch),
// layers templated on scalar so the same code runs float for training and
// double for finite-difference checks. Reductions that cross the batch are
// either single GEMMs or fixed-chunk partial sums reduced in chunk order,
// which keeps results bit-identical for any worker count.

namespace noiseattack::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Vector<S, Eigen::Dynamic>;

inline constexpr int kBatchChunk = 16;  // images per deterministic work chunk

struct TensorShape {
    int h = 0, w = 0, c = 0;
    bool spatial() const { return h > 0 && w > 0; }
    int flat() const { return spatial() ? h * w * c : c; }
};

template <typename S>
struct ParamRef {
    Mat<S>* value;
    Mat<S>* grad;
    bool decay;  // weight decay applies to conv/dense kernels only
};

template <typename S>
class Layer {
public:
    virtual ~Layer() = default;
    virtual const char* kind() const = 0;
    const std::string& name() const { return name_; }
    void set_name(std::string n) { name_ = std::move(n); }
    TensorShape in_shape() const { return in_shape_; }
    TensorShape out_shape() const { return out_shape_; }

    virtual void forward(const Mat<S>& in, Mat<S>& out, bool training, int threads) = 0;
    /// grad_in is resized and overwritten. Parameter gradients accumulate
    /// into the layer's grad buffers only when want_param_grads is set.
    virtual void backward(const Mat<S>& in, const Mat<S>& grad_out, Mat<S>& grad_in, int threads,
                          bool want_param_grads) = 0;
    virtual void collect_params(std::vector<ParamRef<S>>& out) { (void)out; }
    /// All persistent state in serialization order (params + running stats).
    virtual void collect_state(std::vector<Mat<S>*>& out) { (void)out; }
    virtual void init_params(GaussianStream& g) { (void)g; }
    virtual void zero_grads() {}

protected:
    std::string name_;
    TensorShape in_shape_, out_shape_;
};

// ---------------------------------------------------------------------------
// convolution (stride 1..k, zero padding, square kernel) via im2col + GEMM
// ---------------------------------------------------------------------------

template <typename S>
class Conv2d final : public Layer<S> {
public:
    Conv2d(TensorShape in, int out_c, int ksize, int stride, int pad) {
        if (!in.spatial()) throw InvalidParameter("conv: needs a spatial input");
        if (ksize < 1 || stride < 1 || pad < 0) throw InvalidParameter("conv: bad geometry");
        this->in_shape_ = in;
        out_h_ = (in.h + 2 * pad - ksize) / stride + 1;
        out_w_ = (in.w + 2 * pad - ksize) / stride + 1;
        if (out_h_ <= 0 || out_w_ <= 0) throw InvalidParameter("conv: output collapses to zero");
        this->out_shape_ = {out_h_, out_w_, out_c};
        k_ = ksize;
        stride_ = stride;
        pad_ = pad;
        patch_ = in.c * k_ * k_;
        weight_.resize(out_c, patch_);
        bias_.resize(out_c, 1);
        grad_weight_ = Mat<S>::Zero(out_c, patch_);
        grad_bias_ = Mat<S>::Zero(out_c, 1);
    }

    const char* kind() const override { return "conv"; }

    void init_params(GaussianStream& g) override {
        const double stddev = std::sqrt(2.0 / patch_);  // He init for ReLU stacks
        for (Eigen::Index i = 0; i < weight_.size(); ++i)
            weight_.data()[i] = static_cast<S>(g.next(stddev));
        bias_.setZero();
    }

    void forward(const Mat<S>& in, Mat<S>& out, bool, int threads) override {
        const int batch = static_cast<int>(in.cols());
        const int pixels = out_h_ * out_w_;
        out.resize(this->out_shape_.flat(), batch);
        parallel_chunks(batch, kBatchChunk, threads, [&](int, int b, int e) {
            Mat<S> cols(patch_, pixels);
            for (int i = b; i < e; ++i) {
                im2col(in.col(i).data(), cols);
                Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> y(
                    out.col(i).data(), this->out_shape_.c, pixels);
                y.noalias() = weight_ * cols;
                y.colwise() += bias_.col(0);
            }
        });
    }

    void backward(const Mat<S>& in, const Mat<S>& grad_out, Mat<S>& grad_in, int threads,
                  bool want_param_grads) override {
        const int batch = static_cast<int>(in.cols());
        const int pixels = out_h_ * out_w_;
        grad_in.setZero(this->in_shape_.flat(), batch);
        const int n_chunks = (batch + kBatchChunk - 1) / kBatchChunk;
        std::vector<Mat<S>> dw(want_param_grads ? static_cast<std::size_t>(n_chunks) : 0);
        std::vector<Mat<S>> db(want_param_grads ? static_cast<std::size_t>(n_chunks) : 0);
        parallel_chunks(batch, kBatchChunk, threads, [&](int ci, int b, int e) {
            Mat<S> cols(patch_, pixels);
            Mat<S> dcols(patch_, pixels);
            Mat<S>* dwc = nullptr;
            Mat<S>* dbc = nullptr;
            if (want_param_grads) {
                dw[static_cast<std::size_t>(ci)] = Mat<S>::Zero(weight_.rows(), weight_.cols());
                db[static_cast<std::size_t>(ci)] = Mat<S>::Zero(bias_.rows(), 1);
                dwc = &dw[static_cast<std::size_t>(ci)];
                dbc = &db[static_cast<std::size_t>(ci)];
            }
            for (int i = b; i < e; ++i) {
                Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dy(
                    grad_out.col(i).data(), this->out_shape_.c, pixels);
                if (want_param_grads) {
                    im2col(in.col(i).data(), cols);
                    dwc->noalias() += dy * cols.transpose();
                    dbc->col(0) += dy.rowwise().sum();
                }
                dcols.noalias() = weight_.transpose() * dy;
                col2im(dcols, grad_in.col(i).data());
            }
        });
        if (want_param_grads)
            for (int ci = 0; ci < n_chunks; ++ci) {  // fixed reduction order
                grad_weight_ += dw[static_cast<std::size_t>(ci)];
                grad_bias_ += db[static_cast<std::size_t>(ci)];
            }
    }

    void collect_params(std::vector<ParamRef<S>>& out) override {
        out.push_back({&weight_, &grad_weight_, true});
        out.push_back({&bias_, &grad_bias_, false});
    }
    void collect_state(std::vector<Mat<S>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }
    void zero_grads() override {
        grad_weight_.setZero();
        grad_bias_.setZero();
    }

private:
    void im2col(const S* img, Mat<S>& cols) const {
        const auto& in = this->in_shape_;
        int row = 0;
        for (int c = 0; c < in.c; ++c) {
            const S* plane = img + static_cast<std::ptrdiff_t>(c) * in.h * in.w;
            for (int ki = 0; ki < k_; ++ki)
                for (int kj = 0; kj < k_; ++kj, ++row) {
                    int col = 0;
                    for (int oi = 0; oi < out_h_; ++oi) {
                        const int ii = oi * stride_ + ki - pad_;
                        if (ii < 0 || ii >= in.h) {
                            for (int oj = 0; oj < out_w_; ++oj, ++col) cols(row, col) = S(0);
                            continue;
                        }
                        const S* src = plane + static_cast<std::ptrdiff_t>(ii) * in.w;
                        for (int oj = 0; oj < out_w_; ++oj, ++col) {
                            const int jj = oj * stride_ + kj - pad_;
                            cols(row, col) = (jj < 0 || jj >= in.w) ? S(0) : src[jj];
                        }
                    }
                }
        }
    }

    void col2im(const Mat<S>& dcols, S* dimg) const {
        const auto& in = this->in_shape_;
        int row = 0;
        for (int c = 0; c < in.c; ++c) {
            S* plane = dimg + static_cast<std::ptrdiff_t>(c) * in.h * in.w;
            for (int ki = 0; ki < k_; ++ki)
                for (int kj = 0; kj < k_; ++kj, ++row) {
                    int col = 0;
                    for (int oi = 0; oi < out_h_; ++oi) {
                        const int ii = oi * stride_ + ki - pad_;
                        if (ii < 0 || ii >= in.h) {
                            col += out_w_;
                            continue;
                        }
                        S* dst = plane + static_cast<std::ptrdiff_t>(ii) * in.w;
                        for (int oj = 0; oj < out_w_; ++oj, ++col) {
                            const int jj = oj * stride_ + kj - pad_;
                            if (jj >= 0 && jj < in.w) dst[jj] += dcols(row, col);
                        }
                    }
                }
        }
    }

    Mat<S> weight_, bias_, grad_weight_, grad_bias_;
    int out_h_ = 0, out_w_ = 0, k_ = 0, stride_ = 0, pad_ = 0, patch_ = 0;
};

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2
// ---------------------------------------------------------------------------

template <typename S>
class MaxPool2 final : public Layer<S> {
public:
    explicit MaxPool2(TensorShape in) {
        if (!in.spatial()) throw InvalidParameter("maxpool2: needs a spatial input");
        if (in.h < 2 || in.w < 2) throw InvalidParameter("maxpool2: input too small");
        this->in_shape_ = in;
        this->out_shape_ = {in.h / 2, in.w / 2, in.c};
    }

    const char* kind() const override { return "maxpool2"; }

    void forward(const Mat<S>& in, Mat<S>& out, bool, int threads) override {
        const int batch = static_cast<int>(in.cols());
        const auto& is = this->in_shape_;
        const auto& os = this->out_shape_;
        out.resize(os.flat(), batch);
        argmax_.resize(os.flat(), batch);
        parallel_chunks(batch, kBatchChunk, threads, [&](int, int b, int e) {
            for (int i = b; i < e; ++i) {
                const S* src = in.col(i).data();
                S* dst = out.col(i).data();
                int* am = argmax_.col(i).data();
                int o = 0;
                for (int c = 0; c < is.c; ++c) {
                    const S* plane = src + static_cast<std::ptrdiff_t>(c) * is.h * is.w;
                    for (int oi = 0; oi < os.h; ++oi)
                        for (int oj = 0; oj < os.w; ++oj, ++o) {
                            const int i0 = 2 * oi, j0 = 2 * oj;
                            int best = i0 * is.w + j0;
                            S best_v = plane[best];
                            const int cand[3] = {i0 * is.w + j0 + 1, (i0 + 1) * is.w + j0,
                                                 (i0 + 1) * is.w + j0 + 1};
                            for (int idx : cand)
                                if (plane[idx] > best_v) {
                                    best_v = plane[idx];
                                    best = idx;
                                }
                            dst[o] = best_v;
                            am[o] = c * is.h * is.w + best;
                        }
                }
            }
        });
    }

    void backward(const Mat<S>& in, const Mat<S>& grad_out, Mat<S>& grad_in, int threads,
                  bool) override {
        const int batch = static_cast<int>(in.cols());
        grad_in.setZero(this->in_shape_.flat(), batch);
        parallel_chunks(batch, kBatchChunk, threads, [&](int, int b, int e) {
            for (int i = b; i < e; ++i) {
                const S* dy = grad_out.col(i).data();
                S* dx = grad_in.col(i).data();
                const int* am = argmax_.col(i).data();
                for (int o = 0; o < this->out_shape_.flat(); ++o) dx[am[o]] += dy[o];
            }
        });
    }

private:
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> argmax_;
};

// ---------------------------------------------------------------------------
// spatial batch normalization
// ---------------------------------------------------------------------------

template <typename S>
class BatchNorm final : public Layer<S> {
public:
    explicit BatchNorm(TensorShape in, double momentum = 0.1, double eps = 1e-5)
        : momentum_(momentum), eps_(eps) {
        this->in_shape_ = in;
        this->out_shape_ = in;
        channels_ = in.spatial() ? in.c : in.flat();
        plane_ = in.spatial() ? in.h * in.w : 1;
        gamma_ = Mat<S>::Ones(channels_, 1);
        beta_ = Mat<S>::Zero(channels_, 1);
        running_mean_ = Mat<S>::Zero(channels_, 1);
        running_var_ = Mat<S>::Ones(channels_, 1);
        grad_gamma_ = Mat<S>::Zero(channels_, 1);
        grad_beta_ = Mat<S>::Zero(channels_, 1);
    }

    const char* kind() const override { return "batchnorm"; }

    void forward(const Mat<S>& in, Mat<S>& out, bool training, int threads) override {
        const int batch = static_cast<int>(in.cols());
        out.resize(in.rows(), batch);
        mean_.resize(channels_, 1);
        invstd_.resize(channels_, 1);
        const double n_tot = static_cast<double>(batch) * plane_;
        parallel_chunks(channels_, 1, threads, [&](int, int cb, int ce) {
            for (int c = cb; c < ce; ++c) {
                const auto x = in.middleRows(c * plane_, plane_);
                double mu, var;
                if (training) {
                    double sum = 0, sum_sq = 0;
                    for (int col = 0; col < batch; ++col)
                        for (int r = 0; r < plane_; ++r) {
                            const double v = static_cast<double>(x(r, col));
                            sum += v;
                            sum_sq += v * v;
                        }
                    mu = sum / n_tot;
                    var = std::max(0.0, sum_sq / n_tot - mu * mu);
                } else {
                    mu = static_cast<double>(running_mean_(c, 0));
                    var = static_cast<double>(running_var_(c, 0));
                }
                const double inv = 1.0 / std::sqrt(var + eps_);
                mean_(c, 0) = static_cast<S>(mu);
                invstd_(c, 0) = static_cast<S>(inv);
                const S a = static_cast<S>(inv) * gamma_(c, 0);
                const S b = beta_(c, 0) - static_cast<S>(mu * inv) * gamma_(c, 0);
                out.middleRows(c * plane_, plane_) = (x.array() * a + b).matrix();
                if (training) {
                    running_mean_(c, 0) = static_cast<S>((1.0 - momentum_) * running_mean_(c, 0) +
                                                         momentum_ * mu);
                    running_var_(c, 0) = static_cast<S>((1.0 - momentum_) * running_var_(c, 0) +
                                                        momentum_ * var);
                }
            }
        });
        training_stats_ = training;
    }

    void backward(const Mat<S>& in, const Mat<S>& grad_out, Mat<S>& grad_in, int threads,
                  bool want_param_grads) override {
        const int batch = static_cast<int>(in.cols());
        grad_in.resize(in.rows(), batch);
        const double n_tot = static_cast<double>(batch) * plane_;
        parallel_chunks(channels_, 1, threads, [&](int, int cb, int ce) {
            for (int c = cb; c < ce; ++c) {
                const auto x = in.middleRows(c * plane_, plane_);
                const auto dy = grad_out.middleRows(c * plane_, plane_);
                auto dx = grad_in.middleRows(c * plane_, plane_);
                const double inv = static_cast<double>(invstd_(c, 0));
                const double mu = static_cast<double>(mean_(c, 0));
                const double gamma = static_cast<double>(gamma_(c, 0));
                double sum_dy = 0, sum_dy_xhat = 0;
                for (int col = 0; col < batch; ++col)
                    for (int r = 0; r < plane_; ++r) {
                        const double d = static_cast<double>(dy(r, col));
                        sum_dy += d;
                        sum_dy_xhat += d * (static_cast<double>(x(r, col)) - mu) * inv;
                    }
                if (want_param_grads) {
                    grad_gamma_(c, 0) += static_cast<S>(sum_dy_xhat);
                    grad_beta_(c, 0) += static_cast<S>(sum_dy);
                }
                if (training_stats_) {
                    const double m_dy = sum_dy / n_tot, m_dy_xhat = sum_dy_xhat / n_tot;
                    for (int col = 0; col < batch; ++col)
                        for (int r = 0; r < plane_; ++r) {
                            const double xhat = (static_cast<double>(x(r, col)) - mu) * inv;
                            dx(r, col) = static_cast<S>(
                                gamma * inv * (static_cast<double>(dy(r, col)) - m_dy - xhat * m_dy_xhat));
                        }
                } else {
                    dx = (dy.array() * static_cast<S>(gamma * inv)).matrix();
                }
            }
        });
    }

    void collect_params(std::vector<ParamRef<S>>& out) override {
        out.push_back({&gamma_, &grad_gamma_, false});
        out.push_back({&beta_, &grad_beta_, false});
    }
    void collect_state(std::vector<Mat<S>*>& out) override {
        out.push_back(&gamma_);
        out.push_back(&beta_);
        out.push_back(&running_mean_);
        out.push_back(&running_var_);
    }
    void zero_grads() override {
        grad_gamma_.setZero();
        grad_beta_.setZero();
    }

private:
    Mat<S> gamma_, beta_, running_mean_, running_var_, grad_gamma_, grad_beta_;
    Mat<S> mean_, invstd_;  // statistics used by the last forward
    double momentum_, eps_;
    int channels_ = 0, plane_ = 0;
    bool training_stats_ = false;
};

// ---------------------------------------------------------------------------
// relu / dense
// ---------------------------------------------------------------------------

template <typename S>
class Relu final : public Layer<S> {
public:
    explicit Relu(TensorShape in) {
        this->in_shape_ = in;
        this->out_shape_ = in;
    }
    const char* kind() const override { return "relu"; }
    void forward(const Mat<S>& in, Mat<S>& out, bool, int) override {
        out = in.cwiseMax(S(0));
    }
    void backward(const Mat<S>& in, const Mat<S>& grad_out, Mat<S>& grad_in, int, bool) override {
        grad_in = ((in.array() > S(0)).template cast<S>() * grad_out.array()).matrix();
    }
};

template <typename S>
class Dense final : public Layer<S> {
public:
    Dense(TensorShape in, int units) {
        if (units <= 0) throw InvalidParameter("dense: units must be positive");
        this->in_shape_ = in;
        this->out_shape_ = {0, 0, units};
        weight_.resize(units, in.flat());
        bias_.resize(units, 1);
        grad_weight_ = Mat<S>::Zero(units, in.flat());
        grad_bias_ = Mat<S>::Zero(units, 1);
    }

    const char* kind() const override { return "dense"; }

    void init_params(GaussianStream& g) override {
        const double stddev = std::sqrt(2.0 / this->in_shape_.flat());
        for (Eigen::Index i = 0; i < weight_.size(); ++i)
            weight_.data()[i] = static_cast<S>(g.next(stddev));
        bias_.setZero();
    }

    void forward(const Mat<S>& in, Mat<S>& out, bool, int) override {
        out.noalias() = weight_ * in;
        out.colwise() += bias_.col(0);
    }

    void backward(const Mat<S>& in, const Mat<S>& grad_out, Mat<S>& grad_in, int,
                  bool want_param_grads) override {
        if (want_param_grads) {
            grad_weight_.noalias() += grad_out * in.transpose();
            grad_bias_.col(0) += grad_out.rowwise().sum();
        }
        grad_in.noalias() = weight_.transpose() * grad_out;
    }

    void collect_params(std::vector<ParamRef<S>>& out) override {
        out.push_back({&weight_, &grad_weight_, true});
        out.push_back({&bias_, &grad_bias_, false});
    }
    void collect_state(std::vector<Mat<S>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }
    void zero_grads() override {
        grad_weight_.setZero();
        grad_bias_.setZero();
    }

private:
    Mat<S> weight_, bias_, grad_weight_, grad_bias_;
};

// ---------------------------------------------------------------------------
// architecture description and the network
// ---------------------------------------------------------------------------

struct LayerCfg {
    std::string kind;  // conv | batchnorm | relu | maxpool2 | dense
    int out_channels = 0;
    int ksize = 3;
    int stride = 1;
    int pad = 1;
    int units = 0;
};

struct ModelArch {
    std::string id;
    TensorShape input;
    int num_classes = 0;
    std::vector<double> norm_mean;  // per input channel, 0-255 scale
    std::vector<double> norm_std;
    std::vector<LayerCfg> layers;
};

template <typename S>
Mat<S> softmax_columns(const Mat<S>& logits) {
    Mat<S> p = logits;
    for (Eigen::Index i = 0; i < p.cols(); ++i) {
        auto col = p.col(i);
        col.array() -= col.maxCoeff();
        col = col.array().exp();
        col /= col.sum();
    }
    return p;
}

template <typename S>
class Network {
public:
    static Network build(const ModelArch& arch, std::uint64_t init_seed) {
        Network net;
        net.arch_ = arch;
        if (arch.num_classes < 2) throw InvalidParameter("network: need at least 2 classes");
        if (static_cast<int>(arch.norm_mean.size()) != arch.input.c ||
            static_cast<int>(arch.norm_std.size()) != arch.input.c)
            throw InvalidParameter("network: normalization constants must match input channels");
        TensorShape shape = arch.input;
        int counts[5] = {0, 0, 0, 0, 0};
        for (const auto& cfg : arch.layers) {
            std::unique_ptr<Layer<S>> layer;
            std::string name;
            if (cfg.kind == "conv") {
                layer = std::make_unique<Conv2d<S>>(shape, cfg.out_channels, cfg.ksize, cfg.stride,
                                                    cfg.pad);
                name = "conv" + std::to_string(++counts[0]);
            } else if (cfg.kind == "batchnorm") {
                layer = std::make_unique<BatchNorm<S>>(shape);
                name = "bn" + std::to_string(++counts[1]);
            } else if (cfg.kind == "relu") {
                layer = std::make_unique<Relu<S>>(shape);
                name = "relu" + std::to_string(++counts[2]);
            } else if (cfg.kind == "maxpool2") {
                layer = std::make_unique<MaxPool2<S>>(shape);
                name = "pool" + std::to_string(++counts[3]);
            } else if (cfg.kind == "dense") {
                layer = std::make_unique<Dense<S>>(shape, cfg.units);
                name = "dense" + std::to_string(++counts[4]);
            } else {
                throw InvalidParameter("network: unknown layer kind " + cfg.kind);
            }
            layer->set_name(name);
            shape = layer->out_shape();
            net.layers_.push_back(std::move(layer));
        }
        if (net.layers_.empty() || shape.spatial() || shape.flat() != arch.num_classes)
            throw InvalidParameter("network: architecture must end in a dense layer of num_classes units");
        GaussianStream g(init_seed);
        for (auto& l : net.layers_) l->init_params(g);
        return net;
    }

    const ModelArch& arch() const { return arch_; }
    int num_layers() const { return static_cast<int>(layers_.size()); }
    Layer<S>& layer(int i) { return *layers_[static_cast<std::size_t>(i)]; }

    int layer_index(const std::string& name) const {
        for (std::size_t i = 0; i < layers_.size(); ++i)
            if (layers_[i]->name() == name) return static_cast<int>(i);
        throw InvalidParameter("network: no layer named " + name);
    }

    /// Name of the default Grad-CAM tap: the final convolutional block's
    /// output (the last spatial non-pooling layer; pooled maps are too
    /// coarse to localize anything).
    std::string last_spatial_layer() const {
        for (std::size_t i = layers_.size(); i-- > 0;)
            if (layers_[i]->out_shape().spatial() &&
                std::string(layers_[i]->kind()) != "maxpool2")
                return layers_[i]->name();
        throw UnsupportedModel("network has no spatial (convolutional) layer");
    }

    /// Raw 0-255 batch in, logits out. Activations are cached for backward.
    const Mat<S>& forward(const Mat<S>& raw, bool training, int threads) {
        if (raw.rows() != arch_.input.flat())
            throw InvalidInput("network: input rows do not match the model input shape");
        acts_.resize(layers_.size() + 1);
        acts_[0].resize(raw.rows(), raw.cols());
        const int plane = arch_.input.h * arch_.input.w;
        for (int c = 0; c < arch_.input.c; ++c)
            acts_[0].middleRows(c * plane, plane) =
                ((raw.middleRows(c * plane, plane).array() - static_cast<S>(arch_.norm_mean[static_cast<std::size_t>(c)])) /
                 static_cast<S>(arch_.norm_std[static_cast<std::size_t>(c)]))
                    .matrix();
        for (std::size_t i = 0; i < layers_.size(); ++i)
            layers_[i]->forward(acts_[i], acts_[i + 1], training, threads);
        return acts_.back();
    }

    /// Backprop from dlogits down to (and excluding) stop_layer. Returns the
    /// gradient w.r.t. the output of layers_[stop_layer], or w.r.t. the raw
    /// input when stop_layer is -1.
    Mat<S> backward(const Mat<S>& dlogits, int threads, bool want_param_grads, int stop_layer = -1) {
        if (acts_.empty()) throw InvalidInput("network: backward before forward");
        Mat<S> grad = dlogits;
        Mat<S> grad_prev;
        for (int i = static_cast<int>(layers_.size()) - 1; i > stop_layer; --i) {
            layers_[static_cast<std::size_t>(i)]->backward(acts_[static_cast<std::size_t>(i)], grad,
                                                           grad_prev, threads, want_param_grads);
            grad.swap(grad_prev);
        }
        if (stop_layer == -1) {
            const int plane = arch_.input.h * arch_.input.w;
            for (int c = 0; c < arch_.input.c; ++c)
                grad.middleRows(c * plane, plane) /= static_cast<S>(arch_.norm_std[static_cast<std::size_t>(c)]);
        }
        return grad;
    }

    /// Cached output of a named layer from the last forward pass.
    const Mat<S>& activation(const std::string& layer_name) const {
        for (std::size_t i = 0; i < layers_.size(); ++i)
            if (layers_[i]->name() == layer_name) return acts_[i + 1];
        throw InvalidParameter("network: no layer named " + layer_name);
    }

    std::vector<ParamRef<S>> params() {
        std::vector<ParamRef<S>> out;
        for (auto& l : layers_) l->collect_params(out);
        return out;
    }

    void zero_grads() {
        for (auto& l : layers_) l->zero_grads();
    }

    std::vector<S> serialize_state() {
        std::vector<Mat<S>*> state;
        for (auto& l : layers_) l->collect_state(state);
        std::vector<S> blob;
        for (const Mat<S>* m : state) blob.insert(blob.end(), m->data(), m->data() + m->size());
        return blob;
    }

    void deserialize_state(const std::vector<S>& blob) {
        std::vector<Mat<S>*> state;
        for (auto& l : layers_) l->collect_state(state);
        std::size_t off = 0;
        for (Mat<S>* m : state) {
            if (off + static_cast<std::size_t>(m->size()) > blob.size())
                throw InvalidInput("network: state blob too short");
            std::copy(blob.begin() + static_cast<std::ptrdiff_t>(off),
                      blob.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(m->size())),
                      m->data());
            off += static_cast<std::size_t>(m->size());
        }
        if (off != blob.size()) throw InvalidInput("network: state blob size mismatch");
    }

private:
    ModelArch arch_;
    std::vector<std::unique_ptr<Layer<S>>> layers_;
    std::vector<Mat<S>> acts_;
};

/// Cross-entropy over softmax for one batch of logits. Returns per-sample
/// losses; dlogits gets (softmax - onehot) scaled by each sample's weight.
template <typename S>
Eigen::VectorXd cross_entropy(const Mat<S>& logits, const std::vector<int>& labels,
                              const std::vector<double>& sample_weights, Mat<S>* dlogits) {
    const auto batch = static_cast<std::size_t>(logits.cols());
    if (labels.size() != batch) throw InvalidInput("cross_entropy: label count mismatch");
    if (!sample_weights.empty() && sample_weights.size() != batch)
        throw InvalidInput("cross_entropy: weight count mismatch");
    Mat<S> probs = softmax_columns(logits);
    Eigen::VectorXd losses(static_cast<Eigen::Index>(batch));
    for (std::size_t i = 0; i < batch; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= logits.rows()) throw InvalidInput("cross_entropy: label out of range");
        const double p = std::max(static_cast<double>(probs(y, static_cast<Eigen::Index>(i))), 1e-30);
        losses[static_cast<Eigen::Index>(i)] = -std::log(p);
    }
    if (dlogits) {
        *dlogits = probs;
        for (std::size_t i = 0; i < batch; ++i) {
            dlogits->operator()(labels[i], static_cast<Eigen::Index>(i)) -= S(1);
            if (!sample_weights.empty())
                dlogits->col(static_cast<Eigen::Index>(i)) *= static_cast<S>(sample_weights[i]);
        }
    }
    return losses;
}

/// Momentum SGD with optional decoupled-from-BN weight decay.
template <typename S>
class SgdMomentum {
public:
    SgdMomentum(std::vector<ParamRef<S>> params, double momentum, double weight_decay)
        : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
        for (const auto& p : params_) velocity_.push_back(Mat<S>::Zero(p.value->rows(), p.value->cols()));
    }

    void step(double lr) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            Mat<S> g = *p.grad;
            if (p.decay && weight_decay_ > 0.0) g += static_cast<S>(weight_decay_) * *p.value;
            velocity_[i] = static_cast<S>(momentum_) * velocity_[i] - static_cast<S>(lr) * g;
            *p.value += velocity_[i];
        }
    }

private:
    std::vector<ParamRef<S>> params_;
    std::vector<Mat<S>> velocity_;
    double momentum_, weight_decay_;
};

}  // namespace noiseattack::nn

#endif  // NOISEATTACK_NN_HPP
