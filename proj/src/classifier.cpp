// SPDX-License-Identifier: Apache-2.0
//
// nrpos: carrier-phase positioning toolkit for 5G NR reference signals
// Copyright (C) 2026 The nrpos Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "nrpos/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>

namespace nrpos
{

namespace
{

constexpr double kBnEpsilon = 1e-5;

std::size_t same_length(std::size_t L, int stride)
{
    return (L + static_cast<std::size_t>(stride) - 1) / static_cast<std::size_t>(stride);
}

long same_pad_left(std::size_t L, std::size_t out, int width, int stride)
{
    const long total = std::max<long>(static_cast<long>((out - 1) * stride + width) - static_cast<long>(L), 0);
    return total / 2;
}

void validate_shape(const ModelShape &s)
{
    if (s.input_length == 0)
        throw Error("model: input length must be positive");
    if (s.conv1_filters <= 0 || s.conv1_width <= 0 || s.conv2_filters <= 0 || s.conv2_width <= 0 ||
        s.dense1 <= 0 || s.dense2 <= 0 || s.stride <= 0)
        throw Error("model: layer sizes must be positive");
}

template <typename P>
void for_each_tensor(P &p, const std::function<void(const char *, double *, std::size_t, bool, bool)> &fn)
{
    auto vec = [&](const char *n, auto &v, bool tr, bool dec) { fn(n, v.data(), static_cast<std::size_t>(v.size()), tr, dec); };
    vec("input_mean", p.input_mean, false, false);
    vec("input_scale", p.input_scale, false, false);
    vec("conv1_w", p.conv1_w, true, true);
    vec("conv1_b", p.conv1_b, true, false);
    vec("bn1_gamma", p.bn1.gamma, true, false);
    vec("bn1_beta", p.bn1.beta, true, false);
    vec("bn1_mean", p.bn1.running_mean, false, false);
    vec("bn1_var", p.bn1.running_var, false, false);
    vec("conv2_w", p.conv2_w, true, true);
    vec("conv2_b", p.conv2_b, true, false);
    vec("bn2_gamma", p.bn2.gamma, true, false);
    vec("bn2_beta", p.bn2.beta, true, false);
    vec("bn2_mean", p.bn2.running_mean, false, false);
    vec("bn2_var", p.bn2.running_var, false, false);
    vec("dense1_w", p.dense1_w, true, true);
    vec("dense1_b", p.dense1_b, true, false);
    vec("dense2_w", p.dense2_w, true, true);
    vec("dense2_b", p.dense2_b, true, false);
    vec("dense3_w", p.dense3_w, true, true);
    vec("dense3_b", p.dense3_b, true, false);
}

void allocate(ModelParams &p, const ModelShape &s)
{
    const auto L = static_cast<Eigen::Index>(s.input_length);
    p.shape = s;
    p.input_mean = Eigen::VectorXd::Zero(L);
    p.input_scale = Eigen::VectorXd::Ones(L);
    p.conv1_w = Eigen::MatrixXd::Zero(s.conv1_filters, s.conv1_width);
    p.conv1_b = Eigen::VectorXd::Zero(s.conv1_filters);
    for (auto *bn : {&p.bn1, &p.bn2})
    {
        const int c = bn == &p.bn1 ? s.conv1_filters : s.conv2_filters;
        bn->gamma = Eigen::VectorXd::Ones(c);
        bn->beta = Eigen::VectorXd::Zero(c);
        bn->running_mean = Eigen::VectorXd::Zero(c);
        bn->running_var = Eigen::VectorXd::Ones(c);
    }
    p.conv2_w = Eigen::MatrixXd::Zero(s.conv2_filters, s.conv1_filters * s.conv2_width);
    p.conv2_b = Eigen::VectorXd::Zero(s.conv2_filters);
    p.dense1_w = Eigen::MatrixXd::Zero(s.dense1, s.conv2_filters);
    p.dense1_b = Eigen::VectorXd::Zero(s.dense1);
    p.dense2_w = Eigen::MatrixXd::Zero(s.dense2, s.dense1);
    p.dense2_b = Eigen::VectorXd::Zero(s.dense2);
    p.dense3_w = Eigen::MatrixXd::Zero(ModelShape::kClasses, s.dense2);
    p.dense3_b = Eigen::VectorXd::Zero(ModelShape::kClasses);
}

struct BnCache
{
    Eigen::MatrixXd xhat;
    Eigen::VectorXd invstd;
};

// Activations and scratch buffers of one pass. Reused across batches so the
// large im2col matrices are not reallocated on every step.
struct Cache
{
    Eigen::Index B = 0;
    std::size_t L0 = 0, L1 = 0, L2 = 0;
    long pad1 = 0, pad2 = 0;
    Eigen::MatrixXd C1, Z1, Y1, A1, C2, Z2, Y2, A2, G, H1, H2, logp, P;
    Eigen::MatrixXd dY2, dZ2, dC2, dY1, dZ1, dxhat;
    BnCache bn1, bn2;
};

Cache &workspace()
{
    thread_local Cache c;
    return c;
}

void batchnorm_forward(const Eigen::MatrixXd &Z, const BatchNormParams &bn, Mode mode, BnCache &cache,
                       Eigen::MatrixXd &Y)
{
    Eigen::VectorXd mean, var;
    if (mode == Mode::train)
    {
        mean = Z.rowwise().mean();
        var = (Z.colwise() - mean).array().square().rowwise().mean();
    }
    else
    {
        mean = bn.running_mean;
        var = bn.running_var;
    }
    cache.invstd = (var.array() + kBnEpsilon).rsqrt();
    cache.xhat.resize(Z.rows(), Z.cols());
    cache.xhat.array() = (Z.colwise() - mean).array().colwise() * cache.invstd.array();
    Y.resize(Z.rows(), Z.cols());
    Y.array() = (cache.xhat.array().colwise() * bn.gamma.array()).colwise() + bn.beta.array();
}

/// dY in, dZ out; `dxhat` is scratch.
void batchnorm_backward(const Eigen::MatrixXd &dY, const BatchNormParams &bn, Mode mode, const BnCache &cache,
                        BatchNormParams &grad, Eigen::MatrixXd &dxhat, Eigen::MatrixXd &dZ)
{
    grad.gamma = (dY.array() * cache.xhat.array()).rowwise().sum();
    grad.beta = dY.rowwise().sum();
    dxhat.resize(dY.rows(), dY.cols());
    dxhat.array() = dY.array().colwise() * bn.gamma.array();
    dZ.resize(dY.rows(), dY.cols());
    if (mode == Mode::infer)
    {
        dZ.array() = dxhat.array().colwise() * cache.invstd.array();
        return;
    }
    const double N = static_cast<double>(dY.cols());
    const Eigen::ArrayXd sum_dxhat = dxhat.rowwise().sum().array();
    const Eigen::ArrayXd sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().sum();
    const Eigen::ArrayXd scale = cache.invstd.array() / N;
    dZ.array() = ((dxhat.array() * N).colwise() - sum_dxhat - cache.xhat.array().colwise() * sum_dxhat_xhat)
                     .colwise() *
                 scale;
}

void relu_backward(Eigen::MatrixXd &d, const Eigen::MatrixXd &pre)
{
    d.array() *= (pre.array() > 0.0).cast<double>();
}

void conv1_im2col(const ModelParams &p, const std::vector<const double *> &seqs, Cache &c)
{
    const int W = p.shape.conv1_width;
    const int s = p.shape.stride;
    Eigen::MatrixXd &C1 = c.C1;
    C1.resize(W, c.B * static_cast<Eigen::Index>(c.L1));
    for (Eigen::Index b = 0; b < c.B; ++b)
    {
        const double *x = seqs[static_cast<std::size_t>(b)];
        for (std::size_t t = 0; t < c.L1; ++t)
        {
            const Eigen::Index col = b * static_cast<Eigen::Index>(c.L1) + static_cast<Eigen::Index>(t);
            for (int w = 0; w < W; ++w)
            {
                const long idx = static_cast<long>(t) * s - c.pad1 + w;
                C1(w, col) = (idx >= 0 && idx < static_cast<long>(c.L0))
                                 ? (x[idx] - p.input_mean[idx]) / p.input_scale[idx]
                                 : 0.0;
            }
        }
    }
}

void conv2_im2col(const ModelParams &p, Cache &c)
{
    const int F1 = p.shape.conv1_filters;
    const int W = p.shape.conv2_width;
    const int s = p.shape.stride;
    const auto L1 = static_cast<Eigen::Index>(c.L1);
    const Eigen::MatrixXd &A1 = c.A1;
    Eigen::MatrixXd &C2 = c.C2;
    C2.resize(F1 * W, c.B * static_cast<Eigen::Index>(c.L2));
    for (Eigen::Index b = 0; b < c.B; ++b)
        for (std::size_t t = 0; t < c.L2; ++t)
        {
            const Eigen::Index col = b * static_cast<Eigen::Index>(c.L2) + static_cast<Eigen::Index>(t);
            for (int w = 0; w < W; ++w)
            {
                const long idx = static_cast<long>(t) * s - c.pad2 + w;
                if (idx >= 0 && idx < L1)
                    for (int ch = 0; ch < F1; ++ch)
                        C2(ch * W + w, col) = A1(ch, b * L1 + idx);
                else
                    for (int ch = 0; ch < F1; ++ch)
                        C2(ch * W + w, col) = 0.0;
            }
        }
}

void conv2_col2im(const ModelParams &p, Cache &c)
{
    const int F1 = p.shape.conv1_filters;
    const int W = p.shape.conv2_width;
    const int s = p.shape.stride;
    const auto L1 = static_cast<Eigen::Index>(c.L1);
    const Eigen::MatrixXd &dC2 = c.dC2;
    Eigen::MatrixXd &dA1 = c.dY1;
    dA1.setZero(F1, c.B * L1);
    for (Eigen::Index b = 0; b < c.B; ++b)
        for (std::size_t t = 0; t < c.L2; ++t)
        {
            const Eigen::Index col = b * static_cast<Eigen::Index>(c.L2) + static_cast<Eigen::Index>(t);
            for (int w = 0; w < W; ++w)
            {
                const long idx = static_cast<long>(t) * s - c.pad2 + w;
                if (idx < 0 || idx >= L1)
                    continue;
                for (int ch = 0; ch < F1; ++ch)
                    dA1(ch, b * L1 + idx) += dC2(ch * W + w, col);
            }
        }
}

/// Conv stack up to c.Z2 (pre-BN); with `stop_after_conv1` it returns once
/// c.Z1 is filled.
void conv_front(const ModelParams &p, const std::vector<const double *> &seqs, Mode mode, Cache &c,
                bool stop_after_conv1 = false)
{
    const auto &s = p.shape;
    c.B = static_cast<Eigen::Index>(seqs.size());
    c.L0 = s.input_length;
    c.L1 = same_length(c.L0, s.stride);
    c.L2 = same_length(c.L1, s.stride);
    c.pad1 = same_pad_left(c.L0, c.L1, s.conv1_width, s.stride);
    c.pad2 = same_pad_left(c.L1, c.L2, s.conv2_width, s.stride);

    conv1_im2col(p, seqs, c);
    c.Z1.resize(p.conv1_w.rows(), c.C1.cols());
    c.Z1.noalias() = p.conv1_w * c.C1;
    c.Z1.colwise() += p.conv1_b;
    if (stop_after_conv1)
        return;
    batchnorm_forward(c.Z1, p.bn1, mode, c.bn1, c.Y1);
    c.A1.resize(c.Y1.rows(), c.Y1.cols());
    c.A1.array() = c.Y1.array().max(0.0);
    conv2_im2col(p, c);
    c.Z2.resize(p.conv2_w.rows(), c.C2.cols());
    c.Z2.noalias() = p.conv2_w * c.C2;
    c.Z2.colwise() += p.conv2_b;
}

/// Fills c.logp (2 x B log-probabilities) and c.P.
void forward_impl(const ModelParams &p, const std::vector<const double *> &seqs, Mode mode, Cache &c)
{
    conv_front(p, seqs, mode, c);
    batchnorm_forward(c.Z2, p.bn2, mode, c.bn2, c.Y2);
    c.A2.resize(c.Y2.rows(), c.Y2.cols());
    c.A2.array() = c.Y2.array().max(0.0);

    const auto L2 = static_cast<Eigen::Index>(c.L2);
    c.G.resize(p.shape.conv2_filters, c.B);
    for (Eigen::Index b = 0; b < c.B; ++b)
        c.G.col(b) = c.A2.middleCols(b * L2, L2).rowwise().mean();

    Eigen::MatrixXd z = p.dense1_w * c.G;
    z.colwise() += p.dense1_b;
    c.H1 = z.cwiseMax(0.0);
    z = p.dense2_w * c.H1;
    z.colwise() += p.dense2_b;
    c.H2 = z.cwiseMax(0.0);
    Eigen::MatrixXd logits = p.dense3_w * c.H2;
    logits.colwise() += p.dense3_b;

    c.logp.resize(logits.rows(), logits.cols());
    for (Eigen::Index b = 0; b < logits.cols(); ++b)
    {
        const double m = logits.col(b).maxCoeff();
        const double lse = m + std::log((logits.col(b).array() - m).exp().sum());
        c.logp.col(b) = logits.col(b).array() - lse;
    }
    c.P = c.logp.array().exp();
}

std::vector<const double *> sequence_pointers(const ModelParams &p, std::span<const LabeledSample *const> batch)
{
    std::vector<const double *> out;
    out.reserve(batch.size());
    for (const auto *s : batch)
    {
        if (s->sequence.size() != p.shape.input_length)
            throw Error("classifier: sequence length " + std::to_string(s->sequence.size()) +
                        " does not match model input " + std::to_string(p.shape.input_length));
        out.push_back(s->sequence.data());
    }
    return out;
}

int class_index(LinkState s)
{
    return s == LinkState::nlos ? 1 : 0;
}

double cross_entropy(const Eigen::MatrixXd &logp, std::span<const LabeledSample *const> batch)
{
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b)
        loss -= logp(class_index(batch[b]->label), static_cast<Eigen::Index>(b));
    return loss / static_cast<double>(batch.size());
}

struct StepOutcome
{
    double loss = 0.0;
    long correct = 0;
};

StepOutcome gradients_impl(const ModelParams &p, std::span<const LabeledSample *const> batch, Mode mode,
                           ModelParams &g)
{
    if (batch.empty())
        throw Error("classifier: empty batch");
    const auto seqs = sequence_pointers(p, batch);
    Cache &c = workspace();
    forward_impl(p, seqs, mode, c);

    StepOutcome out;
    out.loss = cross_entropy(c.logp, batch);
    Eigen::MatrixXd dlogits = c.P;
    for (Eigen::Index b = 0; b < c.B; ++b)
    {
        const int y = class_index(batch[static_cast<std::size_t>(b)]->label);
        dlogits(y, b) -= 1.0;
        if ((c.P(1, b) >= 0.5 ? 1 : 0) == y)
            ++out.correct;
    }
    dlogits /= static_cast<double>(c.B);

    if (g.shape.input_length != p.shape.input_length || g.conv1_w.size() != p.conv1_w.size())
        g = zeros_like(p);
    g.dense3_w = dlogits * c.H2.transpose();
    g.dense3_b = dlogits.rowwise().sum();
    Eigen::MatrixXd d = p.dense3_w.transpose() * dlogits;
    relu_backward(d, c.H2);
    g.dense2_w = d * c.H1.transpose();
    g.dense2_b = d.rowwise().sum();
    Eigen::MatrixXd d1 = p.dense2_w.transpose() * d;
    relu_backward(d1, c.H1);
    g.dense1_w = d1 * c.G.transpose();
    g.dense1_b = d1.rowwise().sum();
    const Eigen::MatrixXd dG = p.dense1_w.transpose() * d1;

    const auto L2 = static_cast<Eigen::Index>(c.L2);
    c.dY2.resize(p.shape.conv2_filters, c.B * L2);
    for (Eigen::Index b = 0; b < c.B; ++b)
        c.dY2.middleCols(b * L2, L2).colwise() = dG.col(b) / static_cast<double>(L2);
    relu_backward(c.dY2, c.Y2);
    batchnorm_backward(c.dY2, p.bn2, mode, c.bn2, g.bn2, c.dxhat, c.dZ2);
    g.conv2_w.noalias() = c.dZ2 * c.C2.transpose();
    g.conv2_b = c.dZ2.rowwise().sum();
    c.dC2.resize(p.conv2_w.cols(), c.dZ2.cols());
    c.dC2.noalias() = p.conv2_w.transpose() * c.dZ2;
    conv2_col2im(p, c);
    relu_backward(c.dY1, c.Y1);
    batchnorm_backward(c.dY1, p.bn1, mode, c.bn1, g.bn1, c.dxhat, c.dZ1);
    g.conv1_w.noalias() = c.dZ1 * c.C1.transpose();
    g.conv1_b = c.dZ1.rowwise().sum();
    return out;
}

double l2_penalty(ModelParams &p, double l2)
{
    double s = 0.0;
    for (const auto &grp : trainable_groups(p))
        if (grp.weight_decay)
            for (std::size_t i = 0; i < grp.size; ++i)
                s += grp.data[i] * grp.data[i];
    return 0.5 * l2 * s;
}

std::vector<const LabeledSample *> gather(const std::vector<LabeledSample> &data, const std::vector<std::size_t> &idx)
{
    std::vector<const LabeledSample *> out;
    out.reserve(idx.size());
    for (std::size_t i : idx)
    {
        if (i >= data.size())
            throw Error("split index out of range");
        out.push_back(&data[i]);
    }
    return out;
}

constexpr std::size_t kInferenceChunk = 64;

} // namespace

std::size_t ModelShape::conv1_length() const
{
    return same_length(input_length, stride);
}

std::size_t ModelShape::conv2_length() const
{
    return same_length(conv1_length(), stride);
}

void ModelParams::validate() const
{
    validate_shape(shape);
    ModelParams ref;
    allocate(ref, shape);
    std::vector<std::size_t> expect;
    for_each_tensor(ref, [&](const char *, double *, std::size_t n, bool, bool) { expect.push_back(n); });
    std::size_t i = 0;
    for_each_tensor(const_cast<ModelParams &>(*this), [&](const char *name, double *, std::size_t n, bool, bool) {
        if (n != expect[i++])
            throw Error(std::string("model: tensor ") + name + " has the wrong size");
    });
}

std::vector<ParamGroup> trainable_groups(ModelParams &params)
{
    std::vector<ParamGroup> out;
    for_each_tensor(params, [&](const char *name, double *data, std::size_t n, bool trainable, bool decay) {
        if (trainable)
            out.push_back({name, data, n, decay});
    });
    return out;
}

ModelParams init_model(const ModelShape &shape, std::uint64_t seed)
{
    validate_shape(shape);
    ModelParams p;
    allocate(p, shape);
    Rng rng(seed);
    auto he = [&](Eigen::MatrixXd &w, int fan_in) {
        std::uniform_real_distribution<double> u(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i)
                w(i, j) = u(rng);
    };
    he(p.conv1_w, shape.conv1_width);
    he(p.conv2_w, shape.conv1_filters * shape.conv2_width);
    he(p.dense1_w, shape.conv2_filters);
    he(p.dense2_w, shape.dense1);
    he(p.dense3_w, shape.dense2);
    return p;
}

ModelParams zeros_like(const ModelParams &params)
{
    ModelParams z = params;
    for_each_tensor(z, [](const char *, double *d, std::size_t n, bool, bool) { std::fill(d, d + n, 0.0); });
    return z;
}

std::vector<LabeledSample> to_samples(const std::vector<DatasetRow> &rows)
{
    std::vector<LabeledSample> out;
    out.reserve(rows.size());
    for (const auto &r : rows)
        out.push_back({r.magnitudes, r.label});
    return out;
}

std::array<double, 2> forward(const ModelParams &params, std::span<const double> sequence, Mode mode)
{
    if (sequence.size() != params.shape.input_length)
        throw Error("classifier: sequence length does not match model input");
    Cache &c = workspace();
    forward_impl(params, {sequence.data()}, mode, c);
    return {c.P(0, 0), c.P(1, 0)};
}

Eigen::MatrixXd forward_batch(const ModelParams &params, std::span<const LabeledSample *const> batch, Mode mode)
{
    if (batch.empty())
        throw Error("classifier: empty batch");
    Cache &c = workspace();
    forward_impl(params, sequence_pointers(params, batch), mode, c);
    return c.P;
}

double batch_loss(const ModelParams &params, std::span<const LabeledSample *const> batch, Mode mode)
{
    if (batch.empty())
        throw Error("classifier: empty batch");
    Cache &c = workspace();
    forward_impl(params, sequence_pointers(params, batch), mode, c);
    return cross_entropy(c.logp, batch);
}

double loss_and_gradients(const ModelParams &params, std::span<const LabeledSample *const> batch, Mode mode,
                          ModelParams &grads)
{
    return gradients_impl(params, batch, mode, grads).loss;
}

void TrainConfig::validate() const
{
    if (!(lr0 >= 0.0) || !(l2 >= 0.0))
        throw Error("train: learning rate and L2 factor must be non-negative");
    if (!(lr_drop_factor > 0.0) || lr_drop_period <= 0)
        throw Error("train: bad learning-rate schedule");
    if (early_stop_patience <= 0 || batch_size <= 0 || max_epochs <= 0)
        throw Error("train: patience, batch size and epoch budget must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
        throw Error("train: bad moment parameters");
}

double learning_rate(const TrainConfig &config, int epoch)
{
    return config.lr0 * std::pow(config.lr_drop_factor, epoch / config.lr_drop_period);
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 long step, double lr, double decay, const TrainConfig &config)
{
    if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size())
        throw Error("adam_update: size mismatch");
    if (step < 1)
        throw Error("adam_update: step counts from 1");
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i)
    {
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grads[i];
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        params[i] -= lr * (mhat / (std::sqrt(vhat) + config.epsilon) + decay * params[i]);
    }
}

AdamState init_adam(const ModelParams &params)
{
    return {zeros_like(params), zeros_like(params), 0};
}

void apply_adam_step(ModelParams &params, AdamState &state, ModelParams &grads, const TrainConfig &config, double lr)
{
    ++state.step;
    auto p = trainable_groups(params);
    auto g = trainable_groups(grads);
    auto m = trainable_groups(state.m);
    auto v = trainable_groups(state.v);
    for (std::size_t i = 0; i < p.size(); ++i)
    {
        if (g[i].size != p[i].size || m[i].size != p[i].size || v[i].size != p[i].size)
            throw Error("apply_adam_step: tensor size mismatch");
        adam_update({p[i].data, p[i].size}, {g[i].data, g[i].size}, {m[i].data, m[i].size}, {v[i].data, v[i].size},
                    state.step, lr, p[i].weight_decay ? config.l2 : 0.0, config);
    }
}

namespace
{

StepOutcome step_impl(ModelParams &params, AdamState &state, std::span<const LabeledSample *const> batch,
                      const TrainConfig &config, double lr)
{
    ModelParams grads = zeros_like(params);
    StepOutcome out = gradients_impl(params, batch, Mode::train, grads);
    out.loss += l2_penalty(params, config.l2);
    if (!std::isfinite(out.loss))
        throw Error("diverged");
    apply_adam_step(params, state, grads, config, lr);
    return out;
}

} // namespace

double backward_and_step(ModelParams &params, AdamState &state, std::span<const LabeledSample *const> batch,
                         const TrainConfig &config, double lr)
{
    return step_impl(params, state, batch, config, lr).loss;
}

DatasetSplit split_dataset(std::size_t n, const SplitFractions &f, std::uint64_t seed)
{
    if (!(f.train > 0.0) || f.validation < 0.0 || f.test < 0.0 || std::abs(f.train + f.validation + f.test - 1.0) > 1e-9)
        throw Error("split fractions must be non-negative and sum to 1");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(f.validation * static_cast<double>(n))));
    DatasetSplit s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<long>(n_train));
    s.validation.assign(idx.begin() + static_cast<long>(n_train), idx.begin() + static_cast<long>(n_train + n_val));
    s.test.assign(idx.begin() + static_cast<long>(n_train + n_val), idx.end());
    return s;
}

void recompute_batchnorm_statistics(ModelParams &params, std::span<const LabeledSample *const> samples)
{
    if (samples.empty())
        throw Error("batch-norm statistics need at least one sample");
    const auto seqs = sequence_pointers(params, samples);
    auto accumulate = [&](bool second) {
        const int C = second ? params.shape.conv2_filters : params.shape.conv1_filters;
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(C), sumsq = Eigen::VectorXd::Zero(C);
        double count = 0.0;
        for (std::size_t i = 0; i < seqs.size(); i += kInferenceChunk)
        {
            const std::vector<const double *> chunk(seqs.begin() + static_cast<long>(i),
                                                    seqs.begin() + static_cast<long>(std::min(seqs.size(), i + kInferenceChunk)));
            Cache &c = workspace();
            conv_front(params, chunk, Mode::infer, c, !second);
            const Eigen::MatrixXd &Z = second ? c.Z2 : c.Z1;
            sum += Z.rowwise().sum();
            sumsq += Z.array().square().matrix().rowwise().sum();
            count += static_cast<double>(Z.cols());
        }
        const Eigen::VectorXd mean = sum / count;
        const Eigen::VectorXd var = (sumsq / count - mean.array().square().matrix()).cwiseMax(0.0);
        auto &bn = second ? params.bn2 : params.bn1;
        bn.running_mean = mean;
        bn.running_var = var;
    };
    accumulate(false);
    accumulate(true);
}

std::vector<double> predict_nlos(const ModelParams &params, std::span<const LabeledSample *const> samples)
{
    std::vector<double> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); i += kInferenceChunk)
    {
        const auto chunk = samples.subspan(i, std::min(kInferenceChunk, samples.size() - i));
        const Eigen::MatrixXd P = forward_batch(params, chunk, Mode::infer);
        for (Eigen::Index b = 0; b < P.cols(); ++b)
            out.push_back(P(1, b));
    }
    return out;
}

double roc_auc(std::span<const double> scores, std::span<const LinkState> labels)
{
    if (scores.size() != labels.size())
        throw Error("roc_auc: score and label counts differ");
    double pos = 0.0, neg = 0.0;
    for (auto l : labels)
        (l == LinkState::nlos ? pos : neg) += 1.0;
    if (pos == 0.0 || neg == 0.0)
        return std::numeric_limits<double>::quiet_NaN();
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double tp = 0.0, fp = 0.0, area = 0.0;
    for (std::size_t i = 0; i < order.size();)
    {
        const double tp0 = tp, fp0 = fp;
        std::size_t j = i;
        for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j)
            (labels[order[j]] == LinkState::nlos ? tp : fp) += 1.0;
        area += (fp - fp0) / neg * (tp + tp0) / (2.0 * pos);
        i = j;
    }
    return area;
}

ClassifierMetrics evaluate_scores(std::span<const double> scores, std::span<const LinkState> labels, double threshold)
{
    if (scores.size() != labels.size())
        throw Error("evaluate: score and label counts differ");
    if (scores.empty())
        throw Error("evaluate: empty test set");
    ClassifierMetrics m;
    long correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
    {
        const int pred = scores[i] >= threshold ? 1 : 0;
        const int actual = class_index(labels[i]);
        ++m.confusion[static_cast<std::size_t>(actual)][static_cast<std::size_t>(pred)];
        if (pred == actual)
            ++correct;
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(scores.size());
    for (std::size_t r = 0; r < 2; ++r)
    {
        const long total = m.confusion[r][0] + m.confusion[r][1];
        for (std::size_t c = 0; c < 2; ++c)
            m.row_normalized[r][c] = total > 0 ? static_cast<double>(m.confusion[r][c]) / static_cast<double>(total) : 0.0;
    }
    m.roc_auc = roc_auc(scores, labels);
    return m;
}

ClassifierMetrics evaluate(const ModelParams &params, std::span<const LabeledSample *const> test_set, double threshold)
{
    const auto scores = predict_nlos(params, test_set);
    std::vector<LinkState> labels;
    labels.reserve(test_set.size());
    for (const auto *s : test_set)
        labels.push_back(s->label);
    return evaluate_scores(scores, labels, threshold);
}

TrainResult train(const std::vector<LabeledSample> &dataset, const DatasetSplit &split, const ModelShape &shape,
                  const TrainConfig &config)
{
    config.validate();
    if (split.train.empty() || split.validation.empty())
        throw Error("train: training and validation splits must be non-empty");
    const auto train_set = gather(dataset, split.train);
    const auto val_set = gather(dataset, split.validation);
    bool has_los = false, has_nlos = false;
    for (const auto *s : train_set)
        (s->label == LinkState::nlos ? has_nlos : has_los) = true;
    if (!has_los || !has_nlos)
        throw Error("train: single-class dataset");

    ModelParams params = init_model(shape, derive_seed(config.seed, 1));
    {
        const auto L = static_cast<Eigen::Index>(shape.input_length);
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(L), sumsq = Eigen::VectorXd::Zero(L);
        for (const double *x : sequence_pointers(params, train_set))
        {
            const Eigen::Map<const Eigen::VectorXd> v(x, L);
            sum += v;
            sumsq += v.array().square().matrix();
        }
        const double n = static_cast<double>(train_set.size());
        params.input_mean = sum / n;
        const Eigen::VectorXd var = (sumsq / n - params.input_mean.array().square().matrix()).cwiseMax(0.0);
        params.input_scale = var.array().sqrt().unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });
    }
    sequence_pointers(params, val_set);

    AdamState state = init_adam(params);
    TrainResult result;
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<LinkState> val_labels;
    for (const auto *s : val_set)
        val_labels.push_back(s->label);

    for (int epoch = 0; epoch < config.max_epochs; ++epoch)
    {
        const double lr = learning_rate(config, epoch);
        Rng rng(derive_seed(config.seed, 100 + static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);

        EpochLog log;
        log.epoch = epoch + 1;
        log.learning_rate = lr;
        double loss_sum = 0.0;
        long correct = 0;
        std::vector<const LabeledSample *> batch;
        const auto bs = static_cast<std::size_t>(config.batch_size);
        for (std::size_t i = 0; i < order.size(); i += bs)
        {
            batch.clear();
            for (std::size_t j = i; j < std::min(order.size(), i + bs); ++j)
                batch.push_back(train_set[order[j]]);
            const auto out = step_impl(params, state, batch, config, lr);
            loss_sum += out.loss * static_cast<double>(batch.size());
            correct += out.correct;
        }
        log.train_loss = loss_sum / static_cast<double>(order.size());
        log.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());

        recompute_batchnorm_statistics(params, train_set);
        const auto scores = predict_nlos(params, val_set);
        double vloss = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i)
        {
            const double p = val_labels[i] == LinkState::nlos ? scores[i] : 1.0 - scores[i];
            vloss -= std::log(std::max(p, 1e-300));
        }
        log.validation_loss = vloss / static_cast<double>(scores.size());
        const auto vm = evaluate_scores(scores, val_labels);
        log.validation_accuracy = vm.accuracy;
        log.validation_auc = vm.roc_auc;
        result.log.push_back(log);

        if (log.validation_loss < best)
        {
            best = log.validation_loss;
            result.params = params;
            result.best_epoch = log.epoch;
            stale = 0;
        }
        else if (++stale >= config.early_stop_patience)
        {
            result.early_stopped = true;
            break;
        }
    }
    return result;
}

// --- checkpoint -----------------------------------------------------------

namespace
{

constexpr char kMagic[8] = {'N', 'R', 'P', 'O', 'S', 'C', 'N', 'N'};
constexpr std::uint32_t kCheckpointVersion = 1;
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream &out, T v)
{
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream &in)
{
    char buf[sizeof(T)];
    if (!in.read(buf, sizeof(T)))
        throw Error("checkpoint: truncated file");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

} // namespace

void save_model(std::ostream &out, const ModelParams &params)
{
    params.validate();
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    const auto &s = params.shape;
    for (std::uint64_t v : {static_cast<std::uint64_t>(s.input_length), static_cast<std::uint64_t>(s.conv1_filters),
                            static_cast<std::uint64_t>(s.conv1_width), static_cast<std::uint64_t>(s.conv2_filters),
                            static_cast<std::uint64_t>(s.conv2_width), static_cast<std::uint64_t>(s.stride),
                            static_cast<std::uint64_t>(s.dense1), static_cast<std::uint64_t>(s.dense2)})
        put<std::uint64_t>(out, v);
    for_each_tensor(const_cast<ModelParams &>(params), [&](const char *, double *d, std::size_t n, bool, bool) {
        put<std::uint64_t>(out, n);
        for (std::size_t i = 0; i < n; ++i)
            put<double>(out, d[i]);
    });
    if (!out)
        throw Error("checkpoint: write failed");
}

ModelParams load_model(std::istream &in)
{
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw Error("checkpoint: bad magic");
    if (get<std::uint32_t>(in) != kCheckpointVersion)
        throw Error("checkpoint: unsupported version");
    ModelShape s;
    auto field = [&]() {
        const auto v = get<std::uint64_t>(in);
        if (v > (1u << 30))
            throw Error("checkpoint: implausible shape field");
        return v;
    };
    s.input_length = field();
    s.conv1_filters = static_cast<int>(field());
    s.conv1_width = static_cast<int>(field());
    s.conv2_filters = static_cast<int>(field());
    s.conv2_width = static_cast<int>(field());
    s.stride = static_cast<int>(field());
    s.dense1 = static_cast<int>(field());
    s.dense2 = static_cast<int>(field());
    validate_shape(s);
    ModelParams p;
    allocate(p, s);
    for_each_tensor(p, [&](const char *name, double *d, std::size_t n, bool, bool) {
        if (get<std::uint64_t>(in) != n)
            throw Error(std::string("checkpoint: tensor ") + name + " has the wrong size");
        for (std::size_t i = 0; i < n; ++i)
            d[i] = get<double>(in);
    });
    return p;
}

void save_model(const std::filesystem::path &path, const ModelParams &params)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open " + path.string() + " for writing");
    save_model(out, params);
}

ModelParams load_model(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    return load_model(in);
}

void write_training_log_csv(std::ostream &out, const std::vector<EpochLog> &log)
{
    out << "epoch,lr,train_loss,train_acc,val_loss,val_acc,val_auc\n";
    for (const auto &e : log)
        out << e.epoch << ',' << format_double(e.learning_rate) << ',' << format_double(e.train_loss) << ','
            << format_double(e.train_accuracy) << ',' << format_double(e.validation_loss) << ','
            << format_double(e.validation_accuracy) << ',' << format_double(e.validation_auc) << '\n';
}

} // namespace nrpos
