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

#pragma once

// Lightweight 1-D CNN for LOS/NLOS link classification:
//
//   input standardisation -> conv(F1, W1, stride 2, same) -> BN -> ReLU
//   -> conv(F2, W2, stride 2, same) -> BN -> ReLU -> global average pool
//   -> dense(D1) -> ReLU -> dense(D2) -> ReLU -> dense(2) -> softmax
//
// Class index 0 is LOS, 1 is NLOS.

#include "nrpos/channel.hpp"
#include "nrpos/common.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace nrpos
{

struct ModelShape
{
    std::size_t input_length = 0;
    int conv1_filters = 64;
    int conv1_width = 16;
    int conv2_filters = 32;
    int conv2_width = 8;
    int stride = 2;
    int dense1 = 64;
    int dense2 = 32;
    static constexpr int kClasses = 2;

    std::size_t conv1_length() const;
    std::size_t conv2_length() const;
};

struct BatchNormParams
{
    Eigen::VectorXd gamma, beta;
    Eigen::VectorXd running_mean, running_var;
};

struct ModelParams
{
    ModelShape shape;
    Eigen::VectorXd input_mean;  // per-feature standardisation, frozen from the training set
    Eigen::VectorXd input_scale;

    Eigen::MatrixXd conv1_w; // F1 x W1
    Eigen::VectorXd conv1_b;
    BatchNormParams bn1;
    Eigen::MatrixXd conv2_w; // F2 x (F1 * W2), column c * W2 + w
    Eigen::VectorXd conv2_b;
    BatchNormParams bn2;
    Eigen::MatrixXd dense1_w; // D1 x F2
    Eigen::VectorXd dense1_b;
    Eigen::MatrixXd dense2_w; // D2 x D1
    Eigen::VectorXd dense2_b;
    Eigen::MatrixXd dense3_w; // 2 x D2
    Eigen::VectorXd dense3_b;

    void validate() const;
};

/// Named view of one trainable tensor.
struct ParamGroup
{
    const char *name;
    double *data;
    std::size_t size;
    bool weight_decay;
};

std::vector<ParamGroup> trainable_groups(ModelParams &params);

/// He-uniform weights, zero biases, identity batch norm and standardisation.
ModelParams init_model(const ModelShape &shape, std::uint64_t seed);

/// Same shapes as `params`, every tensor zero.
ModelParams zeros_like(const ModelParams &params);

enum class Mode
{
    train, // batch norm uses batch statistics
    infer, // batch norm uses the stored running statistics
};

struct LabeledSample
{
    std::vector<double> sequence;
    LinkState label = LinkState::los;
};

std::vector<LabeledSample> to_samples(const std::vector<DatasetRow> &rows);

/// Class probabilities {p_los, p_nlos} for one sequence.
std::array<double, 2> forward(const ModelParams &params, std::span<const double> sequence, Mode mode);

/// Column b holds the class probabilities of batch[b].
Eigen::MatrixXd forward_batch(const ModelParams &params, std::span<const LabeledSample *const> batch, Mode mode);

/// Mean cross-entropy of the batch (no regulariser).
double batch_loss(const ModelParams &params, std::span<const LabeledSample *const> batch, Mode mode);

/// Mean cross-entropy and its gradient with respect to every trainable tensor.
double loss_and_gradients(const ModelParams &params, std::span<const LabeledSample *const> batch, Mode mode,
                          ModelParams &grads);

struct TrainConfig
{
    double lr0 = 1e-3;
    double l2 = 1e-4;
    double lr_drop_factor = 0.6;
    int lr_drop_period = 5; // epochs
    int early_stop_patience = 10;
    int batch_size = 64;
    int max_epochs = 30;
    std::uint64_t seed = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

/// Piecewise-constant schedule; `epoch` counts from 0.
double learning_rate(const TrainConfig &config, int epoch);

/// One adaptive-moment step on a flat tensor with decoupled weight decay:
///   w <- w - lr * (m_hat / (sqrt(v_hat) + eps) + decay * w)
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 long step, double lr, double decay, const TrainConfig &config);

struct AdamState
{
    ModelParams m;
    ModelParams v;
    long step = 0;
};

AdamState init_adam(const ModelParams &params);

/// Applies `grads` to `params` (decay on weight tensors only).
void apply_adam_step(ModelParams &params, AdamState &state, ModelParams &grads, const TrainConfig &config,
                     double lr);

/// Gradient step on one batch; returns cross-entropy + (l2/2) * ||w||^2.
/// Throws "diverged" when the loss is not finite.
double backward_and_step(ModelParams &params, AdamState &state, std::span<const LabeledSample *const> batch,
                         const TrainConfig &config, double lr);

struct SplitFractions
{
    double train = 0.70;
    double validation = 0.15;
    double test = 0.15;
};

struct DatasetSplit
{
    std::vector<std::size_t> train, validation, test;
};

DatasetSplit split_dataset(std::size_t n, const SplitFractions &fractions, std::uint64_t seed);

struct EpochLog
{
    int epoch = 0; // 1-based
    double learning_rate = 0.0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double validation_loss = 0.0;
    double validation_accuracy = 0.0;
    double validation_auc = 0.0;
};

struct TrainResult
{
    ModelParams params; // best validation epoch
    std::vector<EpochLog> log;
    int best_epoch = 0;
    bool early_stopped = false;
};

/// Fits standardisation on the training split, then trains with early
/// stopping on validation loss. Batch-norm running statistics are the
/// population statistics of the training split, refreshed after every epoch.
TrainResult train(const std::vector<LabeledSample> &dataset, const DatasetSplit &split, const ModelShape &shape,
                  const TrainConfig &config);

/// Replaces both running-statistics blocks with training-set population values.
void recompute_batchnorm_statistics(ModelParams &params, std::span<const LabeledSample *const> samples);

/// p_nlos for every sample, inference mode.
std::vector<double> predict_nlos(const ModelParams &params, std::span<const LabeledSample *const> samples);

struct ClassifierMetrics
{
    double accuracy = 0.0;
    double roc_auc = 0.0;
    std::array<std::array<long, 2>, 2> confusion{};        // [actual][predicted], 0 = LOS
    std::array<std::array<double, 2>, 2> row_normalized{};
    double los_recall() const { return row_normalized[0][0]; }
    double nlos_recall() const { return row_normalized[1][1]; }
};

/// AUC by trapezoidal integration of the ROC curve, NLOS as the positive class.
double roc_auc(std::span<const double> nlos_scores, std::span<const LinkState> labels);

ClassifierMetrics evaluate_scores(std::span<const double> nlos_scores, std::span<const LinkState> labels,
                                  double threshold = 0.5);

ClassifierMetrics evaluate(const ModelParams &params, std::span<const LabeledSample *const> test_set,
                           double threshold = 0.5);

// --- checkpoint -----------------------------------------------------------
// "NRPOSCNN", u32 version, u64 shape fields, then every tensor as a u64
// element count followed by little-endian float64 values.

void save_model(std::ostream &out, const ModelParams &params);
ModelParams load_model(std::istream &in);
void save_model(const std::filesystem::path &path, const ModelParams &params);
ModelParams load_model(const std::filesystem::path &path);

void write_training_log_csv(std::ostream &out, const std::vector<EpochLog> &log);

} // namespace nrpos
