#pragma once

#include "tsmq/common.hpp"
#include "tsmq/pipeline.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tsmq {

inline constexpr std::string_view kModelSchema = "tsmq.model.v1";

struct TrainConfig {
    std::uint64_t seed = 0;
    std::size_t epochs = 800;
    double learning_rate = 1e-4;
    double weight_decay = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double val_fraction = 0.10;
    std::string target = "smos";
    bool include_references = true;
    // The published protocol consults test-subset metrics when picking the
    // epoch (never for gradients). Turn off to select on train/val only.
    bool select_with_test = true;
    // One-shot extension: another `epochs` when the best distance lands in
    // the final tenth of the run.
    bool extend_if_improving = true;
};

struct LayerParams {
    Eigen::MatrixXd weights; // out x in
    Eigen::VectorXd bias;
    Eigen::VectorXd gain;   // layer-norm scale
    Eigen::VectorXd offset; // layer-norm shift
};

/// 3x128 residual MLP with layer normalization and a sigmoid head, plus
/// everything inference needs: the feature scaler and schema tag.
struct ModelParams {
    std::string schema = std::string(kModelSchema);
    int input_dim = 0;
    LayerParams layer1, layer2, layer3;
    Eigen::VectorXd head_weights;
    double head_bias = 0.0;
    FeatureScaler scaler{};
    TrainConfig config{};
    std::size_t selected_epoch = 0;
};

struct EpochStats {
    double loss_train = 0.0, loss_val = 0.0, loss_test = 0.0; // RMSE on [1,5]
    double rho_train = 0.0, rho_val = 0.0, rho_test = 0.0;    // Pearson
    double distance = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    std::size_t selected_epoch = 0;
    bool extended = false;
};

/// Deterministic initialization: uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)]
/// weights, zero biases, unit gains. Same seed, same bits.
ModelParams init_model(std::uint64_t seed, int input_dim);

/// Batched forward pass on normalized features (rows are samples).
/// Output is in (0,1).
Eigen::VectorXd forward_batch(const ModelParams& model, const Eigen::MatrixXd& inputs);

/// Single normalized feature vector through the network.
double forward(const ModelParams& model, const std::vector<double>& normalized_features);

struct LayerGradients {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias, gain, offset;
};

/// Gradients of the full-batch RMSE with respect to every parameter;
/// exposed so finite-difference checks can probe the backward pass.
struct ModelGradients {
    LayerGradients layer1, layer2, layer3;
    Eigen::VectorXd head_weights;
    double head_bias = 0.0;
};

ModelGradients compute_gradients(const ModelParams& model, const Eigen::MatrixXd& inputs,
                                 const Eigen::VectorXd& targets);

/// Eq-style scalar combining mean and spread of correlation and loss over
/// the three splits.
double overall_distance(const std::array<double, 3>& rho, const std::array<double, 3>& loss);

/// argmin of distance, earliest epoch on ties.
std::size_t select_epoch(const std::vector<EpochStats>& history);

/// Full-batch AdamW training on a normalized, labelled table. Returns the
/// parameters of the selected epoch together with the complete history.
std::pair<ModelParams, TrainHistory> train(const FeatureTable& table, const TrainConfig& config);

/// Raw feature vector to OMOS on [1,5]: stored scaler, forward, rescale.
double predict(const ModelParams& model, const FeatureVector& raw);

void save_model(const ModelParams& model, const TrainHistory& history, const std::string& path);
ModelParams load_model(const std::string& path);

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

} // namespace tsmq
