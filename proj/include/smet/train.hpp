#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "smet/data.hpp"
#include "smet/forecast.hpp"
#include "smet/model.hpp"
#include "smet/sequence.hpp"

namespace smet {

enum class SparsityMode { literal, entropy, none };

std::string to_string(SparsityMode mode);
SparsityMode parse_sparsity_mode(const std::string& text);

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct TrainConfig {
    double lr = 1e-3;
    double lambda = 0.01;
    std::size_t epochs = 10;
    std::size_t batch = 32;
    std::uint64_t seed = 0;
    SparsityMode sparsity = SparsityMode::literal;
    AdamWConfig adamw;
    std::size_t max_steps = 0;  // 0: no cap

    void validate() const;
};

struct LossParts {
    double total = 0.0;
    double mse = 0.0;
    double expert = 0.0;
};

/// mse over all B·S entries plus the gate penalty selected by `mode`.
LossParts compute_loss(const Matrix& targets, const Matrix& predictions, const GateMatrix& gate, double lambda,
                       SparsityMode mode);

/// Penalty term alone and its gradient with respect to G (B×K).
double gate_penalty(const Matrix& probs, double lambda, SparsityMode mode, Matrix* grad = nullptr);

/// Mean per-row Shannon entropy (nats) of a row-stochastic matrix.
double mean_row_entropy(const Matrix& probs);

struct OptState {
    ModelParams first;
    ModelParams second;
    std::size_t step = 0;

    static OptState for_params(const ModelParams& params);
};

/// One decoupled-weight-decay Adam update. theta is never decayed, and is left
/// untouched when the model runs with the fusion gate pinned.
void adamw_step(ModelParams& params, const ModelParams& grads, OptState& state, const TrainConfig& config);

struct EpochRecord {
    std::size_t epoch = 0;
    std::size_t steps = 0;
    double train_loss = 0.0;
    double val_mse = 0.0;
    double val_mae = 0.0;
    double mean_gate_entropy = 0.0;
    double alpha = 0.0;
};

struct TrainResult {
    ModelParams best;
    ModelParams last;
    std::vector<EpochRecord> curve;
    std::size_t best_epoch = 0;
    std::size_t steps = 0;
    double best_val_mse = 0.0;
};

/// Teacher-forced sequences (position i predicts segment i+1) plus the
/// validation windows scored by rolling forecasts.
struct TrainingData {
    std::vector<SequenceInput> train;
    std::vector<WindowSample> val;
    Duration freq{3600};
    TextSource text;  // used for validation forecasts
    int decimals = 4;
};

/// Loss and gradient of one mini-batch. Returns the loss parts and fills
/// `grads` (zeroed first).
LossParts batch_gradients(const ModelParams& params, const std::vector<const SequenceInput*>& batch,
                          const TrainConfig& config, ModelParams& grads, double* gate_entropy = nullptr);

Metrics validate(const ModelParams& params, const TrainingData& data);

TrainResult train(const ModelParams& init, const TrainingData& data, const TrainConfig& config);

struct GridPoint {
    double lr = 0.0;
    double lambda = 0.0;
    double val_mse = 0.0;
};

struct Selection {
    double lr = 0.0;
    double lambda = 0.0;
    std::vector<GridPoint> evaluated;
};

/// Exhaustive search by validation MSE; ties go to the smaller lr, then the
/// smaller lambda. `evaluate` is called once per grid point (possibly from
/// `jobs` threads).
Selection select_hyperparams(const std::vector<double>& lrs, const std::vector<double>& lambdas,
                             const std::function<double(double lr, double lambda)>& evaluate, std::size_t jobs = 1);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace smet
