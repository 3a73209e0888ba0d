#include "smet/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <tuple>

#include "smet/error.hpp"
#include "smet/hash.hpp"

namespace smet {
namespace {

std::vector<std::pair<std::string, Matrix*>> blocks_of(ModelParams& p) {
    std::vector<std::pair<std::string, Matrix*>> out;
    p.for_each([&](const std::string& name, Matrix& m) { out.emplace_back(name, &m); });
    return out;
}

}  // namespace

std::string to_string(SparsityMode mode) {
    switch (mode) {
        case SparsityMode::literal: return "literal";
        case SparsityMode::entropy: return "entropy";
        case SparsityMode::none: return "none";
    }
    return "literal";
}

SparsityMode parse_sparsity_mode(const std::string& text) {
    if (text == "literal") return SparsityMode::literal;
    if (text == "entropy") return SparsityMode::entropy;
    if (text == "none") return SparsityMode::none;
    throw ConfigError("sparsity_mode must be literal, entropy or none (got '" + text + "')");
}

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be non-negative");
    if (epochs == 0) throw ConfigError("epochs must be at least 1");
    if (batch == 0) throw ConfigError("batch must be at least 1");
    if (adamw.weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
    if (!(adamw.beta1 >= 0.0 && adamw.beta1 < 1.0 && adamw.beta2 >= 0.0 && adamw.beta2 < 1.0))
        throw ConfigError("AdamW betas must lie in [0, 1)");
}

double gate_penalty(const Matrix& probs, double lambda, SparsityMode mode, Matrix* grad) {
    if (grad) *grad = Matrix(probs.rows, probs.cols);
    double total = 0.0;
    switch (mode) {
        case SparsityMode::none:
            return 0.0;
        case SparsityMode::literal:
            for (std::size_t i = 0; i < probs.size(); ++i) {
                total += std::abs(probs.data[i]);
                if (grad) grad->data[i] = probs.data[i] > 0.0 ? lambda : (probs.data[i] < 0.0 ? -lambda : 0.0);
            }
            return lambda * total;
        case SparsityMode::entropy:
            for (std::size_t i = 0; i < probs.size(); ++i) {
                const double g = std::max(probs.data[i], 1e-300);
                total -= probs.data[i] * std::log(g);
                if (grad) grad->data[i] = -lambda * (std::log(g) + 1.0);
            }
            return lambda * total;
    }
    return 0.0;
}

double mean_row_entropy(const Matrix& probs) {
    if (probs.rows == 0) return 0.0;
    double total = 0.0;
    for (double p : probs.data)
        if (p > 0.0) total -= p * std::log(p);
    return total / static_cast<double>(probs.rows);
}

LossParts compute_loss(const Matrix& targets, const Matrix& predictions, const GateMatrix& gate, double lambda,
                       SparsityMode mode) {
    if (!targets.same_shape(predictions)) throw ShapeError("targets and predictions differ in shape");
    if (targets.empty()) throw ShapeError("empty loss batch");
    if (mode != SparsityMode::none && gate.probs.rows != targets.rows)
        throw ShapeError("gate matrix has " + std::to_string(gate.probs.rows) + " rows, batch has " +
                         std::to_string(targets.rows));
    LossParts l;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double e = targets.data[i] - predictions.data[i];
        l.mse += e * e;
    }
    l.mse /= static_cast<double>(targets.size());
    l.expert = gate_penalty(gate.probs, lambda, mode);
    l.total = l.mse + l.expert;
    return l;
}

OptState OptState::for_params(const ModelParams& params) {
    return {ModelParams::zeros(params.config), ModelParams::zeros(params.config), 0};
}

void adamw_step(ModelParams& params, const ModelParams& grads, OptState& state, const TrainConfig& config) {
    auto p = blocks_of(params);
    auto g = blocks_of(const_cast<ModelParams&>(grads));
    auto m = blocks_of(state.first);
    auto v = blocks_of(state.second);
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
        throw ShapeError("optimizer state does not mirror the parameters");
    for (const auto& [name, mat] : g)
        for (double x : mat->data)
            if (!std::isfinite(x)) throw NonFiniteGradient("non-finite gradient in block " + name);

    ++state.step;
    const auto& a = config.adamw;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(a.beta1, t);
    const double c2 = 1.0 - std::pow(a.beta2, t);
    const bool theta_frozen = params.config.fusion == FusionMode::numeric_only;
    for (std::size_t b = 0; b < p.size(); ++b) {
        const bool is_theta = p[b].first == "theta";
        if (is_theta && theta_frozen) continue;
        const double decay = is_theta ? 0.0 : a.weight_decay;
        auto& pd = p[b].second->data;
        const auto& gd = g[b].second->data;
        auto& md = m[b].second->data;
        auto& vd = v[b].second->data;
        if (gd.size() != pd.size()) throw ShapeError("gradient block " + p[b].first + " has wrong size");
        for (std::size_t i = 0; i < pd.size(); ++i) {
            md[i] = a.beta1 * md[i] + (1.0 - a.beta1) * gd[i];
            vd[i] = a.beta2 * vd[i] + (1.0 - a.beta2) * gd[i] * gd[i];
            pd[i] -= config.lr * decay * pd[i];
            pd[i] -= config.lr * (md[i] / c1) / (std::sqrt(vd[i] / c2) + a.eps);
        }
    }
}

LossParts batch_gradients(const ModelParams& params, const std::vector<const SequenceInput*>& batch,
                          const TrainConfig& config, ModelParams& grads, double* gate_entropy) {
    grads = ModelParams::zeros(params.config);
    const std::size_t S = params.config.segment_len;
    std::size_t rows = 0;
    for (const auto* seq : batch) {
        if (seq->segments.rows < 2) throw ShapeError("training sequences need at least two segments");
        rows += seq->segments.rows - 1;
    }
    const double denom = static_cast<double>(rows * S);

    LossParts loss;
    double entropy = 0.0;
    for (const auto* seq : batch) {
        const auto trace = forward(params, seq->segments, seq->text);
        const std::size_t used = seq->segments.rows - 1;
        Matrix d_pred(trace.prediction.rows, S);
        for (std::size_t i = 0; i < used; ++i)
            for (std::size_t s = 0; s < S; ++s) {
                const double e = trace.prediction(i, s) - seq->segments(i + 1, s);
                loss.mse += e * e / denom;
                d_pred(i, s) = 2.0 * e / denom;
            }
        Matrix used_probs(used, trace.gate.probs.cols);
        std::copy_n(trace.gate.probs.data.begin(), used_probs.size(), used_probs.data.begin());
        Matrix d_gate_used;
        loss.expert += gate_penalty(used_probs, config.lambda, config.sparsity, &d_gate_used);
        entropy += mean_row_entropy(used_probs) * static_cast<double>(used);
        Matrix d_gate(trace.gate.probs.rows, trace.gate.probs.cols);
        std::copy(d_gate_used.data.begin(), d_gate_used.data.end(), d_gate.data.begin());
        backward(params, trace, d_pred, d_gate, grads);
    }
    loss.total = loss.mse + loss.expert;
    if (gate_entropy) *gate_entropy = entropy / static_cast<double>(rows);
    return loss;
}

Metrics validate(const ModelParams& params, const TrainingData& data) {
    Metrics total;
    if (data.val.empty()) return total;
    const Forecaster model{&params, data.text, data.decimals};
    for (const auto& w : data.val) {
        const auto pred = rolling_forecast(model, w.context, w.start, data.freq, w.target.size());
        const auto m = metrics(pred, w.target);
        total.mse += m.mse;
        total.mae += m.mae;
    }
    total.mse /= static_cast<double>(data.val.size());
    total.mae /= static_cast<double>(data.val.size());
    return total;
}

TrainResult train(const ModelParams& init, const TrainingData& data, const TrainConfig& config) {
    config.validate();
    if (data.train.empty()) throw ShapeError("no training sequences");

    TrainResult result;
    ModelParams params = init;
    OptState state = OptState::for_params(params);
    ModelParams grads;
    std::vector<std::size_t> order(data.train.size());
    bool best_set = false;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::mt19937_64 rng(stable_hash64("epoch-" + std::to_string(epoch), config.seed));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

        EpochRecord rec;
        rec.epoch = epoch;
        std::size_t batches = 0;
        bool capped = false;
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            std::vector<const SequenceInput*> batch;
            for (std::size_t i = start; i < std::min(order.size(), start + config.batch); ++i)
                batch.push_back(&data.train[order[i]]);
            double entropy = 0.0;
            const auto loss = batch_gradients(params, batch, config, grads, &entropy);
            adamw_step(params, grads, state, config);
            rec.train_loss += loss.total;
            rec.mean_gate_entropy += entropy;
            ++batches;
            ++result.steps;
            if (config.max_steps != 0 && result.steps >= config.max_steps) {
                capped = true;
                break;
            }
        }
        rec.train_loss /= static_cast<double>(batches);
        rec.mean_gate_entropy /= static_cast<double>(batches);
        rec.steps = result.steps;
        rec.alpha = params.config.fusion == FusionMode::adaptive ? sigmoid(params.theta.data[0]) : 1.0;
        const auto val = validate(params, data);
        rec.val_mse = val.mse;
        rec.val_mae = val.mae;
        result.curve.push_back(rec);

        if (!best_set || rec.val_mse < result.best_val_mse) {
            best_set = true;
            result.best_val_mse = rec.val_mse;
            result.best_epoch = epoch;
            result.best = params;
        }
        if (capped) break;
    }
    result.last = std::move(params);
    return result;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < std::min(jobs, n); ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
}

Selection select_hyperparams(const std::vector<double>& lrs, const std::vector<double>& lambdas,
                             const std::function<double(double, double)>& evaluate, std::size_t jobs) {
    if (lrs.empty() || lambdas.empty()) throw ConfigError("hyperparameter grids must be non-empty");
    Selection sel;
    for (double lr : lrs)
        for (double lambda : lambdas) sel.evaluated.push_back({lr, lambda, 0.0});
    parallel_for(sel.evaluated.size(), jobs, [&](std::size_t i) {
        sel.evaluated[i].val_mse = evaluate(sel.evaluated[i].lr, sel.evaluated[i].lambda);
    });
    const auto best = std::min_element(sel.evaluated.begin(), sel.evaluated.end(), [](const auto& a, const auto& b) {
        return std::tie(a.val_mse, a.lr, a.lambda) < std::tie(b.val_mse, b.lr, b.lambda);
    });
    sel.lr = best->lr;
    sel.lambda = best->lambda;
    return sel;
}

}  // namespace smet
