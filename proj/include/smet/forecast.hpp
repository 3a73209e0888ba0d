#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "smet/data.hpp"
#include "smet/model.hpp"
#include "smet/sequence.hpp"

namespace smet {

/// A trained model together with the text embeddings it reads.
struct Forecaster {
    const ModelParams* params = nullptr;
    TextSource text;
    int decimals = 4;
};

/// Autoregressive generation: each step feeds the most recent floor(C/S)
/// segments, appends the predicted next segment and slides forward by S.
/// Runs ceil(horizon/S) steps and truncates to `horizon` values.
std::vector<double> rolling_forecast(const Forecaster& model, std::span<const double> context, Timestamp start,
                                     Duration freq, std::size_t horizon);

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
};

Metrics metrics(std::span<const double> prediction, std::span<const double> truth);

std::vector<double> persistence_baseline(std::span<const double> context, std::size_t horizon);

/// Least-squares map from a flattened context (plus intercept) to the next
/// `horizon` values.
class LinearBaseline {
public:
    static LinearBaseline fit(const std::vector<WindowSample>& windows);
    std::vector<double> predict(std::span<const double> context) const;
    std::size_t context_len() const { return context_len_; }
    std::size_t horizon() const { return horizon_; }

private:
    std::size_t context_len_ = 0;
    std::size_t horizon_ = 0;
    Matrix weights_;  // (C+1)×F, last row is the intercept
};

}  // namespace smet
