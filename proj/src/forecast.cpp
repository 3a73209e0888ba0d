#include "smet/forecast.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "smet/error.hpp"

namespace smet {

std::vector<double> rolling_forecast(const Forecaster& model, std::span<const double> context, Timestamp start,
                                     Duration freq, std::size_t horizon) {
    if (horizon == 0) throw InvalidHorizon("horizon must be at least 1");
    if (!model.params) throw ConfigError("forecaster has no parameters");
    const auto& params = *model.params;
    const std::size_t S = params.config.segment_len;
    const std::size_t n = context.size() / S;
    if (n == 0) throw SegmentTooLong("context shorter than one segment");

    // Keep the most recent n·S values.
    const std::size_t drop = context.size() - n * S;
    std::vector<double> window(context.begin() + drop, context.end());
    Timestamp window_start = start + freq * static_cast<long long>(drop);
    const TextSource text = params.config.use_text ? model.text : TextSource{};

    const std::size_t steps = (horizon + S - 1) / S;
    std::vector<double> out;
    out.reserve(steps * S);
    for (std::size_t step = 0; step < steps; ++step) {
        const auto in = build_sequence(window, window_start, freq, S, text, model.decimals);
        const auto trace = forward(params, in.segments, in.text);
        const auto next = trace.prediction.row(trace.prediction.rows - 1);
        out.insert(out.end(), next.begin(), next.end());
        window.erase(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(S));
        window.insert(window.end(), next.begin(), next.end());
        window_start += freq * static_cast<long long>(S);
    }
    out.resize(horizon);
    return out;
}

Metrics metrics(std::span<const double> prediction, std::span<const double> truth) {
    if (prediction.size() != truth.size())
        throw ShapeError("prediction has " + std::to_string(prediction.size()) + " values, truth has " +
                         std::to_string(truth.size()));
    if (truth.empty()) throw ShapeError("metrics of an empty forecast");
    Metrics m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double e = prediction[i] - truth[i];
        m.mse += e * e;
        m.mae += std::abs(e);
    }
    m.mse /= static_cast<double>(truth.size());
    m.mae /= static_cast<double>(truth.size());
    return m;
}

std::vector<double> persistence_baseline(std::span<const double> context, std::size_t horizon) {
    if (context.empty()) throw ShapeError("persistence needs at least one observation");
    if (horizon == 0) throw InvalidHorizon("horizon must be at least 1");
    return std::vector<double>(horizon, context.back());
}

LinearBaseline LinearBaseline::fit(const std::vector<WindowSample>& windows) {
    if (windows.empty()) throw ShapeError("linear baseline needs at least one window");
    LinearBaseline b;
    b.context_len_ = windows.front().context.size();
    b.horizon_ = windows.front().target.size();
    const auto n = static_cast<Eigen::Index>(windows.size());
    const auto c = static_cast<Eigen::Index>(b.context_len_);
    const auto f = static_cast<Eigen::Index>(b.horizon_);
    Eigen::MatrixXd x(n, c + 1);
    Eigen::MatrixXd y(n, f);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& w = windows[static_cast<std::size_t>(i)];
        if (w.context.size() != b.context_len_ || w.target.size() != b.horizon_)
            throw ShapeError("windows of mixed shapes");
        for (Eigen::Index j = 0; j < c; ++j) x(i, j) = w.context[static_cast<std::size_t>(j)];
        x(i, c) = 1.0;
        for (Eigen::Index j = 0; j < f; ++j) y(i, j) = w.target[static_cast<std::size_t>(j)];
    }
    const Eigen::MatrixXd w = x.completeOrthogonalDecomposition().solve(y);
    b.weights_ = Matrix(static_cast<std::size_t>(c + 1), b.horizon_);
    for (Eigen::Index i = 0; i <= c; ++i)
        for (Eigen::Index j = 0; j < f; ++j) b.weights_(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = w(i, j);
    return b;
}

std::vector<double> LinearBaseline::predict(std::span<const double> context) const {
    if (context.size() != context_len_) throw ShapeError("context length differs from the fitted baseline");
    std::vector<double> out(weights_.row(context_len_).begin(), weights_.row(context_len_).end());
    for (std::size_t i = 0; i < context_len_; ++i)
        for (std::size_t j = 0; j < horizon_; ++j) out[j] += context[i] * weights_(i, j);
    return out;
}

}  // namespace smet
