#include "smet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "smet/hash.hpp"

namespace smet {

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

GradCheckProblem make_gradcheck_problem(const GradCheckOptions& options) {
    GradCheckProblem p;
    p.params = ModelParams::init(options.model);
    std::mt19937_64 rng(stable_hash64("gradcheck", options.seed));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    p.params.for_each([&](const std::string& name, Matrix& m) {
        const bool shifted = name == "theta" || name.find("norm") != std::string::npos ||
                             (name.size() > 2 && name.compare(name.size() - 2, 2, "_b") == 0) ||
                             name.find(".b") != std::string::npos;
        if (shifted)
            for (auto& x : m.data) x += 0.5 * uni(rng);
    });
    // Larger gate weights make the softmax non-uniform.
    for (auto& x : p.params.gate_w.data) x *= 3.0;

    const auto& c = options.model;
    for (std::size_t b = 0; b < options.batch; ++b) {
        SequenceInput in;
        in.segments = Matrix(options.positions, c.segment_len);
        in.text = Matrix(options.positions, c.hidden);
        for (auto& x : in.segments.data) x = 1.5 * uni(rng);
        for (auto& x : in.text.data) x = uni(rng) / std::sqrt(static_cast<double>(c.hidden));
        p.batch.push_back(std::move(in));
    }
    p.train.lambda = options.lambda;
    p.train.sparsity = options.sparsity;
    return p;
}

double reference_loss(const ModelParams& params, const std::vector<SequenceInput>& batch, double lambda,
                      SparsityMode mode) {
    double sq = 0.0;
    double penalty = 0.0;
    std::size_t count = 0;
    for (const auto& seq : batch) {
        const auto tr = forward(params, seq.segments, seq.text);
        for (std::size_t i = 0; i + 1 < seq.segments.rows; ++i) {
            for (std::size_t s = 0; s < seq.segments.cols; ++s) {
                const double e = tr.prediction(i, s) - seq.segments(i + 1, s);
                sq += e * e;
                ++count;
            }
            for (std::size_t k = 0; k < tr.gate.probs.cols; ++k) {
                const double g = tr.gate.probs(i, k);
                if (mode == SparsityMode::literal) penalty += std::abs(g);
                if (mode == SparsityMode::entropy && g > 0.0) penalty -= g * std::log(g);
            }
        }
    }
    return sq / static_cast<double>(count) + lambda * penalty;
}

GradCheckResult gradient_check(const GradCheckOptions& options) {
    auto problem = make_gradcheck_problem(options);
    std::vector<const SequenceInput*> batch;
    for (const auto& s : problem.batch) batch.push_back(&s);

    ModelParams analytic;
    batch_gradients(problem.params, batch, problem.train, analytic);

    GradCheckResult result;
    std::vector<const Matrix*> grad_blocks;
    analytic.for_each([&](const std::string&, const Matrix& m) { grad_blocks.push_back(&m); });

    std::size_t idx = 0;
    ModelParams& params = problem.params;
    params.for_each([&](const std::string& name, Matrix& m) {
        BlockCheck check{name, m.size(), 0.0, 0.0};
        const Matrix& g = *grad_blocks[idx++];
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double orig = m.data[i];
            m.data[i] = orig + options.step;
            const double up = reference_loss(params, problem.batch, options.lambda, options.sparsity);
            m.data[i] = orig - options.step;
            const double down = reference_loss(params, problem.batch, options.lambda, options.sparsity);
            m.data[i] = orig;
            const double numeric = (up - down) / (2.0 * options.step);
            check.max_rel_error = std::max(check.max_rel_error, relative_error(g.data[i], numeric));
            check.max_abs_error = std::max(check.max_abs_error, std::abs(g.data[i] - numeric));
        }
        result.max_rel_error = std::max(result.max_rel_error, check.max_rel_error);
        result.blocks.push_back(check);
    });

    // theta through the closed-form fusion derivative: dL/dtheta = sum_i dL/dE_i · dE_i/dtheta.
    double closed = 0.0;
    ModelParams scratch = ModelParams::zeros(params.config);
    for (const auto& seq : problem.batch) {
        const auto tr = forward(params, seq.segments, seq.text);
        Matrix d_pred(tr.prediction.rows, tr.prediction.cols);
        std::size_t rows = 0;
        for (const auto& s : problem.batch) rows += s.segments.rows - 1;
        const double denom = static_cast<double>(rows * params.config.segment_len);
        for (std::size_t i = 0; i + 1 < seq.segments.rows; ++i)
            for (std::size_t s = 0; s < d_pred.cols; ++s)
                d_pred(i, s) = 2.0 * (tr.prediction(i, s) - seq.segments(i + 1, s)) / denom;
        Matrix used(tr.gate.probs.rows - 1, tr.gate.probs.cols);
        std::copy_n(tr.gate.probs.data.begin(), used.size(), used.data.begin());
        Matrix d_used;
        gate_penalty(used, options.lambda, options.sparsity, &d_used);
        Matrix d_gate(tr.gate.probs.rows, tr.gate.probs.cols);
        std::copy(d_used.data.begin(), d_used.data.end(), d_gate.data.begin());
        Matrix d_fused;
        backward(params, tr, d_pred, d_gate, scratch, &d_fused);
        for (std::size_t i = 0; i < tr.se.rows; ++i) {
            const auto de = fuse_grad_theta(tr.se.row(i), tr.te.row(i), params.theta.data[0]);
            for (std::size_t d = 0; d < de.size(); ++d) closed += d_fused(i, d) * de[d];
        }
    }
    result.theta_closed_form_error = std::abs(closed - analytic.theta.data[0]);
    return result;
}

}  // namespace smet
