#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "smet/model.hpp"
#include "smet/sequence.hpp"
#include "smet/train.hpp"

namespace smet {

struct GradCheckOptions {
    ModelConfig model{.segment_len = 4, .hidden = 8, .experts = 2, .layers = 1, .heads = 1};
    std::size_t positions = 3;  // N
    std::size_t batch = 3;      // B
    double step = 1e-5;
    double lambda = 0.1;
    SparsityMode sparsity = SparsityMode::entropy;
    std::uint64_t seed = 7;
};

struct BlockCheck {
    std::string name;
    std::size_t entries = 0;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
};

struct GradCheckResult {
    std::vector<BlockCheck> blocks;
    double max_rel_error = 0.0;
    /// |analytic dL/dtheta - sum over segments of dL/dE · sigmoid'(theta)(SE - TE)|
    double theta_closed_form_error = 0.0;
};

/// Relative error with a 1e-6 floor on the denominator so entries whose true
/// gradient is ~0 are judged on absolute error.
double relative_error(double analytic, double numeric);

/// Random parameters (norm scales, biases and theta perturbed off their init
/// values), random segments and text embeddings.
struct GradCheckProblem {
    ModelParams params;
    std::vector<SequenceInput> batch;
    TrainConfig train;
};

GradCheckProblem make_gradcheck_problem(const GradCheckOptions& options);

/// Loss evaluated with forward passes only, written independently of the
/// training code path.
double reference_loss(const ModelParams& params, const std::vector<SequenceInput>& batch, double lambda,
                      SparsityMode mode);

/// Central finite differences on every parameter entry against the analytic
/// training gradient.
GradCheckResult gradient_check(const GradCheckOptions& options = {});

}  // namespace smet
