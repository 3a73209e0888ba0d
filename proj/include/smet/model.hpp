#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "smet/matrix.hpp"

namespace smet {

enum class FusionMode {
    adaptive,      // E = sigmoid(theta)·SE + (1 - sigmoid(theta))·TE
    numeric_only,  // alpha pinned to 1, theta untrained
};

struct ModelConfig {
    std::size_t segment_len = 96;  // S
    std::size_t hidden = 128;      // D
    std::size_t experts = 4;       // K
    std::size_t layers = 2;        // L
    std::size_t heads = 2;         // H
    std::size_t ffn_mult = 2;      // feed-forward width = ffn_mult·D
    bool use_gate = true;          // false: single expert, no gate parameters
    bool use_text = true;          // false: TE replaced by zeros
    FusionMode fusion = FusionMode::adaptive;
    std::uint64_t seed = 0;        // parameter initialization
    std::uint64_t text_seed = 0;   // built-in text encoder

    std::size_t ffn_width() const { return ffn_mult * hidden; }
    std::size_t head_dim() const { return hidden / heads; }
    /// Throws ConfigError on inconsistent settings.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct BackboneBlock {
    Matrix norm1;           // 1×D pre-attention RMS scale
    Matrix wq, wk, wv, wo;  // D×D
    Matrix norm2;           // 1×D pre-FFN RMS scale
    Matrix w1, b1;          // D×F, 1×F
    Matrix w2, b2;          // F×D, 1×D
    bool operator==(const BackboneBlock&) const = default;
};

struct ModelParams {
    ModelConfig config;
    Matrix seg_w, seg_b;  // S×D, 1×D
    Matrix theta;         // 1×1
    std::vector<BackboneBlock> blocks;
    std::vector<Matrix> experts;  // K × (D×D)
    Matrix gate_w, gate_b;        // D×K, 1×K; empty without a gate
    Matrix out_w, out_b;          // D×S, 1×S

    /// Seeded uniform(±1/√fan_in) weights, zero biases, unit norm scales, theta = 0.
    static ModelParams init(const ModelConfig& config);
    /// Same shapes as `config` describes, all zeros.
    static ModelParams zeros(const ModelConfig& config);

    /// Visits every parameter block in a fixed order with a stable name.
    void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
    void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;

    std::size_t parameter_count() const;
    bool operator==(const ModelParams&) const = default;
};

struct GateMatrix {
    Matrix logits;  // B×K
    Matrix probs;   // B×K, softmax of logits per row
};

struct BlockTrace {
    Matrix input;
    std::vector<double> inv_rms1;
    Matrix normed1;
    Matrix q, k, v;
    std::vector<Matrix> attn;  // per head, N×N (upper triangle zero)
    Matrix context;
    Matrix mid;  // after attention residual
    std::vector<double> inv_rms2;
    Matrix normed2;
    Matrix ffn_pre, ffn_act;
};

struct ForwardTrace {
    Matrix segments;  // N×S
    Matrix seg_pre;   // N×D pre-GeLU
    Matrix se;        // N×D
    Matrix te;        // N×D (zeros when text is disabled)
    double alpha = 0.5;
    Matrix fused;  // E
    std::vector<BlockTrace> blocks;
    Matrix contextual;                   // Ê
    std::vector<Matrix> expert_outputs;  // H^k
    GateMatrix gate;
    Matrix gated;       // Ŝ, N×D
    Matrix prediction;  // N×S; row i forecasts segment i+1
};

// Individual stages.
std::vector<double> segment_embed(std::span<const double> segment, const ModelParams& params);
struct FusionResult {
    std::vector<double> fused;
    double alpha = 0.5;
};
FusionResult fuse(std::span<const double> se, std::span<const double> te, double theta);
std::vector<double> fuse_grad_theta(std::span<const double> se, std::span<const double> te,
                                    double theta);
Matrix backbone_forward(const Matrix& fused, const ModelParams& params);
struct MoeOutput {
    Matrix gated;
    GateMatrix gate;
    std::vector<Matrix> expert_outputs;
};
MoeOutput moe_forward(const Matrix& contextual, const ModelParams& params);
std::vector<double> predict_segment(std::span<const double> gated_row, const ModelParams& params);

/// Full forward pass over one sequence of N segments with their text embeddings.
ForwardTrace forward(const ModelParams& params, const Matrix& segments, const Matrix& text);

/// Accumulates parameter gradients into `grads` given dLoss/dprediction and
/// dLoss/dG (penalty contribution). Both have the trace's row count. When
/// `grad_fused` is given it receives dLoss/dE.
void backward(const ModelParams& params, const ForwardTrace& trace, const Matrix& grad_prediction,
              const Matrix& grad_gate, ModelParams& grads, Matrix* grad_fused = nullptr);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_json(const ModelParams& params);
ModelParams parse_checkpoint(const std::string& text);

}  // namespace smet
