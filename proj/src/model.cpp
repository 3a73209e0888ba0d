#include "smet/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "smet/error.hpp"
#include "smet/hash.hpp"

namespace smet {
namespace {

constexpr double kNormEps = 1e-5;

// splitmix64; portable where std:: distributions are not.
class InitRng {
public:
    explicit InitRng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform(double lo, double hi) {
        const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

private:
    std::uint64_t state_;
};

void fill_uniform(Matrix& m, std::uint64_t seed, const std::string& name) {
    InitRng rng(stable_hash64(name, seed));
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.rows));
    for (auto& x : m.data) x = rng.uniform(-bound, bound);
}

bool is_weight(const std::string& name) {
    auto ends_with = [&](std::string_view s) {
        return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    return name.rfind("experts.", 0) == 0 || ends_with("_w") || ends_with(".wq") || ends_with(".wk") ||
           ends_with(".wv") || ends_with(".wo") || ends_with(".w1") || ends_with(".w2");
}

void rms_norm(const Matrix& x, const Matrix& scale, Matrix& out, std::vector<double>& inv_rms) {
    out = Matrix(x.rows, x.cols);
    inv_rms.assign(x.rows, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double ms = 0.0;
        for (std::size_t d = 0; d < x.cols; ++d) ms += x(i, d) * x(i, d);
        const double r = 1.0 / std::sqrt(ms / static_cast<double>(x.cols) + kNormEps);
        inv_rms[i] = r;
        for (std::size_t d = 0; d < x.cols; ++d) out(i, d) = x(i, d) * r * scale.data[d];
    }
}

// Returns dL/dx and accumulates dL/dscale.
Matrix rms_norm_backward(const Matrix& x, const std::vector<double>& inv_rms, const Matrix& scale,
                         const Matrix& grad_out, Matrix& grad_scale) {
    Matrix dx(x.rows, x.cols);
    const double width = static_cast<double>(x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double r = inv_rms[i];
        double dot = 0.0;
        for (std::size_t d = 0; d < x.cols; ++d) {
            const double y = x(i, d) * r;
            grad_scale.data[d] += grad_out(i, d) * y;
            dot += grad_out(i, d) * scale.data[d] * y;
        }
        dot /= width;
        for (std::size_t d = 0; d < x.cols; ++d) {
            const double y = x(i, d) * r;
            dx(i, d) = r * (grad_out(i, d) * scale.data[d] - y * dot);
        }
    }
    return dx;
}

void add_in_place(Matrix& acc, const Matrix& m) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc.data[i] += m.data[i];
}

Matrix block_forward(const BackboneBlock& b, const ModelConfig& cfg, const Matrix& x, BlockTrace& tr) {
    const std::size_t n = x.rows;
    const std::size_t heads = cfg.heads;
    const std::size_t hd = cfg.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    tr.input = x;
    rms_norm(x, b.norm1, tr.normed1, tr.inv_rms1);
    tr.q = matmul(tr.normed1, b.wq);
    tr.k = matmul(tr.normed1, b.wk);
    tr.v = matmul(tr.normed1, b.wv);
    tr.context = Matrix(n, cfg.hidden);
    tr.attn.assign(heads, Matrix(n, n));
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * hd;
        Matrix& p = tr.attn[h];
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -INFINITY;
            for (std::size_t j = 0; j <= i; ++j) {
                double s = 0.0;
                for (std::size_t d = 0; d < hd; ++d) s += tr.q(i, off + d) * tr.k(j, off + d);
                p(i, j) = s * scale;
                mx = std::max(mx, p(i, j));
            }
            double z = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                p(i, j) = std::exp(p(i, j) - mx);
                z += p(i, j);
            }
            for (std::size_t j = 0; j <= i; ++j) {
                p(i, j) /= z;
                for (std::size_t d = 0; d < hd; ++d) tr.context(i, off + d) += p(i, j) * tr.v(j, off + d);
            }
        }
    }
    tr.mid = matmul(tr.context, b.wo);
    add_in_place(tr.mid, x);

    rms_norm(tr.mid, b.norm2, tr.normed2, tr.inv_rms2);
    tr.ffn_pre = matmul(tr.normed2, b.w1);
    add_row_bias(tr.ffn_pre, b.b1);
    tr.ffn_act = tr.ffn_pre;
    for (auto& a : tr.ffn_act.data) a = gelu(a);
    Matrix out = matmul(tr.ffn_act, b.w2);
    add_row_bias(out, b.b2);
    add_in_place(out, tr.mid);
    return out;
}

Matrix block_backward(const BackboneBlock& b, const ModelConfig& cfg, const BlockTrace& tr, const Matrix& grad_out,
                      BackboneBlock& g) {
    const std::size_t n = tr.input.rows;
    const std::size_t hd = cfg.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    // feed-forward
    add_matmul_at(g.w2, tr.ffn_act, grad_out);
    add_column_sums(g.b2, grad_out);
    Matrix d_pre = matmul_bt(grad_out, b.w2);
    for (std::size_t i = 0; i < d_pre.size(); ++i) d_pre.data[i] *= gelu_grad(tr.ffn_pre.data[i]);
    add_matmul_at(g.w1, tr.normed2, d_pre);
    add_column_sums(g.b1, d_pre);
    const Matrix d_norm2 = matmul_bt(d_pre, b.w1);
    Matrix d_mid = rms_norm_backward(tr.mid, tr.inv_rms2, b.norm2, d_norm2, g.norm2);
    add_in_place(d_mid, grad_out);

    // attention
    add_matmul_at(g.wo, tr.context, d_mid);
    const Matrix d_ctx = matmul_bt(d_mid, b.wo);
    Matrix dq(n, cfg.hidden), dk(n, cfg.hidden), dv(n, cfg.hidden);
    std::vector<double> dp(n);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        const std::size_t off = h * hd;
        const Matrix& p = tr.attn[h];
        for (std::size_t i = 0; i < n; ++i) {
            double weighted = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                double s = 0.0;
                for (std::size_t d = 0; d < hd; ++d) {
                    s += d_ctx(i, off + d) * tr.v(j, off + d);
                    dv(j, off + d) += p(i, j) * d_ctx(i, off + d);
                }
                dp[j] = s;
                weighted += p(i, j) * s;
            }
            for (std::size_t j = 0; j <= i; ++j) {
                const double ds = p(i, j) * (dp[j] - weighted) * scale;
                for (std::size_t d = 0; d < hd; ++d) {
                    dq(i, off + d) += ds * tr.k(j, off + d);
                    dk(j, off + d) += ds * tr.q(i, off + d);
                }
            }
        }
    }
    add_matmul_at(g.wq, tr.normed1, dq);
    add_matmul_at(g.wk, tr.normed1, dk);
    add_matmul_at(g.wv, tr.normed1, dv);
    Matrix d_norm1 = matmul_bt(dq, b.wq);
    add_in_place(d_norm1, matmul_bt(dk, b.wk));
    add_in_place(d_norm1, matmul_bt(dv, b.wv));
    Matrix dx = rms_norm_backward(tr.input, tr.inv_rms1, b.norm1, d_norm1, g.norm1);
    add_in_place(dx, d_mid);
    return dx;
}

void softmax_rows(const Matrix& logits, Matrix& probs) {
    probs = Matrix(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        double mx = -INFINITY;
        for (std::size_t k = 0; k < logits.cols; ++k) mx = std::max(mx, logits(i, k));
        double z = 0.0;
        for (std::size_t k = 0; k < logits.cols; ++k) {
            probs(i, k) = std::exp(logits(i, k) - mx);
            z += probs(i, k);
        }
        for (std::size_t k = 0; k < logits.cols; ++k) probs(i, k) /= z;
    }
}

std::string fusion_name(FusionMode m) { return m == FusionMode::adaptive ? "adaptive" : "numeric_only"; }

FusionMode parse_fusion(const std::string& s) {
    if (s == "adaptive") return FusionMode::adaptive;
    if (s == "numeric_only") return FusionMode::numeric_only;
    throw ConfigError("unknown fusion mode '" + s + "'");
}

}  // namespace

void ModelConfig::validate() const {
    if (segment_len < 2) throw ConfigError("segment_len must be at least 2");
    if (hidden == 0) throw ConfigError("hidden_dim must be positive");
    if (experts == 0) throw ConfigError("experts must be at least 1");
    if (!use_gate && experts != 1) throw ConfigError("a model without a gate has exactly one expert");
    if (layers > 0 && (heads == 0 || hidden % heads != 0))
        throw ConfigError("hidden_dim must be divisible by heads");
    if (layers > 0 && ffn_mult == 0) throw ConfigError("ffn_mult must be positive");
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t S = cfg.segment_len, D = cfg.hidden, K = cfg.experts, F = cfg.ffn_width();
    ModelParams p;
    p.config = cfg;
    p.seg_w = Matrix(S, D);
    p.seg_b = Matrix(1, D);
    p.theta = Matrix(1, 1);
    p.blocks.resize(cfg.layers);
    for (auto& b : p.blocks) {
        b.norm1 = Matrix(1, D);
        b.wq = b.wk = b.wv = b.wo = Matrix(D, D);
        b.norm2 = Matrix(1, D);
        b.w1 = Matrix(D, F);
        b.b1 = Matrix(1, F);
        b.w2 = Matrix(F, D);
        b.b2 = Matrix(1, D);
    }
    p.experts.assign(K, Matrix(D, D));
    if (cfg.use_gate) {
        p.gate_w = Matrix(D, K);
        p.gate_b = Matrix(1, K);
    }
    p.out_w = Matrix(D, S);
    p.out_b = Matrix(1, S);
    return p;
}

ModelParams ModelParams::init(const ModelConfig& cfg) {
    ModelParams p = zeros(cfg);
    p.for_each([&](const std::string& name, Matrix& m) {
        if (is_weight(name)) fill_uniform(m, cfg.seed, name);
    });
    for (auto& b : p.blocks) {
        std::fill(b.norm1.data.begin(), b.norm1.data.end(), 1.0);
        std::fill(b.norm2.data.begin(), b.norm2.data.end(), 1.0);
    }
    return p;
}

void ModelParams::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
    fn("seg_w", seg_w);
    fn("seg_b", seg_b);
    fn("theta", theta);
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const std::string pre = "blocks." + std::to_string(l) + ".";
        auto& b = blocks[l];
        fn(pre + "norm1", b.norm1);
        fn(pre + "wq", b.wq);
        fn(pre + "wk", b.wk);
        fn(pre + "wv", b.wv);
        fn(pre + "wo", b.wo);
        fn(pre + "norm2", b.norm2);
        fn(pre + "w1", b.w1);
        fn(pre + "b1", b.b1);
        fn(pre + "w2", b.w2);
        fn(pre + "b2", b.b2);
    }
    for (std::size_t k = 0; k < experts.size(); ++k) fn("experts." + std::to_string(k), experts[k]);
    if (!gate_w.empty()) {
        fn("gate_w", gate_w);
        fn("gate_b", gate_b);
    }
    fn("out_w", out_w);
    fn("out_b", out_b);
}

void ModelParams::for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const {
    const_cast<ModelParams*>(this)->for_each([&](const std::string& name, Matrix& m) { fn(name, m); });
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Matrix& m) { n += m.size(); });
    return n;
}

std::vector<double> segment_embed(std::span<const double> segment, const ModelParams& params) {
    if (segment.size() != params.seg_w.rows)
        throw ShapeError("segment of length " + std::to_string(segment.size()) + ", model expects " +
                         std::to_string(params.seg_w.rows));
    std::vector<double> out(params.seg_b.data);
    for (std::size_t s = 0; s < segment.size(); ++s)
        for (std::size_t d = 0; d < out.size(); ++d) out[d] += segment[s] * params.seg_w(s, d);
    for (auto& x : out) x = gelu(x);
    return out;
}

FusionResult fuse(std::span<const double> se, std::span<const double> te, double theta) {
    if (se.size() != te.size()) throw ShapeError("fusion inputs differ in length");
    FusionResult r;
    r.alpha = sigmoid(theta);
    r.fused.resize(se.size());
    for (std::size_t d = 0; d < se.size(); ++d) r.fused[d] = r.alpha * se[d] + (1.0 - r.alpha) * te[d];
    return r;
}

std::vector<double> fuse_grad_theta(std::span<const double> se, std::span<const double> te, double theta) {
    if (se.size() != te.size()) throw ShapeError("fusion inputs differ in length");
    const double a = sigmoid(theta);
    std::vector<double> g(se.size());
    for (std::size_t d = 0; d < se.size(); ++d) g[d] = a * (1.0 - a) * (se[d] - te[d]);
    return g;
}

Matrix backbone_forward(const Matrix& fused, const ModelParams& params) {
    if (fused.rows == 0) throw ShapeError("backbone needs at least one position");
    Matrix x = fused;
    BlockTrace tr;
    for (const auto& b : params.blocks) x = block_forward(b, params.config, x, tr);
    return x;
}

MoeOutput moe_forward(const Matrix& contextual, const ModelParams& params) {
    const std::size_t rows = contextual.rows;
    const std::size_t K = params.experts.size();
    MoeOutput out;
    if (params.gate_w.empty()) {
        out.gate.logits = Matrix(rows, K);
        out.gate.probs = Matrix(rows, K, 1.0);
    } else {
        out.gate.logits = matmul(contextual, params.gate_w);
        add_row_bias(out.gate.logits, params.gate_b);
        softmax_rows(out.gate.logits, out.gate.probs);
    }
    out.gated = Matrix(rows, contextual.cols);
    out.expert_outputs.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        out.expert_outputs.push_back(matmul(contextual, params.experts[k]));
        const Matrix& h = out.expert_outputs.back();
        for (std::size_t b = 0; b < rows; ++b) {
            const double g = out.gate.probs(b, k);
            for (std::size_t d = 0; d < h.cols; ++d) out.gated(b, d) += g * h(b, d);
        }
    }
    return out;
}

std::vector<double> predict_segment(std::span<const double> gated_row, const ModelParams& params) {
    if (gated_row.size() != params.out_w.rows) throw ShapeError("gated row width mismatch");
    std::vector<double> out(params.out_b.data);
    for (std::size_t d = 0; d < gated_row.size(); ++d)
        for (std::size_t s = 0; s < out.size(); ++s) out[s] += gated_row[d] * params.out_w(d, s);
    return out;
}

ForwardTrace forward(const ModelParams& params, const Matrix& segments, const Matrix& text) {
    const auto& cfg = params.config;
    if (segments.rows == 0 || segments.cols != cfg.segment_len)
        throw ShapeError("segments must be N×" + std::to_string(cfg.segment_len));
    if (cfg.use_text && (text.rows != segments.rows || text.cols != cfg.hidden))
        throw ShapeError("text embeddings must be N×" + std::to_string(cfg.hidden));

    ForwardTrace tr;
    tr.segments = segments;
    tr.seg_pre = matmul(segments, params.seg_w);
    add_row_bias(tr.seg_pre, params.seg_b);
    tr.se = tr.seg_pre;
    for (auto& x : tr.se.data) x = gelu(x);
    tr.te = cfg.use_text ? text : Matrix(segments.rows, cfg.hidden);

    tr.alpha = cfg.fusion == FusionMode::adaptive ? sigmoid(params.theta.data[0]) : 1.0;
    tr.fused = Matrix(segments.rows, cfg.hidden);
    for (std::size_t i = 0; i < tr.fused.size(); ++i)
        tr.fused.data[i] = tr.alpha * tr.se.data[i] + (1.0 - tr.alpha) * tr.te.data[i];

    tr.blocks.resize(params.blocks.size());
    Matrix x = tr.fused;
    for (std::size_t l = 0; l < params.blocks.size(); ++l) x = block_forward(params.blocks[l], cfg, x, tr.blocks[l]);
    tr.contextual = std::move(x);

    auto moe = moe_forward(tr.contextual, params);
    tr.gate = std::move(moe.gate);
    tr.gated = std::move(moe.gated);
    tr.expert_outputs = std::move(moe.expert_outputs);

    tr.prediction = matmul(tr.gated, params.out_w);
    add_row_bias(tr.prediction, params.out_b);
    return tr;
}

void backward(const ModelParams& params, const ForwardTrace& trace, const Matrix& grad_prediction,
              const Matrix& grad_gate, ModelParams& grads, Matrix* grad_fused) {
    const auto& cfg = params.config;
    const std::size_t rows = trace.prediction.rows;
    const std::size_t K = params.experts.size();
    if (!(grads.config == cfg) || trace.blocks.size() != params.blocks.size() || trace.expert_outputs.size() != K ||
        trace.segments.cols != cfg.segment_len)
        throw TraceError("trace, parameters and gradient buffers come from different configurations");
    if (!grad_prediction.same_shape(trace.prediction)) throw TraceError("prediction gradient shape mismatch");
    if (!grad_gate.empty() && (grad_gate.rows != rows || grad_gate.cols != K))
        throw TraceError("gate gradient shape mismatch");

    // output projection
    add_matmul_at(grads.out_w, trace.gated, grad_prediction);
    add_column_sums(grads.out_b, grad_prediction);
    const Matrix d_gated = matmul_bt(grad_prediction, params.out_w);

    // experts and gate
    Matrix d_ctx(rows, cfg.hidden);
    Matrix d_probs = grad_gate.empty() ? Matrix(rows, K) : grad_gate;
    for (std::size_t k = 0; k < K; ++k) {
        const Matrix& h = trace.expert_outputs[k];
        Matrix d_h(rows, cfg.hidden);
        for (std::size_t b = 0; b < rows; ++b) {
            const double g = trace.gate.probs(b, k);
            double s = 0.0;
            for (std::size_t d = 0; d < cfg.hidden; ++d) {
                d_h(b, d) = g * d_gated(b, d);
                s += d_gated(b, d) * h(b, d);
            }
            d_probs(b, k) += s;
        }
        add_matmul_at(grads.experts[k], trace.contextual, d_h);
        add_in_place(d_ctx, matmul_bt(d_h, params.experts[k]));
    }
    if (!params.gate_w.empty()) {
        Matrix d_logits(rows, K);
        for (std::size_t b = 0; b < rows; ++b) {
            double dot = 0.0;
            for (std::size_t k = 0; k < K; ++k) dot += trace.gate.probs(b, k) * d_probs(b, k);
            for (std::size_t k = 0; k < K; ++k) d_logits(b, k) = trace.gate.probs(b, k) * (d_probs(b, k) - dot);
        }
        add_matmul_at(grads.gate_w, trace.contextual, d_logits);
        add_column_sums(grads.gate_b, d_logits);
        add_in_place(d_ctx, matmul_bt(d_logits, params.gate_w));
    }

    // backbone
    for (std::size_t l = params.blocks.size(); l-- > 0;)
        d_ctx = block_backward(params.blocks[l], cfg, trace.blocks[l], d_ctx, grads.blocks[l]);

    if (grad_fused) *grad_fused = d_ctx;

    // fusion: dE/dtheta = alpha(1-alpha)(SE - TE)
    const double a = trace.alpha;
    if (cfg.fusion == FusionMode::adaptive) {
        double dtheta = 0.0;
        for (std::size_t i = 0; i < d_ctx.size(); ++i)
            dtheta += d_ctx.data[i] * a * (1.0 - a) * (trace.se.data[i] - trace.te.data[i]);
        grads.theta.data[0] += dtheta;
    }

    // segment embedding
    Matrix d_pre(rows, cfg.hidden);
    for (std::size_t i = 0; i < d_pre.size(); ++i) d_pre.data[i] = a * d_ctx.data[i] * gelu_grad(trace.seg_pre.data[i]);
    add_matmul_at(grads.seg_w, trace.segments, d_pre);
    add_column_sums(grads.seg_b, d_pre);
}

std::string checkpoint_json(const ModelParams& params) {
    const auto& c = params.config;
    nlohmann::ordered_json j;
    j["format"] = "smet-checkpoint";
    j["version"] = 1;
    j["config"] = {{"segment_len", c.segment_len}, {"hidden_dim", c.hidden}, {"experts", c.experts},
                   {"layers", c.layers},           {"heads", c.heads},       {"ffn_mult", c.ffn_mult},
                   {"use_gate", c.use_gate},       {"use_text", c.use_text}, {"fusion", fusion_name(c.fusion)},
                   {"seed", c.seed},               {"text_seed", c.text_seed}};
    auto& blocks = j["blocks"] = nlohmann::ordered_json::array();
    params.for_each([&](const std::string& name, const Matrix& m) {
        blocks.push_back({{"name", name}, {"rows", m.rows}, {"cols", m.cols}, {"values", m.data}});
    });
    return j.dump() + "\n";
}

ModelParams parse_checkpoint(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "smet-checkpoint" || j.at("version") != 1)
            throw Error("CorruptCheckpoint", "not a version-1 checkpoint");
        const auto& jc = j.at("config");
        ModelConfig c;
        c.segment_len = jc.at("segment_len");
        c.hidden = jc.at("hidden_dim");
        c.experts = jc.at("experts");
        c.layers = jc.at("layers");
        c.heads = jc.at("heads");
        c.ffn_mult = jc.at("ffn_mult");
        c.use_gate = jc.at("use_gate");
        c.use_text = jc.at("use_text");
        c.fusion = parse_fusion(jc.at("fusion"));
        c.seed = jc.at("seed");
        c.text_seed = jc.at("text_seed");
        ModelParams p = ModelParams::zeros(c);
        const auto& blocks = j.at("blocks");
        std::size_t idx = 0;
        p.for_each([&](const std::string& name, Matrix& m) {
            if (idx >= blocks.size()) throw ShapeError("checkpoint is missing block " + name);
            const auto& b = blocks[idx++];
            if (b.at("name") != name || b.at("rows") != m.rows || b.at("cols") != m.cols)
                throw ShapeError("checkpoint block " + b.at("name").get<std::string>() + " does not match " + name);
            m.data = b.at("values").get<std::vector<double>>();
            if (m.data.size() != m.rows * m.cols) throw ShapeError("checkpoint block " + name + " has wrong size");
        });
        if (idx != blocks.size()) throw ShapeError("checkpoint has unexpected extra blocks");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error("CorruptCheckpoint", e.what());
    }
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << checkpoint_json(params);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str());
}

}  // namespace smet
