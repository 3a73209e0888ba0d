#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "smet/error.hpp"
#include "smet/model.hpp"

using namespace smet;
using testutil::random_matrix;

namespace {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

ModelParams random_params(ModelConfig cfg, std::uint64_t seed) {
    ModelParams p = ModelParams::init(cfg);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.3);
    p.for_each([&](const std::string& name, Matrix& m) {
        if (name.find("norm") != std::string::npos)
            for (auto& x : m.data) x = 1.0 + n(rng);
        else if (name.find("_b") != std::string::npos || name.find(".b") != std::string::npos || name == "theta")
            for (auto& x : m.data) x = n(rng);
    });
    return p;
}

// Straight-line forward, sharing nothing with the library beyond the params struct.
Mat oracle_forward(const ModelParams& p, const Matrix& seg, const Matrix& text) {
    const auto& c = p.config;
    const std::size_t N = seg.rows, S = c.segment_len, D = c.hidden;
    auto g = [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); };
    const double alpha = c.fusion == FusionMode::adaptive ? 1.0 / (1.0 + std::exp(-p.theta.data[0])) : 1.0;
    Mat x(N, Vec(D));
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t d = 0; d < D; ++d) {
            double a = p.seg_b.data[d];
            for (std::size_t s = 0; s < S; ++s) a += seg.data[i * S + s] * p.seg_w.data[s * D + d];
            const double te = c.use_text ? text.data[i * D + d] : 0.0;
            x[i][d] = alpha * g(a) + (1.0 - alpha) * te;
        }
    auto rms = [&](const Mat& in, const Matrix& gain) {
        Mat out = in;
        for (std::size_t i = 0; i < in.size(); ++i) {
            double ms = 0.0;
            for (double v : in[i]) ms += v * v;
            ms /= static_cast<double>(D);
            for (std::size_t d = 0; d < D; ++d) out[i][d] = in[i][d] / std::sqrt(ms + 1e-5) * gain.data[d];
        }
        return out;
    };
    auto mul = [](const Mat& a, const Matrix& w) {
        Mat out(a.size(), Vec(w.cols, 0.0));
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < w.cols; ++j)
                for (std::size_t k = 0; k < w.rows; ++k) out[i][j] += a[i][k] * w.data[k * w.cols + j];
        return out;
    };
    for (const auto& b : p.blocks) {
        const Mat h = rms(x, b.norm1);
        const Mat q = mul(h, b.wq), k = mul(h, b.wk), v = mul(h, b.wv);
        const std::size_t hd = D / c.heads;
        Mat ctx(N, Vec(D, 0.0));
        for (std::size_t head = 0; head < c.heads; ++head)
            for (std::size_t i = 0; i < N; ++i) {
                Vec sc(i + 1);
                double mx = -1e300;
                for (std::size_t j = 0; j <= i; ++j) {
                    double s = 0.0;
                    for (std::size_t e = 0; e < hd; ++e) s += q[i][head * hd + e] * k[j][head * hd + e];
                    sc[j] = s / std::sqrt(static_cast<double>(hd));
                    mx = std::max(mx, sc[j]);
                }
                double z = 0.0;
                for (auto& s : sc) z += (s = std::exp(s - mx));
                for (std::size_t j = 0; j <= i; ++j)
                    for (std::size_t e = 0; e < hd; ++e) ctx[i][head * hd + e] += sc[j] / z * v[j][head * hd + e];
            }
        const Mat att = mul(ctx, b.wo);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t d = 0; d < D; ++d) x[i][d] += att[i][d];
        Mat f = mul(rms(x, b.norm2), b.w1);
        for (auto& r : f)
            for (std::size_t j = 0; j < r.size(); ++j) r[j] = g(r[j] + b.b1.data[j]);
        const Mat f2 = mul(f, b.w2);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t d = 0; d < D; ++d) x[i][d] += f2[i][d] + b.b2.data[d];
    }
    const std::size_t K = p.experts.size();
    Mat out(N, Vec(S));
    for (std::size_t i = 0; i < N; ++i) {
        Vec gate(K, 1.0);
        if (!p.gate_w.empty()) {
            double mx = -1e300, z = 0.0;
            for (std::size_t kk = 0; kk < K; ++kk) {
                double l = p.gate_b.data[kk];
                for (std::size_t d = 0; d < D; ++d) l += x[i][d] * p.gate_w.data[d * K + kk];
                gate[kk] = l;
                mx = std::max(mx, l);
            }
            for (auto& l : gate) z += (l = std::exp(l - mx));
            for (auto& l : gate) l /= z;
        }
        Vec sh(D, 0.0);
        for (std::size_t kk = 0; kk < K; ++kk)
            for (std::size_t e = 0; e < D; ++e) {
                double hv = 0.0;
                for (std::size_t d = 0; d < D; ++d) hv += x[i][d] * p.experts[kk].data[d * D + e];
                sh[e] += gate[kk] * hv;
            }
        for (std::size_t s = 0; s < S; ++s) {
            double o = p.out_b.data[s];
            for (std::size_t d = 0; d < D; ++d) o += sh[d] * p.out_w.data[d * S + s];
            out[i][s] = o;
        }
    }
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

ModelConfig small_config() {
    ModelConfig c;
    c.segment_len = 6;
    c.hidden = 8;
    c.experts = 3;
    c.layers = 2;
    c.heads = 2;
    c.seed = 5;
    return c;
}

}  // namespace

TEST_CASE("GeLU exact form") {
    CHECK(gelu(0.0) == 0.0);
    CHECK(gelu(3.0) == doctest::Approx(2.9960).epsilon(1e-4));
    CHECK(gelu(-3.0) == doctest::Approx(-0.0040496).epsilon(1e-3));
    for (double x : {-2.0, -0.3, 0.0, 0.7, 2.5}) {
        const double h = 1e-6;
        CHECK(gelu_grad(x) == doctest::Approx((gelu(x + h) - gelu(x - h)) / (2 * h)).epsilon(1e-8));
    }
}

TEST_CASE("segment_embed examples") {
    ModelConfig c;
    c.segment_len = 4;
    c.hidden = 4;
    c.layers = 0;
    auto p = ModelParams::zeros(c);
    std::vector<double> x{3, 3, 3, 3};
    for (double v : segment_embed(x, p)) CHECK(v == 0.0);
    for (std::size_t i = 0; i < 4; ++i) p.seg_w(i, i) = 1.0;
    for (double v : segment_embed(x, p)) CHECK(v == doctest::Approx(2.9960).epsilon(1e-4));
    CHECK_THROWS_AS(segment_embed(std::vector<double>{1, 2}, p), ShapeError);

    std::mt19937_64 rng(1);
    auto q = random_params(small_config(), 2);
    Matrix seg = random_matrix(1, 6, rng);
    Matrix seg2 = seg;
    for (auto& v : seg2.data) v *= 2.0;
    // pre-activation is linear in the input when the bias is zero
    q.seg_b.zero();
    auto t1 = forward(q, seg, Matrix(1, 8));
    auto t2 = forward(q, seg2, Matrix(1, 8));
    for (std::size_t d = 0; d < 8; ++d) CHECK(t2.seg_pre(0, d) == doctest::Approx(2.0 * t1.seg_pre(0, d)));
}

TEST_CASE("fusion examples and limits") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    std::vector<double> se(16), te(16);
    for (auto& v : se) v = n(rng);
    for (auto& v : te) v = n(rng);
    auto mid = fuse(se, te, 0.0);
    CHECK(mid.alpha == 0.5);
    for (std::size_t d = 0; d < 16; ++d) CHECK(mid.fused[d] == (se[d] + te[d]) / 2.0);
    double span = 0.0;
    for (std::size_t d = 0; d < 16; ++d) span = std::max(span, std::abs(se[d] - te[d]));
    auto hi = fuse(se, te, 20.0), lo = fuse(se, te, -20.0);
    for (std::size_t d = 0; d < 16; ++d) {
        CHECK(std::abs(hi.fused[d] - se[d]) <= 1e-6 * span);
        CHECK(std::abs(lo.fused[d] - te[d]) <= 1e-6 * span);
    }
    auto same = fuse(se, se, 1.7);
    for (std::size_t d = 0; d < 16; ++d) CHECK(same.fused[d] == doctest::Approx(se[d]).epsilon(1e-15));
}

TEST_CASE("fusion gradient closed form") {
    std::vector<double> se{1.0, -2.0, 0.5}, te{0.0, 1.0, 0.5};
    auto g0 = fuse_grad_theta(se, te, 0.0);
    CHECK(g0[0] == 0.25);
    CHECK(g0[1] == -0.75);
    CHECK(g0[2] == 0.0);
    for (double v : fuse_grad_theta(se, se, 3.0)) CHECK(v == 0.0);

    std::mt19937_64 rng(9);
    std::normal_distribution<double> n;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> a(8), b(8);
        for (auto& v : a) v = n(rng);
        for (auto& v : b) v = n(rng);
        const double th = 2.0 * n(rng), h = 1e-6;
        auto g = fuse_grad_theta(a, b, th);
        auto up = fuse(a, b, th + h).fused, dn = fuse(a, b, th - h).fused;
        for (std::size_t d = 0; d < 8; ++d) {
            const double fd = (up[d] - dn[d]) / (2 * h);
            CHECK(std::abs(fd - g[d]) <= 1e-6 * std::max(std::abs(g[d]), 1e-3));
        }
    }
}

TEST_CASE("fusion convex hull") {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> n;
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<double> a(4), b(4);
        for (auto& v : a) v = n(rng);
        for (auto& v : b) v = n(rng);
        auto e = fuse(a, b, 5.0 * n(rng)).fused;
        for (std::size_t d = 0; d < 4; ++d) {
            CHECK(e[d] >= std::min(a[d], b[d]));
            CHECK(e[d] <= std::max(a[d], b[d]));
        }
    }
}

TEST_CASE("backbone: identity, causality, single position") {
    std::mt19937_64 rng(4);
    auto c = small_config();
    c.layers = 0;
    auto p0 = random_params(c, 1);
    Matrix e = random_matrix(5, 8, rng);
    CHECK(backbone_forward(e, p0) == e);

    auto p = random_params(small_config(), 1);
    const Matrix base = backbone_forward(e, p);
    for (std::size_t j = 0; j < 5; ++j) {
        Matrix e2 = e;
        for (std::size_t d = 0; d < 8; ++d) e2(j, d) += 0.37 * static_cast<double>(d + 1);
        const Matrix out = backbone_forward(e2, p);
        for (std::size_t i = 0; i < j; ++i)
            for (std::size_t d = 0; d < 8; ++d) CHECK(out(i, d) == base(i, d));
        bool changed = false;
        for (std::size_t d = 0; d < 8; ++d) changed |= out(j, d) != base(j, d);
        CHECK(changed);
    }
    Matrix one = random_matrix(1, 8, rng);
    for (double v : backbone_forward(one, p).data) CHECK(std::isfinite(v));
}

TEST_CASE("moe: hand example") {
    ModelConfig c;
    c.segment_len = 2;
    c.hidden = 2;
    c.experts = 2;
    c.layers = 0;
    auto p = ModelParams::zeros(c);
    p.experts[0](0, 0) = p.experts[0](1, 1) = 1.0;
    p.experts[1](0, 0) = p.experts[1](1, 1) = 2.0;
    Matrix x(1, 2);
    x.data = {1.0, 0.0};
    auto m = moe_forward(x, p);
    CHECK(m.gate.probs.data == std::vector<double>{0.5, 0.5});
    CHECK(m.gated.data == std::vector<double>{1.5, 0.0});
}

TEST_CASE("moe: K=1 equals a linear head; identical experts ignore the gate") {
    std::mt19937_64 rng(6);
    auto c = small_config();
    c.experts = 1;
    auto p = random_params(c, 3);
    Matrix x = random_matrix(7, 8, rng);
    auto m = moe_forward(x, p);
    CHECK(max_abs_diff(m.gated, matmul(x, p.experts[0])) <= 1e-12);
    for (double g : m.gate.probs.data) CHECK(g == 1.0);

    auto c4 = small_config();
    c4.experts = 4;
    auto q = random_params(c4, 3);
    for (auto& w : q.experts) w = q.experts[0];
    auto a = moe_forward(x, q);
    q.gate_w = random_matrix(8, 4, rng, 3.0);
    q.gate_b = random_matrix(1, 4, rng, 3.0);
    auto b = moe_forward(x, q);
    CHECK(max_abs_diff(a.gated, b.gated) <= 1e-12);
}

TEST_CASE("moe: gate rows stochastic, softmax monotone") {
    std::mt19937_64 rng(7);
    auto c = small_config();
    c.experts = 4;
    auto p = random_params(c, 8);
    for (int rep = 0; rep < 100; ++rep) {
        p.gate_w = random_matrix(8, 4, rng, 2.0);
        Matrix x = random_matrix(5, 8, rng);
        auto m = moe_forward(x, p);
        double l1 = 0.0;
        for (std::size_t b = 0; b < 5; ++b) {
            double s = 0.0;
            for (std::size_t k = 0; k < 4; ++k) {
                const double g = m.gate.probs(b, k);
                CHECK(g >= 0.0);
                CHECK(g <= 1.0);
                s += g;
                l1 += std::abs(g);
            }
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
        CHECK(std::abs(l1 - 5.0) <= 1e-9);
        const std::size_t k = static_cast<std::size_t>(rep % 4);
        auto bumped = p;
        bumped.gate_b.data[k] += 0.5;
        auto m2 = moe_forward(x, bumped);
        for (std::size_t b = 0; b < 5; ++b) CHECK(m2.gate.probs(b, k) >= m.gate.probs(b, k));
    }
}

TEST_CASE("predict_segment examples") {
    ModelConfig c;
    c.segment_len = 3;
    c.hidden = 3;
    c.layers = 0;
    auto p = ModelParams::zeros(c);
    p.out_b.data = {2.0, 2.0, 2.0};
    std::vector<double> row{0.3, -1.0, 4.0};
    CHECK(predict_segment(row, p) == std::vector<double>{2.0, 2.0, 2.0});
    p.out_b.zero();
    for (std::size_t i = 0; i < 3; ++i) p.out_w(i, i) = 1.0;
    CHECK(predict_segment(row, p) == row);
}

TEST_CASE("full forward matches the straight-line oracle") {
    std::mt19937_64 rng(11);
    for (int variant = 0; variant < 4; ++variant) {
        auto c = small_config();
        if (variant == 1) c.use_text = false;
        if (variant == 2) c.fusion = FusionMode::numeric_only;
        if (variant == 3) {
            c.use_gate = false;
            c.experts = 1;
        }
        auto p = random_params(c, 20 + variant);
        Matrix seg = random_matrix(5, 6, rng), text = random_matrix(5, 8, rng, 0.3);
        auto tr = forward(p, seg, text);
        auto want = oracle_forward(p, seg, text);
        double worst = 0.0;
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t s = 0; s < 6; ++s) worst = std::max(worst, std::abs(tr.prediction(i, s) - want[i][s]));
        CHECK(worst <= 1e-12);
        auto tr2 = forward(p, seg, text);
        CHECK(tr2.prediction == tr.prediction);
    }
}

TEST_CASE("backward: zero upstream gradient, equal modalities, trace mismatch") {
    std::mt19937_64 rng(12);
    auto c = small_config();
    auto p = random_params(c, 30);
    Matrix seg = random_matrix(4, 6, rng), text = random_matrix(4, 8, rng);
    auto tr = forward(p, seg, text);
    auto g = ModelParams::zeros(c);
    backward(p, tr, Matrix(4, 6), Matrix(4, 3), g);
    g.for_each([](const std::string& name, const Matrix& m) {
        for (double v : m.data) CHECK_MESSAGE(v == 0.0, name);
    });

    // SE == TE: theta gradient vanishes exactly
    auto tr_eq = forward(p, seg, text);
    tr_eq.te = tr_eq.se;
    auto g2 = ModelParams::zeros(c);
    backward(p, tr_eq, random_matrix(4, 6, rng), Matrix(), g2);
    CHECK(g2.theta.data[0] == 0.0);

    auto other = small_config();
    other.experts = 2;
    auto gw = ModelParams::zeros(other);
    CHECK_THROWS_AS(backward(p, tr, Matrix(4, 6), Matrix(), gw), TraceError);
    auto g3 = ModelParams::zeros(c);
    CHECK_THROWS_AS(backward(p, tr, Matrix(3, 6), Matrix(), g3), TraceError);
}

TEST_CASE("parameter layout") {
    auto c = small_config();
    auto p = ModelParams::init(c);
    CHECK(p.theta.data[0] == 0.0);
    for (double v : p.blocks[0].norm1.data) CHECK(v == 1.0);
    for (double v : p.seg_b.data) CHECK(v == 0.0);
    const double bound = 1.0 / std::sqrt(6.0);
    for (double v : p.seg_w.data) CHECK(std::abs(v) <= bound);
    CHECK(ModelParams::init(c) == p);
    c.use_gate = false;
    c.experts = 1;
    auto q = ModelParams::init(c);
    bool has_gate = false;
    q.for_each([&](const std::string& name, const Matrix&) { has_gate |= name.rfind("gate", 0) == 0; });
    CHECK_FALSE(has_gate);
    c.experts = 2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip is bit exact") {
    auto p = random_params(small_config(), 40);
    auto path = testutil::temp_path("ckpt.json");
    save_checkpoint(p, path);
    auto q = load_checkpoint(path);
    CHECK(q == p);
    CHECK(checkpoint_json(q) == checkpoint_json(p));
    CHECK_THROWS(parse_checkpoint("{\"format\":\"other\"}"));
}
