#include "smet/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "smet/error.hpp"
#include "smet/forecast.hpp"
#include "smet/sequence.hpp"

namespace smet {
namespace {

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    sd = std::sqrt(sq / static_cast<double>(xs.size()));
}

ExperimentSettings with_seed(ExperimentSettings s, std::uint64_t seed) {
    s.model.seed = seed;
    s.train.seed = seed;
    return s;
}

std::size_t gate_parameter_count(const ModelParams& p) {
    std::size_t n = 0;
    p.for_each([&](const std::string& name, const Matrix& m) {
        if (name.rfind("gate_", 0) == 0) n += m.size();
    });
    return n;
}

}  // namespace

nlohmann::ordered_json ExperimentSettings::to_json() const {
    nlohmann::ordered_json j;
    j["context_len"] = context_len;
    j["base_horizon"] = base_horizon;
    j["stride"] = stride;
    j["eval_stride"] = eval_stride;
    j["split_counts"] = split_counts;
    j["horizons"] = horizons;
    j["normalize"] = normalize;
    j["prompt_decimals"] = prompt_decimals;
    j["segment_len"] = model.segment_len;
    j["hidden_dim"] = model.hidden;
    j["experts"] = model.experts;
    j["layers"] = model.layers;
    j["heads"] = model.heads;
    j["ffn_mult"] = model.ffn_mult;
    j["use_gate"] = model.use_gate;
    j["use_text"] = model.use_text;
    j["fusion"] = model.fusion == FusionMode::adaptive ? "adaptive" : "numeric_only";
    j["model_seed"] = model.seed;
    j["text_seed"] = model.text_seed;
    j["lr"] = train.lr;
    j["lambda"] = train.lambda;
    j["sparsity_mode"] = to_string(train.sparsity);
    j["epochs"] = train.epochs;
    j["batch"] = train.batch;
    j["max_steps"] = train.max_steps;
    j["weight_decay"] = train.adamw.weight_decay;
    j["seed"] = train.seed;
    j["embeddings"] = external_embeddings ? "external" : "builtin";
    return j;
}

nlohmann::ordered_json ForecastReport::to_json() const {
    nlohmann::ordered_json j;
    j["dataset"] = dataset;
    j["seed"] = seed;
    auto& hs = j["horizons"] = nlohmann::ordered_json::array();
    for (const auto& h : horizons) hs.push_back({{"horizon", h.horizon}, {"mse", h.mse}, {"mae", h.mae}});
    j["avg_mse"] = avg_mse;
    j["avg_mae"] = avg_mae;
    j["config"] = config;
    return j;
}

PreparedData prepare_data(const TimeSeriesFrame& raw, const ExperimentSettings& settings) {
    auto counts = settings.split_counts;
    if (counts[0] == 0 && counts[1] == 0 && counts[2] == 0) {
        const std::size_t t = raw.length();
        counts = {t * 7 / 10, t / 10, 0};
        counts[2] = t - counts[0] - counts[1];
    }
    PreparedData out;
    out.splits = make_splits(raw, SplitSpec{counts[0], counts[1], counts[2], settings.context_len},
                             settings.base_horizon);
    if (settings.normalize) {
        out.stats = compute_stats(raw, out.splits.train);
        out.frame = normalize(raw, *out.stats);
    } else {
        out.frame = raw;
    }
    return out;
}

ForecastReport evaluate_test(const ModelParams& params, const PreparedData& data, const ExperimentSettings& settings,
                             const TextSource& text, const std::string& dataset) {
    ForecastReport r;
    r.dataset = dataset;
    r.seed = settings.train.seed;
    r.config = settings.to_json();
    const Forecaster model{&params, text, settings.prompt_decimals};
    for (std::size_t h : settings.horizons) {
        const auto windows =
            sample_split_windows(data.frame, data.splits.test, settings.context_len, h, settings.eval_stride);
        HorizonMetrics hm{h, 0.0, 0.0};
        for (const auto& w : windows) {
            const auto m = metrics(rolling_forecast(model, w.context, w.start, data.frame.freq, h), w.target);
            hm.mse += m.mse;
            hm.mae += m.mae;
        }
        hm.mse /= static_cast<double>(windows.size());
        hm.mae /= static_cast<double>(windows.size());
        r.horizons.push_back(hm);
        r.avg_mse += hm.mse;
        r.avg_mae += hm.mae;
    }
    r.avg_mse /= static_cast<double>(r.horizons.size());
    r.avg_mae /= static_cast<double>(r.horizons.size());
    return r;
}

ForecastReport evaluate_persistence(const PreparedData& data, const ExperimentSettings& settings,
                                    const std::string& dataset) {
    ForecastReport r;
    r.dataset = dataset + " (persistence)";
    r.seed = settings.train.seed;
    r.config = settings.to_json();
    for (std::size_t h : settings.horizons) {
        const auto windows =
            sample_split_windows(data.frame, data.splits.test, settings.context_len, h, settings.eval_stride);
        HorizonMetrics hm{h, 0.0, 0.0};
        for (const auto& w : windows) {
            const auto m = metrics(persistence_baseline(w.context, h), w.target);
            hm.mse += m.mse;
            hm.mae += m.mae;
        }
        hm.mse /= static_cast<double>(windows.size());
        hm.mae /= static_cast<double>(windows.size());
        r.horizons.push_back(hm);
        r.avg_mse += hm.mse;
        r.avg_mae += hm.mae;
    }
    r.avg_mse /= static_cast<double>(r.horizons.size());
    r.avg_mae /= static_cast<double>(r.horizons.size());
    return r;
}

ExperimentResult run_experiment(const TimeSeriesFrame& raw, const ExperimentSettings& settings,
                                const std::string& dataset) {
    settings.model.validate();
    settings.train.validate();
    if (settings.horizons.empty()) throw ConfigError("at least one evaluation horizon is required");
    const auto data = prepare_data(raw, settings);
    const std::size_t S = settings.model.segment_len;
    if (settings.context_len < S) throw SegmentTooLong("segment_len exceeds context_len");

    const auto windows = sample_windows(data.frame, data.splits.train, settings.context_len, settings.base_horizon,
                                        settings.stride);
    ExperimentResult result;
    TextSource strict;
    if (settings.model.use_text) {
        if (settings.external_embeddings) {
            if (settings.external_embeddings->dim() != settings.model.hidden)
                throw ShapeError("external embeddings have dim=" + std::to_string(settings.external_embeddings->dim()) +
                                 ", model hidden_dim=" + std::to_string(settings.model.hidden));
            result.cache = *settings.external_embeddings;
        } else {
            std::vector<std::string> prompts;
            for (const auto& w : windows) {
                std::vector<double> values = w.context;
                values.insert(values.end(), w.target.begin(), w.target.end());
                auto ps = sequence_prompts(values, w.start, data.frame.freq, S, settings.prompt_decimals);
                prompts.insert(prompts.end(), std::make_move_iterator(ps.begin()), std::make_move_iterator(ps.end()));
            }
            result.cache = precompute_cache(prompts, settings.model.hidden, settings.model.text_seed);
        }
        strict = TextSource(&result.cache, false);
    }

    TrainingData td;
    td.freq = data.frame.freq;
    td.decimals = settings.prompt_decimals;
    td.text = settings.model.use_text ? TextSource(&result.cache, true) : TextSource{};
    td.train.reserve(windows.size());
    for (const auto& w : windows) {
        std::vector<double> values = w.context;
        values.insert(values.end(), w.target.begin(), w.target.end());
        td.train.push_back(build_sequence(values, w.start, data.frame.freq, S, strict, settings.prompt_decimals));
        if (td.train.back().segments.rows < 2)
            throw SegmentTooLong("context plus horizon must span at least two segments");
    }
    td.val = sample_split_windows(data.frame, data.splits.val, settings.context_len, settings.base_horizon,
                                  settings.eval_stride);

    result.training = train(ModelParams::init(settings.model), td, settings.train);
    result.report = evaluate_test(result.training.best, data, settings, td.text, dataset);
    return result;
}

std::string to_string(AblationVariant v) {
    switch (v) {
        case AblationVariant::original: return "Original";
        case AblationVariant::without_context: return "w/o Context";
        case AblationVariant::without_fusion: return "w/o Fusion";
        case AblationVariant::without_moe: return "w/o MoE";
    }
    return "Original";
}

ExperimentSettings apply_ablation(ExperimentSettings s, AblationVariant v) {
    switch (v) {
        case AblationVariant::original: break;
        case AblationVariant::without_context: s.model.use_text = false; break;
        case AblationVariant::without_fusion: s.model.fusion = FusionMode::numeric_only; break;
        case AblationVariant::without_moe:
            s.model.use_gate = false;
            s.model.experts = 1;
            break;
    }
    return s;
}

AblationReport ablation_run(const TimeSeriesFrame& raw, const ExperimentSettings& base,
                            const std::vector<std::uint64_t>& seeds, const std::string& dataset, std::size_t jobs) {
    if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
    constexpr AblationVariant variants[] = {AblationVariant::original, AblationVariant::without_context,
                                            AblationVariant::without_fusion, AblationVariant::without_moe};
    AblationReport report;
    report.dataset = dataset;
    report.seeds = seeds;
    report.config = base.to_json();
    report.rows.resize(4);
    struct Run {
        double val = 0, mse = 0, mae = 0;
        std::size_t gate = 0;
    };
    std::vector<Run> runs(4 * seeds.size());
    parallel_for(runs.size(), jobs, [&](std::size_t i) {
        const auto v = variants[i / seeds.size()];
        const auto r = run_experiment(raw, with_seed(apply_ablation(base, v), seeds[i % seeds.size()]), dataset);
        runs[i] = {r.training.best_val_mse, r.report.avg_mse, r.report.avg_mae, gate_parameter_count(r.training.best)};
    });
    for (std::size_t v = 0; v < 4; ++v) {
        auto& row = report.rows[v];
        row.variant = variants[v];
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const auto& run = runs[v * seeds.size() + s];
            row.val_mse.push_back(run.val);
            row.test_mse.push_back(run.mse);
            row.test_mae.push_back(run.mae);
        }
        row.gate_parameters = runs[v * seeds.size()].gate;
        mean_std(row.test_mse, row.mean_mse, row.std_mse);
        mean_std(row.test_mae, row.mean_mae, row.std_mae);
    }
    return report;
}

nlohmann::ordered_json AblationReport::to_json() const {
    nlohmann::ordered_json j;
    j["dataset"] = dataset;
    j["seeds"] = seeds;
    auto& rs = j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows)
        rs.push_back({{"variant", to_string(r.variant)},
                      {"mse", r.mean_mse},
                      {"mae", r.mean_mae},
                      {"mse_std", r.std_mse},
                      {"mae_std", r.std_mae},
                      {"val_mse", r.val_mse},
                      {"test_mse", r.test_mse},
                      {"test_mae", r.test_mae},
                      {"gate_parameters", r.gate_parameters}});
    j["config"] = config;
    return j;
}

std::string AblationReport::table() const {
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof line, "%-14s %-12s %-12s\n", "Ablation", "MSE", "MAE");
    out << "Dataset: " << dataset << '\n' << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-14s %-12s %-12s\n", to_string(r.variant).c_str(), fmt3(r.mean_mse).c_str(),
                      fmt3(r.mean_mae).c_str());
        out << line;
    }
    return out.str();
}

double promotion_percent(double mse_original, double mse_moe) {
    if (!(mse_original > 0.0)) throw ConfigError("promotion needs a positive original MSE");
    return (mse_original - mse_moe) / mse_original * 100.0;
}

std::string format_promotion(double percent) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.1f%%", percent);
    std::string s = buf;
    if (s == "-0.0%") s = "+0.0%";
    return s;
}

PromotionReport promotion_run(const TimeSeriesFrame& raw, const ExperimentSettings& base,
                              const std::vector<BackboneSize>& sizes, std::size_t experts,
                              const std::vector<std::uint64_t>& seeds, const std::string& dataset, std::size_t jobs) {
    if (sizes.empty()) throw ConfigError("promotion needs at least one backbone size");
    if (seeds.empty()) throw ConfigError("promotion needs at least one seed");
    if (experts < 1) throw ConfigError("experts must be at least 1");
    PromotionReport report;
    report.dataset = dataset;
    report.experts = experts;
    report.seeds = seeds;
    report.config = base.to_json();

    struct Run {
        double val = 0, mse = 0, mae = 0;
    };
    const std::size_t per_size = 2 * seeds.size();
    std::vector<Run> runs(sizes.size() * per_size);
    parallel_for(runs.size(), jobs, [&](std::size_t i) {
        const auto& size = sizes[i / per_size];
        const bool moe = (i % per_size) >= seeds.size();
        ExperimentSettings s = with_seed(base, seeds[i % seeds.size()]);
        s.model.hidden = size.hidden;
        s.model.layers = size.layers;
        s.model.heads = size.heads;
        s.model.use_gate = moe;
        s.model.experts = moe ? experts : 1;
        const auto r = run_experiment(raw, s, dataset);
        runs[i] = {r.training.best_val_mse, r.report.avg_mse, r.report.avg_mae};
    });
    for (std::size_t z = 0; z < sizes.size(); ++z) {
        PromotionEntry e;
        e.size = sizes[z];
        const double n = static_cast<double>(seeds.size());
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const auto& o = runs[z * per_size + s];
            const auto& m = runs[z * per_size + seeds.size() + s];
            e.original_mse += o.mse / n;
            e.original_mae += o.mae / n;
            e.original_val_mse += o.val / n;
            e.moe_mse += m.mse / n;
            e.moe_mae += m.mae / n;
            e.moe_val_mse += m.val / n;
            e.original_val_per_seed.push_back(o.val);
            e.moe_val_per_seed.push_back(m.val);
        }
        e.promotion = promotion_percent(e.original_mse, e.moe_mse);
        report.entries.push_back(std::move(e));
    }
    return report;
}

nlohmann::ordered_json PromotionReport::to_json() const {
    nlohmann::ordered_json j;
    j["dataset"] = dataset;
    j["experts"] = experts;
    j["seeds"] = seeds;
    auto& es = j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : entries)
        es.push_back({{"backbone", e.size.label},
                      {"hidden_dim", e.size.hidden},
                      {"layers", e.size.layers},
                      {"original", {{"mse", e.original_mse}, {"mae", e.original_mae}, {"val_mse", e.original_val_mse},
                                    {"val_mse_per_seed", e.original_val_per_seed}}},
                      {"moe", {{"mse", e.moe_mse}, {"mae", e.moe_mae}, {"val_mse", e.moe_val_mse},
                               {"val_mse_per_seed", e.moe_val_per_seed}}},
                      {"promotion_percent", e.promotion},
                      {"promotion", format_promotion(e.promotion)}});
    j["config"] = config;
    return j;
}

std::string PromotionReport::table() const {
    std::ostringstream out;
    char line[160];
    out << "Dataset: " << dataset << '\n';
    std::snprintf(line, sizeof line, "%-12s", "Setting");
    out << line;
    for (const auto& e : entries) {
        std::snprintf(line, sizeof line, " | %-8s %-8s", (e.size.label + " MSE").c_str(), "MAE");
        out << line;
    }
    out << '\n';
    auto row = [&](const char* name, auto mse, auto mae) {
        std::snprintf(line, sizeof line, "%-12s", name);
        out << line;
        for (const auto& e : entries) {
            std::snprintf(line, sizeof line, " | %-8s %-8s", fmt3(mse(e)).c_str(), fmt3(mae(e)).c_str());
            out << line;
        }
        out << '\n';
    };
    row("Original", [](const auto& e) { return e.original_mse; }, [](const auto& e) { return e.original_mae; });
    row("+MoE", [](const auto& e) { return e.moe_mse; }, [](const auto& e) { return e.moe_mae; });
    std::snprintf(line, sizeof line, "%-12s", "Promotion");
    out << line;
    for (const auto& e : entries) {
        std::snprintf(line, sizeof line, " | %-17s", format_promotion(e.promotion).c_str());
        out << line;
    }
    out << '\n';
    return out.str();
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::hidden_dim: return "hidden_dim";
        case SweepAxis::input_len: return "input_len";
        case SweepAxis::segment_len: return "segment_len";
    }
    return "segment_len";
}

SweepAxis parse_sweep_axis(const std::string& text) {
    if (text == "hidden_dim") return SweepAxis::hidden_dim;
    if (text == "input_len") return SweepAxis::input_len;
    if (text == "segment_len") return SweepAxis::segment_len;
    throw ConfigError("sweep axis must be hidden_dim, input_len or segment_len (got '" + text + "')");
}

SweepCurve sweep_run(const TimeSeriesFrame& raw, const ExperimentSettings& base, SweepAxis axis,
                     const std::vector<std::size_t>& values, const std::string& dataset, std::size_t jobs) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    SweepCurve curve;
    curve.dataset = dataset;
    curve.axis = axis;
    curve.config = base.to_json();
    curve.points.resize(values.size());
    parallel_for(values.size(), jobs, [&](std::size_t i) {
        ExperimentSettings s = base;
        switch (axis) {
            case SweepAxis::hidden_dim: s.model.hidden = values[i]; break;
            case SweepAxis::input_len: s.context_len = values[i]; break;
            case SweepAxis::segment_len: s.model.segment_len = values[i]; break;
        }
        const auto r = run_experiment(raw, s, dataset);
        curve.points[i] = {values[i], r.report.avg_mse, r.report.avg_mae};
    });
    for (std::size_t i = 1; i < curve.points.size(); ++i)
        if (curve.points[i].mse < curve.points[curve.argmin].mse) curve.argmin = i;
    return curve;
}

nlohmann::ordered_json SweepCurve::to_json() const {
    nlohmann::ordered_json j;
    j["dataset"] = dataset;
    j["axis"] = to_string(axis);
    auto& ps = j["points"] = nlohmann::ordered_json::array();
    for (const auto& p : points) ps.push_back({{"value", p.value}, {"mse", p.mse}, {"mae", p.mae}});
    j["argmin"] = points[argmin].value;
    j["config"] = config;
    return j;
}

std::string SweepCurve::plot_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "x,mse,mae\n";
    for (const auto& p : points) out << p.value << ',' << p.mse << ',' << p.mae << '\n';
    return out.str();
}

std::string forecast_table(const std::vector<ForecastReport>& reports) {
    std::ostringstream out;
    char cell[64];
    std::snprintf(cell, sizeof cell, "%-8s", "Horizon");
    out << cell;
    for (const auto& r : reports) {
        std::snprintf(cell, sizeof cell, " | %-17s", r.dataset.substr(0, 17).c_str());
        out << cell;
    }
    out << '\n';
    std::snprintf(cell, sizeof cell, "%-8s", "");
    out << cell;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        std::snprintf(cell, sizeof cell, " | %-8s %-8s", "MSE", "MAE");
        out << cell;
    }
    out << '\n';
    std::set<std::size_t> horizons;
    for (const auto& r : reports)
        for (const auto& h : r.horizons) horizons.insert(h.horizon);
    for (std::size_t h : horizons) {
        std::snprintf(cell, sizeof cell, "%-8zu", h);
        out << cell;
        for (const auto& r : reports) {
            std::string mse = "-", mae = "-";
            for (const auto& x : r.horizons)
                if (x.horizon == h) {
                    mse = fmt3(x.mse);
                    mae = fmt3(x.mae);
                }
            std::snprintf(cell, sizeof cell, " | %-8s %-8s", mse.c_str(), mae.c_str());
            out << cell;
        }
        out << '\n';
    }
    std::snprintf(cell, sizeof cell, "%-8s", "Avg");
    out << cell;
    for (const auto& r : reports) {
        std::snprintf(cell, sizeof cell, " | %-8s %-8s", fmt3(r.avg_mse).c_str(), fmt3(r.avg_mae).c_str());
        out << cell;
    }
    out << '\n';
    return out.str();
}

}  // namespace smet
