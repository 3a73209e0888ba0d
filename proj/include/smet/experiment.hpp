#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smet/data.hpp"
#include "smet/model.hpp"
#include "smet/textenc.hpp"
#include "smet/train.hpp"

namespace smet {

struct ExperimentSettings {
    std::size_t context_len = 672;
    std::size_t base_horizon = 96;
    std::size_t stride = 1;
    std::size_t eval_stride = 96;
    /// Train/val/test row counts; all zero selects a 70/10/20 split.
    std::array<std::size_t, 3> split_counts{0, 0, 0};
    std::vector<std::size_t> horizons{96, 192, 336, 720};
    bool normalize = true;
    int prompt_decimals = 4;
    ModelConfig model;
    TrainConfig train;
    /// Optional externally computed embeddings; must cover every training prompt.
    std::optional<EmbeddingCache> external_embeddings;

    nlohmann::ordered_json to_json() const;
};

struct HorizonMetrics {
    std::size_t horizon = 0;
    double mse = 0.0;
    double mae = 0.0;
};

struct ForecastReport {
    std::string dataset;
    std::vector<HorizonMetrics> horizons;
    double avg_mse = 0.0;
    double avg_mae = 0.0;
    std::uint64_t seed = 0;
    nlohmann::ordered_json config;

    nlohmann::ordered_json to_json() const;
};

/// Normalized frame, split ranges and the statistics used.
struct PreparedData {
    TimeSeriesFrame frame;
    Splits splits;
    std::optional<NormStats> stats;
};

PreparedData prepare_data(const TimeSeriesFrame& raw, const ExperimentSettings& settings);

struct ExperimentResult {
    TrainResult training;
    ForecastReport report;
    EmbeddingCache cache;
};

/// Full pipeline: split, normalize, build prompts and embeddings, train, then
/// score rolling forecasts on the test split for every configured horizon.
ExperimentResult run_experiment(const TimeSeriesFrame& raw, const ExperimentSettings& settings,
                                const std::string& dataset = "dataset");

/// Rolling-forecast metrics of `params` on the test split.
ForecastReport evaluate_test(const ModelParams& params, const PreparedData& data, const ExperimentSettings& settings,
                             const TextSource& text, const std::string& dataset);

/// Persistence-baseline metrics on the same test windows.
ForecastReport evaluate_persistence(const PreparedData& data, const ExperimentSettings& settings,
                                    const std::string& dataset);

enum class AblationVariant { original, without_context, without_fusion, without_moe };
std::string to_string(AblationVariant v);
ExperimentSettings apply_ablation(ExperimentSettings settings, AblationVariant v);

struct AblationRow {
    AblationVariant variant = AblationVariant::original;
    std::vector<double> val_mse;   // per seed
    std::vector<double> test_mse;  // per seed, averaged over horizons
    std::vector<double> test_mae;
    double mean_mse = 0.0, std_mse = 0.0;
    double mean_mae = 0.0, std_mae = 0.0;
    std::size_t gate_parameters = 0;  // in the first seed's checkpoint
};

struct AblationReport {
    std::string dataset;
    std::vector<std::uint64_t> seeds;
    std::vector<AblationRow> rows;  // original, w/o context, w/o fusion, w/o MoE
    nlohmann::ordered_json config;

    nlohmann::ordered_json to_json() const;
    std::string table() const;
};

AblationReport ablation_run(const TimeSeriesFrame& raw, const ExperimentSettings& base,
                            const std::vector<std::uint64_t>& seeds, const std::string& dataset = "dataset",
                            std::size_t jobs = 1);

/// (original - moe) / original · 100
double promotion_percent(double mse_original, double mse_moe);
/// Signed, one decimal: "+11.2%".
std::string format_promotion(double percent);

struct BackboneSize {
    std::string label;
    std::size_t hidden = 128;
    std::size_t layers = 2;
    std::size_t heads = 2;
};

struct PromotionEntry {
    BackboneSize size;
    double original_mse = 0.0, original_mae = 0.0, original_val_mse = 0.0;
    double moe_mse = 0.0, moe_mae = 0.0, moe_val_mse = 0.0;
    double promotion = 0.0;
    std::vector<double> original_val_per_seed, moe_val_per_seed;
};

struct PromotionReport {
    std::string dataset;
    std::size_t experts = 4;
    std::vector<std::uint64_t> seeds;
    std::vector<PromotionEntry> entries;
    nlohmann::ordered_json config;

    nlohmann::ordered_json to_json() const;
    std::string table() const;
};

/// Per backbone size: K=1 without a gate ("Original") against K experts with
/// the gate, averaged over seeds.
PromotionReport promotion_run(const TimeSeriesFrame& raw, const ExperimentSettings& base,
                              const std::vector<BackboneSize>& sizes, std::size_t experts,
                              const std::vector<std::uint64_t>& seeds, const std::string& dataset = "dataset",
                              std::size_t jobs = 1);

enum class SweepAxis { hidden_dim, input_len, segment_len };
std::string to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& text);

struct SweepPoint {
    std::size_t value = 0;
    double mse = 0.0;
    double mae = 0.0;
};

struct SweepCurve {
    std::string dataset;
    SweepAxis axis = SweepAxis::segment_len;
    std::vector<SweepPoint> points;
    std::size_t argmin = 0;  // index into points
    nlohmann::ordered_json config;

    nlohmann::ordered_json to_json() const;
    std::string plot_csv() const;
};

SweepCurve sweep_run(const TimeSeriesFrame& raw, const ExperimentSettings& base, SweepAxis axis,
                     const std::vector<std::size_t>& values, const std::string& dataset = "dataset",
                     std::size_t jobs = 1);

std::string forecast_table(const std::vector<ForecastReport>& reports);

}  // namespace smet
