// smetimes: command-line driver for synthetic data, training, evaluation and
// the ablation / promotion / sweep experiment harnesses.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "smet/config.hpp"
#include "smet/data.hpp"
#include "smet/descriptors.hpp"
#include "smet/error.hpp"
#include "smet/experiment.hpp"
#include "smet/forecast.hpp"
#include "smet/gradcheck.hpp"
#include "smet/hash.hpp"
#include "smet/synth.hpp"
#include "smet/textenc.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Invocation {
    std::string command;
    smet::RunConfig config;
    bool table = false;
    bool plot_data = false;
    fs::path run_dir;
    std::vector<std::string> artifacts;

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(run_dir / name, std::ios::binary);
        if (!out) throw smet::IoError("cannot write " + (run_dir / name).string());
        out << content;
        artifacts.push_back((run_dir / name).string());
    }
    void write_json(const std::string& name, ordered_json body) {
        body["run_config"] = config.to_json();
        body["command"] = command;
        write(name, body.dump(2) + "\n");
    }
};

std::string dataset_name(const smet::RunConfig& c) {
    if (!c.get("dataset").empty()) return c.get("dataset");
    return fs::path(c.get("data")).stem().string();
}

smet::TimeSeriesFrame load_data(const smet::RunConfig& c) {
    if (c.get("data").empty()) throw smet::ConfigError("this command needs --data <csv>");
    return smet::load_csv(c.get("data"));
}

smet::ExperimentSettings settings_with_embeddings(const smet::RunConfig& c) {
    auto s = c.experiment_settings();
    if (!c.get("embeddings").empty()) s.external_embeddings = smet::import_external(c.get("embeddings"), s.model.hidden);
    return s;
}

ordered_json curve_json(const smet::TrainResult& r) {
    ordered_json epochs = ordered_json::array();
    for (const auto& e : r.curve)
        epochs.push_back({{"epoch", e.epoch},
                          {"steps", e.steps},
                          {"train_loss", e.train_loss},
                          {"val_mse", e.val_mse},
                          {"val_mae", e.val_mae},
                          {"mean_gate_entropy", e.mean_gate_entropy},
                          {"alpha", e.alpha}});
    return epochs;
}

std::string showcase_csv(const smet::ModelParams& params, const smet::TimeSeriesFrame& raw,
                         const smet::ExperimentSettings& s, const smet::TextSource& text, std::size_t count) {
    const auto data = smet::prepare_data(raw, s);
    const std::size_t h = s.base_horizon;
    auto windows = smet::sample_split_windows(data.frame, data.splits.test, s.context_len, h, h);
    const smet::Forecaster model{&params, text, s.prompt_decimals};
    std::ostringstream out;
    out.precision(17);
    out << "window,channel,t,truth,prediction\n";
    for (std::size_t i = 0; i < std::min(count, windows.size()); ++i) {
        const auto& w = windows[i];
        auto pred = smet::rolling_forecast(model, w.context, w.start, data.frame.freq, h);
        const double mean = data.stats ? data.stats->mean[w.channel] : 0.0;
        const double sd = data.stats ? data.stats->std[w.channel] : 1.0;
        for (std::size_t t = 0; t < h; ++t)
            out << i << ',' << w.channel << ',' << t << ',' << w.target[t] * sd + mean << ','
                << pred[t] * sd + mean << '\n';
    }
    return out.str();
}

int cmd_synth(Invocation& inv) {
    const auto frame = smet::generate_synthetic(inv.config.synth_spec());
    inv.write("synth.csv", smet::to_csv(frame));
    inv.write_json("run.json", {{"kind", smet::to_string(inv.config.synth_spec().kind)}, {"rows", frame.length()}});
    return 0;
}

int cmd_train(Invocation& inv) {
    const auto raw = load_data(inv.config);
    auto settings = settings_with_embeddings(inv.config);
    const auto name = dataset_name(inv.config);
    const std::size_t jobs = inv.config.get_size("jobs");

    ordered_json selection = nullptr;
    const auto lrs = inv.config.get_double_list("lr_grid");
    const auto lambdas = inv.config.get_double_list("lambda_grid");
    if (!lrs.empty() || !lambdas.empty()) {
        const auto sel = smet::select_hyperparams(
            lrs.empty() ? std::vector<double>{settings.train.lr} : lrs,
            lambdas.empty() ? std::vector<double>{settings.train.lambda} : lambdas,
            [&](double lr, double lambda) {
                auto s = settings;
                s.train.lr = lr;
                s.train.lambda = lambda;
                return smet::run_experiment(raw, s, name).training.best_val_mse;
            },
            jobs);
        settings.train.lr = sel.lr;
        settings.train.lambda = sel.lambda;
        selection = {{"lr", sel.lr}, {"lambda", sel.lambda}, {"grid", ordered_json::array()}};
        for (const auto& g : sel.evaluated)
            selection["grid"].push_back({{"lr", g.lr}, {"lambda", g.lambda}, {"val_mse", g.val_mse}});
    }

    const auto result = smet::run_experiment(raw, settings, name);
    inv.write("checkpoint.json", smet::checkpoint_json(result.training.best));
    if (settings.model.use_text) inv.write("embeddings.smet", result.cache.serialize());
    inv.write_json("run.json", {{"config", settings.to_json()},
                                {"seed", settings.train.seed},
                                {"epochs", curve_json(result.training)},
                                {"best_epoch", result.training.best_epoch},
                                {"steps", result.training.steps},
                                {"selection", selection}});
    inv.write_json("report.json", result.report.to_json());
    if (inv.table) {
        const auto t = smet::forecast_table({result.report});
        inv.write("report_table.txt", t);
        std::cout << t;
    }
    if (inv.plot_data) {
        const smet::TextSource text = settings.model.use_text ? smet::TextSource(&result.cache, true) : smet::TextSource{};
        inv.write("showcase.csv", showcase_csv(result.training.best, raw, settings, text, inv.config.get_size("showcase")));
    }
    return 0;
}

int cmd_evaluate(Invocation& inv) {
    const auto raw = load_data(inv.config);
    if (inv.config.get("checkpoint").empty()) throw smet::ConfigError("evaluate needs --checkpoint <file>");
    const auto params = smet::load_checkpoint(inv.config.get("checkpoint"));
    auto settings = settings_with_embeddings(inv.config);
    settings.model = params.config;
    const auto name = dataset_name(inv.config);
    const auto data = smet::prepare_data(raw, settings);

    smet::EmbeddingCache cache = settings.external_embeddings
                                     ? *settings.external_embeddings
                                     : smet::EmbeddingCache(params.config.hidden, smet::EmbeddingSource::builtin,
                                                            params.config.text_seed);
    const smet::TextSource text = params.config.use_text ? smet::TextSource(&cache, true) : smet::TextSource{};
    const auto report = smet::evaluate_test(params, data, settings, text, name);
    const auto persistence = smet::evaluate_persistence(data, settings, name);
    inv.write_json("report.json", {{"model", report.to_json()}, {"persistence", persistence.to_json()}});
    if (inv.table) {
        const auto t = smet::forecast_table({report, persistence});
        inv.write("report_table.txt", t);
        std::cout << t;
    }
    if (inv.plot_data) inv.write("showcase.csv", showcase_csv(params, raw, settings, text, inv.config.get_size("showcase")));
    return 0;
}

int cmd_ablate(Invocation& inv) {
    const auto raw = load_data(inv.config);
    const auto report = smet::ablation_run(raw, settings_with_embeddings(inv.config), inv.config.get_u64_list("seeds"),
                                           dataset_name(inv.config), inv.config.get_size("jobs"));
    inv.write_json("ablation.json", report.to_json());
    if (inv.table) {
        inv.write("ablation_table.txt", report.table());
        std::cout << report.table();
    }
    return 0;
}

int cmd_promote(Invocation& inv) {
    const auto raw = load_data(inv.config);
    const auto report = smet::promotion_run(raw, settings_with_embeddings(inv.config), inv.config.backbone_sizes(),
                                            inv.config.get_size("experts"), inv.config.get_u64_list("seeds"),
                                            dataset_name(inv.config), inv.config.get_size("jobs"));
    inv.write_json("promotion.json", report.to_json());
    if (inv.table) {
        inv.write("promotion_table.txt", report.table());
        std::cout << report.table();
    }
    return 0;
}

int cmd_sweep(Invocation& inv) {
    const auto raw = load_data(inv.config);
    const auto axis = smet::parse_sweep_axis(inv.config.get("sweep_axis"));
    const auto curve = smet::sweep_run(raw, settings_with_embeddings(inv.config), axis,
                                       inv.config.get_size_list("sweep_values"), dataset_name(inv.config),
                                       inv.config.get_size("jobs"));
    inv.write_json("sweep.json", curve.to_json());
    if (inv.plot_data) inv.write("sweep_" + smet::to_string(axis) + ".csv", curve.plot_csv());
    return 0;
}

int cmd_gradcheck(Invocation& inv) {
    smet::GradCheckOptions opts;
    opts.seed = inv.config.get_u64("seed");
    const auto result = smet::gradient_check(opts);
    constexpr double tolerance = 1e-4;
    constexpr double theta_tolerance = 1e-10;
    ordered_json blocks = ordered_json::array();
    for (const auto& b : result.blocks) {
        std::printf("%-18s entries=%-5zu max_rel_error=%.3e %s\n", b.name.c_str(), b.entries, b.max_rel_error,
                    b.max_rel_error <= tolerance ? "ok" : "FAIL");
        blocks.push_back({{"name", b.name}, {"entries", b.entries}, {"max_rel_error", b.max_rel_error},
                          {"max_abs_error", b.max_abs_error}});
    }
    const bool ok = result.max_rel_error <= tolerance && result.theta_closed_form_error <= theta_tolerance;
    std::printf("theta closed-form error=%.3e %s\n", result.theta_closed_form_error,
                result.theta_closed_form_error <= theta_tolerance ? "ok" : "FAIL");
    inv.write_json("gradcheck.json", {{"seed", opts.seed},
                                      {"blocks", blocks},
                                      {"max_rel_error", result.max_rel_error},
                                      {"theta_closed_form_error", result.theta_closed_form_error},
                                      {"passed", ok}});
    return ok ? 0 : 1;
}

int cmd_dump_prompts(Invocation& inv) {
    const auto raw = load_data(inv.config);
    const auto settings = inv.config.experiment_settings();
    const auto data = settings.normalize ? smet::prepare_data(raw, settings) : smet::PreparedData{raw, {}, {}};
    const std::size_t channel = inv.config.get_size("channel");
    if (channel >= data.frame.channels()) throw smet::ConfigError("channel index out of range");
    const auto values = data.frame.channel(channel);
    const auto segments = smet::segment_series(values, data.frame.start, data.frame.freq, settings.model.segment_len);
    std::string lines;
    for (const auto& seg : segments) {
        const auto stats = smet::stat_descriptor(seg.values);
        const auto rec = smet::render_prompt(smet::render_timestamp_descriptor(seg), stats, seg.index,
                                             settings.prompt_decimals);
        ordered_json j = {{"index", seg.index},
                          {"start", smet::format_timestamp(seg.start)},
                          {"end", smet::format_timestamp(seg.end)},
                          {"mean", stats.mean},
                          {"std", stats.std},
                          {"change", stats.change},
                          {"prompt", rec.prompt}};
        lines += j.dump() + "\n";
    }
    inv.write("prompts.jsonl", lines);
    inv.write_json("run.json", {{"segments", segments.size()}, {"channel", channel}});
    return 0;
}

void emit_error(const std::string& kind, const std::string& message) {
    std::cerr << ordered_json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SMETimes-style forecasting: prompts, adaptive fusion and a dynamic mixture-of-experts head"};
    app.require_subcommand(1);

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"synth", "generate a synthetic ETT-format CSV"},
        {"train", "train on a CSV and report rolling-forecast metrics"},
        {"evaluate", "evaluate a checkpoint on the test split"},
        {"ablate", "run the four-way ablation"},
        {"promote", "compare K=1 against the mixture-of-experts head per backbone size"},
        {"sweep", "hyperparameter sensitivity sweep"},
        {"gradcheck", "finite-difference gradient check on a tiny model"},
        {"dump-prompts", "write the segment prompts of one channel as JSON lines"},
    };

    Invocation inv;
    std::string config_file;
    std::map<std::string, std::string> flags;
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_file, "flat key=value config file");
        sub->add_flag("--table", inv.table, "also render a fixed-width text table");
        sub->add_flag("--plot-data", inv.plot_data, "also write plot-ready CSV data");
        for (const auto& [key, def] : smet::RunConfig::defaults())
            sub->add_option("--" + key, flags[key], "default: '" + def + "'");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("ConfigError", e.what());
        return 2;
    }

    try {
        inv.command = app.get_subcommands().front()->get_name();
        if (!config_file.empty()) inv.config.merge_file(config_file);
        for (const auto& [key, value] : flags) {
            auto* opt = app.get_subcommands().front()->get_option("--" + key);
            if (opt->count() > 0) inv.config.set(key, value);
        }
        inv.config.validate();

        const auto id = smet::to_hex16(smet::stable_hash64(inv.command + "\n" + inv.config.canonical()));
        inv.run_dir = fs::path(inv.config.get("out")) / (inv.command + "-" + id);
        fs::create_directories(inv.run_dir);

        int status = 0;
        if (inv.command == "synth") status = cmd_synth(inv);
        else if (inv.command == "train") status = cmd_train(inv);
        else if (inv.command == "evaluate") status = cmd_evaluate(inv);
        else if (inv.command == "ablate") status = cmd_ablate(inv);
        else if (inv.command == "promote") status = cmd_promote(inv);
        else if (inv.command == "sweep") status = cmd_sweep(inv);
        else if (inv.command == "gradcheck") status = cmd_gradcheck(inv);
        else if (inv.command == "dump-prompts") status = cmd_dump_prompts(inv);

        std::cout << ordered_json{{"command", inv.command}, {"run_dir", inv.run_dir.string()},
                                  {"artifacts", inv.artifacts}, {"status", status}}
                         .dump()
                  << std::endl;
        return status;
    } catch (const smet::Error& e) {
        emit_error(e.kind(), e.what());
    } catch (const std::exception& e) {
        emit_error("InternalError", e.what());
    }
    return 2;
}
