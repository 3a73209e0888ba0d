#include "smet/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "smet/error.hpp"

namespace smet {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError("key '" + key + "': cannot parse '" + text + "' as a number");
    return v;
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::defaults() {
    static const std::map<std::string, std::string> d = {
        // data
        {"data", ""},
        {"dataset", ""},
        {"context_len", "672"},
        {"base_horizon", "96"},
        {"split_counts", ""},
        {"stride", "1"},
        {"eval_stride", "96"},
        {"horizons", "96,192,336,720"},
        {"normalize", "true"},
        // descriptors / text
        {"segment_len", "96"},
        {"prompt_decimals", "4"},
        {"text_seed", "0"},
        {"embeddings", ""},
        {"channel", "0"},
        // model
        {"hidden_dim", "128"},
        {"experts", "4"},
        {"layers", "2"},
        {"heads", "2"},
        {"ffn_mult", "2"},
        {"checkpoint", ""},
        // train
        {"lr", "0.001"},
        {"lambda", "0.01"},
        {"sparsity_mode", "literal"},
        {"epochs", "10"},
        {"batch", "32"},
        {"seed", "0"},
        {"weight_decay", "0.01"},
        {"max_steps", "0"},
        {"lr_grid", ""},
        {"lambda_grid", ""},
        // experiments
        {"seeds", "0,1,2"},
        {"sweep_axis", "segment_len"},
        {"sweep_values", "48,96"},
        {"backbone_sizes", "small:64:1:2,base:128:2:2"},
        {"showcase", "1"},
        // synthetic data
        {"kind", "sine"},
        {"length", "2000"},
        {"channels", "1"},
        {"noise", "0"},
        {"period", "24"},
        {"amplitude", "1"},
        {"block_len", "96"},
        {"level", "1"},
        {"slope", "0.01"},
        // output
        {"out", "runs"},
        {"jobs", "1"},
    };
    return d;
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second = trim(value);
}

void RunConfig::merge_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
        set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    merge_text(buf.str(), path.string());
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
    return it->second;
}

std::size_t RunConfig::get_size(const std::string& key) const { return parse_number<std::size_t>(key, get(key)); }
double RunConfig::get_double(const std::string& key) const { return parse_number<double>(key, get(key)); }
std::uint64_t RunConfig::get_u64(const std::string& key) const { return parse_number<std::uint64_t>(key, get(key)); }

bool RunConfig::get_bool(const std::string& key) const {
    const auto& v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<std::size_t> RunConfig::get_size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(get(key))) out.push_back(parse_number<std::size_t>(key, item));
    return out;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(get(key))) out.push_back(parse_number<double>(key, item));
    return out;
}

std::vector<std::uint64_t> RunConfig::get_u64_list(const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (const auto& item : split_list(get(key))) out.push_back(parse_number<std::uint64_t>(key, item));
    return out;
}

ExperimentSettings RunConfig::experiment_settings() const {
    ExperimentSettings s;
    s.context_len = get_size("context_len");
    s.base_horizon = get_size("base_horizon");
    s.stride = get_size("stride");
    s.eval_stride = get_size("eval_stride");
    const auto counts = get_size_list("split_counts");
    if (!counts.empty()) {
        if (counts.size() != 3) throw ConfigError("split_counts needs three integers (train,val,test)");
        s.split_counts = {counts[0], counts[1], counts[2]};
    }
    s.horizons = get_size_list("horizons");
    s.normalize = get_bool("normalize");
    s.prompt_decimals = static_cast<int>(get_size("prompt_decimals"));

    s.model.segment_len = get_size("segment_len");
    s.model.hidden = get_size("hidden_dim");
    s.model.experts = get_size("experts");
    s.model.layers = get_size("layers");
    s.model.heads = get_size("heads");
    s.model.ffn_mult = get_size("ffn_mult");
    s.model.seed = get_u64("seed");
    s.model.text_seed = get_u64("text_seed");

    s.train.lr = get_double("lr");
    s.train.lambda = get_double("lambda");
    s.train.sparsity = parse_sparsity_mode(get("sparsity_mode"));
    s.train.epochs = get_size("epochs");
    s.train.batch = get_size("batch");
    s.train.seed = get_u64("seed");
    s.train.adamw.weight_decay = get_double("weight_decay");
    s.train.max_steps = get_size("max_steps");
    return s;
}

SynthSpec RunConfig::synth_spec() const {
    SynthSpec s;
    s.kind = parse_synth_kind(get("kind"));
    s.length = get_size("length");
    s.channels = get_size("channels");
    s.noise = get_double("noise");
    s.seed = get_u64("seed");
    s.period = get_double("period");
    s.amplitude = get_double("amplitude");
    s.block_len = get_size("block_len");
    s.level = get_double("level");
    s.slope = get_double("slope");
    return s;
}

std::vector<BackboneSize> RunConfig::backbone_sizes() const {
    std::vector<BackboneSize> out;
    for (const auto& item : split_list(get("backbone_sizes"))) {
        std::vector<std::string> parts;
        std::string p;
        std::istringstream in(item);
        while (std::getline(in, p, ':')) parts.push_back(trim(p));
        if (parts.size() != 4) throw ConfigError("backbone size '" + item + "' must be label:hidden:layers:heads");
        out.push_back({parts[0], parse_number<std::size_t>("backbone_sizes", parts[1]),
                       parse_number<std::size_t>("backbone_sizes", parts[2]),
                       parse_number<std::size_t>("backbone_sizes", parts[3])});
    }
    return out;
}

void RunConfig::validate() const {
    const auto s = experiment_settings();
    s.model.validate();
    s.train.validate();
    if (s.context_len == 0) throw ConfigError("context_len must be positive");
    if (s.base_horizon == 0) throw ConfigError("base_horizon must be positive");
    if (s.stride == 0 || s.eval_stride == 0) throw ConfigError("stride and eval_stride must be positive");
    if (s.model.segment_len > s.context_len) throw ConfigError("segment_len must not exceed context_len");
    if (s.horizons.empty()) throw ConfigError("horizons must list at least one value");
    for (auto h : s.horizons)
        if (h == 0) throw ConfigError("horizons must be positive");
    if (s.prompt_decimals > 17) throw ConfigError("prompt_decimals must be at most 17");
    synth_spec();
    backbone_sizes();
    parse_sweep_axis(get("sweep_axis"));
    get_size_list("sweep_values");
    get_u64_list("seeds");
    get_double_list("lr_grid");
    get_double_list("lambda_grid");
    get_size("jobs");
    get_size("showcase");
    get_size("channel");
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
}

std::string RunConfig::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

}  // namespace smet
