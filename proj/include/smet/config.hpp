#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smet/experiment.hpp"
#include "smet/synth.hpp"

namespace smet {

/// Flat key=value run configuration: defaults <- config file <- flags.
/// Unknown keys are rejected.
class RunConfig {
public:
    RunConfig();

    static const std::map<std::string, std::string>& defaults();

    void set(const std::string& key, const std::string& value);
    void merge_text(const std::string& text, const std::string& origin = "config");
    void merge_file(const std::filesystem::path& path);

    const std::string& get(const std::string& key) const;
    std::size_t get_size(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<std::size_t> get_size_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<std::uint64_t> get_u64_list(const std::string& key) const;

    /// Checks every key against its module's preconditions; throws ConfigError.
    void validate() const;

    ExperimentSettings experiment_settings() const;
    SynthSpec synth_spec() const;
    std::vector<BackboneSize> backbone_sizes() const;

    nlohmann::ordered_json to_json() const;
    /// Stable "key=value\n" listing used for run-directory hashing.
    std::string canonical() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace smet
