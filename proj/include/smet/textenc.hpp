#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace smet {

struct TextEmbedding {
    std::vector<double> vector;
    std::uint64_t key = 0;
};

/// Key under which a prompt is cached: stable 64-bit hash of its bytes.
std::uint64_t prompt_key(std::string_view prompt);

/// Whitespace is dropped; runs of alphanumerics form one token and every
/// other printable byte is a token of its own.
std::vector<std::string> tokenize(std::string_view prompt);

/// Fixed ±1/√D base vector for one token.
std::vector<double> token_vector(std::string_view token, std::size_t dim, std::uint64_t seed);

/// Stand-in for frozen-LLM encoding + final-position selection: causal EMA
/// (decay 0.5) over token base vectors, returning the final state.
TextEmbedding encode_prompt(std::string_view prompt, std::size_t dim, std::uint64_t seed);

enum class EmbeddingSource { builtin, external };

class EmbeddingCache {
public:
    struct Entry {
        TextEmbedding embedding;
        std::string prompt_sha256;
    };

    EmbeddingCache() = default;
    EmbeddingCache(std::size_t dim, EmbeddingSource source, std::uint64_t seed = 0)
        : dim_(dim), source_(source), seed_(seed) {}

    std::size_t dim() const { return dim_; }
    EmbeddingSource source() const { return source_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t size() const { return entries_.size(); }
    const std::map<std::uint64_t, Entry>& entries() const { return entries_; }

    /// Encodes and inserts `prompt` if absent (builtin caches only).
    const TextEmbedding& add(std::string_view prompt);
    /// Inserts a precomputed entry; a conflicting duplicate raises CorruptCache.
    void insert(std::uint64_t key, std::vector<double> values, std::string prompt_sha256);

    /// Read-only; throws CacheMiss for prompts that were never added.
    const TextEmbedding& lookup(std::string_view prompt) const;
    const TextEmbedding* find(std::string_view prompt) const;

    void save(const std::filesystem::path& path) const;
    std::string serialize() const;

private:
    std::size_t dim_ = 0;
    EmbeddingSource source_ = EmbeddingSource::builtin;
    std::uint64_t seed_ = 0;
    std::map<std::uint64_t, Entry> entries_;
};

EmbeddingCache precompute_cache(const std::vector<std::string>& prompts, std::size_t dim,
                                std::uint64_t seed);

/// Loads a cache file. `expected_dim` of 0 skips the model-dimension check.
EmbeddingCache import_external(const std::filesystem::path& path, std::size_t expected_dim = 0);
EmbeddingCache parse_cache(std::string_view text, std::size_t expected_dim = 0,
                           EmbeddingSource source = EmbeddingSource::external);

}  // namespace smet
