#include "smet/textenc.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "smet/error.hpp"
#include "smet/hash.hpp"

namespace smet {

std::uint64_t prompt_key(std::string_view prompt) { return stable_hash64(prompt); }

std::vector<std::string> tokenize(std::string_view prompt) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < prompt.size()) {
        const auto c = static_cast<unsigned char>(prompt[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (std::isalnum(c)) {
            std::size_t j = i;
            while (j < prompt.size() && std::isalnum(static_cast<unsigned char>(prompt[j]))) ++j;
            tokens.emplace_back(prompt.substr(i, j - i));
            i = j;
        } else {
            tokens.emplace_back(1, prompt[i]);
            ++i;
        }
    }
    return tokens;
}

std::vector<double> token_vector(std::string_view token, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 gen(stable_hash64(token, seed));
    const double mag = 1.0 / std::sqrt(static_cast<double>(dim));
    std::vector<double> v(dim);
    std::uint64_t bits = 0;
    for (std::size_t d = 0; d < dim; ++d) {
        if (d % 64 == 0) bits = gen();
        v[d] = (bits >> (d % 64)) & 1ULL ? mag : -mag;
    }
    return v;
}

TextEmbedding encode_prompt(std::string_view prompt, std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw ConfigError("embedding dimension must be positive");
    const auto tokens = tokenize(prompt);
    if (tokens.empty()) throw EmptyPrompt("prompt has no tokens");
    constexpr double decay = 0.5;
    TextEmbedding out;
    out.key = prompt_key(prompt);
    out.vector.assign(dim, 0.0);
    // bias-corrected: weights over tokens always sum to 1
    double mass = 0.0;
    for (const auto& token : tokens) {
        const auto v = token_vector(token, dim, seed);
        for (std::size_t d = 0; d < dim; ++d) out.vector[d] = decay * out.vector[d] + (1.0 - decay) * v[d];
        mass = decay * mass + (1.0 - decay);
    }
    for (auto& x : out.vector) x /= mass;
    return out;
}

const TextEmbedding& EmbeddingCache::add(std::string_view prompt) {
    if (source_ != EmbeddingSource::builtin) throw CacheMiss("external caches cannot encode new prompts");
    const auto key = prompt_key(prompt);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second.embedding;
    Entry e{encode_prompt(prompt, dim_, seed_), sha256_hex(prompt)};
    return entries_.emplace(key, std::move(e)).first->second.embedding;
}

void EmbeddingCache::insert(std::uint64_t key, std::vector<double> values, std::string prompt_sha256) {
    if (values.size() != dim_)
        throw ShapeError("embedding of length " + std::to_string(values.size()) + " in a dim=" +
                         std::to_string(dim_) + " cache");
    if (auto it = entries_.find(key); it != entries_.end()) {
        if (it->second.embedding.vector != values || it->second.prompt_sha256 != prompt_sha256)
            throw CorruptCache("key " + to_hex16(key) + " appears twice with different contents");
        return;
    }
    entries_.emplace(key, Entry{TextEmbedding{std::move(values), key}, std::move(prompt_sha256)});
}

const TextEmbedding* EmbeddingCache::find(std::string_view prompt) const {
    const auto it = entries_.find(prompt_key(prompt));
    return it == entries_.end() ? nullptr : &it->second.embedding;
}

const TextEmbedding& EmbeddingCache::lookup(std::string_view prompt) const {
    if (const auto* e = find(prompt)) return *e;
    throw CacheMiss("no cached embedding for prompt '" + std::string(prompt) + "'");
}

std::string EmbeddingCache::serialize() const {
    std::ostringstream out;
    out << "SMET-EMB v1 dim=" << dim_ << '\n';
    for (const auto& [key, entry] : entries_) {
        nlohmann::json line;
        line["key"] = to_hex16(key);
        line["prompt_sha256"] = entry.prompt_sha256;
        line["values"] = entry.embedding.vector;
        out << line.dump() << '\n';
    }
    return out.str();
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << serialize();
}

EmbeddingCache precompute_cache(const std::vector<std::string>& prompts, std::size_t dim, std::uint64_t seed) {
    EmbeddingCache cache(dim, EmbeddingSource::builtin, seed);
    for (const auto& p : prompts) cache.add(p);
    return cache;
}

EmbeddingCache parse_cache(std::string_view text, std::size_t expected_dim, EmbeddingSource source) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line)) throw CorruptCache("empty cache file");
    constexpr std::string_view prefix = "SMET-EMB v1 dim=";
    if (line.rfind(prefix, 0) != 0) throw CorruptCache("bad cache header '" + line + "'");
    std::size_t dim = 0;
    try {
        dim = std::stoul(line.substr(prefix.size()));
    } catch (const std::exception&) {
        throw CorruptCache("bad dimension in cache header '" + line + "'");
    }
    if (dim == 0) throw CorruptCache("cache dimension must be positive");
    if (expected_dim != 0 && dim != expected_dim)
        throw ShapeError("cache dim=" + std::to_string(dim) + " does not match model dim=" +
                         std::to_string(expected_dim));

    EmbeddingCache cache(dim, source);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto obj = nlohmann::json::parse(line);
            const std::string key_hex = obj.at("key").get<std::string>();
            if (key_hex.size() != 16) throw CorruptCache("key must be 16 hex digits");
            const std::uint64_t key = std::stoull(key_hex, nullptr, 16);
            cache.insert(key, obj.at("values").get<std::vector<double>>(),
                         obj.value("prompt_sha256", std::string{}));
        } catch (const nlohmann::json::exception& e) {
            throw CorruptCache("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const std::invalid_argument&) {
            throw CorruptCache("line " + std::to_string(lineno) + ": key is not hexadecimal");
        }
    }
    return cache;
}

EmbeddingCache import_external(const std::filesystem::path& path, std::size_t expected_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_cache(buf.str(), expected_dim, EmbeddingSource::external);
}

}  // namespace smet
