#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "smet/data.hpp"
#include "smet/descriptors.hpp"
#include "smet/matrix.hpp"
#include "smet/textenc.hpp"

namespace smet {

/// Where segment prompts get their embeddings. Training uses a strict view
/// over the precomputed cache; rolling inference on a built-in cache may
/// encode prompts of predicted segments on the fly.
class TextSource {
public:
    TextSource() = default;
    TextSource(const EmbeddingCache* cache, bool encode_misses) : cache_(cache), encode_misses_(encode_misses) {}

    bool enabled() const { return cache_ != nullptr; }
    std::size_t dim() const { return cache_ ? cache_->dim() : 0; }
    std::vector<double> embed(const std::string& prompt) const;
    TextSource strict() const { return {cache_, false}; }

private:
    const EmbeddingCache* cache_ = nullptr;
    bool encode_misses_ = false;
};

struct SequenceInput {
    Matrix segments;  // N×S
    Matrix text;      // N×D, empty when text is disabled
};

/// Segments `values` (dropping the trailing remainder) and looks up each
/// segment's prompt embedding.
SequenceInput build_sequence(std::span<const double> values, Timestamp start, Duration freq,
                             std::size_t segment_len, const TextSource& text, int decimals = 4);

/// Prompts for every segment of `values`, in order.
std::vector<std::string> sequence_prompts(std::span<const double> values, Timestamp start, Duration freq,
                                          std::size_t segment_len, int decimals = 4);

}  // namespace smet
