#include "smet/sequence.hpp"

#include "smet/error.hpp"

namespace smet {

std::vector<double> TextSource::embed(const std::string& prompt) const {
    if (!cache_) throw CacheMiss("no text embeddings configured");
    if (const auto* e = cache_->find(prompt)) return e->vector;
    if (encode_misses_ && cache_->source() == EmbeddingSource::builtin)
        return encode_prompt(prompt, cache_->dim(), cache_->seed()).vector;
    return cache_->lookup(prompt).vector;  // throws CacheMiss
}

SequenceInput build_sequence(std::span<const double> values, Timestamp start, Duration freq,
                             std::size_t segment_len, const TextSource& text, int decimals) {
    const auto segments = segment_series(values, start, freq, segment_len);
    SequenceInput in;
    in.segments = Matrix(segments.size(), segment_len);
    for (std::size_t i = 0; i < segments.size(); ++i)
        std::copy(segments[i].values.begin(), segments[i].values.end(), in.segments.row(i).begin());
    if (text.enabled()) {
        in.text = Matrix(segments.size(), text.dim());
        const auto prompts = describe_segments(segments, decimals);
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            const auto v = text.embed(prompts[i].prompt);
            std::copy(v.begin(), v.end(), in.text.row(i).begin());
        }
    }
    return in;
}

std::vector<std::string> sequence_prompts(std::span<const double> values, Timestamp start, Duration freq,
                                          std::size_t segment_len, int decimals) {
    std::vector<std::string> out;
    for (const auto& r : describe_segments(segment_series(values, start, freq, segment_len), decimals))
        out.push_back(r.prompt);
    return out;
}

}  // namespace smet
