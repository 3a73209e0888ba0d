#include "smet/descriptors.hpp"

#include <cmath>
#include <cstdio>

#include "smet/error.hpp"

namespace smet {
namespace {

constexpr const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                   "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string s = buf;
    // "-0.0000" and "0.0000" must not differ for values that round to zero.
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

}  // namespace

std::vector<Segment> segment_series(std::span<const double> context, Timestamp start, Duration freq,
                                    std::size_t segment_len) {
    if (segment_len < 2) throw ConfigError("segment length must be at least 2");
    if (segment_len > context.size())
        throw SegmentTooLong("segment length " + std::to_string(segment_len) + " exceeds context length " +
                             std::to_string(context.size()));
    const std::size_t n = context.size() / segment_len;
    std::vector<Segment> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = i * segment_len;
        auto& seg = out[i];
        seg.values.assign(context.begin() + off, context.begin() + off + segment_len);
        seg.start = start + freq * static_cast<long long>(off);
        seg.end = seg.start + freq * static_cast<long long>(segment_len - 1);
        seg.index = i + 1;
    }
    return out;
}

StatDescriptor stat_descriptor(std::span<const double> values) {
    if (values.size() < 2) throw ShapeError("statistical descriptor needs at least 2 values");
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    StatDescriptor d;
    d.mean = sum / n;
    double sq = 0.0;
    for (double v : values) sq += (v - d.mean) * (v - d.mean);
    d.std = std::sqrt(sq / n);
    d.change = values.back() - values.front();
    return d;
}

std::string format_descriptor_time(Timestamp t) {
    const auto days = std::chrono::floor<std::chrono::days>(t);
    const std::chrono::year_month_day ymd{days};
    const std::chrono::hh_mm_ss hms{t - days};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02u-%s-%04d %02d:%02d", static_cast<unsigned>(ymd.day()),
                  kMonths[static_cast<unsigned>(ymd.month()) - 1], static_cast<int>(ymd.year()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()));
    return buf;
}

std::string render_timestamp_descriptor(Timestamp start, Timestamp end) {
    return "The time range of this sequence is from " + format_descriptor_time(start) + " to " +
           format_descriptor_time(end);
}

std::string render_timestamp_descriptor(const Segment& segment) {
    return render_timestamp_descriptor(segment.start, segment.end);
}

std::string render_stat_text(const StatDescriptor& stats, int decimals) {
    return "Mean is " + fixed(stats.mean, decimals) + ", standard deviation is " + fixed(stats.std, decimals) +
           ", change is " + fixed(stats.change, decimals) + ".";
}

PromptRecord render_prompt(const std::string& timestamp_text, const StatDescriptor& stats,
                           std::size_t segment_index, int decimals) {
    PromptRecord r;
    r.timestamp_text = timestamp_text;
    r.stat_text = render_stat_text(stats, decimals);
    r.prompt = r.timestamp_text + " " + r.stat_text;
    r.segment_index = segment_index;
    return r;
}

std::vector<PromptRecord> describe_segments(const std::vector<Segment>& segments, int decimals) {
    std::vector<PromptRecord> out;
    out.reserve(segments.size());
    for (const auto& s : segments)
        out.push_back(render_prompt(render_timestamp_descriptor(s), stat_descriptor(s.values), s.index, decimals));
    return out;
}

}  // namespace smet
