#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "smet/data.hpp"

namespace smet {

struct Segment {
    std::vector<double> values;
    Timestamp start{};
    Timestamp end{};
    std::size_t index = 1;  // 1-based
};

struct StatDescriptor {
    double mean = 0.0;
    double std = 0.0;     // population
    double change = 0.0;  // last - first
};

struct PromptRecord {
    std::string timestamp_text;
    std::string stat_text;
    std::string prompt;
    std::size_t segment_index = 1;
};

/// Splits `context` into floor(C/S) consecutive segments; the trailing
/// C mod S values are dropped.
std::vector<Segment> segment_series(std::span<const double> context, Timestamp start, Duration freq,
                                    std::size_t segment_len);

StatDescriptor stat_descriptor(std::span<const double> values);

/// "DD-Mon-YYYY HH:MM"
std::string format_descriptor_time(Timestamp t);
std::string render_timestamp_descriptor(Timestamp start, Timestamp end);
std::string render_timestamp_descriptor(const Segment& segment);

std::string render_stat_text(const StatDescriptor& stats, int decimals = 4);
PromptRecord render_prompt(const std::string& timestamp_text, const StatDescriptor& stats,
                           std::size_t segment_index = 1, int decimals = 4);

/// Descriptor + prompt for every segment, in order.
std::vector<PromptRecord> describe_segments(const std::vector<Segment>& segments, int decimals = 4);

}  // namespace smet
