#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "smet/matrix.hpp"

namespace smet {

using Timestamp = std::chrono::sys_seconds;
using Duration = std::chrono::seconds;

/// Parses "YYYY-MM-DD HH:MM:SS" (seconds optional).
Timestamp parse_timestamp(const std::string& text);
/// Formats as "YYYY-MM-DD HH:MM:SS".
std::string format_timestamp(Timestamp t);

/// Timestamped multivariate series. values is T×V, row-major by time.
struct TimeSeriesFrame {
    Timestamp start{};
    Duration freq{3600};
    Matrix values;
    std::vector<std::string> names;

    std::size_t length() const { return values.rows; }
    std::size_t channels() const { return values.cols; }
    Timestamp timestamp(std::size_t row) const { return start + freq * static_cast<long long>(row); }
    std::vector<double> channel(std::size_t v) const;
};

TimeSeriesFrame load_csv(const std::filesystem::path& path);
void write_csv(const TimeSeriesFrame& frame, const std::filesystem::path& path);
/// Same as write_csv into a string. Numbers use shortest round-trip form.
std::string to_csv(const TimeSeriesFrame& frame);

struct SplitSpec {
    std::size_t train_count = 0;
    std::size_t val_count = 0;
    std::size_t test_count = 0;
    std::size_t context_len = 672;
};

/// Half-open row range [begin, end) of target points. Contexts for val/test
/// windows may reach back before `begin`.
struct SplitRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t length() const { return end - begin; }
};

struct Splits {
    SplitRange train;
    SplitRange val;
    SplitRange test;
    /// Usable windows per channel in each split.
    std::size_t train_samples = 0;
    std::size_t val_samples = 0;
    std::size_t test_samples = 0;
};

Splits make_splits(const TimeSeriesFrame& frame, const SplitSpec& spec, std::size_t horizon);

struct NormStats {
    std::vector<double> mean;
    std::vector<double> std;
};

/// Per-channel population mean/std over rows [range.begin, range.end).
NormStats compute_stats(const TimeSeriesFrame& frame, SplitRange range);
TimeSeriesFrame normalize(const TimeSeriesFrame& frame, const NormStats& stats);
TimeSeriesFrame denormalize(const TimeSeriesFrame& frame, const NormStats& stats);

struct WindowSample {
    std::size_t channel = 0;
    std::vector<double> context;
    std::vector<double> target;
    Timestamp start{};
};

/// Number of windows that fit in `span_len` rows.
std::size_t window_count(std::size_t span_len, std::size_t context_len, std::size_t horizon,
                         std::size_t stride);

/// Channel-major, then time-major enumeration of (context, target) windows
/// wholly inside rows [range.begin, range.end).
std::vector<WindowSample> sample_windows(const TimeSeriesFrame& frame, SplitRange range,
                                         std::size_t context_len, std::size_t horizon,
                                         std::size_t stride);

/// Windows whose targets start inside `targets` while their contexts may
/// borrow up to context_len rows of history from before targets.begin.
std::vector<WindowSample> sample_split_windows(const TimeSeriesFrame& frame, SplitRange targets,
                                               std::size_t context_len, std::size_t horizon,
                                               std::size_t stride);

}  // namespace smet
