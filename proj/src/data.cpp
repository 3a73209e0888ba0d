#include "smet/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "smet/error.hpp"

namespace smet {
namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '"')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '"')) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        cells.push_back(trim(std::string_view(line).substr(pos, comma - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return cells;
}

std::string shortest(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace

Timestamp parse_timestamp(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char sep = ' ';
    const int n = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &s);
    if (n < 3 || (n > 3 && n < 6) || (n >= 4 && sep != ' ' && sep != 'T'))
        throw ParseError("unrecognized timestamp '" + text + "'");
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60)
        throw ParseError("invalid calendar instant '" + text + "'");
    return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} +
           std::chrono::seconds{s};
}

std::string format_timestamp(Timestamp t) {
    const auto days = std::chrono::floor<std::chrono::days>(t);
    const std::chrono::year_month_day ymd{days};
    const std::chrono::hh_mm_ss hms{t - days};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

std::vector<double> TimeSeriesFrame::channel(std::size_t v) const {
    std::vector<double> out(values.rows);
    for (std::size_t t = 0; t < values.rows; ++t) out[t] = values(t, v);
    return out;
}

TimeSeriesFrame load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw TooShort(path.string() + ": empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 2) throw ParseError(path.string() + ": need a date column and at least one channel");

    TimeSeriesFrame frame;
    frame.names.assign(header.begin() + 1, header.end());
    const std::size_t channels = frame.names.size();

    std::vector<Timestamp> stamps;
    std::vector<double> values;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                             " columns, got " + std::to_string(cells.size()));
        try {
            stamps.push_back(parse_timestamp(cells[0]));
        } catch (const ParseError& e) {
            throw ParseError("row " + std::to_string(row) + ", column 1: " + e.what());
        }
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const std::string& cell = cells[c];
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
                throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                                 ": not a number '" + cell + "'");
            values.push_back(v);
        }
    }
    if (stamps.size() < 2) throw TooShort(path.string() + ": need at least 2 rows");

    frame.start = stamps[0];
    frame.freq = stamps[1] - stamps[0];
    if (frame.freq.count() <= 0) throw MalformedSeries("timestamps must be strictly increasing");
    for (std::size_t i = 1; i < stamps.size(); ++i) {
        if (stamps[i] - stamps[i - 1] != frame.freq)
            throw MalformedSeries("non-uniform timestamp step at data row " + std::to_string(i + 1) + " (" +
                                  format_timestamp(stamps[i - 1]) + " -> " + format_timestamp(stamps[i]) + ")");
    }
    frame.values.rows = stamps.size();
    frame.values.cols = channels;
    frame.values.data = std::move(values);
    return frame;
}

std::string to_csv(const TimeSeriesFrame& frame) {
    std::ostringstream out;
    out << "date";
    for (const auto& n : frame.names) out << ',' << n;
    out << '\n';
    for (std::size_t t = 0; t < frame.length(); ++t) {
        out << format_timestamp(frame.timestamp(t));
        for (std::size_t v = 0; v < frame.channels(); ++v) out << ',' << shortest(frame.values(t, v));
        out << '\n';
    }
    return out.str();
}

void write_csv(const TimeSeriesFrame& frame, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_csv(frame);
}

Splits make_splits(const TimeSeriesFrame& frame, const SplitSpec& spec, std::size_t horizon) {
    if (spec.context_len == 0 || horizon == 0) throw ConfigError("context_len and horizon must be positive");
    const std::size_t need = spec.context_len + horizon;
    const auto check = [&](const char* name, std::size_t count) {
        if (count < need)
            throw SplitTooShort(std::string(name) + " split has " + std::to_string(count) +
                                " rows; one window needs context_len + horizon = " + std::to_string(need));
    };
    check("train", spec.train_count);
    check("validation", spec.val_count);
    check("test", spec.test_count);
    const std::size_t total = spec.train_count + spec.val_count + spec.test_count;
    if (total > frame.length())
        throw SplitTooShort("split counts need " + std::to_string(total) + " rows, frame has " +
                            std::to_string(frame.length()));

    Splits s;
    s.train = {0, spec.train_count};
    s.val = {s.train.end, s.train.end + spec.val_count};
    s.test = {s.val.end, s.val.end + spec.test_count};
    s.train_samples = window_count(spec.train_count, spec.context_len, horizon, 1);
    s.val_samples = spec.val_count - horizon + 1;
    s.test_samples = spec.test_count - horizon + 1;
    return s;
}

NormStats compute_stats(const TimeSeriesFrame& frame, SplitRange range) {
    if (range.end > frame.length() || range.length() == 0) throw ShapeError("stats range outside frame");
    NormStats stats;
    const std::size_t n = range.length();
    for (std::size_t v = 0; v < frame.channels(); ++v) {
        double sum = 0.0;
        for (std::size_t t = range.begin; t < range.end; ++t) sum += frame.values(t, v);
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (std::size_t t = range.begin; t < range.end; ++t) {
            const double d = frame.values(t, v) - mean;
            sq += d * d;
        }
        const double sd = std::sqrt(sq / static_cast<double>(n));
        if (!(sd > 0.0))
            throw DegenerateChannel("channel " + std::to_string(v) + " is constant over the statistics range");
        stats.mean.push_back(mean);
        stats.std.push_back(sd);
    }
    return stats;
}

TimeSeriesFrame normalize(const TimeSeriesFrame& frame, const NormStats& stats) {
    if (stats.mean.size() != frame.channels() || stats.std.size() != frame.channels())
        throw ShapeError("normalization stats have " + std::to_string(stats.mean.size()) + " channels, frame has " +
                         std::to_string(frame.channels()));
    TimeSeriesFrame out = frame;
    for (std::size_t t = 0; t < out.length(); ++t)
        for (std::size_t v = 0; v < out.channels(); ++v)
            out.values(t, v) = (frame.values(t, v) - stats.mean[v]) / stats.std[v];
    return out;
}

TimeSeriesFrame denormalize(const TimeSeriesFrame& frame, const NormStats& stats) {
    if (stats.mean.size() != frame.channels() || stats.std.size() != frame.channels())
        throw ShapeError("normalization stats have " + std::to_string(stats.mean.size()) + " channels, frame has " +
                         std::to_string(frame.channels()));
    TimeSeriesFrame out = frame;
    for (std::size_t t = 0; t < out.length(); ++t)
        for (std::size_t v = 0; v < out.channels(); ++v)
            out.values(t, v) = frame.values(t, v) * stats.std[v] + stats.mean[v];
    return out;
}

std::size_t window_count(std::size_t span_len, std::size_t context_len, std::size_t horizon, std::size_t stride) {
    if (stride == 0) throw ConfigError("stride must be positive");
    if (span_len < context_len + horizon) return 0;
    return (span_len - context_len - horizon) / stride + 1;
}

namespace {

WindowSample make_window(const TimeSeriesFrame& frame, std::size_t channel, std::size_t ctx_begin,
                         std::size_t context_len, std::size_t horizon) {
    WindowSample w;
    w.channel = channel;
    w.start = frame.timestamp(ctx_begin);
    w.context.resize(context_len);
    w.target.resize(horizon);
    for (std::size_t i = 0; i < context_len; ++i) w.context[i] = frame.values(ctx_begin + i, channel);
    for (std::size_t i = 0; i < horizon; ++i) w.target[i] = frame.values(ctx_begin + context_len + i, channel);
    return w;
}

}  // namespace

std::vector<WindowSample> sample_windows(const TimeSeriesFrame& frame, SplitRange range, std::size_t context_len,
                                         std::size_t horizon, std::size_t stride) {
    if (range.end > frame.length() || range.begin > range.end) throw ShapeError("window range outside frame");
    if (range.length() < context_len + horizon)
        throw SplitTooShort("range of " + std::to_string(range.length()) + " rows cannot hold one window");
    const std::size_t per_channel = window_count(range.length(), context_len, horizon, stride);
    std::vector<WindowSample> out;
    out.reserve(per_channel * frame.channels());
    for (std::size_t v = 0; v < frame.channels(); ++v)
        for (std::size_t i = 0; i < per_channel; ++i)
            out.push_back(make_window(frame, v, range.begin + i * stride, context_len, horizon));
    return out;
}

std::vector<WindowSample> sample_split_windows(const TimeSeriesFrame& frame, SplitRange targets,
                                               std::size_t context_len, std::size_t horizon, std::size_t stride) {
    if (stride == 0) throw ConfigError("stride must be positive");
    if (targets.end > frame.length() || targets.begin > targets.end) throw ShapeError("window range outside frame");
    const std::size_t first = std::max(targets.begin, context_len);
    if (targets.end < first + horizon)
        throw SplitTooShort("split [" + std::to_string(targets.begin) + ", " + std::to_string(targets.end) +
                            ") cannot hold one target of " + std::to_string(horizon) + " steps");
    const std::size_t per_channel = (targets.end - first - horizon) / stride + 1;
    std::vector<WindowSample> out;
    out.reserve(per_channel * frame.channels());
    for (std::size_t v = 0; v < frame.channels(); ++v)
        for (std::size_t i = 0; i < per_channel; ++i)
            out.push_back(make_window(frame, v, first + i * stride - context_len, context_len, horizon));
    return out;
}

}  // namespace smet
