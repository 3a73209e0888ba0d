#pragma once

#include <stdexcept>
#include <string>

namespace smet {

/// Every failure raised by the library carries a stable machine-readable kind
/// (e.g. "MalformedSeries", "ShapeError") next to the human message. The CLI
/// serializes both into its error JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define SMET_DEFINE_ERROR(Name)                                                  \
    class Name : public Error {                                                  \
    public:                                                                      \
        explicit Name(const std::string& message) : Error(#Name, message) {}     \
    }

SMET_DEFINE_ERROR(MalformedSeries);
SMET_DEFINE_ERROR(ParseError);
SMET_DEFINE_ERROR(TooShort);
SMET_DEFINE_ERROR(SplitTooShort);
SMET_DEFINE_ERROR(ShapeError);
SMET_DEFINE_ERROR(DegenerateChannel);
SMET_DEFINE_ERROR(SegmentTooLong);
SMET_DEFINE_ERROR(EmptyPrompt);
SMET_DEFINE_ERROR(CacheMiss);
SMET_DEFINE_ERROR(CorruptCache);
SMET_DEFINE_ERROR(TraceError);
SMET_DEFINE_ERROR(NonFiniteGradient);
SMET_DEFINE_ERROR(InvalidHorizon);
SMET_DEFINE_ERROR(ConfigError);
SMET_DEFINE_ERROR(IoError);

#undef SMET_DEFINE_ERROR

}  // namespace smet
