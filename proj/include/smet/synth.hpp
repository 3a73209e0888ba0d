#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "smet/data.hpp"

namespace smet {

enum class SynthKind { sine, two_regime, constant, linear };

std::string to_string(SynthKind kind);
SynthKind parse_synth_kind(const std::string& text);

struct SynthSpec {
    SynthKind kind = SynthKind::sine;
    std::size_t length = 2000;
    std::size_t channels = 1;
    double noise = 0.0;
    std::uint64_t seed = 0;
    double period = 24.0;
    double amplitude = 1.0;
    std::size_t block_len = 96;  // two-regime switch schedule
    double level = 1.0;          // constant / linear intercept
    double slope = 0.01;         // linear
};

/// Hourly series starting 2016-07-01 00:00. A pure function of the spec.
///  sine:       A·sin(2πt/period + φ_v) + ε
///  two_regime: blocks of block_len steps alternating between a sine regime
///              (mean 0) and a sawtooth regime with a different period, a
///              positive offset and a smaller amplitude
///  constant:   level + ε
///  linear:     level + slope·t + ε
/// φ_v = 2πv/channels separates channels.
TimeSeriesFrame generate_synthetic(const SynthSpec& spec);

/// Which regime (0 sine, 1 sawtooth) row t of a two-regime series is in.
int two_regime_at(const SynthSpec& spec, std::size_t t);

}  // namespace smet
