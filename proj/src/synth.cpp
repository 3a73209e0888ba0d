#include "smet/synth.hpp"

#include <cmath>
#include <numbers>

#include "smet/error.hpp"
#include "smet/hash.hpp"

namespace smet {
namespace {

class NoiseRng {
public:
    explicit NoiseRng(std::uint64_t seed) : state_(seed) {}
    double uniform() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
    }
    // Box-Muller
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace

std::string to_string(SynthKind kind) {
    switch (kind) {
        case SynthKind::sine: return "sine";
        case SynthKind::two_regime: return "two-regime";
        case SynthKind::constant: return "constant";
        case SynthKind::linear: return "linear";
    }
    return "sine";
}

SynthKind parse_synth_kind(const std::string& text) {
    if (text == "sine") return SynthKind::sine;
    if (text == "two-regime" || text == "two_regime") return SynthKind::two_regime;
    if (text == "constant") return SynthKind::constant;
    if (text == "linear") return SynthKind::linear;
    throw ConfigError("unknown synthetic kind '" + text + "'");
}

int two_regime_at(const SynthSpec& spec, std::size_t t) { return static_cast<int>((t / spec.block_len) % 2); }

TimeSeriesFrame generate_synthetic(const SynthSpec& spec) {
    if (spec.length < 2) throw TooShort("synthetic series needs at least 2 rows");
    if (spec.channels == 0) throw ConfigError("channels must be positive");
    if (!(spec.period > 0.0)) throw ConfigError("period must be positive");
    if (spec.block_len == 0) throw ConfigError("block_len must be positive");
    if (spec.noise < 0.0) throw ConfigError("noise must be non-negative");

    TimeSeriesFrame frame;
    frame.start = parse_timestamp("2016-07-01 00:00:00");
    frame.freq = std::chrono::hours{1};
    frame.values = Matrix(spec.length, spec.channels);
    for (std::size_t v = 0; v < spec.channels; ++v) frame.names.push_back("ch" + std::to_string(v));

    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t v = 0; v < spec.channels; ++v) {
        NoiseRng rng(stable_hash64("channel-" + std::to_string(v), spec.seed));
        const double phase = two_pi * static_cast<double>(v) / static_cast<double>(spec.channels);
        for (std::size_t t = 0; t < spec.length; ++t) {
            // fmod keeps integer periods exactly periodic in floating point
            const double td = static_cast<double>(t);
            double x = 0.0;
            switch (spec.kind) {
                case SynthKind::sine:
                    x = spec.amplitude * std::sin(two_pi * std::fmod(td, spec.period) / spec.period + phase);
                    break;
                case SynthKind::two_regime:
                    if (two_regime_at(spec, t) == 0) {
                        x = spec.amplitude * std::sin(two_pi * std::fmod(td, spec.period) / spec.period + phase);
                    } else {
                        const double p = spec.period / 2.0;
                        const double frac = std::fmod(td + phase / two_pi * p, p) / p;
                        x = 1.5 * spec.amplitude + 0.5 * spec.amplitude * (2.0 * frac - 1.0);
                    }
                    break;
                case SynthKind::constant:
                    x = spec.level;
                    break;
                case SynthKind::linear:
                    x = spec.level + spec.slope * td;
                    break;
            }
            if (spec.noise > 0.0) x += spec.noise * rng.normal();
            frame.values(t, v) = x;
        }
    }
    return frame;
}

}  // namespace smet
