#pragma once

// Visual processing unit: rejects absurdly large glances and box-filters
// images down to a human-plausible resolution before the agent sees them.

#include <cstdint>
#include <string>

#include "asbox/memory.hpp"

namespace asbox {

// 576 megabytes per glance, in bits.
inline constexpr std::int64_t kDefaultGlanceCapBits = 576'000'000LL * 8;
inline constexpr std::int64_t kDefaultMaxWidth = 75;
inline constexpr std::int64_t kDefaultMaxHeight = 50;

struct Stimulus {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::int64_t channels = 1;
    std::int64_t depth = 8;  // bits per channel: 8 or 16 (16-bit samples big-endian)
    Bytes payload;
    // Non-image observation (text, discrete state): never resized.
    bool raw = false;

    std::int64_t complexity_bits() const;
    std::int64_t pixel_count() const { return width * height; }
    // Sample value at (x, y, channel).
    std::uint32_t sample(std::int64_t x, std::int64_t y, std::int64_t c) const;

    friend bool operator==(const Stimulus&, const Stimulus&) = default;
};

Stimulus make_image(std::int64_t width, std::int64_t height, std::int64_t channels, std::int64_t depth, Bytes payload);
Stimulus make_raw_stimulus(Bytes payload);

// Throws GlanceCapExceeded (checked first, before the payload is inspected) or
// InvalidStimulus.
void validate_stimulus(const Stimulus& s, std::int64_t glance_cap_bits = kDefaultGlanceCapBits);

// Area-averaging box filter. Images already within (max_w, max_h) and raw
// stimuli are returned unchanged.
Stimulus downscale(const Stimulus& input, std::int64_t max_w = kDefaultMaxWidth, std::int64_t max_h = kDefaultMaxHeight,
                   std::int64_t glance_cap_bits = kDefaultGlanceCapBits);

// Portable graymap/pixmap (P2, P3, P5, P6).
Stimulus read_pnm(const std::string& path);
Stimulus parse_pnm(std::string_view data);
std::string encode_pnm(const Stimulus& s);

}  // namespace asbox
