#include "asbox/perception.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "asbox/errors.hpp"

namespace asbox {

std::int64_t Stimulus::complexity_bits() const {
    return static_cast<std::int64_t>(static_cast<__int128>(width) * height * channels * depth);
}

std::uint32_t Stimulus::sample(std::int64_t x, std::int64_t y, std::int64_t c) const {
    auto idx = static_cast<std::size_t>((y * width + x) * channels + c);
    if (depth == 8) return payload[idx];
    return (static_cast<std::uint32_t>(payload[2 * idx]) << 8) | payload[2 * idx + 1];
}

Stimulus make_image(std::int64_t width, std::int64_t height, std::int64_t channels, std::int64_t depth, Bytes payload) {
    Stimulus s{width, height, channels, depth, std::move(payload), false};
    validate_stimulus(s);
    return s;
}

Stimulus make_raw_stimulus(Bytes payload) {
    Stimulus s;
    s.width = static_cast<std::int64_t>(payload.size());
    s.height = 1;
    s.channels = 1;
    s.depth = 8;
    s.payload = std::move(payload);
    s.raw = true;
    return s;
}

void validate_stimulus(const Stimulus& s, std::int64_t glance_cap_bits) {
    if (s.width < (s.raw ? 0 : 1) || s.height < 1 || s.channels < 1 || s.depth < 1) {
        throw InvalidStimulus("stimulus dimensions must be positive");
    }
    __int128 bits = static_cast<__int128>(s.width) * s.height * s.channels * s.depth;
    if (bits > glance_cap_bits) {
        throw GlanceCapExceeded("stimulus of " + std::to_string(static_cast<long double>(bits)) +
                                " bits exceeds the glance cap of " + std::to_string(glance_cap_bits) + " bits");
    }
    if (s.depth != 8 && s.depth != 16) throw InvalidStimulus("stimulus depth must be 8 or 16 bits per channel");
    if (s.channels > 4) throw InvalidStimulus("stimulus may have at most 4 channels");
    if (static_cast<__int128>(s.payload.size()) * 8 != bits) {
        throw InvalidStimulus("payload length does not match width x height x channels x depth");
    }
}

namespace {

struct Tap {
    std::int64_t src;
    std::int64_t weight;
};

// For each output index, the input indices it overlaps and the overlap length
// in units of 1/out input pixels. Weights per output sum to `in`; weights per
// input sum to `out`.
std::vector<std::vector<Tap>> axis_taps(std::int64_t in, std::int64_t out) {
    std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out));
    for (std::int64_t j = 0; j < out; ++j) {
        std::int64_t lo = j * in;
        std::int64_t hi = (j + 1) * in;
        for (std::int64_t i = lo / out; i * out < hi; ++i) {
            std::int64_t overlap = std::min(hi, (i + 1) * out) - std::max(lo, i * out);
            if (overlap > 0) taps[static_cast<std::size_t>(j)].push_back({i, overlap});
        }
    }
    return taps;
}

}  // namespace

Stimulus downscale(const Stimulus& input, std::int64_t max_w, std::int64_t max_h, std::int64_t glance_cap_bits) {
    validate_stimulus(input, glance_cap_bits);
    if (max_w < 1 || max_h < 1) throw RangeError("downscale bounds must be positive");
    if (input.raw || (input.width <= max_w && input.height <= max_h)) return input;

    double scale = std::max(static_cast<double>(input.width) / static_cast<double>(max_w),
                            static_cast<double>(input.height) / static_cast<double>(max_h));
    auto fit = [&](std::int64_t dim, std::int64_t cap) {
        auto v = static_cast<std::int64_t>(std::llround(static_cast<double>(dim) / scale));
        return std::clamp<std::int64_t>(v, 1, cap);
    };
    std::int64_t out_w = fit(input.width, max_w);
    std::int64_t out_h = fit(input.height, max_h);

    auto xt = axis_taps(input.width, out_w);
    auto yt = axis_taps(input.height, out_h);
    __int128 denom = static_cast<__int128>(input.width) * input.height;

    Stimulus out;
    out.width = out_w;
    out.height = out_h;
    out.channels = input.channels;
    out.depth = input.depth;
    out.payload.resize(static_cast<std::size_t>(out_w * out_h * input.channels * input.depth / 8));
    for (std::int64_t y = 0; y < out_h; ++y) {
        for (std::int64_t x = 0; x < out_w; ++x) {
            for (std::int64_t c = 0; c < input.channels; ++c) {
                __int128 acc = 0;
                for (const auto& ty : yt[static_cast<std::size_t>(y)]) {
                    for (const auto& tx : xt[static_cast<std::size_t>(x)]) {
                        acc += static_cast<__int128>(ty.weight) * tx.weight * input.sample(tx.src, ty.src, c);
                    }
                }
                auto v = static_cast<std::uint32_t>((2 * acc + denom) / (2 * denom));
                auto idx = static_cast<std::size_t>((y * out_w + x) * input.channels + c);
                if (out.depth == 8) {
                    out.payload[idx] = static_cast<std::uint8_t>(v);
                } else {
                    out.payload[2 * idx] = static_cast<std::uint8_t>(v >> 8);
                    out.payload[2 * idx + 1] = static_cast<std::uint8_t>(v & 0xff);
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// PNM

Stimulus parse_pnm(std::string_view data) {
    std::size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < data.size()) {
            if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto next_int = [&]() -> std::int64_t {
        skip_ws();
        std::int64_t v = 0;
        std::size_t start = pos;
        while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos]))) {
            v = v * 10 + (data[pos] - '0');
            if (v > (1LL << 40)) throw InvalidStimulus("PNM header value too large");
            ++pos;
        }
        if (pos == start) throw InvalidStimulus("malformed PNM header");
        return v;
    };

    if (data.size() < 2 || data[0] != 'P') throw InvalidStimulus("not a PNM file");
    char kind = data[1];
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6') throw InvalidStimulus("unsupported PNM variant");
    pos = 2;
    std::int64_t w = next_int();
    std::int64_t h = next_int();
    std::int64_t maxval = next_int();
    if (maxval < 1 || maxval > 65535) throw InvalidStimulus("PNM maxval out of range");
    std::int64_t channels = (kind == '3' || kind == '6') ? 3 : 1;
    std::int64_t depth = maxval < 256 ? 8 : 16;

    Stimulus s;
    s.width = w;
    s.height = h;
    s.channels = channels;
    s.depth = depth;
    validate_stimulus(Stimulus{w, h, channels, depth, Bytes(static_cast<std::size_t>(w * h * channels * depth / 8)), false});
    std::size_t n = static_cast<std::size_t>(w * h * channels * depth / 8);
    if (kind == '5' || kind == '6') {
        ++pos;  // single whitespace after maxval
        if (data.size() < pos + n) throw InvalidStimulus("truncated PNM raster");
        s.payload.assign(data.begin() + static_cast<std::ptrdiff_t>(pos), data.begin() + static_cast<std::ptrdiff_t>(pos + n));
    } else {
        s.payload.reserve(n);
        for (std::int64_t i = 0; i < w * h * channels; ++i) {
            std::int64_t v = next_int();
            if (v > maxval) throw InvalidStimulus("PNM sample exceeds maxval");
            if (depth == 16) s.payload.push_back(static_cast<std::uint8_t>(v >> 8));
            s.payload.push_back(static_cast<std::uint8_t>(v & 0xff));
        }
    }
    return s;
}

Stimulus read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidStimulus("cannot open image: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_pnm(ss.str());
}

std::string encode_pnm(const Stimulus& s) {
    validate_stimulus(s);
    if (s.channels != 1 && s.channels != 3) throw InvalidStimulus("PNM supports 1 or 3 channels");
    std::string out = s.channels == 1 ? "P5\n" : "P6\n";
    out += std::to_string(s.width) + " " + std::to_string(s.height) + "\n";
    out += s.depth == 8 ? "255\n" : "65535\n";
    out.append(s.payload.begin(), s.payload.end());
    return out;
}

}  // namespace asbox
