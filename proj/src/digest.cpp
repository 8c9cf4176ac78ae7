#include "asbox/digest.hpp"

#include <openssl/evp.h>

#include <memory>

#include "asbox/errors.hpp"

namespace asbox {

Digest sha256(std::span<const std::uint8_t> data) {
    Digest out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
        throw Error("SHA-256 computation failed");
    }
    return out;
}

Digest sha256(std::string_view data) {
    return sha256(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::string to_hex(const Digest& d) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto b : d) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0xf]);
    }
    return out;
}

Digest digest_from_hex(std::string_view hex) {
    if (hex.size() != 64) throw RangeError("digest must be 64 hex characters");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        return -1;
    };
    Digest d{};
    for (std::size_t i = 0; i < 32; ++i) {
        int hi = nibble(hex[2 * i]);
        int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw RangeError("digest must be lowercase hex");
        d[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return d;
}

}  // namespace asbox
