#pragma once

// Shared configuration file format for budgets, bias weights and scenarios.
//
//   # comment
//   [section]
//   key = value
//
// Keys outside any section live in the "" section. Numeric values accept an
// optional unit suffix which the quantity parsers below normalize:
//   sizes      b (bit), B (byte), with k/K, M, G, T decimal prefixes: 10Mb, 10GB
//   durations  us, ms, s, min: 100ms, 1.5s
//   plain      integers or scientific notation: 1e7

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace asbox {

using Micros = std::chrono::microseconds;

class Config {
public:
    using Section = std::map<std::string, std::string>;

    static Config parse(std::string_view text);
    static Config load(const std::string& path);

    bool has(std::string_view section, std::string_view key) const;
    std::optional<std::string> get(std::string_view section, std::string_view key) const;
    const Section& section(std::string_view name) const;
    bool has_section(std::string_view name) const;

    void set(const std::string& section, const std::string& key, std::string value);

    std::string render() const;

private:
    std::map<std::string, Section, std::less<>> sections_;
};

// Integer, optionally in scientific notation ("1e7"). Throws ConfigError on
// fractional or out-of-range values.
std::int64_t parse_integer(std::string_view text);

// Size in bits. Bare numbers are bits.
std::int64_t parse_bits(std::string_view text);

// Byte rate ("100KB", "1e6"); bare numbers are bytes. A trailing "/s" is allowed.
std::int64_t parse_byte_rate(std::string_view text);

// Duration, normalized to microseconds. Bare numbers are milliseconds.
Micros parse_duration(std::string_view text);

double parse_number(std::string_view text);

// Milliseconds rendered without trailing zeros: 200, 0.5, 12.125.
std::string format_millis(Micros d);

std::vector<std::string> split_list(std::string_view text);

}  // namespace asbox
