#include "asbox/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "asbox/errors.hpp"

namespace asbox {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Splits "12.5ms" into ("12.5", "ms").
std::pair<std::string_view, std::string_view> split_number(std::string_view text) {
    text = trim(text);
    std::size_t i = 0;
    auto digit = [&](std::size_t k) { return std::isdigit(static_cast<unsigned char>(text[k])) != 0; };
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) ++i;
    while (i < text.size() && (digit(i) || text[i] == '.')) ++i;
    if (i < text.size() && (text[i] == 'e' || text[i] == 'E') && i + 1 < text.size() &&
        (digit(i + 1) || text[i + 1] == '+' || text[i + 1] == '-')) {
        i += 2;
        while (i < text.size() && digit(i)) ++i;
    }
    return {text.substr(0, i), trim(text.substr(i))};
}

double to_double(std::string_view num, std::string_view whole) {
    if (!num.empty() && num.front() == '+') num.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
    if (ec != std::errc{} || ptr != num.data() + num.size() || num.empty()) {
        throw ConfigError("not a number: '" + std::string(whole) + "'");
    }
    return v;
}

std::int64_t scaled_integer(std::string_view num, double multiplier, std::string_view whole) {
    // Exact path for plain integers with integral multipliers.
    std::int64_t iv = 0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), iv);
    if (ec == std::errc{} && ptr == num.data() + num.size() && multiplier == std::floor(multiplier)) {
        auto m = static_cast<std::int64_t>(multiplier);
        std::int64_t out = 0;
        if (__builtin_mul_overflow(iv, m, &out)) throw ConfigError("value out of range: '" + std::string(whole) + "'");
        return out;
    }
    long double v = static_cast<long double>(to_double(num, whole)) * multiplier;
    long double r = std::round(v);
    if (std::fabs(v - r) > 1e-6L) throw ConfigError("value must be integral: '" + std::string(whole) + "'");
    if (r >= 9.2e18L || r <= -9.2e18L) throw ConfigError("value out of range: '" + std::string(whole) + "'");
    return static_cast<std::int64_t>(r);
}

double decimal_prefix(char c) {
    switch (c) {
        case 'k': case 'K': return 1e3;
        case 'M': return 1e6;
        case 'G': return 1e9;
        case 'T': return 1e12;
        default: return 0.0;
    }
}

// Bits per unit for a size suffix, 0 if unrecognized.
double size_multiplier(std::string_view unit) {
    if (unit.empty() || unit == "b" || unit == "bit" || unit == "bits") return 1.0;
    if (unit == "B" || unit == "byte" || unit == "bytes") return 8.0;
    if (unit.size() == 2) {
        double p = decimal_prefix(unit[0]);
        if (p == 0.0) return 0.0;
        if (unit[1] == 'b') return p;
        if (unit[1] == 'B') return p * 8.0;
    }
    return 0.0;
}

}  // namespace

Config Config::parse(std::string_view text) {
    Config cfg;
    std::string current;
    std::size_t lineno = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
            current = std::string(trim(line.substr(1, line.size() - 2)));
            cfg.sections_[current];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        auto& sec = cfg.sections_[current];
        auto [it, inserted] = sec.emplace(std::string(key), std::string(trim(line.substr(eq + 1))));
        if (!inserted) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + std::string(key) + "'");
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool Config::has(std::string_view section, std::string_view key) const {
    return get(section, key).has_value();
}

std::optional<std::string> Config::get(std::string_view section, std::string_view key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return std::nullopt;
    auto k = s->second.find(std::string(key));
    if (k == s->second.end()) return std::nullopt;
    return k->second;
}

const Config::Section& Config::section(std::string_view name) const {
    static const Section empty;
    auto s = sections_.find(name);
    return s == sections_.end() ? empty : s->second;
}

bool Config::has_section(std::string_view name) const { return sections_.find(name) != sections_.end(); }

void Config::set(const std::string& section, const std::string& key, std::string value) {
    sections_[section][key] = std::move(value);
}

std::string Config::render() const {
    std::string out;
    for (const auto& [name, sec] : sections_) {
        if (!name.empty()) {
            if (!out.empty()) out += '\n';
            out += "[" + name + "]\n";
        }
        for (const auto& [k, v] : sec) out += k + " = " + v + "\n";
    }
    return out;
}

std::int64_t parse_integer(std::string_view text) {
    auto [num, unit] = split_number(text);
    if (!unit.empty()) throw ConfigError("unexpected unit in integer: '" + std::string(text) + "'");
    return scaled_integer(num, 1.0, text);
}

double parse_number(std::string_view text) {
    auto [num, unit] = split_number(text);
    if (!unit.empty()) throw ConfigError("unexpected unit in number: '" + std::string(text) + "'");
    return to_double(num, text);
}

std::int64_t parse_bits(std::string_view text) {
    auto [num, unit] = split_number(text);
    double m = size_multiplier(unit);
    if (m == 0.0) throw ConfigError("unknown size unit '" + std::string(unit) + "' in '" + std::string(text) + "'");
    return scaled_integer(num, m, text);
}

std::int64_t parse_byte_rate(std::string_view text) {
    auto [num, unit] = split_number(text);
    if (unit.size() >= 2 && unit.substr(unit.size() - 2) == "/s") unit = trim(unit.substr(0, unit.size() - 2));
    double m = unit.empty() ? 8.0 : size_multiplier(unit);
    if (m == 0.0) throw ConfigError("unknown rate unit '" + std::string(unit) + "' in '" + std::string(text) + "'");
    std::int64_t bits = scaled_integer(num, m, text);
    if (bits % 8 != 0) throw ConfigError("rate is not a whole number of bytes: '" + std::string(text) + "'");
    return bits / 8;
}

Micros parse_duration(std::string_view text) {
    auto [num, unit] = split_number(text);
    double us_per_unit = 0.0;
    if (unit.empty() || unit == "ms") us_per_unit = 1e3;
    else if (unit == "us") us_per_unit = 1.0;
    else if (unit == "s") us_per_unit = 1e6;
    else if (unit == "min") us_per_unit = 60e6;
    else throw ConfigError("unknown duration unit '" + std::string(unit) + "' in '" + std::string(text) + "'");
    return Micros{scaled_integer(num, us_per_unit, text)};
}

std::string format_millis(Micros d) {
    std::int64_t us = d.count();
    std::string sign = us < 0 ? "-" : "";
    if (us < 0) us = -us;
    std::string out = sign + std::to_string(us / 1000);
    if (auto frac = us % 1000; frac != 0) {
        std::string f = std::to_string(frac);
        f.insert(0, 3 - f.size(), '0');
        while (f.back() == '0') f.pop_back();
        out += "." + f;
    }
    return out;
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    while (!text.empty()) {
        auto comma = text.find(',');
        auto item = trim(text.substr(0, comma));
        if (!item.empty()) out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

}  // namespace asbox
