#include <doctest.h>

#include "asbox/config.hpp"
#include "asbox/errors.hpp"

using namespace asbox;

TEST_CASE("sections, comments and duplicate keys") {
    auto cfg = Config::parse(
        "top = 1\n"
        "# a comment\n"
        "[budget]\n"
        "storage_bits = 10Mb   # trailing comment\n"
        "  wm_slots=7\n");
    CHECK(cfg.get("", "top") == "1");
    CHECK(cfg.get("budget", "storage_bits") == "10Mb");
    CHECK(cfg.get("budget", "wm_slots") == "7");
    CHECK_FALSE(cfg.has("budget", "missing"));
    CHECK(cfg.has_section("budget"));
    CHECK_FALSE(cfg.has_section("nope"));
    CHECK(cfg.section("nope").empty());

    CHECK_THROWS_AS(Config::parse("[a]\nx = 1\nx = 2\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("[a\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("novalue\n"), ConfigError);
    CHECK_THROWS_AS(Config::load("/nonexistent/file.conf"), ConfigError);
}

TEST_CASE("render round-trips") {
    auto cfg = Config::parse("[b]\ny = 2\nx = 1\n[a]\nz = 3\n");
    auto again = Config::parse(cfg.render());
    CHECK(again.render() == cfg.render());
    CHECK(again.get("b", "x") == "1");
}

TEST_CASE("integers accept scientific notation") {
    CHECK(parse_integer("1e7") == 10'000'000);
    CHECK(parse_integer("  42 ") == 42);
    CHECK(parse_integer("-3") == -3);
    CHECK_THROWS_AS(parse_integer("1.5"), ConfigError);
    CHECK_THROWS_AS(parse_integer("12abc"), ConfigError);
    CHECK_THROWS_AS(parse_integer("1e30"), ConfigError);
}

TEST_CASE("sizes normalize to bits") {
    CHECK(parse_bits("10Mb") == 10'000'000);
    CHECK(parse_bits("1e7") == 10'000'000);
    CHECK(parse_bits("10GB") == 80'000'000'000);
    CHECK(parse_bits("8e10") == 80'000'000'000);
    CHECK(parse_bits("3B") == 24);
    CHECK(parse_bits("2kb") == 2000);
    CHECK(parse_bits("1.5kB") == 12000);
    CHECK_THROWS_AS(parse_bits("10Xb"), ConfigError);
}

TEST_CASE("byte rates") {
    CHECK(parse_byte_rate("1e6") == 1'000'000);
    CHECK(parse_byte_rate("100KB/s") == 100'000);
    CHECK(parse_byte_rate("8Mb") == 1'000'000);
    CHECK_THROWS_AS(parse_byte_rate("4b"), ConfigError);
}

TEST_CASE("durations normalize to microseconds, bare numbers are ms") {
    CHECK(parse_duration("100ms") == Micros{100'000});
    CHECK(parse_duration("100") == Micros{100'000});
    CHECK(parse_duration("0.5s") == Micros{500'000});
    CHECK(parse_duration("250us") == Micros{250});
    CHECK(parse_duration("1min") == Micros{60'000'000});
    CHECK(parse_duration("12.5ms") == Micros{12'500});
    CHECK_THROWS_AS(parse_duration("3h"), ConfigError);
    CHECK_THROWS_AS(parse_duration("0.0001ms"), ConfigError);
}

TEST_CASE("format_millis trims trailing zeros") {
    CHECK(format_millis(Micros{200'000}) == "200");
    CHECK(format_millis(Micros{12'500}) == "12.5");
    CHECK(format_millis(Micros{1}) == "0.001");
    CHECK(format_millis(Micros{-1500}) == "-1.5");
}

TEST_CASE("lists") {
    CHECK(split_list("a, b ,,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_list("").empty());
}
