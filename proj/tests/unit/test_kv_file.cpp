#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "crashsamp/kv_file.hpp"
#include "crashsamp/types.hpp"

using namespace crashsamp;

TEST_SUITE("kv_file") {

TEST_CASE("doubles round trip exactly") {
    for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0, 10.75}) CHECK(parse_double(format_double(v)) == v);
    CHECK(std::isinf(parse_double(format_double(std::numeric_limits<double>::infinity()))));
}

TEST_CASE("parse sections, comments and arrays") {
    std::stringstream ss("# top\n[a]\nx = 1.5\nlist = 1 2 3\n\n[b]\nflag = true\nn = 7\n");
    KvFile kv = KvFile::parse(ss);
    CHECK(kv.get_double("a", "x") == 1.5);
    CHECK(kv.get_doubles("a", "list") == std::vector<double>{1, 2, 3});
    CHECK(kv.get_bool("b", "flag"));
    CHECK(kv.get_uint("b", "n") == 7);
    CHECK_FALSE(kv.has("b", "x"));
    CHECK(kv.has_section("a"));
}

TEST_CASE("malformed input throws ConfigError") {
    SUBCASE("missing equals sign") {
        std::stringstream ss("[a]\nx 1\n");
        CHECK_THROWS_AS(KvFile::parse(ss), ConfigError);
    }
    SUBCASE("duplicate key") {
        std::stringstream ss("[a]\nx = 1\nx = 2\n");
        CHECK_THROWS_AS(KvFile::parse(ss), ConfigError);
    }
    SUBCASE("bad number") {
        std::stringstream ss("[a]\nx = abc\n");
        KvFile kv = KvFile::parse(ss);
        CHECK_THROWS_AS(kv.get_double("a", "x"), ConfigError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(KvFile::load("/nonexistent/x.cfg"), ConfigError); }
}

TEST_CASE("write then parse keeps values") {
    KvFile kv;
    kv.set_double("s", "v", 0.1);
    kv.set_uint("s", "n", 12);
    kv.set_bool("t", "b", false);
    std::stringstream ss;
    kv.write(ss);
    KvFile back = KvFile::parse(ss);
    CHECK(back.get_double("s", "v") == 0.1);
    CHECK(back.get_uint("s", "n") == 12);
    CHECK_FALSE(back.get_bool("t", "b"));
}

}
