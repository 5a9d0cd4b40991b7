#include <catch2/catch_amalgamated.hpp>

#include "crsopt/kv_file.hpp"

using namespace crsopt;

TEST_CASE("kv: parses pairs, comments, and blank lines", "[kv]")
{
    auto kv = KvFile::parse_string("# header comment\n"
                                   "alpha = 1.5\n"
                                   "\n"
                                   "name= hello world # trailing comment\n"
                                   "  count =  7\n");
    REQUIRE(kv.has("alpha"));
    REQUIRE(kv.get_double("alpha") == 1.5);
    REQUIRE(kv.get_string("name") == "hello world");
    REQUIRE(kv.get_int("count") == 7);
    REQUIRE_FALSE(kv.has("missing"));
}

TEST_CASE("kv: rejects malformed input", "[kv]")
{
    REQUIRE_THROWS_AS(KvFile::parse_string("no separator\n"), std::invalid_argument);
    REQUIRE_THROWS_AS(KvFile::parse_string("a = 1\na = 2\n"), std::invalid_argument);
    REQUIRE_THROWS_AS(KvFile::parse_string("bad key = 1\n"), std::invalid_argument);
    REQUIRE_THROWS_AS(KvFile::parse_string("= 1\n"), std::invalid_argument);
}

TEST_CASE("kv: typed getters validate the full token", "[kv]")
{
    auto kv = KvFile::parse_string("x = 1.5z\nn = 3p\nok = -2.5e-3\n");
    REQUIRE_THROWS_AS(kv.get_double("x"), std::invalid_argument);
    REQUIRE_THROWS_AS(kv.get_int("n"), std::invalid_argument);
    REQUIRE_THROWS_AS(kv.get_double("absent"), std::invalid_argument);
    REQUIRE(kv.get_double("ok") == -2.5e-3);
    REQUIRE(kv.get_double("absent", 4.0) == 4.0);
    REQUIRE(kv.get_string("absent", "d") == "d");
}

TEST_CASE("kv: list values split on commas", "[kv]")
{
    auto kv = KvFile::parse_string("schemes = crs, nrs ,mu-lp\nu2 = 0.1,1,10\n");
    auto names = kv.get_string_list("schemes");
    REQUIRE(names == std::vector<std::string>{"crs", "nrs", "mu-lp"});
    auto vals = kv.get_double_list("u2");
    REQUIRE(vals == std::vector<double>{0.1, 1.0, 10.0});
}

TEST_CASE("kv: serialization is canonical and round-trips", "[kv]")
{
    KvFile kv;
    kv.set("zeta", "last");
    kv.set_double("alpha", 0.1);
    kv.set_int("mid", -3);
    std::string text = kv.serialize();
    REQUIRE(text == "alpha = 0.1\nmid = -3\nzeta = last\n");

    auto back = KvFile::parse_string(text);
    REQUIRE(back.serialize() == text);
}

TEST_CASE("kv: double formatting round-trips exactly", "[kv]")
{
    for (double v : {0.1, 1.0 / 3.0, 1e300, -4.9e-324, 31.622776601683793, 0.0, -0.0})
    {
        std::string s = KvFile::format_double(v);
        REQUIRE(KvFile::parse_double(s, "v") == v);
    }
}

TEST_CASE("kv: fnv1a64 matches reference vectors", "[kv]")
{
    REQUIRE(fnv1a64("") == 0xcbf29ce484222325ull);
    REQUIRE(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    REQUIRE(fnv1a64("foobar") == 0x85944171f73967e8ull);
    REQUIRE(hash_hex(0xcbf29ce484222325ull) == "cbf29ce484222325");
}
