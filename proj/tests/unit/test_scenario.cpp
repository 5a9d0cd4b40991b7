#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "crsopt/scenario.hpp"
#include "test_support.hpp"

using namespace crsopt;
using Catch::Approx;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("scenario: parametric channel geometry", "[scenario]")
{
    ChannelGeometry geom{0.3, 1.0, pi / 9.0};
    Scenario s = build_parametric_scenario(4, geom, 10.0);

    REQUIRE(s.n_t == 4);
    for (int i = 0; i < 4; ++i)
        REQUIRE(s.h1[i] == cxd{1.0, 0.0});
    for (int m = 0; m < 4; ++m)
    {
        REQUIRE(s.h2[m].real() == Approx(0.3 * std::cos(m * pi / 9.0)).margin(1e-15));
        REQUIRE(s.h2[m].imag() == Approx(0.3 * std::sin(m * pi / 9.0)).margin(1e-15));
    }
    REQUIRE(s.h3 == cxd{1.0, 0.0});
    REQUIRE(s.p_t == 10.0);
    REQUIRE(s.p_r == 10.0);
    REQUIRE(s.sigma_sq[0] == 1.0);
    REQUIRE(s.sigma_sq[1] == 1.0);
}

TEST_CASE("scenario: h2 norm follows the strength parameter", "[scenario]")
{
    for (int n_t : {2, 3, 4, 6})
        for (double lambda1 : {0.0, 0.3, 1.0, 2.5})
        {
            Scenario s = build_parametric_scenario(n_t, {lambda1, 1.0, 4.0 * pi / 9.0}, 0.0);
            REQUIRE(s.h2.squaredNorm() == Approx(n_t * lambda1 * lambda1).margin(1e-12));
        }
}

TEST_CASE("scenario: degenerate zero-strength channels", "[scenario]")
{
    Scenario s = build_parametric_scenario(2, {0.0, 0.0, 0.0}, 0.0);
    REQUIRE(s.h2.norm() == 0.0);
    REQUIRE(s.h3 == cxd{0.0, 0.0});
    REQUIRE(s.p_t == 1.0);
}

TEST_CASE("scenario: three-antenna high-power instance", "[scenario]")
{
    Scenario s = build_parametric_scenario(3, {1.0, 1.0, 4.0 * pi / 9.0}, 15.0);
    REQUIRE(s.h2.squaredNorm() == Approx(3.0).margin(1e-12));
    REQUIRE(s.p_t == Approx(31.6228).margin(1e-3));
    REQUIRE(s.p_t == s.p_r);
}

TEST_CASE("scenario: random generator is seed-deterministic", "[scenario]")
{
    Scenario a = build_random_scenario(3, 42, 10.0);
    Scenario b = build_random_scenario(3, 42, 10.0);
    REQUIRE(a.to_kv().serialize() == b.to_kv().serialize());
    REQUIRE(a.hash() == b.hash());

    Scenario c = build_random_scenario(3, 43, 10.0);
    REQUIRE(a.to_kv().serialize() != c.to_kv().serialize());

    Scenario d = build_random_scenario(2, 1, 0.0);
    Scenario e = build_random_scenario(2, 2, 0.0);
    REQUIRE(d.h1 != e.h1);
}

TEST_CASE("scenario: random channel entries have unit variance", "[scenario]")
{
    double acc = 0.0;
    const int n_seeds = 10000;
    for (int seed = 0; seed < n_seeds; ++seed)
    {
        Scenario s = build_random_scenario(2, static_cast<std::uint64_t>(seed), 0.0);
        acc += s.h1.squaredNorm() / 2.0;
    }
    REQUIRE(acc / n_seeds == Approx(1.0).margin(0.05));
}

TEST_CASE("scenario: validation rejects non-finite and out-of-range fields", "[scenario]")
{
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    auto base = [] { return build_random_scenario(2, 7, 10.0); };

    for (double bad : {nan, inf, -inf})
    {
        for (int i = 0; i < 2; ++i)
        {
            Scenario s = base();
            s.h1[i] = cxd{bad, 0.0};
            REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
            s = base();
            s.h2[i] = cxd{0.0, bad};
            REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
        }
        Scenario s = base();
        s.h3 = cxd{bad, 0.0};
        REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
        s = base();
        s.p_t = bad;
        REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
        s = base();
        s.p_r = bad;
        REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
        s = base();
        s.sigma_sq[1] = bad;
        REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
        s = base();
        s.r_tar[0] = bad;
        REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
    }

    Scenario s = base();
    s.p_t = 0.0;
    REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
    s = base();
    s.sigma_sq[0] = -1.0;
    REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
    s = base();
    s.r_tar[1] = -0.1;
    REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
    s = base();
    s.n_t = 1;
    REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
    s = base();
    s.h2.resize(3);
    REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);

    REQUIRE_THROWS_AS(build_parametric_scenario(1, {1.0, 1.0, 0.0}, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(build_parametric_scenario(4, {-1.0, 1.0, 0.0}, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(build_random_scenario(4, 1, nan), std::invalid_argument);
}

TEST_CASE("scenario: key-value round trip preserves everything", "[scenario]")
{
    Scenario s = build_random_scenario(4, 99, 12.5, {0.25, 0.0});
    s.sigma_sq = {1.0, 2.0};

    Scenario back = Scenario::from_kv(s.to_kv());
    REQUIRE(back.to_kv().serialize() == s.to_kv().serialize());
    REQUIRE(back.hash() == s.hash());
    REQUIRE(back.h1 == s.h1);
    REQUIRE(back.h2 == s.h2);
    REQUIRE(back.h3 == s.h3);
    REQUIRE(back.r_tar == s.r_tar);

    std::string path = "scenario_roundtrip.tmp.cfg";
    s.save(path);
    Scenario loaded = Scenario::load(path);
    REQUIRE(loaded.hash() == s.hash());
    std::remove(path.c_str());
}

TEST_CASE("scenario: complex field parser requires re,im", "[scenario]")
{
    REQUIRE(Scenario::parse_complex("1.5,-2") == cxd{1.5, -2.0});
    REQUIRE_THROWS_AS(Scenario::parse_complex("1.5"), std::invalid_argument);
    REQUIRE_THROWS_AS(Scenario::parse_complex("a,b"), std::invalid_argument);
}
