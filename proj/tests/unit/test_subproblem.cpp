#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "crsopt/subproblem.hpp"
#include "test_support.hpp"

using namespace crsopt;
using crsopt::test::random_precoders;
using Catch::Approx;

namespace {

// Spec whose equalizers and weights are the MMSE quantities of a seed
// precoder, the way the alternating loop produces them.
SubproblemSpec make_spec_from(const Scenario &s, double theta, std::array<double, 2> u,
                              const PrecoderSet &p)
{
    SubproblemSpec spec;
    spec.scenario = s;
    spec.theta = theta;
    spec.weights_u = u;
    auto [gc1, g1] = mmse_equalizers(s, p, 1);
    auto [gc2, g2] = mmse_equalizers(s, p, 2);
    spec.g = Equalizers{gc1, gc2, g1, g2};
    auto [ec1, e1] = mmse_epsilons(s, p, 1);
    auto [ec2, e2] = mmse_epsilons(s, p, 2);
    spec.w = MseWeights{1.0 / ec1, 1.0 / ec2, 1.0 / e1, 1.0 / e2};
    spec.r_relay = relay_link_rate(s);
    return spec;
}

SubproblemSpec make_spec(const Scenario &s, double theta, std::array<double, 2> u,
                         std::uint64_t seed)
{
    return make_spec_from(s, theta, u, random_precoders(s, seed));
}

// Direct evaluation of every constraint of the convex step at a solution.
void require_feasible(const SubproblemSpec &spec, const SubproblemSolution &sol, double tol)
{
    const Scenario &s = spec.scenario;
    REQUIRE(sol.p.total_power() <= s.p_t * (1.0 + tol));
    REQUIRE(sol.c_bar[0] <= tol);
    REQUIRE(sol.c_bar[1] <= tol);

    auto [ec1, e1] = mse_pair(s, sol.p, spec.g, 1);
    auto [ec2, e2] = mse_pair(s, sol.p, spec.g, 2);
    double xi_c = std::max(spec.theta * augmented_wmse(ec1, spec.w.w_c1),
                           spec.theta * augmented_wmse(ec2, spec.w.w_c2) -
                               (1.0 - spec.theta) * spec.r_relay);
    if (spec.mask.common)
        REQUIRE(sol.c_bar[0] + sol.c_bar[1] >= xi_c - spec.theta - tol);
    double rate1 = -sol.c_bar[0] + spec.theta * (1.0 - augmented_wmse(e1, spec.w.w_1));
    double rate2 = -sol.c_bar[1] + spec.theta * (1.0 - augmented_wmse(e2, spec.w.w_2));
    REQUIRE(rate1 >= s.r_tar[0] - tol);
    REQUIRE(rate2 >= s.r_tar[1] - tol);
}

} // namespace

TEST_CASE("subproblem: decision vector dimensions", "[subproblem]")
{
    Scenario s = build_random_scenario(2, 3, 10.0);
    SubproblemSpec spec = make_spec(s, 0.7, {1.0, 1.0}, 50);

    AssembledQcqp a = assemble_qcqp(spec);
    REQUIRE(a.layout.n == 15);
    REQUIRE(a.layout.xc == 0);
    REQUIRE(a.layout.x1 == 4);
    REQUIRE(a.layout.x2 == 8);
    REQUIRE(a.layout.c1 == 12);
    REQUIRE(a.layout.c2 == 13);
    REQUIRE(a.layout.t == 14);
    REQUIRE(a.precheck == SolveStatus::optimal);

    Scenario s3 = build_random_scenario(3, 3, 10.0);
    SubproblemSpec spec3 = make_spec(s3, 0.7, {1.0, 1.0}, 51);
    REQUIRE(assemble_qcqp(spec3).layout.n == 21);
}

TEST_CASE("subproblem: zero equalizers collapse to constants", "[subproblem]")
{
    Scenario s = build_random_scenario(2, 5, 10.0);
    SubproblemSpec spec;
    spec.scenario = s;
    spec.theta = 0.6;
    spec.weights_u = {1.0, 2.0};
    spec.r_relay = relay_link_rate(s);

    AssembledQcqp a = assemble_qcqp(spec);
    REQUIRE_FALSE(a.prob.objective.has_quad());
    REQUIRE(a.prob.objective.q.isZero(0.0));
    REQUIRE(a.layout.pinned_shares);
    REQUIRE(a.layout.t == -1);
    REQUIRE(a.layout.c1 == -1);
    REQUIRE(a.layout.c2 == -1);
    REQUIRE(a.layout.n == 12);
    REQUIRE(a.branch_constant[0]);
    REQUIRE(a.branch_constant[1]);

    SubproblemSolution sol = solve_subproblem(spec);
    REQUIRE(sol.status == SolveStatus::optimal);
    REQUIRE(sol.objective == Approx(spec.theta * 3.0).margin(1e-8));
    REQUIRE(sol.c_bar[0] == 0.0);
    REQUIRE(sol.c_bar[1] == 0.0);

    // Any positive rate target is then unreachable.
    spec.scenario.r_tar = {0.1, 0.0};
    REQUIRE(solve_subproblem(spec).status == SolveStatus::infeasible);
}

TEST_CASE("subproblem: assembled forms are positive semidefinite", "[subproblem]")
{
    for (int iter = 0; iter < 20; ++iter)
    {
        Scenario s = build_random_scenario(iter % 2 == 0 ? 2 : 3, 100 + iter, 12.0);
        SubproblemSpec spec = make_spec(s, 0.1 + 0.04 * iter, {1.0, 1.5}, 200 + iter);
        AssembledQcqp a = assemble_qcqp(spec);
        REQUIRE(a.precheck == SolveStatus::optimal);
        auto check_psd = [](const QuadraticFn &f) {
            if (!f.has_quad())
                return;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.Q);
            REQUIRE(es.eigenvalues().minCoeff() >= -1e-10);
        };
        check_psd(a.prob.objective);
        for (const QuadraticFn &f : a.prob.constraints)
            check_psd(f);
    }
}

TEST_CASE("subproblem: solving for one user silences the other private stream",
          "[subproblem]")
{
    // Seed the equalizers from a point where user 2's private stream is
    // already off, as the alternating loop settles when only user 1 earns
    // weight; its MMSE equalizer is then zero and nothing pulls p_2 back.
    Scenario s = build_random_scenario(2, 77, 10.0);
    PrecoderSet seed = random_precoders(s, 78);
    seed.p_2.setZero();
    SubproblemSpec spec = make_spec_from(s, 1.0, {1.0, 0.0}, seed);
    REQUIRE(spec.g.g_2 == cxd{0.0, 0.0});

    SubproblemSolution sol = solve_subproblem(spec);
    REQUIRE(sol.status == SolveStatus::optimal);
    REQUIRE(sol.p.p_2.norm() <= 1e-4 * std::sqrt(s.p_t));
    REQUIRE(sol.p.total_power() >= 0.5 * s.p_t);
    require_feasible(spec, sol, 1e-7);
}

TEST_CASE("subproblem: vanishing power budget binds the power constraint", "[subproblem]")
{
    Scenario s = build_random_scenario(2, 11, 10.0);
    s.p_t = 1e-8;
    s.p_r = 1e-8;
    SubproblemSpec spec = make_spec(s, 0.8, {1.0, 1.0}, 12);

    SubproblemSolution sol = solve_subproblem(spec);
    REQUIRE(sol.status == SolveStatus::optimal);
    REQUIRE(sol.p.total_power() <= s.p_t * (1.0 + 1e-9));
    REQUIRE(sol.p.total_power() >= 0.5 * s.p_t);
    // With no power the weighted cost approaches theta times the weight sum.
    REQUIRE(sol.objective == Approx(spec.theta * 2.0).margin(1e-3));
}

TEST_CASE("subproblem: unreachable rate target is infeasible", "[subproblem]")
{
    Scenario s = build_random_scenario(2, 13, 10.0);
    s.r_tar[0] = 10.0 * std::log2(1.0 + s.p_t * s.h1.squaredNorm());
    SubproblemSpec spec = make_spec(s, 0.9, {1.0, 1.0}, 14);
    REQUIRE(solve_subproblem(spec).status == SolveStatus::infeasible);
}

TEST_CASE("subproblem: deterministic resolves", "[subproblem]")
{
    Scenario s = build_random_scenario(3, 15, 12.0);
    SubproblemSpec spec = make_spec(s, 0.5, {1.0, 2.5}, 16);
    SubproblemSolution a = solve_subproblem(spec);
    SubproblemSolution b = solve_subproblem(spec);
    REQUIRE(a.objective == b.objective);
    REQUIRE((a.x_internal.array() == b.x_internal.array()).all());
    REQUIRE(a.newton_iters == b.newton_iters);
}

TEST_CASE("subproblem: solutions satisfy all constraints and first-order conditions",
          "[subproblem]")
{
    int solved = 0;
    for (int iter = 0; iter < 8; ++iter)
    {
        Scenario s = build_random_scenario(2 + iter % 3, 300 + iter, 5.0 + 2.0 * iter);
        s.r_tar = {0.05 * iter, 0.02 * iter};
        double theta = 0.3 + 0.08 * iter;
        SubproblemSpec spec = make_spec(s, theta, {1.0, 0.4 + 0.3 * iter}, 400 + iter);

        AssemblyCache cache = AssemblyCache::build(s);
        SubproblemSolution sol = solve_subproblem(spec, nullptr, &cache);
        if (sol.status != SolveStatus::optimal)
            continue;
        ++solved;
        require_feasible(spec, sol, 1e-7);
        REQUIRE(sol.kkt <= 1e-6);
        REQUIRE(sol.kkt == kkt_residual(spec, sol, &cache));

        // Internal and direct objective evaluations agree.
        AssembledQcqp a = assemble_qcqp(spec, &cache);
        double internal =
            (a.prob.objective.value(sol.x_internal) + a.obj_shift) * a.obj_scale;
        REQUIRE(internal == Approx(sol.objective).margin(1e-8 * (1.0 + std::abs(sol.objective))));
    }
    REQUIRE(solved >= 6);
}

TEST_CASE("subproblem: residual grows away from the optimum", "[subproblem]")
{
    Scenario s = build_random_scenario(2, 500, 10.0);
    SubproblemSpec spec = make_spec(s, 0.75, {1.0, 1.0}, 501);
    SubproblemSolution sol = solve_subproblem(spec);
    REQUIRE(sol.status == SolveStatus::optimal);

    SubproblemSolution bumped = sol;
    bumped.x_internal[0] += 1e-2;
    REQUIRE(kkt_residual(spec, bumped) > sol.kkt);
    REQUIRE(kkt_residual(spec, bumped) > 1e-4);

    SubproblemSolution origin = sol;
    origin.x_internal.setZero();
    origin.lambda.setZero();
    REQUIRE(kkt_residual(spec, origin) > spec.tolerance);
}

TEST_CASE("subproblem: warm start reproduces the optimum", "[subproblem]")
{
    Scenario s = build_random_scenario(3, 600, 14.0);
    SubproblemSpec spec = make_spec(s, 0.45, {2.0, 1.0}, 601);
    SubproblemSolution cold = solve_subproblem(spec);
    REQUIRE(cold.status == SolveStatus::optimal);

    SubproblemSolution warm = solve_subproblem(spec, &cold.p);
    REQUIRE(warm.status == SolveStatus::optimal);
    REQUIRE(warm.objective ==
            Approx(cold.objective).margin(1e-7 * (1.0 + std::abs(cold.objective))));
}

TEST_CASE("subproblem: masked streams stay silent", "[subproblem]")
{
    Scenario s = build_random_scenario(2, 700, 10.0);
    SubproblemSpec spec = make_spec(s, 0.6, {1.0, 1.5}, 701);
    spec.mask.p2 = false;
    spec.mask.c1 = false;

    AssembledQcqp a = assemble_qcqp(spec);
    REQUIRE(a.layout.n == 2 * 2 * 2 + 1 + 1);
    REQUIRE(a.layout.x2 == -1);
    REQUIRE(a.layout.c1 == -1);

    SubproblemSolution sol = solve_subproblem(spec);
    REQUIRE(sol.status == SolveStatus::optimal);
    REQUIRE(sol.p.p_2.norm() == 0.0);
    REQUIRE(sol.c_bar[0] == 0.0);
    REQUIRE(sol.c_bar[1] < 0.0);
    require_feasible(spec, sol, 1e-7);

    StreamMask bad;
    bad.common = false;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.c1 = false;
    bad.c2 = false;
    bad.p1 = false;
    bad.p2 = false;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("subproblem: cache must match the scenario", "[subproblem]")
{
    Scenario s = build_random_scenario(2, 800, 10.0);
    Scenario other = build_random_scenario(2, 801, 10.0);
    SubproblemSpec spec = make_spec(s, 0.5, {1.0, 1.0}, 802);
    AssemblyCache cache = AssemblyCache::build(other);
    REQUIRE_THROWS_AS(assemble_qcqp(spec, &cache), std::invalid_argument);
}
