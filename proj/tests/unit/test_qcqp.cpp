#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "crsopt/qcqp.hpp"

using namespace crsopt;
using Catch::Approx;

namespace {

Eigen::VectorXd vec1(double a)
{
    Eigen::VectorXd v(1);
    v << a;
    return v;
}

Eigen::VectorXd vec2(double a, double b)
{
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

// minimize (x - 3)^2 subject to x <= 1; optimum x = 1, multiplier 4.
QcqpProblem clipped_parabola()
{
    QcqpProblem prob;
    Eigen::MatrixXd q(1, 1);
    q << 2.0;
    prob.objective = QuadraticFn::quadratic(q, vec1(-6.0), 9.0);
    prob.constraints.push_back(QuadraticFn::affine(vec1(1.0), -1.0));
    return prob;
}

} // namespace

TEST_CASE("qcqp: active linear constraint", "[qcqp]")
{
    QcqpProblem prob = clipped_parabola();
    QcqpResult res = barrier_minimize(prob, vec1(0.0));

    REQUIRE(res.status == QcqpStatus::optimal);
    REQUIRE(res.gap <= 1e-10);
    REQUIRE(res.x[0] == Approx(1.0).margin(1e-8));
    REQUIRE(res.x[0] < 1.0);
    REQUIRE(res.objective == Approx(4.0).margin(1e-8));
    REQUIRE(res.lambda[0] == Approx(4.0).margin(1e-3));
    REQUIRE(res.newton_iters > 0);
}

TEST_CASE("qcqp: inactive constraint leaves the unconstrained optimum", "[qcqp]")
{
    QcqpProblem prob;
    prob.objective = QuadraticFn::quadratic(2.0 * Eigen::MatrixXd::Identity(2, 2),
                                            Eigen::VectorXd::Zero(2), 0.0);
    prob.constraints.push_back(QuadraticFn::affine(vec2(1.0, 1.0), -10.0));

    QcqpResult res = barrier_minimize(prob, vec2(1.0, 1.0));
    REQUIRE(res.status == QcqpStatus::optimal);
    REQUIRE(res.x.norm() < 1e-8);
    REQUIRE(res.objective == Approx(0.0).margin(1e-12));
    REQUIRE(res.lambda[0] < 1e-8);
}

TEST_CASE("qcqp: quadratic ball constraint", "[qcqp]")
{
    // minimize -x - y subject to x^2 + y^2 <= 2; optimum (1, 1).
    QcqpProblem prob;
    prob.objective = QuadraticFn::affine(vec2(-1.0, -1.0), 0.0);
    prob.constraints.push_back(QuadraticFn::quadratic(2.0 * Eigen::MatrixXd::Identity(2, 2),
                                                      Eigen::VectorXd::Zero(2), -2.0));

    QcqpResult res = barrier_minimize(prob, vec2(0.0, 0.0));
    REQUIRE(res.status == QcqpStatus::optimal);
    REQUIRE(res.x[0] == Approx(1.0).margin(1e-7));
    REQUIRE(res.x[1] == Approx(1.0).margin(1e-7));
    REQUIRE(res.objective == Approx(-2.0).margin(1e-7));
    REQUIRE(res.lambda[0] == Approx(0.5).margin(1e-4));
}

TEST_CASE("qcqp: merit decreases within every barrier stage", "[qcqp]")
{
    QcqpProblem prob;
    prob.objective = QuadraticFn::affine(vec2(-1.0, -1.0), 0.0);
    prob.constraints.push_back(QuadraticFn::quadratic(2.0 * Eigen::MatrixXd::Identity(2, 2),
                                                      Eigen::VectorXd::Zero(2), -2.0));

    QcqpResult res = barrier_minimize(prob, vec2(-0.5, 0.9));
    REQUIRE(res.merit_trace.size() > 3);
    for (std::size_t i = 1; i < res.merit_trace.size(); ++i)
        if (res.merit_trace[i].first == res.merit_trace[i - 1].first)
            REQUIRE(res.merit_trace[i].second <= res.merit_trace[i - 1].second + 1e-12);
}

TEST_CASE("qcqp: deterministic across repeat solves", "[qcqp]")
{
    QcqpProblem prob = clipped_parabola();
    QcqpResult a = barrier_minimize(prob, vec1(-2.5));
    QcqpResult b = barrier_minimize(prob, vec1(-2.5));
    REQUIRE(a.x[0] == b.x[0]);
    REQUIRE(a.objective == b.objective);
    REQUIRE(a.newton_iters == b.newton_iters);
}

TEST_CASE("qcqp: unconstrained quadratic solves in one stage", "[qcqp]")
{
    QcqpProblem prob;
    Eigen::MatrixXd q(2, 2);
    q << 2.0, 0.0, 0.0, 2.0;
    prob.objective = QuadraticFn::quadratic(q, vec2(-4.0, 2.0), 0.0);

    QcqpResult res = barrier_minimize(prob, vec2(10.0, 10.0));
    REQUIRE(res.status == QcqpStatus::optimal);
    REQUIRE(res.x[0] == Approx(2.0).margin(1e-9));
    REQUIRE(res.x[1] == Approx(-1.0).margin(1e-9));
    REQUIRE(res.gap == 0.0);
}

TEST_CASE("qcqp: rejects an infeasible start", "[qcqp]")
{
    QcqpProblem prob = clipped_parabola();
    REQUIRE_THROWS_AS(barrier_minimize(prob, vec1(2.0)), std::invalid_argument);
    REQUIRE_THROWS_AS(barrier_minimize(prob, vec1(1.0)), std::invalid_argument);
    REQUIRE_THROWS_AS(barrier_minimize(prob, vec2(0.0, 0.0)), std::invalid_argument);
}

TEST_CASE("qcqp: box lower bound becomes active", "[qcqp]")
{
    QcqpProblem prob;
    prob.objective = QuadraticFn::affine(vec1(1.0), 0.0);
    prob.constraints.push_back(QuadraticFn::affine(vec1(1.0), -1.0));  // x <= 1
    prob.constraints.push_back(QuadraticFn::affine(vec1(-1.0), -1.0)); // x >= -1

    QcqpResult res = barrier_minimize(prob, vec1(0.25));
    REQUIRE(res.status == QcqpStatus::optimal);
    REQUIRE(res.x[0] == Approx(-1.0).margin(1e-8));
    REQUIRE(res.lambda[1] == Approx(1.0).margin(1e-4));
    REQUIRE(res.lambda[0] < 1e-8);
}

TEST_CASE("qcqp: phase one finds an interior point", "[qcqp]")
{
    QcqpProblem prob;
    prob.objective = QuadraticFn::affine(vec1(0.0), 0.0);
    prob.constraints.push_back(QuadraticFn::affine(vec1(1.0), 5.0)); // x <= -5

    Phase1Result r = phase1_feasible_point(prob, vec1(0.0));
    REQUIRE(r.feasible);
    REQUIRE(prob.strictly_feasible(r.x));
    REQUIRE(r.x[0] < -5.0);
}

TEST_CASE("qcqp: phase one certifies an empty set", "[qcqp]")
{
    // x <= 0 and x >= 1 cannot hold together; the least violation is 0.5.
    QcqpProblem prob;
    prob.objective = QuadraticFn::affine(vec1(0.0), 0.0);
    prob.constraints.push_back(QuadraticFn::affine(vec1(1.0), 0.0));
    prob.constraints.push_back(QuadraticFn::affine(vec1(-1.0), 1.0));

    Phase1Result r = phase1_feasible_point(prob, vec1(3.0));
    REQUIRE_FALSE(r.feasible);
    REQUIRE(r.min_violation == Approx(0.5).margin(1e-5));
}

TEST_CASE("qcqp: phase one handles quadratic constraints", "[qcqp]")
{
    // Ring intersection: ||x||^2 <= 1 and x_0 >= 0.6.
    QcqpProblem prob;
    prob.objective = QuadraticFn::affine(Eigen::VectorXd::Zero(2), 0.0);
    prob.constraints.push_back(QuadraticFn::quadratic(2.0 * Eigen::MatrixXd::Identity(2, 2),
                                                      Eigen::VectorXd::Zero(2), -1.0));
    prob.constraints.push_back(QuadraticFn::affine(vec2(-1.0, 0.0), 0.6));

    Phase1Result r = phase1_feasible_point(prob, vec2(5.0, -4.0));
    REQUIRE(r.feasible);
    REQUIRE(prob.strictly_feasible(r.x));

    // Shrinking the ball below the half-plane kills feasibility.
    prob.constraints[0].r = -0.25;
    Phase1Result bad = phase1_feasible_point(prob, vec2(5.0, -4.0));
    REQUIRE_FALSE(bad.feasible);
    REQUIRE(bad.min_violation > 1e-6);
}
