// SPDX-License-Identifier: Apache-2.0
//
// crsopt - precoder and time-resource optimization for the two-user
// cooperative rate-splitting downlink
// Copyright (C) 2026 the crsopt authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

// Dense log-barrier solver for small convex QCQPs: minimize a convex
// quadratic subject to convex quadratic and affine inequality constraints.
// Problems here have at most a few dozen variables, so all linear algebra
// is dense and factorizations are recomputed per Newton step.

namespace crsopt {

// f(x) = 0.5 x^T Q x + q^T x + r. Q is symmetric PSD; an empty Q means the
// function is affine.
struct QuadraticFn
{
    Eigen::MatrixXd Q;
    Eigen::VectorXd q;
    double r = 0.0;

    int dim() const { return static_cast<int>(q.size()); }
    bool has_quad() const { return Q.size() > 0; }

    double value(const Eigen::VectorXd &x) const
    {
        double v = q.dot(x) + r;
        if (has_quad())
            v += 0.5 * x.dot(Q * x);
        return v;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd &x) const
    {
        if (has_quad())
            return Q * x + q;
        return q;
    }

    void add_hessian(double scale, Eigen::MatrixXd &h) const
    {
        if (has_quad())
            h += scale * Q;
    }

    static QuadraticFn affine(Eigen::VectorXd q, double r)
    {
        QuadraticFn f;
        f.q = std::move(q);
        f.r = r;
        return f;
    }

    static QuadraticFn quadratic(Eigen::MatrixXd quad, Eigen::VectorXd q, double r)
    {
        QuadraticFn f;
        f.Q = std::move(quad);
        f.q = std::move(q);
        f.r = r;
        return f;
    }
};

// Constraints are f_i(x) <= 0.
struct QcqpProblem
{
    QuadraticFn objective;
    std::vector<QuadraticFn> constraints;

    int dim() const { return objective.dim(); }

    double max_violation(const Eigen::VectorXd &x) const
    {
        double worst = -std::numeric_limits<double>::infinity();
        for (const QuadraticFn &f : constraints)
            worst = std::max(worst, f.value(x));
        return worst;
    }

    bool strictly_feasible(const Eigen::VectorXd &x) const
    {
        for (const QuadraticFn &f : constraints)
            if (!(f.value(x) < 0.0))
                return false;
        return true;
    }
};

enum class QcqpStatus
{
    optimal,
    infeasible,
    max_iter
};

struct QcqpOptions
{
    double gap_tol = 1e-10;   // target duality gap m/t
    double t0 = 1.0;          // initial barrier weight
    double mu = 30.0;         // barrier weight growth per outer stage
    int max_newton = 200;     // total Newton step budget
    double newton_tol = 1e-12; // absolute Newton decrement for the centering stop
    double armijo = 0.25;
    double backtrack = 0.5;
};

struct QcqpResult
{
    Eigen::VectorXd x;
    double objective = std::numeric_limits<double>::quiet_NaN();
    QcqpStatus status = QcqpStatus::max_iter;
    Eigen::VectorXd lambda; // multiplier estimates 1/(t * slack), one per constraint
    double gap = std::numeric_limits<double>::infinity();
    int newton_iters = 0;
    // (stage, merit) per Newton step; merit is non-increasing within a stage.
    std::vector<std::pair<int, double>> merit_trace;
};

namespace detail {

struct BarrierEval
{
    double psi = 0.0;
    bool feasible = false;
};

inline BarrierEval barrier_value(const QcqpProblem &prob, double t, const Eigen::VectorXd &x)
{
    BarrierEval e;
    double logsum = 0.0;
    for (const QuadraticFn &f : prob.constraints)
    {
        double v = f.value(x);
        if (!(v < 0.0))
            return e;
        logsum += std::log(-v);
    }
    e.psi = t * prob.objective.value(x) - logsum;
    e.feasible = true;
    return e;
}

} // namespace detail

// Minimizes over the strictly feasible set starting from a strictly feasible
// x0. The early_stop hook is polled after every Newton step; returning true
// ends the solve with the current iterate and status=optimal.
inline QcqpResult barrier_minimize(const QcqpProblem &prob, const Eigen::VectorXd &x0,
                                   const QcqpOptions &opts = {},
                                   const std::function<bool(const Eigen::VectorXd &)> &early_stop = {})
{
    const int n = prob.dim();
    const int m = static_cast<int>(prob.constraints.size());
    if (x0.size() != n)
        throw std::invalid_argument("barrier_minimize: x0 has wrong dimension");
    if (m > 0 && !prob.strictly_feasible(x0))
        throw std::invalid_argument("barrier_minimize: x0 is not strictly feasible");

    QcqpResult res;
    res.x = x0;
    res.lambda = Eigen::VectorXd::Zero(m);

    const double t_final = m > 0 ? m / opts.gap_tol : 1.0;
    double t = std::min(opts.t0, t_final);
    int stage = 0;

    Eigen::MatrixXd hess(n, n);
    Eigen::VectorXd grad(n);

    while (true)
    {
        // Centering for the current barrier weight. At large t the gradient
        // of t*f0 cancels against the barrier gradient, so the decrement is
        // only meaningful relative to the merit magnitude.
        bool centered = false;
        while (res.newton_iters < opts.max_newton)
        {
            hess.setZero();
            grad.setZero();
            prob.objective.add_hessian(t, hess);
            grad += t * prob.objective.gradient(res.x);
            for (const QuadraticFn &f : prob.constraints)
            {
                double v = f.value(res.x);
                Eigen::VectorXd g = f.gradient(res.x);
                double inv_slack = 1.0 / (-v);
                f.add_hessian(inv_slack, hess);
                hess += (inv_slack * inv_slack) * (g * g.transpose());
                grad += inv_slack * g;
            }

            // Factor with an escalating ridge so flat directions cannot stall
            // the step computation.
            Eigen::VectorXd dx;
            double ridge = 0.0;
            double scale = 1.0 + hess.diagonal().cwiseAbs().maxCoeff();
            for (int attempt = 0; attempt < 8; ++attempt)
            {
                Eigen::MatrixXd h = hess;
                if (ridge > 0.0)
                    h.diagonal().array() += ridge;
                Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
                if (ldlt.info() == Eigen::Success)
                {
                    dx = ldlt.solve(-grad);
                    if (dx.allFinite() && grad.dot(dx) <= 0.0)
                        break;
                }
                dx.resize(0);
                ridge = ridge == 0.0 ? 1e-12 * scale : ridge * 100.0;
            }
            if (dx.size() == 0)
            {
                res.objective = prob.objective.value(res.x);
                res.status = QcqpStatus::max_iter;
                return res;
            }

            detail::BarrierEval here = detail::barrier_value(prob, t, res.x);
            double decrement_sq = -grad.dot(dx);
            if (0.5 * decrement_sq <= opts.newton_tol)
            {
                centered = true;
                break;
            }

            // Backtrack into the feasible region first, then enforce Armijo
            // decrease of the barrier merit. A stalled search means the merit
            // is at its floating-point floor for this stage.
            double step = 1.0;
            detail::BarrierEval trial;
            while (step > 1e-18)
            {
                trial = detail::barrier_value(prob, t, res.x + step * dx);
                if (trial.feasible && trial.psi <= here.psi + opts.armijo * step * grad.dot(dx))
                    break;
                step *= opts.backtrack;
            }
            if (step <= 1e-18)
            {
                centered = true;
                break;
            }

            double moved = step * dx.cwiseAbs().maxCoeff();
            res.x += step * dx;
            ++res.newton_iters;
            res.merit_trace.emplace_back(stage, trial.psi);
            if (moved <= 1e-13 * (1.0 + res.x.cwiseAbs().maxCoeff()))
            {
                centered = true;
                break;
            }
            if (early_stop && early_stop(res.x))
            {
                res.objective = prob.objective.value(res.x);
                res.status = QcqpStatus::optimal;
                res.gap = m / t;
                for (int i = 0; i < m; ++i)
                    res.lambda[i] = 1.0 / (t * (-prob.constraints[i].value(res.x)));
                return res;
            }
        }

        res.gap = m > 0 ? m / t : 0.0;
        if (t >= t_final || m == 0)
        {
            for (int i = 0; i < m; ++i)
                res.lambda[i] = 1.0 / (t * (-prob.constraints[i].value(res.x)));
            res.objective = prob.objective.value(res.x);
            res.status = centered ? QcqpStatus::optimal : QcqpStatus::max_iter;
            return res;
        }
        if (res.newton_iters >= opts.max_newton)
        {
            for (int i = 0; i < m; ++i)
                res.lambda[i] = 1.0 / (t * (-prob.constraints[i].value(res.x)));
            res.objective = prob.objective.value(res.x);
            res.status = QcqpStatus::max_iter;
            return res;
        }
        t = std::min(t * opts.mu, t_final);
        ++stage;
    }
}

struct Phase1Result
{
    bool feasible = false;
    Eigen::VectorXd x;       // candidate point (original coordinates)
    double min_violation = std::numeric_limits<double>::infinity();
    int newton_iters = 0;
};

// Finds a strictly feasible point of prob, or certifies that the smallest
// achievable constraint violation exceeds the feasibility threshold. Any
// starting point works; the auxiliary slack starts above the worst
// violation at x0.
inline Phase1Result phase1_feasible_point(const QcqpProblem &prob, const Eigen::VectorXd &x0,
                                          const QcqpOptions &user_opts = {})
{
    const int n = prob.dim();
    const int m = static_cast<int>(prob.constraints.size());
    Phase1Result out;
    if (m == 0)
    {
        out.feasible = true;
        out.x = x0;
        out.min_violation = -std::numeric_limits<double>::infinity();
        return out;
    }

    QcqpProblem aux;
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(n + 1);
    cost[n] = 1.0;
    aux.objective = QuadraticFn::affine(cost, 0.0);
    aux.constraints.reserve(m + 1);
    for (const QuadraticFn &f : prob.constraints)
    {
        QuadraticFn g;
        if (f.has_quad())
        {
            g.Q = Eigen::MatrixXd::Zero(n + 1, n + 1);
            g.Q.topLeftCorner(n, n) = f.Q;
        }
        g.q = Eigen::VectorXd::Zero(n + 1);
        g.q.head(n) = f.q;
        g.q[n] = -1.0;
        g.r = f.r;
        aux.constraints.push_back(std::move(g));
    }

    double s0 = prob.max_violation(x0) + 1.0;
    double s_cap = s0 + 1.0;
    Eigen::VectorXd cap = Eigen::VectorXd::Zero(n + 1);
    cap[n] = 1.0;
    aux.constraints.push_back(QuadraticFn::affine(cap, -s_cap));

    Eigen::VectorXd z0(n + 1);
    z0.head(n) = x0;
    z0[n] = s0;

    // The full gap target is kept: feasible sets can be thin slivers whose
    // width only a tight solve resolves. Healthy instances exit early.
    QcqpOptions opts = user_opts;

    auto deep_enough = [n](const Eigen::VectorXd &z) { return z[n] < -1e-4; };
    QcqpResult r = barrier_minimize(aux, z0, opts, deep_enough);

    out.x = r.x.head(n);
    out.min_violation = prob.max_violation(out.x);
    out.newton_iters = r.newton_iters;
    out.feasible = out.min_violation < 0.0;
    return out;
}

} // namespace crsopt
