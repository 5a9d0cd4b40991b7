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

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "rs_kernel.hpp"
#include "scenario.hpp"
#include "subproblem.hpp"

// Alternating optimization of the weighted sum rate: equalizers and MSE
// weights are refreshed in closed form, then the precoders and common-rate
// shares are re-solved as a convex step; the loop repeats until the weighted
// sum rate settles. A scalar grid search over the slot fraction theta sits
// on top, seeding neighboring grid points with each other's solutions.

namespace crsopt {

struct AoOptions
{
    double eps = 1e-5;      // weighted-sum-rate convergence threshold
    int max_iter = 200;     // alternating-step cap
    double gap = 1e-10;     // duality gap handed to the convex step
    bool multistart = true; // cold runs try a portfolio of starting power splits
    StreamMask mask;        // stream activation of the transmission scheme

    void validate() const
    {
        if (!(eps > 0.0))
            throw std::invalid_argument("AoOptions: eps must be positive");
        if (max_iter < 1)
            throw std::invalid_argument("AoOptions: max_iter must be >= 1");
        if (!(gap > 0.0))
            throw std::invalid_argument("AoOptions: gap must be positive");
        mask.validate();
    }
};

// Trajectory of one alternating-optimization run. wsr_history holds the
// weighted sum rate of the best point found up to each iteration, so it is
// non-decreasing; the convergence test runs on the raw step-to-step change.
struct AoState
{
    int iteration = 0;
    PrecoderSet p;
    std::array<double, 2> c_bar{0.0, 0.0};
    std::vector<double> wsr_history;
    std::vector<double> step_history; // raw per-iterate values behind the stopping test
    std::vector<double> violation_history;
    bool converged = false;
};

// One operating point of the system: precoders, common-rate split, slot
// fraction, and the rates they achieve under the weights used to find it.
struct DesignPoint
{
    PrecoderSet p;
    CommonRateSplit c;
    double theta = 1.0;
    RateReport rates;
    std::array<double, 2> r_tot{0.0, 0.0};
    double wsr = 0.0;
    std::array<double, 2> u{1.0, 1.0};
    double kkt = std::numeric_limits<double>::quiet_NaN(); // largest convex-step KKT residual
    double violation = 0.0;                                // largest constraint violation
    SolveStatus status = SolveStatus::optimal;
    bool converged = false;
    int iterations = 0;
};

// Matched-filter private precoders plus a common precoder along the dominant
// left singular vector of the stacked channels; half the power budget goes
// to the common stream and a quarter to each private one. A zero channel
// hands its private share to the common precoder.
inline PrecoderSet initialize_precoders(const Scenario &s, double theta)
{
    s.validate();
    detail::check_theta(theta);

    double q_c = s.p_t / 2.0;
    std::array<double, 2> q_p{s.p_t / 4.0, s.p_t / 4.0};
    PrecoderSet p = PrecoderSet::zero(s.n_t);

    for (int k = 0; k < 2; ++k)
    {
        const Eigen::VectorXcd &h = k == 0 ? s.h1 : s.h2;
        double nrm = h.norm();
        if (nrm == 0.0)
        {
            q_c += q_p[k];
            continue;
        }
        Eigen::VectorXcd &pk = k == 0 ? p.p_1 : p.p_2;
        pk = std::sqrt(q_p[k]) * h / nrm;
    }

    Eigen::MatrixXcd stacked(s.n_t, 2);
    stacked.col(0) = s.h1;
    stacked.col(1) = s.h2;
    Eigen::VectorXcd u_max;
    if (stacked.norm() == 0.0)
        u_max = Eigen::VectorXcd::Unit(s.n_t, 0);
    else
    {
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked, Eigen::ComputeThinU);
        u_max = svd.matrixU().col(0);
        for (int i = 0; i < s.n_t; ++i)
        {
            double a = std::abs(u_max[i]);
            if (a > 1e-12)
            {
                u_max *= std::conj(u_max[i]) / a;
                u_max[i] = a;
                break;
            }
        }
    }
    p.p_c = std::sqrt(q_c) * u_max;
    return p;
}

// Equalizer and weight refresh: the closed-form minimizers at the current
// precoders, packaged as the next convex-step input.
inline SubproblemSpec mmse_refresh(const Scenario &s, const std::array<double, 2> &u, double theta,
                                   const PrecoderSet &p, const StreamMask &mask = {})
{
    SubproblemSpec spec;
    spec.scenario = s;
    spec.theta = theta;
    spec.weights_u = u;
    spec.mask = mask;
    auto [gc1, g1] = mmse_equalizers(s, p, 1);
    auto [gc2, g2] = mmse_equalizers(s, p, 2);
    spec.g = Equalizers{gc1, gc2, g1, g2};
    auto [wc1, w1] = mmse_weights(s, p, 1);
    auto [wc2, w2] = mmse_weights(s, p, 2);
    spec.w = MseWeights{wc1, wc2, w1, w2};
    spec.r_relay = relay_link_rate(s);
    return spec;
}

// Weighted sum rate reconstructed from the convex-step objective at freshly
// refreshed equalizers. Equal (within rounding) to the weighted sum rate
// computed from the achievable rates themselves.
inline double wsr_via_surrogate(const Scenario &s, const std::array<double, 2> &u, double theta,
                                const PrecoderSet &p, const std::array<double, 2> &c_bar)
{
    SubproblemSpec spec = mmse_refresh(s, u, theta, p);
    return theta * (u[0] + u[1]) - subproblem_objective(spec, p, c_bar);
}

namespace detail {

// Weighted sum rate and worst constraint violation of a candidate point, in
// achievable-rate units.
struct PointMetrics
{
    RateReport rates;
    std::array<double, 2> c{0.0, 0.0};
    std::array<double, 2> r_tot;
    double wsr = 0.0;
    double violation = 0.0;
};

// Projects a common-rate split onto what the common stream actually carries
// at the given precoders. The convex step certifies the split against the
// linearized common rate of the previous equalizers, which can overshoot the
// achievable one by a small margin; the projection grants rate-target floors
// first and spreads the remainder in proportion to the requested shares.
inline std::array<double, 2> repair_common_split(const std::array<double, 2> &requested,
                                                 double r_c, const std::array<double, 2> &floors)
{
    std::array<double, 2> c{std::max(requested[0], 0.0), std::max(requested[1], 0.0)};
    double f_sum = floors[0] + floors[1];
    if (f_sum >= r_c)
    {
        double scale = f_sum > 0.0 ? r_c / f_sum : 0.0;
        return {floors[0] * scale, floors[1] * scale};
    }
    for (int k = 0; k < 2; ++k)
        c[k] = std::max(c[k], floors[k]);
    double excess = c[0] + c[1] - r_c;
    if (excess <= 0.0)
        return c;
    std::array<double, 2> slack{c[0] - floors[0], c[1] - floors[1]};
    double s_sum = slack[0] + slack[1];
    double rem = r_c - f_sum;
    for (int k = 0; k < 2; ++k)
        c[k] = floors[k] + slack[k] * (rem / s_sum);
    return c;
}

inline PointMetrics evaluate_split(const Scenario &s, const std::array<double, 2> &u,
                                   const PrecoderSet &p, const RateReport &rates,
                                   const std::array<double, 2> &requested, const StreamMask &mask)
{
    PointMetrics m;
    m.rates = rates;

    std::array<bool, 2> share_active{mask.common && mask.c1, mask.common && mask.c2};
    std::array<double, 2> r_p{m.rates.r_p1, m.rates.r_p2};
    std::array<double, 2> floors{
        share_active[0] ? std::max(0.0, s.r_tar[0] - r_p[0]) : 0.0,
        share_active[1] ? std::max(0.0, s.r_tar[1] - r_p[1]) : 0.0,
    };
    std::array<double, 2> req{share_active[0] ? requested[0] : 0.0,
                              share_active[1] ? requested[1] : 0.0};
    m.c = repair_common_split(req, m.rates.r_c, floors);

    m.r_tot = {m.c[0] + r_p[0], m.c[1] + r_p[1]};
    m.wsr = u[0] * m.r_tot[0] + u[1] * m.r_tot[1];

    double v = (p.total_power() - s.p_t) / std::max(1.0, s.p_t);
    v = std::max(v, m.c[0] + m.c[1] - m.rates.r_c);
    v = std::max(v, -m.c[0]);
    v = std::max(v, -m.c[1]);
    v = std::max(v, s.r_tar[0] - m.r_tot[0]);
    v = std::max(v, s.r_tar[1] - m.r_tot[1]);
    m.violation = std::max(v, 0.0);
    return m;
}

// Evaluates precoders under the split that maximizes the weighted sum rate:
// rate-target floors first, the remaining common rate to the larger-weight
// active share. At an exact weight tie every division of the remainder is
// value-optimal, so the balanced one is returned. Scores seeds and accepted
// iterates alike, so the stopping test, the acceleration safeguard, and the
// seed comparison all share one yardstick.
inline PointMetrics evaluate_best_split(const Scenario &s, const std::array<double, 2> &u,
                                        double theta, const PrecoderSet &p, const StreamMask &mask)
{
    RateReport rates = rate_report(s, p, theta);
    std::array<bool, 2> share_active{mask.common && mask.c1, mask.common && mask.c2};
    std::array<double, 2> requested{0.0, 0.0};
    if (share_active[0] && share_active[1] && u[0] == u[1])
    {
        requested = {0.5 * rates.r_c, 0.5 * rates.r_c};
    }
    else
    {
        int heavy = u[1] > u[0] ? 1 : 0;
        if (!share_active[heavy])
            heavy = 1 - heavy;
        requested[heavy] = rates.r_c;
    }
    return evaluate_split(s, u, p, rates, requested, mask);
}

// Starting point with the directions of initialize_precoders but a
// prescribed power split: qc_frac of the budget on the common precoder, the
// rest divided between the private ones by q1_share. A zero private
// direction folds its share into the common precoder.
inline PrecoderSet split_start(const Scenario &s, double theta, double qc_frac, double q1_share)
{
    PrecoderSet p = initialize_precoders(s, theta);
    double q_c = s.p_t * qc_frac;
    std::array<double, 2> q{s.p_t * (1.0 - qc_frac) * q1_share,
                            s.p_t * (1.0 - qc_frac) * (1.0 - q1_share)};
    for (int k = 0; k < 2; ++k)
    {
        Eigen::VectorXcd &pk = k == 0 ? p.p_1 : p.p_2;
        double nrm = pk.norm();
        if (nrm == 0.0)
            q_c += q[k];
        else
            pk *= std::sqrt(q[k]) / nrm;
    }
    p.p_c *= std::sqrt(q_c) / p.p_c.norm();
    return p;
}

// Zeroes masked streams in a seed and rescales the rest back to the seed's
// total power, so cross-scheme seeds start from full budget.
inline PrecoderSet apply_mask(const PrecoderSet &seed, const StreamMask &mask)
{
    PrecoderSet p = seed;
    double before = p.total_power();
    if (!mask.common)
        p.p_c.setZero();
    if (!mask.p1)
        p.p_1.setZero();
    if (!mask.p2)
        p.p_2.setZero();
    double after = p.total_power();
    if (after > 0.0 && after < before)
    {
        double scale = std::sqrt(before / after);
        p.p_c *= scale;
        p.p_1 *= scale;
        p.p_2 *= scale;
    }
    return p;
}

} // namespace detail

// Alternating optimization at a fixed slot fraction. init, when given,
// replaces the default starting precoders; state_out, when given, receives
// the full trajectory.
inline DesignPoint ao_solve(const Scenario &s, const std::array<double, 2> &u, double theta,
                            const AoOptions &opts = {}, const PrecoderSet *init = nullptr,
                            AoState *state_out = nullptr)
{
    s.validate();
    detail::check_theta(theta);
    opts.validate();

    // A single cold chain can stall in a slow corridor where a private
    // stream, once driven near zero power, regrows only exponentially
    // slowly. Cold runs therefore race a small deterministic portfolio of
    // starting power splits and keep the best trajectory, preferring runs
    // that converged.
    if (init == nullptr && opts.multistart)
    {
        double u_sum = u[0] + u[1];
        double share = u_sum > 0.0 ? u[0] / u_sum : 0.5;
        const std::array<PrecoderSet, 4> starts{
            initialize_precoders(s, theta),
            detail::split_start(s, theta, 0.5, share),
            detail::split_start(s, theta, 0.9, share),
            detail::split_start(s, theta, 0.1, 0.5),
        };
        AoOptions single = opts;
        single.multistart = false;

        DesignPoint best;
        AoState best_state;
        bool have = false;
        for (const PrecoderSet &start : starts)
        {
            AoState st;
            DesignPoint pt = ao_solve(s, u, theta, single, &start, &st);
            bool better;
            if (!have)
                better = true;
            else if (pt.status == SolveStatus::infeasible)
                better = false;
            else if (best.status == SolveStatus::infeasible)
                better = true;
            else if (pt.converged != best.converged)
                better = pt.converged;
            else
                better = pt.wsr > best.wsr;
            if (better)
            {
                best = std::move(pt);
                best_state = std::move(st);
                have = true;
            }
        }
        if (state_out != nullptr)
            *state_out = std::move(best_state);
        return best;
    }

    DesignPoint out;
    out.theta = theta;
    out.u = u;

    PrecoderSet p =
        detail::apply_mask(init != nullptr ? *init : initialize_precoders(s, theta), opts.mask);

    AssemblyCache cache = AssemblyCache::build(s);
    AoState state;

    // The loop keeps the best achievable point seen so far and reports its
    // value as the per-iteration result, so the recorded trajectory is
    // non-decreasing while the underlying chain is free to pass through small
    // dips of the achievable rate between refreshes. The starting point is
    // scored too, which keeps every seeded run at or above its seed.
    detail::PointMetrics best_m = detail::evaluate_best_split(s, u, theta, p, opts.mask);
    PrecoderSet best_p = p;
    std::array<double, 2> best_c_bar{-best_m.c[0], -best_m.c[1]};

    double wsr_prev = 0.0;
    double kkt_max = std::numeric_limits<double>::quiet_NaN();
    SolveStatus last_status = SolveStatus::max_iter;
    PrecoderSet p_older = p;

    for (int n = 1; n <= opts.max_iter; ++n)
    {
        SubproblemSpec spec = mmse_refresh(s, u, theta, p, opts.mask);
        SubproblemSolution sol = solve_subproblem(spec, &p, &cache, opts.gap);
        if (sol.status == SolveStatus::infeasible)
        {
            if (n == 1 || best_m.violation > 1e-7)
            {
                out.status = SolveStatus::infeasible;
                if (state_out != nullptr)
                    *state_out = std::move(state);
                return out;
            }
            break; // the refreshed subproblem lost the targets; keep the best point
        }

        if (sol.status != SolveStatus::optimal)
            break; // under-solved convex step; keep the best point found so far

        detail::PointMetrics m = detail::evaluate_best_split(s, u, theta, sol.p, opts.mask);

        // Acceleration around the step just taken. Near a stationary point
        // the chain either contracts linearly with nearly collinear steps,
        // where doubling the jump along the step direction while the
        // achievable value improves skips most of the tail, or settles into
        // a short cycle straddling its limit, where the average over the
        // last two or three iterates contracts the cycle. Every rate grows
        // under a uniform scale-up of the precoders, so candidates are
        // normalized onto the power shell rather than merely clamped, and
        // accepted only when they beat the plain step without raising the
        // target violation.
        PrecoderSet cur = sol.p;
        std::array<double, 2> cur_c_bar{-m.c[0], -m.c[1]};
        auto try_point = [&](const PrecoderSet &q_in) {
            PrecoderSet q = q_in;
            double pw = q.total_power();
            if (!(pw > 0.0))
                return false;
            double sc = std::sqrt(s.p_t / pw);
            q.p_c *= sc;
            q.p_1 *= sc;
            q.p_2 *= sc;
            detail::PointMetrics mq = detail::evaluate_best_split(s, u, theta, q, opts.mask);
            if (!(mq.wsr > m.wsr) || mq.violation > m.violation + 1e-12)
                return false;
            cur = q;
            cur_c_bar = {-mq.c[0], -mq.c[1]};
            m = mq;
            return true;
        };
        auto extrapolated = [&](double t) {
            PrecoderSet q;
            q.p_c = sol.p.p_c + t * (sol.p.p_c - p.p_c);
            q.p_1 = sol.p.p_1 + t * (sol.p.p_1 - p.p_1);
            q.p_2 = sol.p.p_2 + t * (sol.p.p_2 - p.p_2);
            return q;
        };
        bool extended = false;
        for (double t = 1.0; t <= 1024.0 && try_point(extrapolated(t)); t *= 2.0)
            extended = true;
        if (!extended)
            extended = try_point(extrapolated(-0.5));
        if (!extended)
        {
            PrecoderSet q;
            q.p_c = (sol.p.p_c + p.p_c + p_older.p_c) / 3.0;
            q.p_1 = (sol.p.p_1 + p.p_1 + p_older.p_1) / 3.0;
            q.p_2 = (sol.p.p_2 + p.p_2 + p_older.p_2) / 3.0;
            try_point(q);
        }

        p_older = p;
        p = cur;
        kkt_max = std::isnan(kkt_max) ? sol.kkt : std::max(kkt_max, sol.kkt);
        last_status = sol.status;
        state.iteration = n;
        if (m.wsr > best_m.wsr)
        {
            best_p = cur;
            best_c_bar = cur_c_bar;
            best_m = m;
        }
        state.wsr_history.push_back(best_m.wsr);
        state.step_history.push_back(m.wsr);
        state.violation_history.push_back(best_m.violation);
        double delta = m.wsr - wsr_prev;
        wsr_prev = m.wsr;
        if (std::abs(delta) < opts.eps)
        {
            state.converged = true;
            break;
        }
    }

    out.p = best_p;
    out.c = CommonRateSplit{best_m.c[0], best_m.c[1]};
    out.rates = best_m.rates;
    out.r_tot = best_m.r_tot;
    out.wsr = best_m.wsr;
    out.kkt = kkt_max;
    out.violation = best_m.violation;
    out.status = last_status;
    out.converged = state.converged;
    out.iterations = state.iteration;

    state.p = best_p;
    state.c_bar = best_c_bar;
    if (state_out != nullptr)
        *state_out = std::move(state);
    return out;
}

// Default slot-fraction grid: 0.05 steps over (0, 1].
inline std::vector<double> default_theta_grid()
{
    std::vector<double> grid;
    grid.reserve(20);
    for (int i = 1; i <= 20; ++i)
        grid.push_back(0.05 * i);
    return grid;
}

// Grid search over the slot fraction. Each grid point is solved from the
// default initializer, from the best solution of the previously visited
// (larger) grid point, and from any extra seeds whose theta matches; the
// best weighted sum rate wins, with ties resolved toward larger theta. When
// the relay link is dead every rate is linear in theta, so only theta = 1
// needs solving.
inline DesignPoint theta_search(const Scenario &s, const std::array<double, 2> &u, double eps,
                                std::vector<double> grid, const AoOptions &base_opts = {},
                                const std::vector<DesignPoint> &extra_seeds = {})
{
    s.validate();
    if (grid.empty())
        throw std::invalid_argument("theta_search: empty grid");
    for (double t : grid)
        detail::check_theta(t);
    std::sort(grid.begin(), grid.end(), std::greater<>());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.front() != 1.0)
        throw std::invalid_argument("theta_search: grid must contain 1.0");

    AoOptions opts = base_opts;
    opts.eps = eps;

    if (relay_link_rate(s) == 0.0)
        grid = {1.0};

    std::optional<DesignPoint> best;
    std::optional<DesignPoint> neighbor;
    bool first_point = true;
    for (double theta : grid)
    {
        // The starting-split portfolio runs only at the first grid point;
        // from there the neighboring-theta chain carries the good basin down
        // the grid at single-run cost.
        AoOptions point_opts = opts;
        point_opts.multistart = opts.multistart && first_point;
        first_point = false;

        std::optional<DesignPoint> at_theta;
        auto consider = [&](const PrecoderSet *seed) {
            DesignPoint cand = ao_solve(s, u, theta, point_opts, seed);
            if (cand.status == SolveStatus::infeasible)
                return;
            if (!at_theta || cand.wsr > at_theta->wsr)
                at_theta = std::move(cand);
        };

        consider(nullptr);
        if (neighbor)
            consider(&neighbor->p);
        for (const DesignPoint &seed : extra_seeds)
            if (std::abs(seed.theta - theta) < 1e-12)
                consider(&seed.p);

        if (!at_theta)
            continue;
        neighbor = at_theta;
        if (!best || at_theta->wsr > best->wsr + 1e-9)
            best = std::move(at_theta);
    }

    if (!best)
    {
        DesignPoint out;
        out.u = u;
        out.status = SolveStatus::infeasible;
        return out;
    }
    return *best;
}

// Writes one trajectory as CSV: iteration, weighted sum rate, worst
// constraint violation.
inline void write_ao_trace(const AoState &state, const std::string &path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_ao_trace: cannot open " + path);
    out.precision(17);
    out << "iteration,wsr,violation\n";
    for (std::size_t i = 0; i < state.wsr_history.size(); ++i)
        out << i + 1 << "," << state.wsr_history[i] << "," << state.violation_history[i] << "\n";
}

} // namespace crsopt
