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

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ao.hpp"
#include "rs_kernel.hpp"
#include "scenario.hpp"

// Brute-force reference for the weighted-sum-rate design on two transmit
// antennas. Precoder directions are enumerated on a polar grid (magnitude
// split across the antennas times relative phase), crossed with evenly
// spaced splits of the power budget; every combination is scored with the
// exact rate formulas and the closed-form common-rate division below.
// Slow by construction and used only in tests, as an outside bound on the
// alternating optimizer.

namespace crsopt {

// Exhaustive-search problem description. Directions per precoder follow
// [cos(beta), sin(beta) e^{j phi}] with magnitude_steps values of beta on
// [0, pi/2] and phase_steps values of phi; the poles beta in {0, pi/2}
// collapse the phase axis, leaving (magnitude_steps - 2) * phase_steps + 2
// directions per vector. power_levels is the number of evenly spaced
// values per axis of the power simplex q_c + q_1 + q_2 = P_t.
struct GridOracleSpec
{
    Scenario scenario;
    double theta = 1.0;
    std::array<double, 2> u{1.0, 1.0};
    int phase_steps = 16;
    int magnitude_steps = 8;
    int power_levels = 6;

    double directions_per_vector() const
    {
        return static_cast<double>(magnitude_steps - 2) * phase_steps + 2.0;
    }

    double power_splits() const
    {
        return 0.5 * power_levels * (power_levels + 1);
    }

    // Number of rate evaluations the search performs.
    double grid_size() const
    {
        double d = directions_per_vector();
        return d * d * d * power_splits();
    }

    void validate() const
    {
        scenario.validate();
        detail::check_theta(theta);
        if (scenario.n_t != 2)
            throw std::invalid_argument("GridOracleSpec: the exhaustive search handles n_t = 2 only");
        if (phase_steps < 1 || magnitude_steps < 2 || power_levels < 2)
            throw std::invalid_argument(
                "GridOracleSpec: need phase_steps >= 1, magnitude_steps >= 2, power_levels >= 2");
        if (!(u[0] >= 0.0) || !(u[1] >= 0.0))
            throw std::invalid_argument("GridOracleSpec: weights must be nonnegative");
        if (grid_size() > 1e8)
            throw std::invalid_argument("GridOracleSpec: grid holds more than 1e8 points");
    }
};

// Largest-weight-first division of the common rate: each user first takes
// the share its rate target still needs beyond the private rate, then the
// whole remainder goes to the user with the larger weight (user 1 on a
// tie). Empty when the mandatory shares alone exceed the common rate.
inline std::optional<CommonRateSplit> try_optimal_common_split(const RateReport &rates,
                                                               const std::array<double, 2> &u,
                                                               const std::array<double, 2> &r_tar)
{
    std::array<double, 2> floor{std::max(0.0, r_tar[0] - rates.r_p1),
                                std::max(0.0, r_tar[1] - rates.r_p2)};
    if (floor[0] + floor[1] > rates.r_c)
        return std::nullopt;
    int heavy = u[1] > u[0] ? 1 : 0;
    std::array<double, 2> c = floor;
    c[heavy] = rates.r_c - floor[1 - heavy];
    return CommonRateSplit{c[0], c[1]};
}

// Same division, throwing instead of returning empty.
inline CommonRateSplit optimal_common_split(const RateReport &rates, const std::array<double, 2> &u,
                                            const std::array<double, 2> &r_tar)
{
    std::optional<CommonRateSplit> c = try_optimal_common_split(rates, u, r_tar);
    if (!c)
        throw std::domain_error("optimal_common_split: mandatory shares exceed the common rate");
    return *c;
}

namespace detail {

// Unit directions for one length-2 precoder. The first coordinate is kept
// real since a common phase never changes any rate.
inline std::vector<Eigen::Vector2cd> oracle_directions(int magnitude_steps, int phase_steps)
{
    std::vector<Eigen::Vector2cd> dirs;
    dirs.reserve(static_cast<std::size_t>(magnitude_steps - 2) * phase_steps + 2);
    dirs.emplace_back(1.0, 0.0);
    for (int m = 1; m + 1 < magnitude_steps; ++m)
    {
        double beta = 0.5 * std::numbers::pi * m / (magnitude_steps - 1);
        for (int k = 0; k < phase_steps; ++k)
        {
            double phi = 2.0 * std::numbers::pi * k / phase_steps;
            dirs.emplace_back(std::cos(beta), std::sin(beta) * std::polar(1.0, phi));
        }
    }
    dirs.emplace_back(0.0, 1.0);
    return dirs;
}

// Evenly spaced splits (q_c, q_1, q_2) of the power budget. The whole
// budget is always spent: scaling all precoders up can only raise every
// rate, so interior points of the power ball never win.
inline std::vector<std::array<double, 3>> oracle_power_splits(double p_t, int levels)
{
    std::vector<std::array<double, 3>> splits;
    splits.reserve(static_cast<std::size_t>(levels) * (levels + 1) / 2);
    double step = p_t / (levels - 1);
    for (int a = 0; a < levels; ++a)
        for (int b = 0; a + b < levels; ++b)
            splits.push_back({a * step, b * step, (levels - 1 - a - b) * step});
    return splits;
}

} // namespace detail

// Exhaustive weighted-sum-rate search. Every combination of three precoder
// directions and a power split is scored; combinations whose rates cannot
// cover the targets are skipped. Returns the best value found along with
// the point achieving it, or an infeasible point when nothing covers the
// targets anywhere on the grid.
inline std::pair<double, DesignPoint> grid_search_wsr(const GridOracleSpec &spec)
{
    spec.validate();
    const Scenario &s = spec.scenario;

    const std::vector<Eigen::Vector2cd> dirs =
        detail::oracle_directions(spec.magnitude_steps, spec.phase_steps);
    const std::vector<std::array<double, 3>> splits =
        detail::oracle_power_splits(s.p_t, spec.power_levels);

    bool found = false;
    double best_wsr = 0.0;
    std::array<std::size_t, 3> best_dir{0, 0, 0};
    std::size_t best_split = 0;

    PrecoderSet p = PrecoderSet::zero(2);
    const std::size_t n_dir = dirs.size();
    for (std::size_t ic = 0; ic < n_dir; ++ic)
        for (std::size_t i1 = 0; i1 < n_dir; ++i1)
            for (std::size_t i2 = 0; i2 < n_dir; ++i2)
                for (std::size_t is = 0; is < splits.size(); ++is)
                {
                    const std::array<double, 3> &q = splits[is];
                    p.p_c = std::sqrt(q[0]) * dirs[ic];
                    p.p_1 = std::sqrt(q[1]) * dirs[i1];
                    p.p_2 = std::sqrt(q[2]) * dirs[i2];
                    RateReport rates = rate_report(s, p, spec.theta);
                    std::optional<CommonRateSplit> c =
                        try_optimal_common_split(rates, spec.u, s.r_tar);
                    if (!c)
                        continue;
                    double wsr = spec.u[0] * (rates.r_p1 + c->c_1) +
                                 spec.u[1] * (rates.r_p2 + c->c_2);
                    if (!found || wsr > best_wsr)
                    {
                        found = true;
                        best_wsr = wsr;
                        best_dir = {ic, i1, i2};
                        best_split = is;
                    }
                }

    DesignPoint pt;
    pt.theta = spec.theta;
    pt.u = spec.u;
    if (!found)
    {
        pt.status = SolveStatus::infeasible;
        return {0.0, pt};
    }

    const std::array<double, 3> &q = splits[best_split];
    pt.p = PrecoderSet::zero(2);
    pt.p.p_c = std::sqrt(q[0]) * dirs[best_dir[0]];
    pt.p.p_1 = std::sqrt(q[1]) * dirs[best_dir[1]];
    pt.p.p_2 = std::sqrt(q[2]) * dirs[best_dir[2]];
    pt.rates = rate_report(s, pt.p, spec.theta);
    pt.c = optimal_common_split(pt.rates, spec.u, s.r_tar);
    pt.r_tot = {pt.rates.r_p1 + pt.c.c_1, pt.rates.r_p2 + pt.c.c_2};
    pt.wsr = best_wsr;
    pt.status = SolveStatus::optimal;
    pt.converged = true;
    pt.violation = std::max(0.0, (pt.p.total_power() - s.p_t) / s.p_t);
    return {best_wsr, pt};
}

} // namespace crsopt
