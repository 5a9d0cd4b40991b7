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
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ao.hpp"
#include "scenario.hpp"
#include "schemes.hpp"

// Rate-region synthesis: sweep the user-2 weight with u_1 = 1, record each
// strategy's operating point per weight, extract Pareto frontiers, and
// compare regions through their time-sharing closures. Raw sweep points
// and the closed (convex hull) boundary are both available since plotted
// regions may or may not include time sharing.

namespace crsopt {

inline const char *status_name(SolveStatus status)
{
    switch (status)
    {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::max_iter: return "max_iter";
    }
    return "unknown";
}

// One weight-sweep sample: the operating point a strategy selects when
// maximizing 1*R_1,tot + u2*R_2,tot.
struct RegionPoint
{
    double u2 = 1.0;
    double r1 = 0.0;
    double r2 = 0.0;
    double theta = 1.0;
    double wsr = 0.0;
    SolveStatus status = SolveStatus::optimal;

    bool feasible() const { return status != SolveStatus::infeasible; }
};

// A strategy's swept rate region. points holds one entry per weight in
// sweep order; frontier the feasible, mutually non-dominated subset; log
// collects per-sweep anomalies (infeasible weights, weight-monotonicity
// slips beyond solver tolerance).
struct RateRegion
{
    std::string scheme;
    std::vector<RegionPoint> points;
    std::vector<RegionPoint> frontier;
    std::vector<std::string> log;
};

// The 43-weight sweep grid: 10^-3, then 10^x for x from -1 to 1 in steps
// of 0.05, then 10^3.
inline std::vector<double> default_u2_list()
{
    std::vector<double> u2;
    u2.reserve(43);
    u2.push_back(1e-3);
    for (int k = 0; k <= 40; ++k)
        u2.push_back(std::pow(10.0, -1.0 + 0.05 * k));
    u2.push_back(1e3);
    return u2;
}

namespace detail {

inline std::string format_g12(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// q dominates p when it is at least as good in both rates and better in
// one; exact ties survive as distinct frontier members.
inline bool dominates(const RegionPoint &q, const RegionPoint &p)
{
    return q.r1 >= p.r1 && q.r2 >= p.r2 && (q.r1 > p.r1 || q.r2 > p.r2);
}

// Fills frontier and log from the raw sweep points.
inline void finalize_region(RateRegion &region)
{
    region.frontier.clear();
    const RegionPoint *prev = nullptr;
    for (const RegionPoint &pt : region.points)
    {
        if (!pt.feasible())
        {
            region.log.push_back("u2 = " + format_g12(pt.u2) +
                                 ": infeasible, dropped from the frontier");
            continue;
        }
        if (prev != nullptr && pt.r2 < prev->r2 - 1e-4)
            region.log.push_back("u2 = " + format_g12(pt.u2) + ": R_2,tot fell by " +
                                 format_g12(prev->r2 - pt.r2) +
                                 " against the weight ordering");
        prev = &pt;
    }
    for (const RegionPoint &pt : region.points)
    {
        if (!pt.feasible())
            continue;
        bool dominated = false;
        for (const RegionPoint &other : region.points)
            if (other.feasible() && dominates(other, pt))
            {
                dominated = true;
                break;
            }
        if (!dominated)
            region.frontier.push_back(pt);
    }
}

inline RegionPoint to_region_point(double u2, const DesignPoint &pt)
{
    RegionPoint rp;
    rp.u2 = u2;
    rp.theta = pt.theta;
    rp.status = pt.status;
    if (pt.status != SolveStatus::infeasible)
    {
        rp.r1 = pt.r_tot[0];
        rp.r2 = pt.r_tot[1];
        rp.wsr = pt.wsr;
    }
    return rp;
}

} // namespace detail

// Sweeps every strategy across the weight list. Per weight, the strategies
// are solved together so later ones start from the earlier ones' solutions,
// and each strategy is additionally seeded with its own previous-weight
// point, which keeps the selected operating points consistent along the
// sweep. Infeasible weights are recorded in the affected region's log.
inline std::vector<RateRegion> sweep_schemes(const Scenario &s,
                                             const std::vector<SchemeSpec> &specs,
                                             const std::vector<double> &u2_list = default_u2_list(),
                                             const AoOptions &base_opts = {},
                                             const std::vector<double> &grid = default_theta_grid())
{
    s.validate();
    if (u2_list.empty())
        throw std::invalid_argument("sweep_schemes: empty weight list");
    for (double u2 : u2_list)
        if (!(u2 > 0.0) || !std::isfinite(u2))
            throw std::invalid_argument("sweep_schemes: weights must be positive");

    std::vector<RateRegion> regions(specs.size());
    for (std::size_t j = 0; j < specs.size(); ++j)
    {
        specs[j].validate();
        regions[j].scheme = specs[j].name;
        regions[j].points.reserve(u2_list.size());
    }

    std::vector<SchemeRun> warm;
    for (double u2 : u2_list)
    {
        std::vector<SchemeRun> runs =
            solve_schemes(s, {1.0, u2}, specs, base_opts, grid, warm);
        for (std::size_t j = 0; j < specs.size(); ++j)
            regions[j].points.push_back(detail::to_region_point(u2, runs[j].point));
        warm = std::move(runs);
    }

    for (RateRegion &region : regions)
        detail::finalize_region(region);
    return regions;
}

// Single-strategy sweep with the same chaining across weights.
inline RateRegion sweep_weights(const Scenario &s, const SchemeSpec &spec,
                                const std::vector<double> &u2_list = default_u2_list(),
                                const AoOptions &base_opts = {},
                                const std::vector<double> &grid = default_theta_grid())
{
    return sweep_schemes(s, {spec}, u2_list, base_opts, grid)[0];
}

// Upper boundary of a region's time-sharing closure: the concave chain
// over the feasible points plus their axis projections, stored left to
// right. Every achievable rate pair lies on or below the chain.
struct FrontierHull
{
    std::vector<std::array<double, 2>> chain;

    bool empty() const { return chain.empty(); }

    double max_r1() const { return chain.empty() ? 0.0 : chain.back()[0]; }

    double max_r2() const { return chain.empty() ? 0.0 : chain.front()[1]; }

    // Boundary height at r1 = x; the chain is non-increasing in x and
    // vertex abscissae evaluate to their stored heights exactly.
    double value_at(double x) const
    {
        if (chain.empty() || x > chain.back()[0])
            return 0.0;
        if (x <= chain.front()[0])
            return chain.front()[1];
        for (std::size_t i = 1; i < chain.size(); ++i)
            if (x <= chain[i][0])
            {
                if (x == chain[i][0])
                    return chain[i][1];
                double x0 = chain[i - 1][0], y0 = chain[i - 1][1];
                double x1 = chain[i][0], y1 = chain[i][1];
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        return chain.back()[1];
    }
};

// Builds the time-sharing upper boundary from the feasible sweep points.
inline FrontierHull frontier_hull(const RateRegion &region)
{
    std::vector<std::array<double, 2>> pts;
    double best_r1 = 0.0, best_r2 = 0.0;
    for (const RegionPoint &pt : region.points)
        if (pt.feasible())
        {
            pts.push_back({pt.r1, pt.r2});
            best_r1 = std::max(best_r1, pt.r1);
            best_r2 = std::max(best_r2, pt.r2);
        }
    FrontierHull hull;
    if (pts.empty())
        return hull;
    pts.push_back({best_r1, 0.0});
    pts.push_back({0.0, best_r2});

    std::sort(pts.begin(), pts.end(), [](const auto &a, const auto &b) {
        return a[0] < b[0] || (a[0] == b[0] && a[1] > b[1]);
    });

    std::vector<std::array<double, 2>> chain;
    for (const auto &pt : pts)
    {
        if (!chain.empty() && chain.back()[0] == pt[0])
            continue;
        while (chain.size() >= 2)
        {
            const auto &a = chain[chain.size() - 2];
            const auto &b = chain[chain.size() - 1];
            double cross = (b[0] - a[0]) * (pt[1] - a[1]) - (b[1] - a[1]) * (pt[0] - a[0]);
            if (cross >= 0.0)
                chain.pop_back();
            else
                break;
        }
        while (!chain.empty() && chain.back()[1] <= pt[1])
            chain.pop_back();
        chain.push_back(pt);
    }
    hull.chain = std::move(chain);
    return hull;
}

// True when every frontier point of b sits inside a's time-sharing closure
// with componentwise slack tol. A hair of absolute slack keeps points that
// lie exactly on a hull segment from failing on interpolation roundoff.
inline bool region_dominates(const RateRegion &a, const RateRegion &b, double tol)
{
    FrontierHull hull = frontier_hull(a);
    if (hull.empty())
        return b.frontier.empty();
    for (const RegionPoint &pt : b.frontier)
    {
        double x = std::max(0.0, pt.r1 - tol);
        if (x > hull.max_r1() + 1e-12)
            return false;
        if (hull.value_at(std::min(x, hull.max_r1())) + tol + 1e-12 < pt.r2)
            return false;
    }
    return true;
}

// Area between the time-sharing upper boundary and the axes.
inline double hypervolume(const RateRegion &region)
{
    FrontierHull hull = frontier_hull(region);
    if (hull.empty())
        throw std::invalid_argument("hypervolume: region has no feasible points");
    double area = 0.0;
    double x_prev = 0.0, y_prev = hull.max_r2();
    for (const auto &pt : hull.chain)
    {
        area += 0.5 * (y_prev + pt[1]) * (pt[0] - x_prev);
        x_prev = pt[0];
        y_prev = pt[1];
    }
    return area;
}

// Raw sweep rows, one line per weight.
inline std::string region_csv(const RateRegion &region)
{
    std::string out = "scheme,u2,theta,R1_tot,R2_tot,wsr,status\n";
    for (const RegionPoint &pt : region.points)
    {
        out += region.scheme;
        out += ',';
        out += detail::format_g12(pt.u2);
        out += ',';
        out += detail::format_g12(pt.theta);
        out += ',';
        out += detail::format_g12(pt.r1);
        out += ',';
        out += detail::format_g12(pt.r2);
        out += ',';
        out += detail::format_g12(pt.wsr);
        out += ',';
        out += status_name(pt.status);
        out += '\n';
    }
    return out;
}

// Time-sharing boundary vertices, left to right.
inline std::string hull_csv(const RateRegion &region)
{
    FrontierHull hull = frontier_hull(region);
    std::string out = "scheme,R1_tot,R2_tot\n";
    for (const auto &pt : hull.chain)
    {
        out += region.scheme;
        out += ',';
        out += detail::format_g12(pt[0]);
        out += ',';
        out += detail::format_g12(pt[1]);
        out += '\n';
    }
    return out;
}

} // namespace crsopt
