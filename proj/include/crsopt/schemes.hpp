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
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ao.hpp"
#include "scenario.hpp"
#include "subproblem.hpp"

// Catalogue of transmission strategies. Every strategy is the same
// alternating optimizer run under a stream-activation mask plus a policy for
// the slot fraction, so solutions of restricted strategies remain feasible
// for the unrestricted one and can seed it.

namespace crsopt
{

// Slot-fraction policy of a strategy: either a single fixed value or a grid
// search over the slot fraction.
struct ThetaPolicy
{
    bool searched = true;
    double value = 1.0;

    static ThetaPolicy search() { return ThetaPolicy{true, 1.0}; }

    static ThetaPolicy fix(double theta) { return ThetaPolicy{false, theta}; }
};

// A named strategy: which transmit streams carry power, whether user 2's
// message rides entirely on the common stream, and how the slot fraction is
// chosen.
struct SchemeSpec
{
    std::string name;
    bool use_p1 = true;
    bool use_p2 = true;
    bool use_pc = true;
    bool w2_fully_common = false;
    ThetaPolicy theta_policy = ThetaPolicy::search();

    void validate() const;
};

// The seven built-in strategies, in the order restricted strategies come
// before the ones whose feasible set contains them. Solving in this order
// lets each solution seed every later strategy it is compatible with.
inline const std::vector<SchemeSpec> &known_schemes()
{
    static const std::vector<SchemeSpec> table = {
        {"mu-lp", true, true, false, false, ThetaPolicy::fix(1.0)},
        {"n-noma", true, false, true, true, ThetaPolicy::fix(1.0)},
        {"odf", false, false, true, true, ThetaPolicy::search()},
        {"ers", true, true, true, false, ThetaPolicy::fix(0.5)},
        {"c-noma", true, false, true, true, ThetaPolicy::search()},
        {"nrs", true, true, true, false, ThetaPolicy::fix(1.0)},
        {"crs", true, true, true, false, ThetaPolicy::search()},
    };
    return table;
}

inline const SchemeSpec &scheme_by_name(const std::string &name)
{
    for (const SchemeSpec &spec : known_schemes())
        if (spec.name == name)
            return spec;
    throw std::invalid_argument("scheme_by_name: unknown scheme '" + name + "'");
}

inline void SchemeSpec::validate() const
{
    if (name.empty())
        throw std::invalid_argument("SchemeSpec: empty name");
    if (w2_fully_common && !use_pc)
        throw std::invalid_argument("SchemeSpec: carrying W2 on the common stream needs the common stream");
    if (w2_fully_common && use_p2)
        throw std::invalid_argument("SchemeSpec: a fully common W2 leaves nothing for p_2 to carry");
    if (!use_pc && !use_p1 && !use_p2)
        throw std::invalid_argument("SchemeSpec: no active stream");
    if (!theta_policy.searched)
        detail::check_theta(theta_policy.value);
    for (const SchemeSpec &builtin : known_schemes())
    {
        if (builtin.name != name)
            continue;
        bool same = use_p1 == builtin.use_p1 && use_p2 == builtin.use_p2 &&
                    use_pc == builtin.use_pc && w2_fully_common == builtin.w2_fully_common &&
                    theta_policy.searched == builtin.theta_policy.searched &&
                    (theta_policy.searched || theta_policy.value == builtin.theta_policy.value);
        if (!same)
            throw std::invalid_argument("SchemeSpec: '" + name + "' contradicts the built-in definition");
    }
}

// Translates a strategy into the stream mask enforced by the convex step.
// Deactivated precoders are pinned to zero; a fully common W2 pins user 1's
// common-rate share so the common stream carries only user 2's message; no
// common stream pins both shares.
inline StreamMask scheme_constraints(const SchemeSpec &spec)
{
    spec.validate();
    StreamMask mask;
    mask.common = spec.use_pc;
    mask.p1 = spec.use_p1;
    mask.p2 = spec.use_p2;
    mask.c1 = spec.use_pc && !spec.w2_fully_common;
    mask.c2 = spec.use_pc;
    mask.validate();
    return mask;
}

// True when every stream the source strategy may populate is active in the
// target, so the source's precoders are a feasible warm start for the
// target.
inline bool seed_compatible(const SchemeSpec &target, const SchemeSpec &source)
{
    return (target.use_p1 || !source.use_p1) && (target.use_p2 || !source.use_p2) &&
           (target.use_pc || !source.use_pc);
}

// Solves one strategy. Fixed-slot strategies run the alternating optimizer
// at their slot fraction, searched ones sweep the grid; extra seeds whose
// slot fraction matches are tried alongside the default initializer and the
// best result is kept.
inline DesignPoint solve_scheme(const Scenario &s, const std::array<double, 2> &u,
                                const SchemeSpec &spec, const AoOptions &base_opts = {},
                                std::vector<double> grid = default_theta_grid(),
                                const std::vector<DesignPoint> &extra_seeds = {})
{
    AoOptions opts = base_opts;
    opts.mask = scheme_constraints(spec);
    if (spec.theta_policy.searched)
        return theta_search(s, u, opts.eps, std::move(grid), opts, extra_seeds);

    double theta = spec.theta_policy.value;
    DesignPoint best = ao_solve(s, u, theta, opts);
    bool have = best.status != SolveStatus::infeasible;
    for (const DesignPoint &seed : extra_seeds)
    {
        if (seed.status == SolveStatus::infeasible || std::abs(seed.theta - theta) > 1e-12)
            continue;
        DesignPoint cand = ao_solve(s, u, theta, opts, &seed.p);
        if (cand.status == SolveStatus::infeasible)
            continue;
        if (!have || cand.wsr > best.wsr)
        {
            best = cand;
            have = true;
        }
    }
    if (!have)
    {
        best = DesignPoint{};
        best.u = u;
        best.theta = theta;
        best.status = SolveStatus::infeasible;
    }
    return best;
}

// One strategy's solution within a batch.
struct SchemeRun
{
    SchemeSpec spec;
    DesignPoint point;
};

// Solves a batch of strategies over the same scenario and weights. The batch
// is processed in catalogue order so restricted strategies are solved first
// and seed every compatible later one; `warm` supplies additional seeds, one
// per strategy name, typically the solutions of a neighbouring sweep point.
// Results are returned in the order requested.
inline std::vector<SchemeRun> solve_schemes(const Scenario &s, const std::array<double, 2> &u,
                                            const std::vector<SchemeSpec> &specs,
                                            const AoOptions &base_opts = {},
                                            const std::vector<double> &grid = default_theta_grid(),
                                            const std::vector<SchemeRun> &warm = {})
{
    std::vector<std::size_t> order(specs.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    auto rank = [](const SchemeSpec &spec) {
        const std::vector<SchemeSpec> &table = known_schemes();
        for (std::size_t r = 0; r < table.size(); ++r)
            if (table[r].name == spec.name)
                return r;
        return table.size();
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rank(specs[a]) < rank(specs[b]); });

    std::vector<SchemeRun> runs(specs.size());
    std::vector<const SchemeRun *> done;
    done.reserve(specs.size());
    for (std::size_t idx : order)
    {
        const SchemeSpec &spec = specs[idx];
        std::vector<DesignPoint> seeds;
        for (const SchemeRun &w : warm)
            if (seed_compatible(spec, w.spec) && w.point.status != SolveStatus::infeasible)
                seeds.push_back(w.point);
        for (const SchemeRun *r : done)
            if (seed_compatible(spec, r->spec) && r->point.status != SolveStatus::infeasible)
                seeds.push_back(r->point);
        runs[idx] = SchemeRun{spec, solve_scheme(s, u, spec, base_opts, grid, seeds)};
        done.push_back(&runs[idx]);
    }
    return runs;
}

} // namespace crsopt
