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
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qcqp.hpp"
#include "rs_kernel.hpp"
#include "scenario.hpp"

// Convex step of the alternating optimization: for fixed equalizers g,
// weights w, and slot fraction theta, the precoders and common-rate shares
// solve a convex QCQP. The decision vector stacks the real and imaginary
// parts of the active precoders (scaled by 1/sqrt(P_t) so the power ball
// has unit radius), the active share variables c_bar_k <= 0, and one
// epigraph scalar for the max over the two common-stream decoding branches.

namespace crsopt {

// Which decision variables the current transmission scheme keeps. A share
// variable requires the common stream, and at least one stream must exist.
struct StreamMask
{
    bool common = true;
    bool p1 = true;
    bool p2 = true;
    bool c1 = true;
    bool c2 = true;

    void validate() const
    {
        if ((c1 || c2) && !common)
            throw std::invalid_argument("StreamMask: share variables require the common stream");
        if (!common && !p1 && !p2)
            throw std::invalid_argument("StreamMask: at least one stream must be active");
    }
};

enum class SolveStatus
{
    optimal,
    infeasible,
    max_iter
};

struct SubproblemSpec
{
    Scenario scenario;
    double theta = 1.0;
    std::array<double, 2> weights_u{1.0, 1.0};
    Equalizers g;
    MseWeights w;
    double r_relay = 0.0; // relay-hop rate, fixed for the slot split
    double tolerance = 1e-8;
    StreamMask mask;

    void validate() const
    {
        scenario.validate();
        detail::check_theta(theta);
        mask.validate();
        if (!(weights_u[0] >= 0.0) || !(weights_u[1] >= 0.0) ||
            !(weights_u[0] + weights_u[1] > 0.0))
            throw std::invalid_argument("SubproblemSpec: weights must be >= 0 with positive sum");
        if (!(w.w_c1 > 0.0) || !(w.w_c2 > 0.0) || !(w.w_1 > 0.0) || !(w.w_2 > 0.0))
            throw std::invalid_argument("SubproblemSpec: MSE weights must be positive");
        if (!(r_relay >= 0.0) || !std::isfinite(r_relay))
            throw std::invalid_argument("SubproblemSpec: r_relay must be finite and >= 0");
        if (!(tolerance > 0.0))
            throw std::invalid_argument("SubproblemSpec: tolerance must be positive");
    }
};

// Offsets of each variable block inside the decision vector; -1 when the
// block is absent. Stream blocks have length 2*n_t.
struct VarLayout
{
    int n = 0;
    int n_t = 0;
    int xc = -1, x1 = -1, x2 = -1;
    int c1 = -1, c2 = -1;
    int t = -1;
    bool pinned_shares = false; // true when c_bar was forced to zero
};

enum class RowKind
{
    power,
    common_sum,     // c_bar_1 + c_bar_2 >= t - theta
    common_branch1, // user 1 decoding branch <= t (or <= theta when pinned)
    common_branch2, // user 2 decoding branch <= t (or <= theta when pinned)
    sign_c1,
    sign_c2,
    qos_1,
    qos_2
};

// Channel outer products in stacked-real coordinates, scaled so that unit
// decision vectors correspond to full transmit power.
struct AssemblyCache
{
    std::uint64_t scenario_hash = 0;
    int n_t = 0;
    std::array<Eigen::VectorXd, 2> a, b;
    std::array<Eigen::MatrixXd, 2> m;

    static AssemblyCache build(const Scenario &s)
    {
        AssemblyCache c;
        c.scenario_hash = s.hash();
        c.n_t = s.n_t;
        double root_pt = std::sqrt(s.p_t);
        for (int k = 0; k < 2; ++k)
        {
            const Eigen::VectorXcd &h = k == 0 ? s.h1 : s.h2;
            Eigen::VectorXd re = root_pt * h.real();
            Eigen::VectorXd im = root_pt * h.imag();
            c.a[k].resize(2 * s.n_t);
            c.a[k] << re, im;
            c.b[k].resize(2 * s.n_t);
            c.b[k] << -im, re;
            c.m[k] = c.a[k] * c.a[k].transpose() + c.b[k] * c.b[k].transpose();
        }
        return c;
    }
};

struct AssembledQcqp
{
    QcqpProblem prob;
    VarLayout layout;
    std::vector<RowKind> rows;
    SolveStatus precheck = SolveStatus::optimal;
    // External objective = obj_scale * (internal + obj_shift), up to the
    // regularization term. The constant is removed from the internal form so
    // that barrier merit values stay well conditioned at large t.
    double obj_scale = 1.0;
    double obj_shift = 0.0;
    bool has_reg = false;
    // Decoding-branch functions over the decision vector, without the
    // epigraph variable; used to construct interior starting points.
    std::array<QuadraticFn, 2> branch;
    std::array<bool, 2> branch_constant{false, false};
};

struct SubproblemSolution
{
    PrecoderSet p;
    std::array<double, 2> c_bar{0.0, 0.0};
    double objective = std::numeric_limits<double>::quiet_NaN();
    SolveStatus status = SolveStatus::max_iter;
    double kkt = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd x_internal;
    Eigen::VectorXd lambda;
    int newton_iters = 0;
};

namespace detail {

inline double log2_weight_offset(double w) { return std::log2(w); }

// Adds mult * xi to f, where xi = w*eps - log2(w) for the given stream MSE
// under fixed scalar equalizer gg, over the active stream blocks. own_off
// is the block of the stream being decoded (-1 when that precoder is
// masked); interferer blocks enter through the T term.
inline void add_xi(QuadraticFn &f, const VarLayout &lay, const AssemblyCache &cache, int user,
                   cxd gg, double w, double mult, bool common_stream)
{
    const int k = user - 1;
    const double g2 = gg.real() * gg.real() + gg.imag() * gg.imag();
    const int nb = 2 * lay.n_t;

    std::array<int, 3> t_blocks{};
    int n_blocks = 0;
    if (common_stream && lay.xc >= 0)
        t_blocks[n_blocks++] = lay.xc;
    if (lay.x1 >= 0)
        t_blocks[n_blocks++] = lay.x1;
    if (lay.x2 >= 0)
        t_blocks[n_blocks++] = lay.x2;

    if (g2 > 0.0 && n_blocks > 0)
    {
        if (!f.has_quad())
            f.Q = Eigen::MatrixXd::Zero(lay.n, lay.n);
        for (int i = 0; i < n_blocks; ++i)
            f.Q.block(t_blocks[i], t_blocks[i], nb, nb) += (2.0 * mult * w * g2) * cache.m[k];
    }

    int own_off = common_stream ? lay.xc : (user == 1 ? lay.x1 : lay.x2);
    if (own_off >= 0 && g2 > 0.0)
        f.q.segment(own_off, nb) -=
            (2.0 * mult * w) * (gg.real() * cache.a[k] - gg.imag() * cache.b[k]);

    // Noise part of the MSE is added by the caller, which knows sigma.
    f.r += mult * (w - log2_weight_offset(w));
}

} // namespace detail

// Builds the convex program for one subproblem. Degenerate common-stream
// situations are resolved here: when every decoding branch that could bound
// the epigraph variable is a constant at or above theta, the share
// variables are forced to zero and the epigraph machinery is dropped; a
// constant branch strictly above theta makes the whole program infeasible.
inline AssembledQcqp assemble_qcqp(const SubproblemSpec &spec, const AssemblyCache *cache = nullptr)
{
    spec.validate();
    AssemblyCache local;
    if (cache == nullptr)
    {
        local = AssemblyCache::build(spec.scenario);
        cache = &local;
    }
    else if (cache->scenario_hash != spec.scenario.hash())
        throw std::invalid_argument("assemble_qcqp: cache was built for a different scenario");

    const Scenario &s = spec.scenario;
    const double theta = spec.theta;
    const double u1 = spec.weights_u[0];
    const double u2 = spec.weights_u[1];
    const double scale = u1 + u2;

    AssembledQcqp out;
    out.obj_scale = scale;

    // Branch constancy analysis. A branch has variable content exactly when
    // its equalizer is nonzero (all quadratic and linear terms carry g).
    const cxd g_c[2] = {spec.g.g_c1, spec.g.g_c2};
    const double w_c[2] = {spec.w.w_c1, spec.w.w_c2};
    bool pinch = false;
    bool infeasible = false;
    if (spec.mask.common)
    {
        double v_const = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < 2; ++k)
        {
            if (g_c[k] != cxd{0.0, 0.0})
                continue;
            double xi_const = w_c[k] * 1.0 - detail::log2_weight_offset(w_c[k]);
            double v = theta * xi_const - (k == 1 ? (1.0 - theta) * spec.r_relay : 0.0);
            v_const = std::max(v_const, v);
        }
        if (v_const > theta + 1e-9)
            infeasible = true;
        else if (v_const >= theta - 1e-12)
            pinch = true;
    }

    // Variable layout.
    VarLayout lay;
    lay.n_t = s.n_t;
    int off = 0;
    if (spec.mask.common)
    {
        lay.xc = off;
        off += 2 * s.n_t;
    }
    if (spec.mask.p1)
    {
        lay.x1 = off;
        off += 2 * s.n_t;
    }
    if (spec.mask.p2)
    {
        lay.x2 = off;
        off += 2 * s.n_t;
    }
    const bool keep_shares = spec.mask.common && !pinch;
    if (keep_shares && spec.mask.c1)
    {
        lay.c1 = off++;
    }
    if (keep_shares && spec.mask.c2)
    {
        lay.c2 = off++;
    }
    if (keep_shares)
    {
        lay.t = off++;
    }
    lay.n = off;
    lay.pinned_shares = spec.mask.common && pinch;
    out.layout = lay;

    if (infeasible)
    {
        out.precheck = SolveStatus::infeasible;
        return out;
    }

    auto zero_fn = [&] {
        QuadraticFn f;
        f.q = Eigen::VectorXd::Zero(lay.n);
        return f;
    };

    // xi builder with the noise constant folded in.
    auto xi_fn = [&](int user, cxd gg, double w, double mult, bool common_stream) {
        QuadraticFn f = zero_fn();
        detail::add_xi(f, lay, *cache, user, gg, w, mult, common_stream);
        double g2 = gg.real() * gg.real() + gg.imag() * gg.imag();
        f.r += mult * w * g2 * s.sigma_sq[user - 1];
        return f;
    };

    // Objective: (u1*theta*xi_1 + u2*theta*xi_2 + u1*c1 + u2*c2) / scale.
    QuadraticFn obj = xi_fn(1, spec.g.g_1, spec.w.w_1, u1 * theta / scale, false);
    {
        QuadraticFn xi2 = xi_fn(2, spec.g.g_2, spec.w.w_2, u2 * theta / scale, false);
        if (xi2.has_quad())
        {
            if (!obj.has_quad())
                obj.Q = Eigen::MatrixXd::Zero(lay.n, lay.n);
            obj.Q += xi2.Q;
        }
        obj.q += xi2.q;
        obj.r += xi2.r;
    }
    if (lay.c1 >= 0)
        obj.q[lay.c1] += u1 / scale;
    if (lay.c2 >= 0)
        obj.q[lay.c2] += u2 / scale;
    if ((u1 == 0.0 || u2 == 0.0) && (lay.c1 >= 0 || lay.c2 >= 0))
    {
        out.has_reg = true;
        if (!obj.has_quad())
            obj.Q = Eigen::MatrixXd::Zero(lay.n, lay.n);
        for (int c : {lay.c1, lay.c2})
            if (c >= 0)
                obj.Q(c, c) += 2.0 * 1e-9 / scale;
    }
    out.obj_shift = obj.r;
    obj.r = 0.0;
    out.prob.objective = std::move(obj);

    auto push_row = [&](QuadraticFn f, RowKind kind) {
        // Constant rows are resolved immediately instead of being handed to
        // the solver.
        if (!f.has_quad() && f.q.isZero(0.0))
        {
            if (f.r > 1e-12)
                out.precheck = SolveStatus::infeasible;
            return;
        }
        out.prob.constraints.push_back(std::move(f));
        out.rows.push_back(kind);
    };

    // Power: sum of squared stream blocks <= 1.
    {
        QuadraticFn f = zero_fn();
        f.Q = Eigen::MatrixXd::Zero(lay.n, lay.n);
        for (int o : {lay.xc, lay.x1, lay.x2})
            if (o >= 0)
                f.Q.block(o, o, 2 * s.n_t, 2 * s.n_t) =
                    2.0 * Eigen::MatrixXd::Identity(2 * s.n_t, 2 * s.n_t);
        f.r = -1.0;
        push_row(std::move(f), RowKind::power);
    }

    // Common-stream machinery.
    if (spec.mask.common)
    {
        for (int k = 0; k < 2; ++k)
        {
            out.branch[k] = xi_fn(k + 1, g_c[k], w_c[k], theta, true);
            if (k == 1)
                out.branch[k].r -= (1.0 - theta) * spec.r_relay;
            out.branch_constant[k] = (g_c[k] == cxd{0.0, 0.0});
        }
        if (!pinch)
        {
            QuadraticFn sum_row = zero_fn();
            sum_row.q[lay.t] = 1.0;
            if (lay.c1 >= 0)
                sum_row.q[lay.c1] = -1.0;
            if (lay.c2 >= 0)
                sum_row.q[lay.c2] = -1.0;
            sum_row.r = -theta;
            push_row(std::move(sum_row), RowKind::common_sum);
            for (int k = 0; k < 2; ++k)
            {
                QuadraticFn f = out.branch[k];
                f.q[lay.t] -= 1.0;
                push_row(std::move(f), k == 0 ? RowKind::common_branch1 : RowKind::common_branch2);
            }
        }
        else
        {
            for (int k = 0; k < 2; ++k)
            {
                if (out.branch_constant[k])
                    continue;
                QuadraticFn f = out.branch[k];
                f.r -= theta;
                push_row(std::move(f), k == 0 ? RowKind::common_branch1 : RowKind::common_branch2);
            }
        }
    }

    // Share sign constraints.
    if (lay.c1 >= 0)
    {
        QuadraticFn f = zero_fn();
        f.q[lay.c1] = 1.0;
        push_row(std::move(f), RowKind::sign_c1);
    }
    if (lay.c2 >= 0)
    {
        QuadraticFn f = zero_fn();
        f.q[lay.c2] = 1.0;
        push_row(std::move(f), RowKind::sign_c2);
    }

    // QoS: R_tar_k + c_bar_k + theta*xi_k - theta <= 0.
    const cxd g_p[2] = {spec.g.g_1, spec.g.g_2};
    const double w_p[2] = {spec.w.w_1, spec.w.w_2};
    for (int k = 0; k < 2; ++k)
    {
        QuadraticFn f = xi_fn(k + 1, g_p[k], w_p[k], theta, false);
        int c_off = k == 0 ? lay.c1 : lay.c2;
        if (c_off >= 0)
            f.q[c_off] += 1.0;
        f.r += s.r_tar[k] - theta;
        push_row(std::move(f), k == 0 ? RowKind::qos_1 : RowKind::qos_2);
    }

    return out;
}

// Objective of the convex step evaluated directly from precoders and
// shares, in the original (unscaled) problem units.
inline double subproblem_objective(const SubproblemSpec &spec, const PrecoderSet &p,
                                   const std::array<double, 2> &c_bar)
{
    auto [e1c, e1p] = mse_pair(spec.scenario, p, spec.g, 1);
    auto [e2c, e2p] = mse_pair(spec.scenario, p, spec.g, 2);
    (void)e1c;
    (void)e2c;
    double xi1 = augmented_wmse(e1p, spec.w.w_1);
    double xi2 = augmented_wmse(e2p, spec.w.w_2);
    return spec.weights_u[0] * (spec.theta * xi1 + c_bar[0]) +
           spec.weights_u[1] * (spec.theta * xi2 + c_bar[1]);
}

namespace detail {

inline Eigen::VectorXd stack_precoder(const Eigen::VectorXcd &p, double root_pt)
{
    Eigen::VectorXd x(2 * p.size());
    x << p.real() / root_pt, p.imag() / root_pt;
    return x;
}

inline Eigen::VectorXcd unstack_precoder(const Eigen::VectorXd &x, double root_pt)
{
    const int n_t = static_cast<int>(x.size()) / 2;
    Eigen::VectorXcd p(n_t);
    for (int i = 0; i < n_t; ++i)
        p[i] = root_pt * cxd{x[i], x[i + n_t]};
    return p;
}

// Interior starting point: place the stream part, then allocate shares and
// the epigraph variable with explicit margins. Returns false when the
// closed-form construction fails (phase one takes over).
inline bool interior_start(const AssembledQcqp &asm_prob, const SubproblemSpec &spec,
                           const PrecoderSet *warm, Eigen::VectorXd &x0)
{
    const VarLayout &lay = asm_prob.layout;
    const Scenario &s = spec.scenario;
    const double root_pt = std::sqrt(s.p_t);
    x0 = Eigen::VectorXd::Zero(lay.n);

    auto place = [&](int off, const Eigen::VectorXcd &p) {
        if (off >= 0)
            x0.segment(off, 2 * s.n_t) = stack_precoder(p, root_pt);
    };

    if (warm != nullptr)
    {
        place(lay.xc, warm->p_c);
        place(lay.x1, warm->p_1);
        place(lay.x2, warm->p_2);
    }
    else
    {
        int n_streams = (lay.xc >= 0) + (lay.x1 >= 0) + (lay.x2 >= 0);
        double share = 0.8 / n_streams;
        Eigen::VectorXcd d1 = s.h1.norm() > 1e-12 ? (s.h1 / s.h1.norm()).eval()
                                                  : Eigen::VectorXcd::Zero(s.n_t);
        Eigen::VectorXcd d2 = s.h2.norm() > 1e-12 ? (s.h2 / s.h2.norm()).eval()
                                                  : Eigen::VectorXcd::Zero(s.n_t);
        if (lay.xc >= 0)
        {
            Eigen::VectorXcd dc = d1 + d2;
            if (dc.norm() < 1e-9)
                dc = d1;
            if (dc.norm() < 1e-9)
                dc = Eigen::VectorXcd::Unit(s.n_t, 0);
            x0.segment(lay.xc, 2 * s.n_t) =
                stack_precoder(std::sqrt(share * s.p_t) * dc / dc.norm(), root_pt);
        }
        if (lay.x1 >= 0 && d1.norm() > 0.0)
            x0.segment(lay.x1, 2 * s.n_t) = stack_precoder(std::sqrt(share * s.p_t) * d1, root_pt);
        if (lay.x2 >= 0 && d2.norm() > 0.0)
            x0.segment(lay.x2, 2 * s.n_t) = stack_precoder(std::sqrt(share * s.p_t) * d2, root_pt);
    }

    // Keep strictly inside the power ball.
    double pw = 0.0;
    for (int o : {lay.xc, lay.x1, lay.x2})
        if (o >= 0)
            pw += x0.segment(o, 2 * s.n_t).squaredNorm();
    if (pw > 0.95)
        for (int o : {lay.xc, lay.x1, lay.x2})
            if (o >= 0)
                x0.segment(o, 2 * s.n_t) *= std::sqrt(0.9 / pw);

    // Shares and epigraph variable. The QoS rows evaluated with zero shares
    // give each share's headroom directly.
    if (lay.t >= 0)
    {
        double t_req = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < 2; ++k)
            t_req = std::max(t_req, asm_prob.branch[k].value(x0));

        double cap_sum = 0.0;
        std::array<double, 2> cap{0.0, 0.0};
        bool ok = true;
        for (int k = 0; k < 2; ++k)
        {
            int off = k == 0 ? lay.c1 : lay.c2;
            const RowKind kind = k == 0 ? RowKind::qos_1 : RowKind::qos_2;
            double qos_val = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < asm_prob.rows.size(); ++i)
                if (asm_prob.rows[i] == kind)
                    qos_val = asm_prob.prob.constraints[i].value(x0);
            if (off >= 0)
            {
                if (qos_val > -std::numeric_limits<double>::infinity())
                    cap[k] = std::min(0.0, -qos_val);
                cap_sum += cap[k];
            }
            else if (qos_val >= 0.0)
                ok = false;
        }
        if (!ok)
            return false;

        double avail = spec.theta + cap_sum - t_req;
        if (!(avail > 1e-9))
            return false;
        double m = std::min(0.05, avail / 8.0);
        double c_sum = 0.0;
        for (int k = 0; k < 2; ++k)
        {
            int off = k == 0 ? lay.c1 : lay.c2;
            if (off >= 0)
            {
                x0[off] = cap[k] - m;
                c_sum += x0[off];
            }
        }
        double hi = spec.theta + c_sum;
        if (!(hi > t_req))
            return false;
        x0[lay.t] = t_req + std::min(0.1, 0.5 * (hi - t_req));
    }

    return asm_prob.prob.strictly_feasible(x0);
}

// Newton steps on the stationarity and active-constraint system. The
// merit comparison of the final centering stage saturates in double
// precision at large barrier weight, which leaves the iterate measurably
// off the exact KKT point; full steps on the active-set system remove that
// offset. The set is pivoted between steps: the worst constraint whose
// multiplier a step drives negative leaves, the worst violated one joins,
// which settles degenerate vertices where tight constraints coincide or
// outnumber the face that actually binds. The least-squares solve keeps the
// step defined when such constraints make the system singular. Callers keep
// the result only when the measured residual drops.
inline void polish_kkt(const QcqpProblem &prob, Eigen::VectorXd &x, Eigen::VectorXd &lambda)
{
    const int n = prob.dim();
    const int m = static_cast<int>(prob.constraints.size());
    if (m == 0)
        return;
    const double f0_scale = 1.0 + std::abs(prob.objective.value(x));
    const double lam_max = lambda.maxCoeff();
    std::vector<int> active;
    for (int i = 0; i < m; ++i)
        if (lambda[i] > 1e-10 * (1.0 + lam_max) &&
            prob.constraints[i].value(x) > -1e-6 * f0_scale)
            active.push_back(i);

    for (int pass = 0; pass < 16; ++pass)
    {
        const int na = static_cast<int>(active.size());
        Eigen::MatrixXd kmat = Eigen::MatrixXd::Zero(n + na, n + na);
        Eigen::VectorXd rhs(n + na);
        Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n, n);
        prob.objective.add_hessian(1.0, hess);
        Eigen::VectorXd stat = prob.objective.gradient(x);
        for (int j = 0; j < na; ++j)
        {
            const QuadraticFn &f = prob.constraints[active[j]];
            f.add_hessian(lambda[active[j]], hess);
            Eigen::VectorXd g = f.gradient(x);
            kmat.col(n + j).head(n) = g;
            kmat.row(n + j).head(n) = g.transpose();
            stat += lambda[active[j]] * g;
            rhs[n + j] = -f.value(x);
        }
        kmat.topLeftCorner(n, n) = hess;
        rhs.head(n) = -stat;

        Eigen::VectorXd d = kmat.completeOrthogonalDecomposition().solve(rhs);
        if (!d.allFinite() ||
            d.head(n).cwiseAbs().maxCoeff() > 1e3 * (1.0 + x.cwiseAbs().maxCoeff()))
            break;
        x += d.head(n);
        int worst = -1;
        double worst_lam = -1e-12 * (1.0 + lam_max);
        for (int j = 0; j < na; ++j)
        {
            lambda[active[j]] += d[n + j];
            if (lambda[active[j]] < worst_lam)
            {
                worst_lam = lambda[active[j]];
                worst = j;
            }
        }
        if (worst >= 0)
        {
            lambda[active[worst]] = 0.0;
            active.erase(active.begin() + worst);
            continue;
        }
        int add = -1;
        double add_f = 1e-10 * f0_scale;
        for (int i = 0; i < m; ++i)
        {
            if (std::find(active.begin(), active.end(), i) != active.end())
                continue;
            double fi = prob.constraints[i].value(x);
            if (fi > add_f)
            {
                add_f = fi;
                add = i;
            }
        }
        if (add >= 0)
        {
            active.push_back(add);
            continue;
        }
        if (d.cwiseAbs().maxCoeff() < 1e-14 * (1.0 + x.cwiseAbs().maxCoeff()))
            break;
    }
    lambda = lambda.cwiseMax(0.0);
}

// Nonnegative least-squares fit of the active multipliers, removing the
// cancellation noise of barrier slack estimates. Multipliers outside the
// fitted set are zeroed, so the reported stationarity is the fit residual
// itself rather than the fit residual plus barrier leftovers.
inline Eigen::VectorXd refine_multipliers(const QcqpProblem &prob, const Eigen::VectorXd &x,
                                          const Eigen::VectorXd &lambda_barrier)
{
    const int m = static_cast<int>(prob.constraints.size());
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
    if (m == 0)
        return lambda;
    double lam_max = lambda_barrier.maxCoeff();
    std::vector<int> active;
    for (int i = 0; i < m; ++i)
        if (lambda_barrier[i] > 1e-6 * (1.0 + lam_max))
            active.push_back(i);
    if (active.empty())
        return lambda;

    Eigen::VectorXd g0 = prob.objective.gradient(x);
    while (!active.empty())
    {
        const int na = static_cast<int>(active.size());
        Eigen::MatrixXd gmat(x.size(), na);
        for (int j = 0; j < na; ++j)
            gmat.col(j) = prob.constraints[active[j]].gradient(x);
        Eigen::MatrixXd gtg = gmat.transpose() * gmat;
        gtg.diagonal().array() += 1e-14 * (1.0 + gtg.diagonal().maxCoeff());
        Eigen::VectorXd mu = gtg.ldlt().solve(-gmat.transpose() * g0);
        int worst = -1;
        double worst_val = -1e-12;
        for (int j = 0; j < na; ++j)
            if (mu[j] < worst_val)
            {
                worst_val = mu[j];
                worst = j;
            }
        if (worst < 0)
        {
            for (int j = 0; j < na; ++j)
                lambda[active[j]] = std::max(0.0, mu[j]);
            break;
        }
        active.erase(active.begin() + worst);
    }
    return lambda;
}

} // namespace detail

// Largest scaled KKT residual of a solved subproblem: primal feasibility,
// stationarity, dual feasibility, and complementary slackness, evaluated on
// the internally scaled program.
inline double kkt_residual(const SubproblemSpec &spec, const SubproblemSolution &sol,
                           const AssemblyCache *cache = nullptr)
{
    AssembledQcqp asm_prob = assemble_qcqp(spec, cache);
    const QcqpProblem &prob = asm_prob.prob;
    if (sol.x_internal.size() != asm_prob.layout.n)
        throw std::invalid_argument("kkt_residual: solution does not match the assembled layout");
    if (sol.lambda.size() != static_cast<Eigen::Index>(prob.constraints.size()))
        throw std::invalid_argument("kkt_residual: multiplier count mismatch");

    const Eigen::VectorXd &x = sol.x_internal;
    const Eigen::VectorXd &lam = sol.lambda;

    double primal = 0.0;
    double compl_res = 0.0;
    Eigen::VectorXd stat = prob.objective.gradient(x);
    const double f0 = prob.objective.value(x);
    for (std::size_t i = 0; i < prob.constraints.size(); ++i)
    {
        double fi = prob.constraints[i].value(x);
        primal = std::max(primal, fi);
        compl_res = std::max(compl_res, std::abs(lam[i] * fi) / (1.0 + std::abs(f0)));
        stat += lam[i] * prob.constraints[i].gradient(x);
    }
    primal = std::max(primal, 0.0);
    double dual = std::max(0.0, -lam.minCoeff());
    double g0_scale = 1.0 + prob.objective.gradient(x).cwiseAbs().maxCoeff();
    double stationarity = stat.cwiseAbs().maxCoeff() / g0_scale;
    return std::max({primal, stationarity, dual, compl_res});
}

// Solves one convex step. warm, when given, seeds the precoder part of the
// starting point; gap_override (> 0) tightens the interior-point duality
// gap below spec.tolerance.
inline SubproblemSolution solve_subproblem(const SubproblemSpec &spec,
                                           const PrecoderSet *warm = nullptr,
                                           const AssemblyCache *cache = nullptr,
                                           double gap_override = 0.0)
{
    AssembledQcqp asm_prob = assemble_qcqp(spec, cache);
    const VarLayout &lay = asm_prob.layout;
    const Scenario &s = spec.scenario;

    SubproblemSolution sol;
    sol.p = PrecoderSet::zero(s.n_t);
    if (asm_prob.precheck == SolveStatus::infeasible)
    {
        sol.status = SolveStatus::infeasible;
        return sol;
    }

    // The duality gap runs tighter than the advertised tolerance so that
    // multiplier and KKT residuals stay an order of magnitude below it.
    QcqpOptions opts;
    opts.gap_tol = gap_override > 0.0 ? gap_override : std::min(spec.tolerance, 1e-10);

    Eigen::VectorXd x0;
    if (!detail::interior_start(asm_prob, spec, warm, x0))
    {
        Phase1Result ph = phase1_feasible_point(asm_prob.prob, Eigen::VectorXd::Zero(lay.n), opts);
        if (!ph.feasible)
        {
            sol.status = ph.min_violation > 1e-6 ? SolveStatus::infeasible : SolveStatus::max_iter;
            return sol;
        }
        x0 = ph.x;
    }

    auto attempt = [&](const Eigen::VectorXd &start) {
        QcqpResult res = barrier_minimize(asm_prob.prob, start, opts);
        SubproblemSolution cand;
        cand.p = PrecoderSet::zero(s.n_t);
        cand.x_internal = res.x;
        cand.lambda = detail::refine_multipliers(asm_prob.prob, res.x, res.lambda);
        cand.newton_iters = res.newton_iters;
        cand.status =
            res.status == QcqpStatus::optimal ? SolveStatus::optimal : SolveStatus::max_iter;
        if (cand.status == SolveStatus::optimal)
        {
            cand.kkt = kkt_residual(spec, cand, cache);
            SubproblemSolution polished = cand;
            detail::polish_kkt(asm_prob.prob, polished.x_internal, polished.lambda);
            polished.kkt = kkt_residual(spec, polished, cache);
            if (polished.kkt < cand.kkt)
                cand = std::move(polished);
        }
        return cand;
    };

    // A step only counts as solved when its measured residual confirms
    // stationarity. Centering can stall on a poor start near a degenerate
    // vertex, so a miss is retried once from the default construction, and
    // a result that still misses is reported as under-solved. NaN compares
    // false, so an unmeasured residual never qualifies.
    const double stationary_tol = 1e-7;
    auto solved = [&](const SubproblemSolution &c) {
        return c.status == SolveStatus::optimal && c.kkt <= stationary_tol;
    };
    sol = attempt(x0);
    if (!solved(sol))
    {
        Eigen::VectorXd x1;
        if (detail::interior_start(asm_prob, spec, nullptr, x1))
        {
            SubproblemSolution retry = attempt(x1);
            bool take = solved(retry) ||
                        (retry.status == SolveStatus::optimal &&
                         (sol.status != SolveStatus::optimal || retry.kkt < sol.kkt));
            if (take)
                sol = std::move(retry);
        }
        if (!solved(sol))
            sol.status = SolveStatus::max_iter;
    }

    const double root_pt = std::sqrt(s.p_t);
    const Eigen::VectorXd &x = sol.x_internal;
    if (lay.xc >= 0)
        sol.p.p_c = detail::unstack_precoder(x.segment(lay.xc, 2 * s.n_t), root_pt);
    if (lay.x1 >= 0)
        sol.p.p_1 = detail::unstack_precoder(x.segment(lay.x1, 2 * s.n_t), root_pt);
    if (lay.x2 >= 0)
        sol.p.p_2 = detail::unstack_precoder(x.segment(lay.x2, 2 * s.n_t), root_pt);
    sol.c_bar[0] = lay.c1 >= 0 ? x[lay.c1] : 0.0;
    sol.c_bar[1] = lay.c2 >= 0 ? x[lay.c2] : 0.0;
    sol.objective = subproblem_objective(spec, sol.p, sol.c_bar);
    return sol;
}

// Writes the assembled program in a plain text, matrix-market style layout
// for cross-checking against external solvers.
inline void dump_qcqp(const AssembledQcqp &asm_prob, const std::string &path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("dump_qcqp: cannot open " + path);
    out.precision(17);
    const QcqpProblem &prob = asm_prob.prob;
    out << "qcqp 1\n";
    out << "n " << asm_prob.layout.n << " m " << prob.constraints.size() << "\n";
    auto write_fn = [&out](const QuadraticFn &f) {
        int nnz = 0;
        if (f.has_quad())
            for (int i = 0; i < f.Q.rows(); ++i)
                for (int j = 0; j < f.Q.cols(); ++j)
                    if (f.Q(i, j) != 0.0)
                        ++nnz;
        out << "Q " << nnz << "\n";
        if (f.has_quad())
            for (int i = 0; i < f.Q.rows(); ++i)
                for (int j = 0; j < f.Q.cols(); ++j)
                    if (f.Q(i, j) != 0.0)
                        out << i << " " << j << " " << f.Q(i, j) << "\n";
        int qnnz = 0;
        for (int i = 0; i < f.q.size(); ++i)
            if (f.q[i] != 0.0)
                ++qnnz;
        out << "q " << qnnz << "\n";
        for (int i = 0; i < f.q.size(); ++i)
            if (f.q[i] != 0.0)
                out << i << " " << f.q[i] << "\n";
        out << "r " << f.r << "\n";
    };
    out << "objective\n";
    QuadraticFn full_obj = prob.objective;
    full_obj.r += asm_prob.obj_shift;
    write_fn(full_obj);
    for (std::size_t i = 0; i < prob.constraints.size(); ++i)
    {
        out << "constraint " << i << "\n";
        write_fn(prob.constraints[i]);
    }
}

} // namespace crsopt
