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
#include <complex>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "scenario.hpp"

// Closed forms for the two-user rate-splitting link with user relaying.
// Downlink slot (fraction theta of the frame): the base station sends
// x = p_c s_c + p_1 s_1 + p_2 s_2 with unit-power streams. Both users
// decode s_c first treating private streams as noise, cancel it, then
// decode their own private stream. Relay slot (fraction 1-theta): user 1
// re-encodes s_c and forwards it to user 2 over h3 with power p_r.
// All rates are in bits/s/Hz, normalized by the total frame duration.

namespace crsopt {

// Columns of the precoder matrix P = [p_c p_1 p_2].
struct PrecoderSet
{
    Eigen::VectorXcd p_c, p_1, p_2;

    double total_power() const
    {
        return p_c.squaredNorm() + p_1.squaredNorm() + p_2.squaredNorm();
    }

    static PrecoderSet zero(int n_t)
    {
        PrecoderSet p;
        p.p_c = Eigen::VectorXcd::Zero(n_t);
        p.p_1 = Eigen::VectorXcd::Zero(n_t);
        p.p_2 = Eigen::VectorXcd::Zero(n_t);
        return p;
    }
};

// Scalar receive equalizers, one per (stream, user) pair that decodes it.
struct Equalizers
{
    cxd g_c1{0.0, 0.0}, g_c2{0.0, 0.0};
    cxd g_1{0.0, 0.0}, g_2{0.0, 0.0};
};

// Positive MSE weights; the log of each weight must exist.
struct MseWeights
{
    double w_c1 = 1.0, w_c2 = 1.0;
    double w_1 = 1.0, w_2 = 1.0;
};

// All SINRs and rates of one design, evaluated at a given theta.
struct RateReport
{
    double gamma_c1 = 0.0, gamma_c2 = 0.0; // common-stream SINRs, direct slot
    double gamma_relay = 0.0;              // relay-link SNR at user 2
    double gamma_1 = 0.0, gamma_2 = 0.0;   // private-stream SINRs
    double r_c = 0.0;                      // achievable common rate
    double r_p1 = 0.0, r_p2 = 0.0;         // private rates
    double r_relay_link = 0.0;             // relay-hop rate
};

// Per-user shares of the common rate, both >= 0, summing to at most r_c.
struct CommonRateSplit
{
    double c_1 = 0.0, c_2 = 0.0;
};

namespace detail {

inline void check_user(int user)
{
    if (user != 1 && user != 2)
        throw std::invalid_argument("user index must be 1 or 2");
}

inline void check_dims(const Scenario &s, const PrecoderSet &p)
{
    if (p.p_c.size() != s.n_t || p.p_1.size() != s.n_t || p.p_2.size() != s.n_t)
        throw std::invalid_argument("precoder length must equal n_t");
}

inline void check_theta(double theta)
{
    if (!(theta > 0.0) || theta > 1.0)
        throw std::invalid_argument("theta must lie in (0, 1]");
}

inline const Eigen::VectorXcd &channel(const Scenario &s, int user)
{
    return user == 1 ? s.h1 : s.h2;
}

inline double abs_sq(cxd v) { return v.real() * v.real() + v.imag() * v.imag(); }

// Received power of the private streams plus noise at user k.
inline double t_private(const Scenario &s, const PrecoderSet &p, int user)
{
    const Eigen::VectorXcd &h = channel(s, user);
    return abs_sq(h.dot(p.p_1)) + abs_sq(h.dot(p.p_2)) + s.sigma_sq[user - 1];
}

// Total received power plus noise at user k (common stream included).
inline double t_common(const Scenario &s, const PrecoderSet &p, int user)
{
    const Eigen::VectorXcd &h = channel(s, user);
    return abs_sq(h.dot(p.p_c)) + t_private(s, p, user);
}

inline double log2_1p(double x) { return std::log2(1.0 + x); }

} // namespace detail

// SINR of the common stream at user k in the direct slot; private streams
// act as interference.
inline double common_sinr(const Scenario &s, const PrecoderSet &p, int user)
{
    detail::check_user(user);
    detail::check_dims(s, p);
    const Eigen::VectorXcd &h = detail::channel(s, user);
    return detail::abs_sq(h.dot(p.p_c)) / detail::t_private(s, p, user);
}

// SINR of user k's private stream after the common stream is cancelled;
// only the other user's private stream interferes.
inline double private_sinr(const Scenario &s, const PrecoderSet &p, int user)
{
    detail::check_user(user);
    detail::check_dims(s, p);
    const Eigen::VectorXcd &h = detail::channel(s, user);
    const Eigen::VectorXcd &own = user == 1 ? p.p_1 : p.p_2;
    const Eigen::VectorXcd &other = user == 1 ? p.p_2 : p.p_1;
    return detail::abs_sq(h.dot(own)) /
           (detail::abs_sq(h.dot(other)) + s.sigma_sq[user - 1]);
}

// Relay-hop SNR at user 2; independent of precoders and theta.
inline double relay_sinr(const Scenario &s) { return detail::abs_sq(s.h3) * s.p_r; }

inline double relay_link_rate(const Scenario &s) { return detail::log2_1p(relay_sinr(s)); }

// Achievable common rate: the minimum of user 1's direct-slot rate and
// user 2's combined direct-plus-relay rate.
inline double common_rate(const Scenario &s, const PrecoderSet &p, double theta)
{
    detail::check_theta(theta);
    double r1 = theta * detail::log2_1p(common_sinr(s, p, 1));
    double r2 = theta * detail::log2_1p(common_sinr(s, p, 2)) + (1.0 - theta) * relay_link_rate(s);
    return std::min(r1, r2);
}

inline double private_rate(const Scenario &s, const PrecoderSet &p, double theta, int user)
{
    detail::check_theta(theta);
    return theta * detail::log2_1p(private_sinr(s, p, user));
}

inline RateReport rate_report(const Scenario &s, const PrecoderSet &p, double theta)
{
    detail::check_theta(theta);
    RateReport r;
    r.gamma_c1 = common_sinr(s, p, 1);
    r.gamma_c2 = common_sinr(s, p, 2);
    r.gamma_relay = relay_sinr(s);
    r.gamma_1 = private_sinr(s, p, 1);
    r.gamma_2 = private_sinr(s, p, 2);
    r.r_relay_link = detail::log2_1p(r.gamma_relay);
    r.r_c = std::min(theta * detail::log2_1p(r.gamma_c1),
                     theta * detail::log2_1p(r.gamma_c2) + (1.0 - theta) * r.r_relay_link);
    r.r_p1 = theta * detail::log2_1p(r.gamma_1);
    r.r_p2 = theta * detail::log2_1p(r.gamma_2);
    return r;
}

// MSEs of user k's common and private stream estimates for arbitrary scalar
// equalizers: eps = |g|^2 T - 2 Re{g h^H p} + 1.
inline std::pair<double, double> mse_pair(const Scenario &s, const PrecoderSet &p,
                                          const Equalizers &eq, int user)
{
    detail::check_user(user);
    detail::check_dims(s, p);
    const Eigen::VectorXcd &h = detail::channel(s, user);
    cxd g_c = user == 1 ? eq.g_c1 : eq.g_c2;
    cxd g_p = user == 1 ? eq.g_1 : eq.g_2;
    const Eigen::VectorXcd &own = user == 1 ? p.p_1 : p.p_2;
    double t_p = detail::t_private(s, p, user);
    double t_c = detail::abs_sq(h.dot(p.p_c)) + t_p;
    double eps_c = detail::abs_sq(g_c) * t_c - 2.0 * (g_c * h.dot(p.p_c)).real() + 1.0;
    double eps_p = detail::abs_sq(g_p) * t_p - 2.0 * (g_p * h.dot(own)).real() + 1.0;
    return {eps_c, eps_p};
}

// MSE-minimizing equalizers g = p^H h / T for the common and private stream.
inline std::pair<cxd, cxd> mmse_equalizers(const Scenario &s, const PrecoderSet &p, int user)
{
    detail::check_user(user);
    detail::check_dims(s, p);
    const Eigen::VectorXcd &h = detail::channel(s, user);
    const Eigen::VectorXcd &own = user == 1 ? p.p_1 : p.p_2;
    double t_p = detail::t_private(s, p, user);
    double t_c = detail::abs_sq(h.dot(p.p_c)) + t_p;
    cxd g_c = std::conj(h.dot(p.p_c)) / t_c;
    cxd g_p = std::conj(h.dot(own)) / t_p;
    return {g_c, g_p};
}

// Minimum MSEs in the algebraic form T^{-1} I, where I is the residual
// interference-plus-noise power of the stream.
inline std::pair<double, double> mmse_epsilons(const Scenario &s, const PrecoderSet &p, int user)
{
    detail::check_user(user);
    detail::check_dims(s, p);
    const Eigen::VectorXcd &h = detail::channel(s, user);
    const Eigen::VectorXcd &own = user == 1 ? p.p_1 : p.p_2;
    double t_p = detail::t_private(s, p, user);
    double t_c = detail::abs_sq(h.dot(p.p_c)) + t_p;
    double eps_c = t_p / t_c;
    double eps_p = (t_p - detail::abs_sq(h.dot(own))) / t_p;
    return {eps_c, eps_p};
}

// Reciprocals of the minimum MSEs; always >= 1.
inline std::pair<double, double> mmse_weights(const Scenario &s, const PrecoderSet &p, int user)
{
    auto [eps_c, eps_p] = mmse_epsilons(s, p, user);
    return {1.0 / eps_c, 1.0 / eps_p};
}

// Weighted MSE cost augmented with the log of the weight.
inline double augmented_wmse(double eps, double w)
{
    if (!(w > 0.0))
        throw std::invalid_argument("augmented_wmse: weight must be positive");
    return w * eps - std::log2(w);
}

// At MMSE equalizers and reciprocal-MSE weights, the augmented cost of each
// stream equals one minus its per-slot rate. Returns (common, private)
// deviations from that identity; both are zero to machine precision.
inline std::pair<double, double> rate_wmmse_gap(const Scenario &s, const PrecoderSet &p, int user)
{
    auto [g_c, g_p] = mmse_equalizers(s, p, user);
    auto [eps_c_m, eps_p_m] = mmse_epsilons(s, p, user);
    Equalizers eq;
    (user == 1 ? eq.g_c1 : eq.g_c2) = g_c;
    (user == 1 ? eq.g_1 : eq.g_2) = g_p;
    auto [eps_c, eps_p] = mse_pair(s, p, eq, user);
    double xi_c = augmented_wmse(eps_c, 1.0 / eps_c_m);
    double xi_p = augmented_wmse(eps_p, 1.0 / eps_p_m);
    double r_c_slot = detail::log2_1p(common_sinr(s, p, user));
    double r_p_slot = detail::log2_1p(private_sinr(s, p, user));
    return {xi_c - (1.0 - r_c_slot), xi_p - (1.0 - r_p_slot)};
}

} // namespace crsopt
