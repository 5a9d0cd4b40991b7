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
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "kv_file.hpp"

namespace crsopt {

using cxd = std::complex<double>;

// Problem instance for the downlink: base station with n_t antennas serving
// two single-antenna users over h1, h2; user 1 relays the common stream to
// user 2 over the scalar link h3 in the second time slot.
struct Scenario
{
    int n_t = 0;
    Eigen::VectorXcd h1; // channel to user 1, length n_t
    Eigen::VectorXcd h2; // channel to user 2, length n_t
    cxd h3{0.0, 0.0};    // user 1 to user 2 link
    double p_t = 1.0;    // transmit power budget, linear units
    double p_r = 1.0;    // relay power budget, linear units
    std::array<double, 2> sigma_sq{1.0, 1.0}; // per-user noise variance
    std::array<double, 2> r_tar{0.0, 0.0};    // per-user rate targets, bits/s/Hz

    // Throws std::invalid_argument on any violated structural constraint.
    void validate() const
    {
        if (n_t < 2)
            throw std::invalid_argument("scenario: n_t must be >= 2");
        if (h1.size() != n_t || h2.size() != n_t)
            throw std::invalid_argument("scenario: channel length must equal n_t");
        auto finite = [](double v) { return std::isfinite(v); };
        for (int i = 0; i < n_t; ++i)
            if (!finite(h1[i].real()) || !finite(h1[i].imag()) || !finite(h2[i].real()) ||
                !finite(h2[i].imag()))
                throw std::invalid_argument("scenario: non-finite channel entry");
        if (!finite(h3.real()) || !finite(h3.imag()))
            throw std::invalid_argument("scenario: non-finite h3");
        if (!finite(p_t) || p_t <= 0.0)
            throw std::invalid_argument("scenario: p_t must be positive");
        if (!finite(p_r) || p_r <= 0.0)
            throw std::invalid_argument("scenario: p_r must be positive");
        for (double s : sigma_sq)
            if (!finite(s) || s <= 0.0)
                throw std::invalid_argument("scenario: sigma_sq must be positive");
        for (double r : r_tar)
            if (!finite(r) || r < 0.0)
                throw std::invalid_argument("scenario: r_tar must be >= 0");
    }

    KvFile to_kv() const
    {
        KvFile kv;
        kv.set_int("n_t", n_t);
        kv.set_double("p_t", p_t);
        kv.set_double("p_r", p_r);
        kv.set_double("sigma_sq1", sigma_sq[0]);
        kv.set_double("sigma_sq2", sigma_sq[1]);
        kv.set_double("r_tar1", r_tar[0]);
        kv.set_double("r_tar2", r_tar[1]);
        for (int i = 0; i < n_t; ++i)
        {
            kv.set("h1_" + std::to_string(i), format_complex(h1[i]));
            kv.set("h2_" + std::to_string(i), format_complex(h2[i]));
        }
        kv.set("h3", format_complex(h3));
        return kv;
    }

    static Scenario from_kv(const KvFile &kv)
    {
        Scenario s;
        s.n_t = static_cast<int>(kv.get_int("n_t"));
        if (s.n_t < 2)
            throw std::invalid_argument("scenario: n_t must be >= 2");
        s.p_t = kv.get_double("p_t");
        s.p_r = kv.get_double("p_r");
        s.sigma_sq = {kv.get_double("sigma_sq1", 1.0), kv.get_double("sigma_sq2", 1.0)};
        s.r_tar = {kv.get_double("r_tar1", 0.0), kv.get_double("r_tar2", 0.0)};
        s.h1.resize(s.n_t);
        s.h2.resize(s.n_t);
        for (int i = 0; i < s.n_t; ++i)
        {
            s.h1[i] = parse_complex(kv.raw("h1_" + std::to_string(i)));
            s.h2[i] = parse_complex(kv.raw("h2_" + std::to_string(i)));
        }
        s.h3 = parse_complex(kv.raw("h3"));
        s.validate();
        return s;
    }

    // Fingerprint of the canonical serialization; stable across runs.
    std::uint64_t hash() const { return fnv1a64(to_kv().serialize()); }

    void save(const std::string &path) const { to_kv().save(path); }
    static Scenario load(const std::string &path) { return from_kv(KvFile::load(path)); }

    // Complex values serialize as "re,im".
    static std::string format_complex(cxd v)
    {
        return KvFile::format_double(v.real()) + "," + KvFile::format_double(v.imag());
    }

    static cxd parse_complex(const std::string &s)
    {
        std::size_t comma = s.find(',');
        if (comma == std::string::npos)
            throw std::invalid_argument("complex value must be 're,im': '" + s + "'");
        return {KvFile::parse_double(s.substr(0, comma), "re"),
                KvFile::parse_double(s.substr(comma + 1), "im")};
    }
};

// Deterministic channel family: h1 all ones, h2 a phase ramp of strength
// lambda1 with per-antenna increment alpha, h3 = lambda2.
struct ChannelGeometry
{
    double lambda1 = 1.0; // relative strength of h2
    double lambda2 = 1.0; // strength of the relay link h3
    double alpha = 0.0;   // channel angle between users, radians
};

// snr_db maps to the power budget as p_t = p_r = 10^(snr_db/10) against
// unit noise variance.
inline Scenario build_parametric_scenario(int n_t, const ChannelGeometry &geom, double snr_db,
                                          std::array<double, 2> r_tar = {0.0, 0.0})
{
    if (n_t < 2)
        throw std::invalid_argument("build_parametric_scenario: n_t must be >= 2");
    if (!std::isfinite(geom.lambda1) || geom.lambda1 < 0.0 || !std::isfinite(geom.lambda2) ||
        geom.lambda2 < 0.0 || !std::isfinite(geom.alpha) || !std::isfinite(snr_db))
        throw std::invalid_argument("build_parametric_scenario: non-finite or negative geometry");

    Scenario s;
    s.n_t = n_t;
    s.h1 = Eigen::VectorXcd::Ones(n_t);
    s.h2.resize(n_t);
    for (int m = 0; m < n_t; ++m)
        s.h2[m] = geom.lambda1 * std::polar(1.0, static_cast<double>(m) * geom.alpha);
    s.h3 = cxd{geom.lambda2, 0.0};
    s.p_t = s.p_r = std::pow(10.0, snr_db / 10.0);
    s.r_tar = r_tar;
    s.validate();
    return s;
}

namespace detail {

// Box-Muller over a raw mt19937_64 stream. std::normal_distribution is
// implementation-defined, so this keeps scenarios bit-identical across
// standard libraries.
class GaussianDraw
{
  public:
    explicit GaussianDraw(std::uint64_t seed) : rng_(seed) {}

    // Standard complex Gaussian: real and imaginary parts N(0, 1/2).
    cxd complex_unit()
    {
        double u1 = uniform_open();
        double u2 = uniform_open();
        constexpr double two_pi = 2.0 * std::numbers::pi;
        constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
        double mag = std::sqrt(-2.0 * std::log(u1));
        double z0 = mag * std::cos(two_pi * u2);
        double z1 = mag * std::sin(two_pi * u2);
        return {z0 * inv_sqrt2, z1 * inv_sqrt2};
    }

  private:
    // Uniform on (0,1), never exactly 0 or 1.
    double uniform_open()
    {
        return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
    }

    std::mt19937_64 rng_;
};

} // namespace detail

// Stress-test generator: i.i.d. circularly symmetric unit-variance complex
// Gaussian entries. Identical (n_t, seed, snr_db) reproduce bit-identical
// scenarios.
inline Scenario build_random_scenario(int n_t, std::uint64_t seed, double snr_db,
                                      std::array<double, 2> r_tar = {0.0, 0.0})
{
    if (n_t < 2)
        throw std::invalid_argument("build_random_scenario: n_t must be >= 2");
    if (!std::isfinite(snr_db))
        throw std::invalid_argument("build_random_scenario: non-finite snr_db");

    detail::GaussianDraw draw(seed);
    Scenario s;
    s.n_t = n_t;
    s.h1.resize(n_t);
    s.h2.resize(n_t);
    for (int i = 0; i < n_t; ++i)
        s.h1[i] = draw.complex_unit();
    for (int i = 0; i < n_t; ++i)
        s.h2[i] = draw.complex_unit();
    s.h3 = draw.complex_unit();
    s.p_t = s.p_r = std::pow(10.0, snr_db / 10.0);
    s.r_tar = r_tar;
    s.validate();
    return s;
}

// Deterministic geometry for the figure sweeps: user 1 sees the all-ones
// channel, user 2 a steering vector with per-antenna phase increment alpha
// scaled by lambda1, and the relay link is the real gain lambda2. Both
// power budgets follow the SNR in dB against unit noise.
inline Scenario build_steering_scenario(int n_t, double alpha, double lambda1, double lambda2,
                                        double snr_db, std::array<double, 2> r_tar = {0.0, 0.0})
{
    if (n_t < 2)
        throw std::invalid_argument("build_steering_scenario: n_t must be >= 2");
    if (!std::isfinite(alpha) || !std::isfinite(snr_db))
        throw std::invalid_argument("build_steering_scenario: non-finite parameter");
    if (!(lambda1 > 0.0) || !(lambda2 >= 0.0))
        throw std::invalid_argument("build_steering_scenario: need lambda1 > 0 and lambda2 >= 0");

    Scenario s;
    s.n_t = n_t;
    s.h1 = Eigen::VectorXcd::Ones(n_t);
    s.h2.resize(n_t);
    for (int i = 0; i < n_t; ++i)
        s.h2[i] = lambda1 * std::polar(1.0, alpha * i);
    s.h3 = {lambda2, 0.0};
    s.p_t = s.p_r = std::pow(10.0, snr_db / 10.0);
    s.r_tar = r_tar;
    s.validate();
    return s;
}

} // namespace crsopt
