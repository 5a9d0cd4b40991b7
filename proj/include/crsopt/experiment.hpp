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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kv_file.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "rate_region.hpp"
#include "scenario.hpp"
#include "schemes.hpp"
#include "version.hpp"

// Batch experiment runner behind the command-line tool: a flat key-value
// config selects a scenario, strategies, and sweep grids; the run writes
// per-strategy region tables, a dominance summary, and a manifest whose
// hash pins every semantic input. Output bodies are deterministic for a
// given config, so reruns can be compared byte for byte.

namespace crsopt {

// Experiment description. Key names match the config file schema; unknown
// keys are rejected so typos cannot silently fall back to defaults.
struct ExperimentConfig
{
    // scenario = steering | file | random
    std::string scenario_source = "steering";

    // steering geometry (scenario = steering)
    int n_t = 4;
    double alpha = 0.0;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double snr_db = 10.0;
    std::array<double, 2> r_tar{0.0, 0.0};

    // scenario = file
    std::string scenario_file;

    // scenario = random (n_t, snr_db, r_tar reused; channels from seed)
    std::uint64_t seed = 0;

    std::vector<std::string> schemes;
    std::vector<double> u2_list = default_u2_list();
    std::vector<double> theta_grid = default_theta_grid();
    double eps = 1e-5;
    int max_iter = 200;
    double gap = 1e-10;
    double dominance_tol = 1e-3;
    std::string out_dir = "out";

    static ExperimentConfig from_kv(const KvFile &kv)
    {
        static const std::vector<std::string> known{
            "scenario", "n_t", "alpha", "lambda1", "lambda2", "snr_db",
            "r_tar1", "r_tar2", "scenario_file", "seed", "schemes", "u2",
            "theta_grid", "eps", "max_iter", "gap", "dominance_tol", "out_dir"};
        for (const auto &[key, value] : kv.entries())
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw std::invalid_argument("config: unknown key '" + key + "'");

        ExperimentConfig cfg;
        cfg.scenario_source = kv.get_string("scenario", cfg.scenario_source);
        cfg.n_t = static_cast<int>(kv.get_int("n_t", cfg.n_t));
        cfg.alpha = kv.get_double("alpha", cfg.alpha);
        cfg.lambda1 = kv.get_double("lambda1", cfg.lambda1);
        cfg.lambda2 = kv.get_double("lambda2", cfg.lambda2);
        cfg.snr_db = kv.get_double("snr_db", cfg.snr_db);
        cfg.r_tar = {kv.get_double("r_tar1", 0.0), kv.get_double("r_tar2", 0.0)};
        cfg.scenario_file = kv.get_string("scenario_file", "");
        cfg.seed = kv.get_u64("seed", 0);
        if (kv.has("schemes"))
            cfg.schemes = kv.get_string_list("schemes");
        else
            for (const SchemeSpec &spec : known_schemes())
                cfg.schemes.push_back(spec.name);
        if (kv.has("u2") && kv.get_string("u2") != "default")
            cfg.u2_list = kv.get_double_list("u2");
        if (kv.has("theta_grid") && kv.get_string("theta_grid") != "default")
            cfg.theta_grid = kv.get_double_list("theta_grid");
        cfg.eps = kv.get_double("eps", cfg.eps);
        cfg.max_iter = static_cast<int>(kv.get_int("max_iter", cfg.max_iter));
        cfg.gap = kv.get_double("gap", cfg.gap);
        cfg.dominance_tol = kv.get_double("dominance_tol", cfg.dominance_tol);
        cfg.out_dir = kv.get_string("out_dir", cfg.out_dir);
        cfg.validate();
        return cfg;
    }

    static ExperimentConfig load(const std::string &path)
    {
        return from_kv(KvFile::load(path));
    }

    void validate() const
    {
        if (scenario_source != "steering" && scenario_source != "file" &&
            scenario_source != "random")
            throw std::invalid_argument("config: scenario must be steering, file, or random");
        if (scenario_source == "file" && scenario_file.empty())
            throw std::invalid_argument("config: scenario = file needs scenario_file");
        if (schemes.empty())
            throw std::invalid_argument("config: empty scheme list");
        bool any_searched = false;
        for (const std::string &name : schemes)
            if (scheme_by_name(name).theta_policy.searched)
                any_searched = true;
        if (any_searched &&
            std::none_of(theta_grid.begin(), theta_grid.end(),
                         [](double t) { return t == 1.0; }))
            throw std::invalid_argument("config: theta_grid must contain 1.0");
        if (u2_list.empty())
            throw std::invalid_argument("config: empty u2 list");
        for (double u2 : u2_list)
            if (!(std::isfinite(u2) && u2 > 0.0))
                throw std::invalid_argument("config: u2 weights must be positive and finite");
        solver_options().validate();
        if (!(dominance_tol >= 0.0))
            throw std::invalid_argument("config: dominance_tol must be >= 0");
    }

    Scenario scenario() const
    {
        if (scenario_source == "file")
            return Scenario::from_kv(KvFile::load(scenario_file));
        if (scenario_source == "random")
            return build_random_scenario(n_t, seed, snr_db, r_tar);
        return build_steering_scenario(n_t, alpha, lambda1, lambda2, snr_db, r_tar);
    }

    AoOptions solver_options() const
    {
        AoOptions opts;
        opts.eps = eps;
        opts.max_iter = max_iter;
        opts.gap = gap;
        return opts;
    }

    // Fingerprint of every field that affects the numbers; the output
    // directory is deliberately excluded.
    std::uint64_t config_hash() const
    {
        KvFile kv;
        kv.set_u64("scenario", scenario().hash());
        std::string joined;
        for (const std::string &name : schemes)
            joined += name + ",";
        kv.set("schemes", joined);
        std::string u2s;
        for (double u2 : u2_list)
            u2s += KvFile::format_double(u2) + ",";
        kv.set("u2", u2s);
        std::string thetas;
        for (double t : theta_grid)
            thetas += KvFile::format_double(t) + ",";
        kv.set("theta_grid", thetas);
        kv.set_double("eps", eps);
        kv.set_int("max_iter", max_iter);
        kv.set_double("gap", gap);
        kv.set_double("dominance_tol", dominance_tol);
        kv.set_u64("seed", seed);
        return fnv1a64(kv.serialize());
    }
};

namespace detail {

inline std::string hash_hex(std::uint64_t h)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string scenario_hash_line(const Scenario &s)
{
    return "# scenario_hash = " + hash_hex(s.hash()) + "\n";
}

inline void write_text_file(const std::filesystem::path &path, const std::string &body)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write '" + path.string() + "'");
    out << body;
}

} // namespace detail

// Everything one run produces, besides the files on disk.
struct ExperimentResult
{
    int exit_code = 0;
    std::vector<RateRegion> regions;
    std::vector<std::string> artifacts;
    double wall_clock_seconds = 0.0;
};

// Runs the configured sweep and writes region-<scheme>.csv and
// hull-<scheme>.csv per strategy plus dominance.csv, hypervolume.csv, and
// manifest.txt into out_dir. Exit code 0 when every sweep point solved, 2
// when any point was infeasible. If a solver error interrupts the sweep,
// the finished weights are still flushed before the error propagates.
inline ExperimentResult run_experiment(const ExperimentConfig &cfg, int jobs = 1)
{
    auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    if (jobs < 1)
        throw std::invalid_argument("run_experiment: jobs must be >= 1");
    Scenario s = cfg.scenario();

    std::vector<SchemeSpec> specs;
    for (const std::string &name : cfg.schemes)
        specs.push_back(scheme_by_name(name));

    ExperimentResult result;
    result.regions.resize(specs.size());
    for (std::size_t j = 0; j < specs.size(); ++j)
    {
        result.regions[j].scheme = specs[j].name;
        result.regions[j].points.reserve(cfg.u2_list.size());
    }

    // Same chained schedule as sweep_schemes, inlined so a mid-sweep
    // failure still leaves the finished weights available for flushing.
    AoOptions opts = cfg.solver_options();
    std::exception_ptr sweep_error;
    try
    {
        std::vector<SchemeRun> warm;
        for (double u2 : cfg.u2_list)
        {
            std::vector<SchemeRun> runs =
                solve_schemes(s, {1.0, u2}, specs, opts, cfg.theta_grid, warm);
            for (std::size_t j = 0; j < specs.size(); ++j)
                result.regions[j].points.push_back(detail::to_region_point(u2, runs[j].point));
            warm = std::move(runs);
        }
    }
    catch (...)
    {
        sweep_error = std::current_exception();
    }
    for (RateRegion &region : result.regions)
        detail::finalize_region(region);

    std::filesystem::path out_dir(cfg.out_dir);
    std::filesystem::create_directories(out_dir);
    const std::string hash_line = detail::scenario_hash_line(s);

    for (const RateRegion &region : result.regions)
    {
        std::string base = "region-" + region.scheme + ".csv";
        detail::write_text_file(out_dir / base, hash_line + region_csv(region));
        result.artifacts.push_back(base);
        std::string hull = "hull-" + region.scheme + ".csv";
        detail::write_text_file(out_dir / hull, hash_line + hull_csv(region));
        result.artifacts.push_back(hull);
    }

    std::string dom = hash_line + "scheme_a,scheme_b,a_covers_b\n";
    for (const RateRegion &a : result.regions)
        for (const RateRegion &b : result.regions)
        {
            if (&a == &b)
                continue;
            dom += a.scheme;
            dom += ',';
            dom += b.scheme;
            dom += ',';
            dom += region_dominates(a, b, cfg.dominance_tol) ? '1' : '0';
            dom += '\n';
        }
    detail::write_text_file(out_dir / "dominance.csv", dom);
    result.artifacts.push_back("dominance.csv");

    std::string hv = hash_line + "scheme,hypervolume,feasible_points\n";
    for (const RateRegion &region : result.regions)
    {
        std::size_t feasible = 0;
        for (const RegionPoint &pt : region.points)
            feasible += pt.feasible() ? 1 : 0;
        hv += region.scheme;
        hv += ',';
        hv += detail::format_g12(feasible == 0 ? 0.0 : hypervolume(region));
        hv += ',';
        hv += std::to_string(feasible);
        hv += '\n';
    }
    detail::write_text_file(out_dir / "hypervolume.csv", hv);
    result.artifacts.push_back("hypervolume.csv");

    bool any_infeasible = false;
    bool all_points_present = !sweep_error;
    for (const RateRegion &region : result.regions)
        for (const RegionPoint &pt : region.points)
            any_infeasible = any_infeasible || !pt.feasible();
    result.exit_code = sweep_error ? 1 : (any_infeasible ? 2 : 0);

    auto t1 = std::chrono::steady_clock::now();
    result.wall_clock_seconds = std::chrono::duration<double>(t1 - t0).count();

    KvFile manifest;
    manifest.set("tool_version", k_version);
    manifest.set("config_hash", detail::hash_hex(cfg.config_hash()));
    manifest.set("scenario_hash", detail::hash_hex(s.hash()));
    std::string schemes_joined;
    for (std::size_t j = 0; j < cfg.schemes.size(); ++j)
        schemes_joined += (j ? "," : "") + cfg.schemes[j];
    manifest.set("schemes", schemes_joined);
    manifest.set_int("u2_points", static_cast<long long>(cfg.u2_list.size()));
    manifest.set_int("theta_points", static_cast<long long>(cfg.theta_grid.size()));
    manifest.set_double("eps", cfg.eps);
    manifest.set_int("max_iter", cfg.max_iter);
    manifest.set_u64("seed", cfg.seed);
    manifest.set_int("jobs", jobs);
    manifest.set("complete", all_points_present ? "yes" : "no");
    manifest.set_int("exit_code", result.exit_code);
    manifest.set_double("wall_clock_seconds", result.wall_clock_seconds);
    std::string artifacts_joined;
    for (std::size_t j = 0; j < result.artifacts.size(); ++j)
        artifacts_joined += (j ? "," : "") + result.artifacts[j];
    manifest.set("artifacts", artifacts_joined);
    manifest.save((out_dir / "manifest.txt").string());
    result.artifacts.push_back("manifest.txt");

    if (sweep_error)
        std::rethrow_exception(sweep_error);
    return result;
}

// One region table read back from disk.
struct RegionFile
{
    std::uint64_t scenario_hash = 0;
    RateRegion region;
};

// Parses a region-<scheme>.csv produced by run_experiment.
inline RegionFile read_region_csv(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot read '" + path + "'");

    RegionFile out;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# scenario_hash = ", 0) != 0)
        throw std::invalid_argument(path + ": missing scenario hash line");
    out.scenario_hash = std::stoull(line.substr(18), nullptr, 16);
    if (!std::getline(in, line) || line != "scheme,u2,theta,R1_tot,R2_tot,wsr,status")
        throw std::invalid_argument(path + ": unexpected header");

    int line_no = 2;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::size_t pos = 0;
        while (pos <= line.size())
        {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos)
                comma = line.size();
            cells.push_back(line.substr(pos, comma - pos));
            pos = comma + 1;
        }
        if (cells.size() != 7)
            throw std::invalid_argument(path + ": line " + std::to_string(line_no) +
                                        ": expected 7 columns");
        if (out.region.scheme.empty())
            out.region.scheme = cells[0];
        else if (out.region.scheme != cells[0])
            throw std::invalid_argument(path + ": mixed scheme names");

        RegionPoint pt;
        pt.u2 = std::stod(cells[1]);
        pt.theta = std::stod(cells[2]);
        pt.r1 = std::stod(cells[3]);
        pt.r2 = std::stod(cells[4]);
        pt.wsr = std::stod(cells[5]);
        if (cells[6] == "optimal")
            pt.status = SolveStatus::optimal;
        else if (cells[6] == "max_iter")
            pt.status = SolveStatus::max_iter;
        else if (cells[6] == "infeasible")
            pt.status = SolveStatus::infeasible;
        else
            throw std::invalid_argument(path + ": unknown status '" + cells[6] + "'");
        out.region.points.push_back(pt);
    }
    detail::finalize_region(out.region);
    return out;
}

// Cross-strategy comparison over region tables from the same scenario:
// pairwise dominance, hypervolume ratios, and per-weight objective gaps.
// Tables from different scenarios are rejected by hash.
inline std::string compare_report(const std::vector<std::string> &paths, double tol = 1e-3)
{
    if (paths.size() < 2)
        throw std::invalid_argument("compare_report: need at least two region tables");
    std::vector<RegionFile> files;
    for (const std::string &path : paths)
        files.push_back(read_region_csv(path));
    for (std::size_t j = 1; j < files.size(); ++j)
        if (files[j].scenario_hash != files[0].scenario_hash)
            throw std::invalid_argument("compare_report: scenario hash mismatch between '" +
                                        paths[0] + "' and '" + paths[j] + "'");

    std::string out = "scheme_a,scheme_b,a_covers_b,b_covers_a,hv_ratio,max_wsr_gap,mean_wsr_gap\n";
    for (std::size_t ia = 0; ia < files.size(); ++ia)
        for (std::size_t ib = ia + 1; ib < files.size(); ++ib)
        {
            const RateRegion &a = files[ia].region;
            const RateRegion &b = files[ib].region;
            bool ab = region_dominates(a, b, tol);
            bool ba = region_dominates(b, a, tol);
            double hv_a = frontier_hull(a).empty() ? 0.0 : hypervolume(a);
            double hv_b = frontier_hull(b).empty() ? 0.0 : hypervolume(b);
            double max_gap = 0.0, sum_gap = 0.0;
            std::size_t matched = 0;
            for (const RegionPoint &pa : a.points)
                for (const RegionPoint &pb : b.points)
                    if (pa.u2 == pb.u2 && pa.feasible() && pb.feasible())
                    {
                        double gap = pa.wsr - pb.wsr;
                        if (matched == 0 || gap > max_gap)
                            max_gap = gap;
                        sum_gap += gap;
                        ++matched;
                    }
            double mean_gap = matched ? sum_gap / static_cast<double>(matched) : 0.0;
            out += a.scheme;
            out += ',';
            out += b.scheme;
            out += ',';
            out += ab ? '1' : '0';
            out += ',';
            out += ba ? '1' : '0';
            out += ',';
            out += detail::format_g12(hv_b == 0.0 && hv_a == 0.0 ? 1.0 : hv_a / hv_b);
            out += ',';
            out += detail::format_g12(matched ? max_gap : 0.0);
            out += ',';
            out += detail::format_g12(mean_gap);
            out += '\n';
        }

    out += "\nu2,scheme_a,scheme_b,wsr_gap\n";
    for (std::size_t ia = 0; ia < files.size(); ++ia)
        for (std::size_t ib = ia + 1; ib < files.size(); ++ib)
        {
            const RateRegion &a = files[ia].region;
            const RateRegion &b = files[ib].region;
            for (const RegionPoint &pa : a.points)
                for (const RegionPoint &pb : b.points)
                    if (pa.u2 == pb.u2 && pa.feasible() && pb.feasible())
                    {
                        out += detail::format_g12(pa.u2);
                        out += ',';
                        out += a.scheme;
                        out += ',';
                        out += b.scheme;
                        out += ',';
                        out += detail::format_g12(pa.wsr - pb.wsr);
                        out += '\n';
                    }
        }
    return out;
}

// Spot-check of the optimizer against the exhaustive reference on random
// two-antenna scenarios, at theta = 1 and theta = 0.5 each. Scenarios fan
// out over the worker count; the report keeps scenario order.
struct OracleCheckResult
{
    bool pass = true;
    std::string table;
};

inline OracleCheckResult oracle_check(std::uint64_t seed, int scenarios, double tol = 0.05,
                                      int jobs = 1)
{
    if (scenarios < 1)
        throw std::invalid_argument("oracle_check: scenarios must be >= 1");

    struct Row
    {
        std::uint64_t seed = 0;
        double theta = 1.0;
        double oracle_wsr = 0.0;
        double ao_wsr = 0.0;
        bool ok = false;
    };
    std::vector<Row> rows(static_cast<std::size_t>(scenarios) * 2);

    run_indexed(jobs, rows.size(), [&](std::size_t idx) {
        std::uint64_t scenario_seed = seed + idx / 2;
        double theta = idx % 2 == 0 ? 1.0 : 0.5;
        Scenario s = build_random_scenario(2, scenario_seed, 4.0 + 4.0 * (idx / 2 % 3));

        GridOracleSpec spec;
        spec.scenario = s;
        spec.theta = theta;
        spec.u = {1.0, 1.0};
        double oracle_wsr = grid_search_wsr(spec).first;

        DesignPoint ao = ao_solve(s, {1.0, 1.0}, theta);
        Row row;
        row.seed = scenario_seed;
        row.theta = theta;
        row.oracle_wsr = oracle_wsr;
        row.ao_wsr = ao.status == SolveStatus::infeasible ? 0.0 : ao.wsr;
        row.ok = row.ao_wsr >= oracle_wsr - tol;
        rows[idx] = row;
    });

    OracleCheckResult result;
    result.table = "seed,theta,oracle_wsr,ao_wsr,gap,pass\n";
    for (const Row &row : rows)
    {
        result.pass = result.pass && row.ok;
        result.table += std::to_string(row.seed);
        result.table += ',';
        result.table += detail::format_g12(row.theta);
        result.table += ',';
        result.table += detail::format_g12(row.oracle_wsr);
        result.table += ',';
        result.table += detail::format_g12(row.ao_wsr);
        result.table += ',';
        result.table += detail::format_g12(row.oracle_wsr - row.ao_wsr);
        result.table += ',';
        result.table += row.ok ? "yes" : "no";
        result.table += '\n';
    }
    return result;
}

} // namespace crsopt
