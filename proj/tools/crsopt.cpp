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

#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crsopt/experiment.hpp"
#include "crsopt/version.hpp"

namespace {

int cmd_run(const std::string &config_path, const std::string &out_override,
            std::uint64_t seed_override, bool seed_given, int jobs)
{
    crsopt::ExperimentConfig cfg = crsopt::ExperimentConfig::load(config_path);
    if (!out_override.empty())
        cfg.out_dir = out_override;
    if (seed_given)
        cfg.seed = seed_override;
    cfg.validate();

    crsopt::ExperimentResult result = crsopt::run_experiment(cfg, jobs);
    for (const crsopt::RateRegion &region : result.regions)
    {
        std::size_t feasible = 0;
        for (const crsopt::RegionPoint &pt : region.points)
            feasible += pt.feasible() ? 1 : 0;
        std::printf("%-8s %zu/%zu points feasible\n", region.scheme.c_str(), feasible,
                    region.points.size());
    }
    std::printf("wrote %zu artifacts to %s in %.1f s\n", result.artifacts.size(),
                cfg.out_dir.c_str(), result.wall_clock_seconds);
    if (result.exit_code == 2)
        std::fprintf(stderr, "warning: some sweep points were infeasible\n");
    return result.exit_code;
}

int cmd_compare(const std::vector<std::string> &paths, double tol)
{
    std::fputs(crsopt::compare_report(paths, tol).c_str(), stdout);
    return 0;
}

int cmd_oracle_check(std::uint64_t seed, int count, double tol, int jobs)
{
    crsopt::OracleCheckResult result = crsopt::oracle_check(seed, count, tol, jobs);
    std::fputs(result.table.c_str(), stdout);
    std::printf("%s\n", result.pass ? "PASS" : "FAIL");
    return result.pass ? 0 : 1;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"weighted-sum-rate optimization for the two-user cooperative "
                 "rate-splitting downlink"};
    app.set_version_flag("--version", std::string("crsopt ") + crsopt::k_version);
    app.require_subcommand(1);

    std::string config_path, out_override;
    std::uint64_t seed = 0;
    int jobs = 1;
    CLI::App *run = app.add_subcommand("run", "sweep the configured strategies and write "
                                              "region tables, dominance summary, and manifest");
    run->add_option("--config", config_path, "experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--out", out_override, "override the configured output directory");
    CLI::Option *seed_opt =
        run->add_option("--seed", seed, "override the configured scenario seed");
    run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

    std::vector<std::string> region_paths;
    double compare_tol = 1e-3;
    CLI::App *compare = app.add_subcommand("compare", "cross-strategy report over region "
                                                      "tables from the same scenario");
    compare->add_option("paths", region_paths, "region CSV files")
        ->required()
        ->expected(2, -1)
        ->check(CLI::ExistingFile);
    compare->add_option("--tol", compare_tol, "dominance tolerance in bit/s/Hz");

    std::uint64_t check_seed = 1;
    int check_count = 3;
    double check_tol = 0.05;
    int check_jobs = 1;
    CLI::App *check = app.add_subcommand("oracle-check", "compare the optimizer against the "
                                                         "exhaustive two-antenna reference");
    check->add_option("--seed", check_seed, "first scenario seed");
    check->add_option("--count", check_count, "number of scenarios")->check(CLI::PositiveNumber);
    check->add_option("--tol", check_tol, "largest acceptable shortfall in bit/s/Hz");
    check->add_option("--jobs", check_jobs, "worker threads")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (run->parsed())
            return cmd_run(config_path, out_override, seed, seed_opt->count() > 0, jobs);
        if (compare->parsed())
            return cmd_compare(region_paths, compare_tol);
        return cmd_oracle_check(check_seed, check_count, check_tol, check_jobs);
    }
    catch (const std::exception &err)
    {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    }
}
