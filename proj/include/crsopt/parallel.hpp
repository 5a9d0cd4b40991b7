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

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace crsopt {

// Runs fn(i) for i in [0, n_tasks) on up to n_jobs threads. Tasks must be
// independent; callers keep outputs deterministic by writing to
// preallocated per-index slots. The first exception thrown by any task is
// rethrown on the calling thread after all workers finish.
template <typename Fn> void run_indexed(int n_jobs, std::size_t n_tasks, Fn &&fn)
{
    if (n_jobs < 1)
        throw std::invalid_argument("run_indexed: n_jobs must be >= 1");
    if (n_tasks == 0)
        return;
    if (n_jobs == 1 || n_tasks == 1)
    {
        for (std::size_t i = 0; i < n_tasks; ++i)
            fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (!failed.load(std::memory_order_relaxed))
        {
            std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n_tasks)
                return;
            try
            {
                fn(i);
            }
            catch (...)
            {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error)
                    first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };

    std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(n_jobs), n_tasks);
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t)
        threads.emplace_back(worker);
    for (auto &t : threads)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace crsopt
