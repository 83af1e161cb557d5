/*
 * SPDX-FileCopyrightText: <text>Copyright 2026 The sidetrace Authors</text>
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * This file is part of sidetrace, a power side-channel trace analysis toolkit.
 */

#include "sidetrace/parallel.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace sidetrace {

unsigned worker_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char *env = std::getenv("SIDETRACE_THREADS")) {
        try {
            long v = std::stol(env);
            if (v > 0)
                return static_cast<unsigned>(v);
        } catch (const std::exception &) {
            // Unparsable values fall back to the default.
        }
    }
    return hw;
}

void parallel_for(size_t n, const std::function<void(size_t)> &body) {
    const size_t workers = std::min<size_t>(worker_count(), n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; i++)
            body(i);
        return;
    }

    std::atomic<size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;
    auto worker = [&] {
        for (size_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> guard(failure_lock);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (size_t w = 1; w < workers; w++)
        pool.emplace_back(worker);
    worker();
    for (auto &t : pool)
        t.join();

    if (failure)
        std::rethrow_exception(failure);
}

} // namespace sidetrace
