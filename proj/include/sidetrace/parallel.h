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

#pragma once

#include <cstddef>
#include <functional>

namespace sidetrace {

/// Number of worker threads used by internal parallel loops. Reads the
/// SIDETRACE_THREADS environment variable (a positive integer caps the
/// count); otherwise all hardware threads are used.
unsigned worker_count();

/// Runs body(i) for i in [0, n). Each index is handled by exactly one worker,
/// so results written to per-index slots are identical for any worker count.
void parallel_for(size_t n, const std::function<void(size_t)> &body);

} // namespace sidetrace
