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

#include "sidetrace/trace.h"

#include <span>
#include <string>
#include <vector>

namespace sidetrace {
namespace svg {

/// One polyline per series, all sharing the same axes. Output depends only on
/// the inputs (fixed number formatting, no timestamps).
std::string line_plot(const std::vector<std::vector<double>> &series,
                      const std::string &title);

/// Event plot of a fingerprint: a tick per detected cycle over the smoothed
/// raster. Optional markers (e.g. motif occurrence starts) are drawn as
/// dashed vertical lines.
std::string event_plot(const Fingerprint &fp, size_t length_cycles,
                       const std::string &title,
                       std::span<const uint64_t> markers = {});

} // namespace svg
} // namespace sidetrace
