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

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace sidetrace {

/// Sign of a peak relative to the trace median. A current surge shows up as
/// a voltage drop, a release as a rise.
enum class Polarity { Drop, Rise };

/// Half-open sample interval [start, end) holding one peripheral peak.
struct PeakSegment {
    size_t start = 0;
    size_t end = 0;
    Polarity polarity = Polarity::Rise;
    double peak_magnitude = 0.0; ///< |extremum - median|, volts

    bool operator==(const PeakSegment &) const = default;
};

/// Finds maximal runs of samples deviating more than k * MAD from the trace
/// median, merging runs whose gap is shorter than merge_gap samples.
/// Throws ProcessingError on a zero-MAD (constant-baseline) trace.
std::vector<PeakSegment> detect_peaks(const PowerTrace &trace, double k,
                                      size_t merge_gap);

struct ExcisedTrace {
    PowerTrace trace;
    /// Original sample index of every retained sample.
    std::vector<size_t> index_map;
};

/// Removes each segment widened by guard samples on both sides and joins the
/// remainder.
ExcisedTrace excise(const PowerTrace &trace, std::span<const PeakSegment> segments,
                    size_t guard);

/// Peripheral-peak handling inside the fingerprint pipeline. Unset gaps take
/// their defaults from the trace clock: merge_gap = samples per clock,
/// guard = 2 * samples per clock.
struct PeakOptions {
    double k = 8.0;
    std::optional<size_t> merge_gap;
    std::optional<size_t> guard;
};

enum class BitEdge { Rising, Falling, None };
enum class BitOrder { MsbFirst, LsbFirst };
enum class IdleLevel { Low, High };

struct SpiConfig {
    double clock_peak_k = 8.0; ///< MAD multiplier for peak candidates
    unsigned bits_per_word = 8;
    BitOrder bit_order = BitOrder::MsbFirst;
    IdleLevel idle_level = IdleLevel::Low;
};

struct SpiDecodeResult {
    std::vector<uint8_t> bytes;
    std::vector<std::pair<size_t, size_t>> byte_windows;
    std::vector<BitEdge> bit_edges; ///< bits_per_word entries per byte
};

/// Decodes SPI traffic (mode 0) from the power trace alone.
///
/// The clock shows up as the dominant periodic train of large peaks, one per
/// rising clock edge. Words are split where the spacing exceeds four times
/// the median clock period. Midway between consecutive clock edges the data
/// line may toggle; that peak's signed amplitude classifies the window as a
/// rising edge (voltage drop), a falling edge (voltage rise) or no
/// transition, using thresholds at +/- half the median transition magnitude
/// of the capture. Integrating the transitions from the idle level yields the
/// bit sampled at each clock edge.
SpiDecodeResult decode_spi(const PowerTrace &trace, const SpiConfig &cfg = {});

} // namespace sidetrace
