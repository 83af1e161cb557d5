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

#include "sidetrace/dsp.h"
#include "sidetrace/peripheral.h"
#include "sidetrace/trace.h"

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace sidetrace {

enum class WaveletFamily { Ricker, Morlet };

/// Daughter wavelets to scan the trace with. Scales are in samples.
struct WaveletSpec {
    WaveletFamily family = WaveletFamily::Ricker;
    std::vector<double> scales;
    double morlet_center_freq = 5.0;

    /// Geometric ladder of `count` scales from 1 sample up to one clock
    /// period, so the smallest wavelet resolves sub-cycle transients and the
    /// largest spans a whole cycle.
    static WaveletSpec clock_ladder(double samples_per_clock, size_t count = 8,
                                    WaveletFamily family = WaveletFamily::Ricker);

    void validate() const;
    /// Also checks that the widest wavelet fits inside the trace.
    void validate(size_t trace_length) const;
};

/// Samples on either side of the center kept for a wavelet at `scale`.
size_t wavelet_half_support(double scale);

/// The sampled daughter wavelet at `scale`: 2 * half_support + 1 taps,
/// centered, scaled to unit L2 norm. Ricker is the negated second derivative
/// of a Gaussian; Morlet is the real (cosine) part.
std::vector<double> daughter_wavelet(WaveletFamily family, double scale,
                                     double morlet_center_freq = 5.0);

/// Wavelet coefficients: one row per scale, one column per sample.
class Scalogram {
  public:
    Scalogram(size_t rows, size_t cols, std::vector<double> scales,
              double sample_rate_hz);

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    const std::vector<double> &scales() const { return scales_; }
    double sample_rate_hz() const { return sample_rate_hz_; }

    std::span<const double> row(size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<double> row(size_t i) { return {data_.data() + i * cols_, cols_}; }
    double at(size_t i, size_t t) const { return data_[i * cols_ + t]; }
    std::span<const double> data() const { return data_; }

    double max_abs() const;

  private:
    size_t rows_, cols_;
    std::vector<double> scales_;
    double sample_rate_hz_;
    std::vector<double> data_;
};

/// Row i is sum_k x[t + k] * psi_i[k] over the wavelet taps, with the trace
/// zero-padded at both ends, so an impulse at t0 reproduces the
/// time-reversed wavelet centered at t0. Short wavelets are correlated
/// directly, long ones through FFT. Rows are computed in parallel; the result
/// does not depend on the worker count.
Scalogram cwt(const PowerTrace &trace, const WaveletSpec &spec);

/// Diagnostic dump: "PSCW" | u32 rows | u32 cols | rows*cols f64, row-major,
/// little-endian.
void save_scalogram_bin(const Scalogram &s, std::ostream &sink);
Scalogram load_scalogram_bin(std::istream &source, double sample_rate_hz = 1.0);

struct Candidate {
    size_t time_slot = 0;
    size_t scale_index = 0;
    double magnitude = 0.0;

    bool operator==(const Candidate &) const = default;
};

struct CandidateSet {
    std::vector<Candidate> entries;
    double theta = 0.0;
    double theta_abs = 0.0;
};

/// Keeps every coefficient whose magnitude exceeds theta * max|W| and is a
/// strict local maximum of |W| along its row (a plateau counts once, at its
/// leftmost sample). Throws ProcessingError for an all-zero scalogram.
CandidateSet threshold_candidates(const Scalogram &scalogram, double theta);

/// Collapses candidates that sit within slot_radius samples of each other,
/// chaining across all scales, into the slot of the group's strongest member.
/// Returns sorted, distinct time slots.
std::vector<size_t> dedupe_spectral(std::span<const Candidate> candidates,
                                    size_t slot_radius);

/// floor(slot / samples_per_clock) for every slot, deduplicated and sorted.
Fingerprint map_to_cycles(std::span<const size_t> slots, double sample_rate_hz,
                          std::optional<double> clock_hz, double theta);

struct FingerprintOptions {
    std::optional<FilterSpec> highpass;
    bool excise_peripheral = false;
    PeakOptions peripheral;
    size_t slot_radius = 2;
};

/// Counters and flags collected while fingerprinting.
struct FingerprintDiagnostics {
    double theta_abs = 0.0;
    size_t candidates = 0;
    size_t time_slots = 0;
    size_t excised_samples = 0;
    std::vector<PeakSegment> peripheral_segments;
    /// Slots (original coordinates) within half the widest wavelet of either
    /// end of the analyzed trace. They are kept in the fingerprint.
    std::vector<size_t> boundary_slots;
};

/// The full single-trace pipeline: optional high-pass, optional peripheral
/// peak excision, median removal, CWT, relative thresholding, spectral and
/// temporal deduplication. Slots are mapped back to original sample indices
/// before the clock mapping, so cycles always refer to the input trace.
Fingerprint fingerprint(const PowerTrace &trace, double theta,
                        const WaveletSpec &spec,
                        const FingerprintOptions &options = {},
                        FingerprintDiagnostics *diagnostics = nullptr);

/// Same, with WaveletSpec::clock_ladder(trace.samples_per_clock()).
Fingerprint fingerprint(const PowerTrace &trace, double theta,
                        const FingerprintOptions &options = {},
                        FingerprintDiagnostics *diagnostics = nullptr);

/// Indicator vector over [0, length_cycles) with a one at every fingerprint
/// cycle, convolved with a triangular kernel of the given half-width
/// (weights 1 - |d| / (halfwidth + 1)).
std::vector<double> rasterize(const Fingerprint &fp, size_t length_cycles,
                              size_t smoothing_halfwidth);

} // namespace sidetrace
