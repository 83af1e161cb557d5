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

#include <complex>
#include <vector>

namespace sidetrace {

/// Full-length DFT of a trace. Bin k sits at k * sample_rate / size; bin 0 is
/// the DC component.
struct Spectrum {
    std::vector<std::complex<double>> bins;
    double sample_rate_hz = 1.0;

    size_t size() const { return bins.size(); }
    double resolution_hz() const { return sample_rate_hz / bins.size(); }
    /// Center frequency of bin k, folded to [0, Nyquist].
    double bin_frequency(size_t k) const;
};

enum class FilterKind { FftBandpass, ButterworthHighpass, ButterworthLowpass };
enum class PhaseMode { Causal, ZeroPhase };

/// Filter parameters. The high-pass uses cutoff_low_hz (lower passband
/// edge), the low-pass uses cutoff_high_hz, the band-pass uses both.
struct FilterSpec {
    FilterKind kind = FilterKind::ButterworthHighpass;
    double cutoff_low_hz = 0.0;
    double cutoff_high_hz = 0.0;
    unsigned order = 5;
    PhaseMode phase = PhaseMode::Causal;

    static FilterSpec bandpass(double lo_hz, double hi_hz);
    static FilterSpec highpass(double cutoff_hz, unsigned order = 5,
                               PhaseMode phase = PhaseMode::Causal);
    static FilterSpec lowpass(double cutoff_hz, unsigned order = 5,
                              PhaseMode phase = PhaseMode::Causal);

    /// Throws ValidationError unless the cutoffs lie strictly inside
    /// (0, sample_rate / 2), low < high for band-pass, and order >= 1.
    void validate(double sample_rate_hz) const;
};

Spectrum fft_forward(const PowerTrace &trace);

/// Inverse DFT, scaled by 1/N. Returns the real part.
std::vector<double> fft_inverse_real(const Spectrum &spectrum);

/// Zeroes every bin whose center frequency lies outside [lo_hz, hi_hz]
/// (the conjugate mirror bins together) and transforms back.
PowerTrace fft_bandpass(const PowerTrace &trace, double lo_hz, double hi_hz);

/// One biquad, Direct Form II transposed. Coefficients are normalized so
/// that a0 == 1.
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0;
    double a1 = 0, a2 = 0;
};

/// Second-order sections of an order-N digital Butterworth filter, designed
/// from the analog prototype by a prewarped bilinear transform. An odd order
/// contributes one first-order section (b2 == a2 == 0).
std::vector<Biquad> butterworth_sections(FilterKind kind, unsigned order,
                                         double cutoff_hz,
                                         double sample_rate_hz);

/// Runs the cascade over the samples with zero initial state.
std::vector<double> sosfilt(std::span<const Biquad> sections,
                            std::span<const double> input);

/// Butterworth high-pass or low-pass. Causal mode filters once; the first
/// ~3 * order / (cutoff / Nyquist) samples carry the start-up transient and
/// are left for the caller to discard. ZeroPhase filters forward then
/// backward, squaring the magnitude response.
PowerTrace butterworth(const PowerTrace &trace, const FilterSpec &spec);

/// Dispatches on spec.kind.
PowerTrace apply_filter(const PowerTrace &trace, const FilterSpec &spec);

struct SpectralPeak {
    double frequency_hz;
    double magnitude; ///< single-sided amplitude, 2|X_k|/N (|X_k|/N at DC/Nyquist)
};

/// The top_k strongest bins in (0, Nyquist], strongest first. Magnitudes equal
/// within 1e-9 relative are ties and list the lower frequency first. Bins at
/// numerical noise level (below 1e-9 of the largest bin) are not reported.
std::vector<SpectralPeak> spectral_peaks(const Spectrum &spectrum,
                                         size_t top_k);

} // namespace sidetrace
