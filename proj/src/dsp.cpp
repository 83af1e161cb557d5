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

#include "sidetrace/dsp.h"
#include "sidetrace/error.h"

#include "fft.h"

#include <algorithm>
#include <cmath>
#include <numbers>

using std::complex;
using std::vector;

namespace sidetrace {

double Spectrum::bin_frequency(size_t k) const {
    const size_t n = bins.size();
    const size_t folded = k <= n / 2 ? k : n - k;
    return static_cast<double>(folded) * sample_rate_hz / n;
}

FilterSpec FilterSpec::bandpass(double lo_hz, double hi_hz) {
    FilterSpec s;
    s.kind = FilterKind::FftBandpass;
    s.cutoff_low_hz = lo_hz;
    s.cutoff_high_hz = hi_hz;
    s.order = 0;
    return s;
}

FilterSpec FilterSpec::highpass(double cutoff_hz, unsigned order,
                                PhaseMode phase) {
    FilterSpec s;
    s.kind = FilterKind::ButterworthHighpass;
    s.cutoff_low_hz = cutoff_hz;
    s.order = order;
    s.phase = phase;
    return s;
}

FilterSpec FilterSpec::lowpass(double cutoff_hz, unsigned order,
                               PhaseMode phase) {
    FilterSpec s;
    s.kind = FilterKind::ButterworthLowpass;
    s.cutoff_high_hz = cutoff_hz;
    s.order = order;
    s.phase = phase;
    return s;
}

namespace {
void check_cutoff(double f, double nyquist, const char *name) {
    if (!(std::isfinite(f) && f > 0.0 && f < nyquist))
        throw ValidationError(std::string(name) + " " + std::to_string(f) +
                              " Hz must lie strictly inside (0, " +
                              std::to_string(nyquist) + ") Hz");
}
} // namespace

void FilterSpec::validate(double sample_rate_hz) const {
    const double nyquist = sample_rate_hz / 2.0;
    switch (kind) {
    case FilterKind::FftBandpass:
        check_cutoff(cutoff_low_hz, nyquist, "band low edge");
        check_cutoff(cutoff_high_hz, nyquist, "band high edge");
        if (!(cutoff_low_hz < cutoff_high_hz))
            throw ValidationError("band low edge must be below high edge");
        break;
    case FilterKind::ButterworthHighpass:
        check_cutoff(cutoff_low_hz, nyquist, "high-pass cutoff");
        break;
    case FilterKind::ButterworthLowpass:
        check_cutoff(cutoff_high_hz, nyquist, "low-pass cutoff");
        break;
    }
    if (kind != FilterKind::FftBandpass && order < 1)
        throw ValidationError("Butterworth order must be at least 1");
}

Spectrum fft_forward(const PowerTrace &trace) {
    if (trace.empty())
        throw ValidationError("FFT of an empty trace");
    const size_t n = trace.size();
    auto in = detail::alloc_complex(n);
    auto out = detail::alloc_complex(n);
    for (size_t i = 0; i < n; i++) {
        in[i][0] = trace[i];
        in[i][1] = 0.0;
    }
    detail::ComplexFft plan(n, detail::Direction::Forward);
    plan.execute(in.get(), out.get());

    Spectrum s;
    s.sample_rate_hz = trace.sample_rate_hz();
    s.bins.resize(n);
    for (size_t i = 0; i < n; i++)
        s.bins[i] = complex<double>(out[i][0], out[i][1]);
    return s;
}

vector<double> fft_inverse_real(const Spectrum &spectrum) {
    const size_t n = spectrum.size();
    if (n == 0)
        throw ValidationError("inverse FFT of an empty spectrum");
    auto in = detail::alloc_complex(n);
    auto out = detail::alloc_complex(n);
    for (size_t i = 0; i < n; i++) {
        in[i][0] = spectrum.bins[i].real();
        in[i][1] = spectrum.bins[i].imag();
    }
    detail::ComplexFft plan(n, detail::Direction::Backward);
    plan.execute(in.get(), out.get());

    vector<double> x(n);
    for (size_t i = 0; i < n; i++)
        x[i] = out[i][0] / static_cast<double>(n);
    return x;
}

PowerTrace fft_bandpass(const PowerTrace &trace, double lo_hz, double hi_hz) {
    FilterSpec::bandpass(lo_hz, hi_hz).validate(trace.sample_rate_hz());
    Spectrum s = fft_forward(trace);
    // bin_frequency folds k and N-k onto the same frequency, so conjugate
    // pairs are kept or dropped together and the inverse stays real.
    for (size_t k = 0; k < s.size(); k++) {
        const double f = s.bin_frequency(k);
        if (f < lo_hz || f > hi_hz)
            s.bins[k] = 0.0;
    }
    return trace.with_samples(fft_inverse_real(s));
}

vector<Biquad> butterworth_sections(FilterKind kind, unsigned order,
                                    double cutoff_hz, double sample_rate_hz) {
    if (kind == FilterKind::FftBandpass)
        throw ValidationError("band-pass is not a Butterworth design");
    FilterSpec spec = kind == FilterKind::ButterworthHighpass
                          ? FilterSpec::highpass(cutoff_hz, order)
                          : FilterSpec::lowpass(cutoff_hz, order);
    spec.validate(sample_rate_hz);

    const bool highpass = kind == FilterKind::ButterworthHighpass;
    const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate_hz);
    const double k2 = k * k;
    vector<Biquad> sections;

    // Analog prototype poles lie on the unit circle at angles
    // pi/2 + pi(2i+1)/(2N); each conjugate pair gives s^2 + q s + 1 with
    // q = 2 sin(pi(2i+1)/(2N)).
    for (unsigned i = 0; i < order / 2; i++) {
        const double q =
            2.0 * std::sin(std::numbers::pi * (2.0 * i + 1.0) / (2.0 * order));
        const double a0 = 1.0 + q * k + k2;
        Biquad bq;
        if (highpass) {
            bq.b0 = 1.0 / a0;
            bq.b1 = -2.0 / a0;
            bq.b2 = 1.0 / a0;
        } else {
            bq.b0 = k2 / a0;
            bq.b1 = 2.0 * k2 / a0;
            bq.b2 = k2 / a0;
        }
        bq.a1 = 2.0 * (k2 - 1.0) / a0;
        bq.a2 = (1.0 - q * k + k2) / a0;
        sections.push_back(bq);
    }
    if (order % 2 == 1) {
        const double a0 = 1.0 + k;
        Biquad bq;
        if (highpass) {
            bq.b0 = 1.0 / a0;
            bq.b1 = -1.0 / a0;
        } else {
            bq.b0 = k / a0;
            bq.b1 = k / a0;
        }
        bq.a1 = (k - 1.0) / a0;
        sections.push_back(bq);
    }
    return sections;
}

vector<double> sosfilt(std::span<const Biquad> sections,
                       std::span<const double> input) {
    vector<double> x(input.begin(), input.end());
    for (const Biquad &s : sections) {
        double z1 = 0.0, z2 = 0.0;
        for (double &v : x) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
    return x;
}

PowerTrace butterworth(const PowerTrace &trace, const FilterSpec &spec) {
    if (spec.kind == FilterKind::FftBandpass)
        throw ValidationError("butterworth() needs a Butterworth filter kind");
    spec.validate(trace.sample_rate_hz());
    const double cutoff = spec.kind == FilterKind::ButterworthHighpass
                              ? spec.cutoff_low_hz
                              : spec.cutoff_high_hz;
    const auto sections = butterworth_sections(spec.kind, spec.order, cutoff,
                                               trace.sample_rate_hz());

    vector<double> y = sosfilt(sections, trace.samples());
    if (spec.phase == PhaseMode::ZeroPhase) {
        std::reverse(y.begin(), y.end());
        y = sosfilt(sections, y);
        std::reverse(y.begin(), y.end());
    }
    return trace.with_samples(std::move(y));
}

PowerTrace apply_filter(const PowerTrace &trace, const FilterSpec &spec) {
    if (spec.kind == FilterKind::FftBandpass)
        return fft_bandpass(trace, spec.cutoff_low_hz, spec.cutoff_high_hz);
    return butterworth(trace, spec);
}

vector<SpectralPeak> spectral_peaks(const Spectrum &spectrum, size_t top_k) {
    if (top_k < 1)
        throw ValidationError("top_k must be at least 1");
    const size_t n = spectrum.size();
    if (n == 0)
        throw ValidationError("spectral peaks of an empty spectrum");

    double largest = 0.0;
    for (const auto &b : spectrum.bins)
        largest = std::max(largest, std::abs(b));
    const double floor = 1e-9 * largest;

    struct Bin {
        size_t k;
        double mag;
    };
    vector<Bin> pool;
    for (size_t k = 1; k <= n / 2; k++) {
        const double m = std::abs(spectrum.bins[k]);
        if (m > floor)
            pool.push_back({k, m});
    }

    vector<SpectralPeak> peaks;
    while (peaks.size() < top_k && !pool.empty()) {
        double best = 0.0;
        for (const auto &b : pool)
            best = std::max(best, b.mag);
        // Among the near-ties of the maximum, take the lowest bin.
        auto pick = std::find_if(pool.begin(), pool.end(), [&](const Bin &b) {
            return b.mag >= best * (1.0 - 1e-9);
        });
        const bool edge = pick->k == 0 || 2 * pick->k == n;
        peaks.push_back({spectrum.bin_frequency(pick->k),
                         (edge ? 1.0 : 2.0) * pick->mag / n});
        pool.erase(pick);
    }
    return peaks;
}

} // namespace sidetrace
