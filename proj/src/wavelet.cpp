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

#include "sidetrace/wavelet.h"
#include "sidetrace/error.h"
#include "sidetrace/parallel.h"

#include "fft.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>

using std::optional;
using std::vector;

namespace sidetrace {

namespace {
// Wavelet taps extend to +/- 5 scales; the Gaussian envelope is below 4e-6
// there.
constexpr double kSupportScales = 5.0;
// Wavelets longer than this are correlated through FFT.
constexpr size_t kDirectMaxTaps = 64;
} // namespace

WaveletSpec WaveletSpec::clock_ladder(double samples_per_clock, size_t count,
                                      WaveletFamily family) {
    if (!(samples_per_clock >= 1.0))
        throw ValidationError("samples per clock must be >= 1");
    if (count < 1)
        throw ValidationError("scale ladder needs at least one scale");
    WaveletSpec spec;
    spec.family = family;
    for (size_t i = 0; i < count; i++) {
        const double a =
            count == 1 ? 1.0
                       : std::pow(samples_per_clock,
                                  static_cast<double>(i) / (count - 1));
        if (spec.scales.empty() || a > spec.scales.back() * (1.0 + 1e-12))
            spec.scales.push_back(a);
    }
    return spec;
}

void WaveletSpec::validate() const {
    if (scales.empty())
        throw ValidationError("wavelet spec needs at least one scale");
    for (size_t i = 0; i < scales.size(); i++) {
        if (!(std::isfinite(scales[i]) && scales[i] >= 1.0))
            throw ValidationError("wavelet scale " + std::to_string(i) +
                                  " must be >= 1 sample");
        if (i > 0 && !(scales[i] > scales[i - 1]))
            throw ValidationError("wavelet scales must be strictly increasing");
    }
    if (family == WaveletFamily::Morlet &&
        !(std::isfinite(morlet_center_freq) && morlet_center_freq > 0.0))
        throw ValidationError("Morlet center frequency must be positive");
}

void WaveletSpec::validate(size_t trace_length) const {
    validate();
    const size_t footprint = 2 * wavelet_half_support(scales.back()) + 1;
    if (footprint > trace_length)
        throw ValidationError("widest wavelet spans " +
                              std::to_string(footprint) +
                              " samples, longer than the trace (" +
                              std::to_string(trace_length) + ")");
}

size_t wavelet_half_support(double scale) {
    return static_cast<size_t>(std::ceil(kSupportScales * scale));
}

vector<double> daughter_wavelet(WaveletFamily family, double scale,
                                double morlet_center_freq) {
    const size_t h = wavelet_half_support(scale);
    vector<double> psi(2 * h + 1);
    for (size_t j = 0; j < psi.size(); j++) {
        const double u = (static_cast<double>(j) - static_cast<double>(h)) / scale;
        const double envelope = std::exp(-0.5 * u * u);
        psi[j] = family == WaveletFamily::Ricker
                     ? (1.0 - u * u) * envelope
                     : std::cos(morlet_center_freq * u) * envelope;
    }
    double energy = 0.0;
    for (double v : psi)
        energy += v * v;
    const double norm = std::sqrt(energy);
    for (double &v : psi)
        v /= norm;
    return psi;
}

Scalogram::Scalogram(size_t rows, size_t cols, vector<double> scales,
                     double sample_rate_hz)
    : rows_(rows), cols_(cols), scales_(std::move(scales)),
      sample_rate_hz_(sample_rate_hz), data_(rows * cols, 0.0) {
    if (scales_.size() != rows_)
        throw ValidationError("scalogram needs one scale per row");
}

double Scalogram::max_abs() const {
    double m = 0.0;
    for (double v : data_)
        m = std::max(m, std::fabs(v));
    return m;
}

namespace {

void correlate_direct(std::span<const double> x, std::span<const double> psi,
                      std::span<double> out) {
    const long n = static_cast<long>(x.size());
    const long h = static_cast<long>(psi.size() / 2);
    for (long t = 0; t < n; t++) {
        const long jlo = std::max(0L, h - t);
        const long jhi = std::min(2 * h, n - 1 - t + h);
        double acc = 0.0;
        for (long j = jlo; j <= jhi; j++)
            acc += x[t - h + j] * psi[j];
        out[t] = acc;
    }
}

} // namespace

Scalogram cwt(const PowerTrace &trace, const WaveletSpec &spec) {
    if (trace.empty())
        throw ValidationError("CWT of an empty trace");
    spec.validate(trace.size());

    const size_t n = trace.size();
    Scalogram out(spec.scales.size(), n, spec.scales, trace.sample_rate_hz());

    vector<vector<double>> kernels;
    size_t widest = 0;
    for (double a : spec.scales) {
        kernels.push_back(daughter_wavelet(spec.family, a, spec.morlet_center_freq));
        widest = std::max(widest, kernels.back().size());
    }

    // Shared spectrum of the zero-padded trace for the FFT path. The padded
    // length leaves room for the widest kernel so the circular product equals
    // the linear one.
    const bool any_fft = widest > kDirectMaxTaps;
    size_t fft_len = 0;
    detail::ComplexBuffer x_spec;
    std::optional<detail::RealForwardFft> fwd;
    std::optional<detail::RealInverseFft> inv;
    if (any_fft) {
        fft_len = detail::fast_fft_size(n + widest - 1);
        fwd.emplace(fft_len);
        inv.emplace(fft_len);
        auto xbuf = detail::alloc_real(fft_len);
        std::fill(xbuf.get(), xbuf.get() + fft_len, 0.0);
        std::copy(trace.samples().begin(), trace.samples().end(), xbuf.get());
        x_spec = detail::alloc_complex(fft_len / 2 + 1);
        fwd->execute(xbuf.get(), x_spec.get());
    }

    parallel_for(spec.scales.size(), [&](size_t i) {
        const auto &psi = kernels[i];
        auto row = out.row(i);
        if (psi.size() <= kDirectMaxTaps) {
            correlate_direct(trace.samples(), psi, row);
            return;
        }
        // Correlation with psi is convolution with the reversed kernel g;
        // W[t] = (x * g)[t + h].
        const size_t taps = psi.size();
        const size_t h = taps / 2;
        const size_t bins = fft_len / 2 + 1;
        auto g = detail::alloc_real(fft_len);
        std::fill(g.get(), g.get() + fft_len, 0.0);
        for (size_t j = 0; j < taps; j++)
            g[j] = psi[taps - 1 - j];
        auto g_spec = detail::alloc_complex(bins);
        fwd->execute(g.get(), g_spec.get());
        for (size_t k = 0; k < bins; k++) {
            const double re = x_spec[k][0] * g_spec[k][0] - x_spec[k][1] * g_spec[k][1];
            const double im = x_spec[k][0] * g_spec[k][1] + x_spec[k][1] * g_spec[k][0];
            g_spec[k][0] = re;
            g_spec[k][1] = im;
        }
        auto conv = detail::alloc_real(fft_len);
        inv->execute(g_spec.get(), conv.get());
        const double scale = 1.0 / static_cast<double>(fft_len);
        for (size_t t = 0; t < n; t++)
            row[t] = conv[t + h] * scale;
    });
    return out;
}

namespace {
constexpr std::array<char, 4> kScalogramMagic = {'P', 'S', 'C', 'W'};

void put_u32(std::ostream &os, uint32_t v) {
    std::array<char, 4> b;
    for (int i = 0; i < 4; i++)
        b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b.data(), 4);
}

uint32_t get_u32(std::istream &is) {
    std::array<unsigned char, 4> b;
    is.read(reinterpret_cast<char *>(b.data()), 4);
    if (is.gcount() != 4)
        throw ValidationError("truncated scalogram header");
    return b[0] | (b[1] << 8) | (b[2] << 16) | (uint32_t(b[3]) << 24);
}
} // namespace

void save_scalogram_bin(const Scalogram &s, std::ostream &sink) {
    sink.write(kScalogramMagic.data(), 4);
    put_u32(sink, static_cast<uint32_t>(s.rows()));
    put_u32(sink, static_cast<uint32_t>(s.cols()));
    for (double v : s.data()) {
        const uint64_t bits = std::bit_cast<uint64_t>(v);
        std::array<char, 8> b;
        for (int i = 0; i < 8; i++)
            b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
        sink.write(b.data(), 8);
    }
}

Scalogram load_scalogram_bin(std::istream &source, double sample_rate_hz) {
    std::array<char, 4> magic{};
    source.read(magic.data(), 4);
    if (source.gcount() != 4 || magic != kScalogramMagic)
        throw ValidationError("bad magic: not a PSCW scalogram");
    const uint32_t rows = get_u32(source);
    const uint32_t cols = get_u32(source);
    // The file does not carry the scale axis; rows are numbered instead.
    vector<double> scales(rows);
    for (uint32_t i = 0; i < rows; i++)
        scales[i] = i + 1.0;
    Scalogram s(rows, cols, std::move(scales), sample_rate_hz);
    for (size_t i = 0; i < rows; i++) {
        auto r = s.row(i);
        for (size_t t = 0; t < cols; t++) {
            std::array<unsigned char, 8> b;
            source.read(reinterpret_cast<char *>(b.data()), 8);
            if (source.gcount() != 8)
                throw ValidationError("truncated scalogram payload");
            uint64_t bits = 0;
            for (int k = 0; k < 8; k++)
                bits |= static_cast<uint64_t>(b[k]) << (8 * k);
            r[t] = std::bit_cast<double>(bits);
        }
    }
    return s;
}

CandidateSet threshold_candidates(const Scalogram &scalogram, double theta) {
    if (!(theta > 0.0 && theta < 1.0))
        throw ValidationError("theta must lie in (0, 1)");
    if (scalogram.rows() == 0 || scalogram.cols() == 0)
        throw ValidationError("empty scalogram");
    const double peak = scalogram.max_abs();
    if (peak == 0.0)
        throw ProcessingError(
            "all-zero scalogram: no high-frequency content to threshold");

    CandidateSet set;
    set.theta = theta;
    set.theta_abs = theta * peak;

    const size_t m = scalogram.cols();
    vector<double> mag(m);
    for (size_t i = 0; i < scalogram.rows(); i++) {
        auto row = scalogram.row(i);
        for (size_t t = 0; t < m; t++)
            mag[t] = std::fabs(row[t]);
        for (size_t t = 0; t < m; t++) {
            const double v = mag[t];
            if (!(v > set.theta_abs))
                continue;
            if (t > 0 && !(mag[t - 1] < v))
                continue;
            size_t r = t + 1;
            while (r < m && mag[r] == v)
                r++;
            if (r == m || mag[r] < v)
                set.entries.push_back({t, i, v});
        }
    }
    return set;
}

vector<size_t> dedupe_spectral(std::span<const Candidate> candidates,
                               size_t slot_radius) {
    vector<Candidate> sorted(candidates.begin(), candidates.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const Candidate &a, const Candidate &b) {
                  if (a.time_slot != b.time_slot)
                      return a.time_slot < b.time_slot;
                  return a.scale_index < b.scale_index;
              });

    vector<size_t> slots;
    size_t i = 0;
    while (i < sorted.size()) {
        const Candidate *best = &sorted[i];
        size_t j = i + 1;
        while (j < sorted.size() &&
               sorted[j].time_slot - sorted[j - 1].time_slot <= slot_radius) {
            if (sorted[j].magnitude > best->magnitude)
                best = &sorted[j];
            j++;
        }
        if (slots.empty() || slots.back() != best->time_slot)
            slots.push_back(best->time_slot);
        i = j;
    }
    return slots;
}

Fingerprint map_to_cycles(std::span<const size_t> slots, double sample_rate_hz,
                          optional<double> clock_hz, double theta) {
    if (!clock_hz)
        throw ValidationError(
            "clock frequency unknown: cannot map time slots to cycles");
    if (!(sample_rate_hz > 0.0 && *clock_hz > 0.0))
        throw ValidationError("rates must be positive");
    Fingerprint fp;
    fp.theta = theta;
    fp.samples_per_clock = sample_rate_hz / *clock_hz;
    if (!(fp.samples_per_clock >= 1.0))
        throw ValidationError("fewer than one sample per clock cycle");
    for (size_t s : slots)
        fp.cycles.push_back(static_cast<uint64_t>(
            std::floor(static_cast<double>(s) / fp.samples_per_clock)));
    std::sort(fp.cycles.begin(), fp.cycles.end());
    fp.cycles.erase(std::unique(fp.cycles.begin(), fp.cycles.end()),
                    fp.cycles.end());
    return fp;
}

Fingerprint fingerprint(const PowerTrace &trace, double theta,
                        const WaveletSpec &spec,
                        const FingerprintOptions &options,
                        FingerprintDiagnostics *diagnostics) {
    if (!(theta > 0.0 && theta < 1.0))
        throw ValidationError("theta must lie in (0, 1)");
    const double spc = trace.samples_per_clock();
    if (trace.empty())
        throw ValidationError("fingerprint of an empty trace");
    spec.validate();

    FingerprintDiagnostics diag;
    PowerTrace work = options.highpass ? apply_filter(trace, *options.highpass)
                                       : trace;

    vector<size_t> index_map;
    if (options.excise_peripheral) {
        const auto &p = options.peripheral;
        const size_t merge_gap = p.merge_gap.value_or(
            static_cast<size_t>(std::ceil(spc)));
        const size_t guard =
            p.guard.value_or(static_cast<size_t>(std::ceil(2.0 * spc)));
        diag.peripheral_segments = detect_peaks(work, p.k, merge_gap);
        if (!diag.peripheral_segments.empty()) {
            ExcisedTrace ex = excise(work, diag.peripheral_segments, guard);
            diag.excised_samples = work.size() - ex.trace.size();
            index_map = std::move(ex.index_map);
            work = std::move(ex.trace);
            if (work.empty())
                throw ProcessingError("peripheral excision removed every sample");
        }
    }

    // Center on the median: zero padding would otherwise read the DC level as
    // a step at both ends of the trace.
    const double center = median(work.samples());
    vector<double> centered(work.samples().begin(), work.samples().end());
    for (double &v : centered)
        v -= center;
    work = work.with_samples(std::move(centered));

    const Scalogram w = cwt(work, spec);
    const CandidateSet cands = threshold_candidates(w, theta);
    vector<size_t> slots = dedupe_spectral(cands.entries, options.slot_radius);

    const size_t edge = wavelet_half_support(spec.scales.back());
    for (size_t s : slots)
        if (s < edge || s + edge >= work.size())
            diag.boundary_slots.push_back(index_map.empty() ? s : index_map[s]);
    if (!index_map.empty())
        for (size_t &s : slots)
            s = index_map[s];

    diag.theta_abs = cands.theta_abs;
    diag.candidates = cands.entries.size();
    diag.time_slots = slots.size();
    if (diagnostics)
        *diagnostics = std::move(diag);

    return map_to_cycles(slots, trace.sample_rate_hz(), trace.clock_hz(), theta);
}

Fingerprint fingerprint(const PowerTrace &trace, double theta,
                        const FingerprintOptions &options,
                        FingerprintDiagnostics *diagnostics) {
    return fingerprint(trace, theta,
                       WaveletSpec::clock_ladder(trace.samples_per_clock()),
                       options, diagnostics);
}

vector<double> rasterize(const Fingerprint &fp, size_t length_cycles,
                         size_t smoothing_halfwidth) {
    if (!fp.cycles.empty() && fp.cycles.back() >= length_cycles)
        throw ValidationError("raster length " + std::to_string(length_cycles) +
                              " does not cover cycle " +
                              std::to_string(fp.cycles.back()));
    vector<double> r(length_cycles, 0.0);
    const long hw = static_cast<long>(smoothing_halfwidth);
    const long len = static_cast<long>(length_cycles);
    for (uint64_t c : fp.cycles) {
        for (long d = -hw; d <= hw; d++) {
            const long i = static_cast<long>(c) + d;
            if (i < 0 || i >= len)
                continue;
            r[i] += 1.0 - static_cast<double>(std::labs(d)) / (hw + 1);
        }
    }
    return r;
}

} // namespace sidetrace
