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

#include "sidetrace/peripheral.h"
#include "sidetrace/error.h"

#include <algorithm>
#include <cmath>

using std::vector;

namespace sidetrace {

namespace {

/// Deviation of every sample from the trace median, plus the k * MAD
/// threshold on it.
struct Deviation {
    vector<double> d;
    double threshold;
};

Deviation deviation_from_median(const PowerTrace &trace, double k) {
    if (!(k > 0.0 && std::isfinite(k)))
        throw ValidationError("MAD multiplier k must be positive");
    if (trace.empty())
        throw ValidationError("peak detection on an empty trace");
    const double med = median(trace.samples());
    const double mad = median_abs_deviation(trace.samples(), med);
    if (mad == 0.0)
        throw ProcessingError(
            "zero MAD: trace baseline is constant, peak threshold undefined");
    Deviation dev{vector<double>(trace.size()), k * mad};
    for (size_t i = 0; i < trace.size(); i++)
        dev.d[i] = trace[i] - med;
    return dev;
}

} // namespace

vector<PeakSegment> detect_peaks(const PowerTrace &trace, double k,
                                 size_t merge_gap) {
    const Deviation dev = deviation_from_median(trace, k);
    const size_t n = dev.d.size();

    vector<PeakSegment> segs;
    size_t i = 0;
    while (i < n) {
        if (!(std::fabs(dev.d[i]) > dev.threshold)) {
            i++;
            continue;
        }
        size_t j = i;
        while (j < n && std::fabs(dev.d[j]) > dev.threshold)
            j++;
        if (!segs.empty() && i - segs.back().end < merge_gap)
            segs.back().end = j;
        else
            segs.push_back({i, j, Polarity::Rise, 0.0});
        i = j;
    }

    for (auto &s : segs) {
        size_t at = s.start;
        for (size_t t = s.start; t < s.end; t++)
            if (std::fabs(dev.d[t]) > std::fabs(dev.d[at]))
                at = t;
        s.polarity = dev.d[at] < 0.0 ? Polarity::Drop : Polarity::Rise;
        s.peak_magnitude = std::fabs(dev.d[at]);
    }
    return segs;
}

ExcisedTrace excise(const PowerTrace &trace, std::span<const PeakSegment> segments,
                    size_t guard) {
    const size_t n = trace.size();
    vector<std::pair<size_t, size_t>> cuts;
    for (const auto &s : segments) {
        if (!(s.start < s.end && s.end <= n))
            throw ValidationError("peak segment [" + std::to_string(s.start) +
                                  ", " + std::to_string(s.end) +
                                  ") out of range for trace of length " +
                                  std::to_string(n));
        cuts.emplace_back(s.start > guard ? s.start - guard : 0,
                          std::min(n, s.end + guard));
    }
    std::sort(cuts.begin(), cuts.end());

    vector<std::pair<size_t, size_t>> merged;
    for (const auto &c : cuts) {
        if (!merged.empty() && c.first <= merged.back().second)
            merged.back().second = std::max(merged.back().second, c.second);
        else
            merged.push_back(c);
    }

    vector<double> kept;
    vector<size_t> index_map;
    kept.reserve(n);
    index_map.reserve(n);
    size_t next_cut = 0;
    for (size_t t = 0; t < n; t++) {
        while (next_cut < merged.size() && merged[next_cut].second <= t)
            next_cut++;
        if (next_cut < merged.size() && merged[next_cut].first <= t)
            continue;
        kept.push_back(trace[t]);
        index_map.push_back(t);
    }
    return {trace.with_samples(std::move(kept)), std::move(index_map)};
}

namespace {

struct Pulse {
    size_t pos;
    double amp; ///< signed deviation from the median
};

/// Separates the clock train from smaller data-line peaks: the magnitudes
/// are split at their largest ratio gap if that gap is at least 1.5x.
vector<Pulse> clock_train(const vector<Pulse> &pulses) {
    vector<double> mags;
    for (const auto &p : pulses)
        mags.push_back(std::fabs(p.amp));
    std::sort(mags.begin(), mags.end());

    double cut = 0.0;
    double best_ratio = 1.5;
    for (size_t i = 0; i + 1 < mags.size(); i++) {
        const double r = mags[i + 1] / mags[i];
        if (r >= best_ratio) {
            best_ratio = r;
            cut = mags[i + 1];
        }
    }
    vector<Pulse> clock;
    for (const auto &p : pulses)
        if (std::fabs(p.amp) >= cut)
            clock.push_back(p);
    return clock;
}

} // namespace

SpiDecodeResult decode_spi(const PowerTrace &trace, const SpiConfig &cfg) {
    if (cfg.bits_per_word < 1 || cfg.bits_per_word > 8)
        throw ValidationError("bits_per_word must be between 1 and 8");
    const Deviation dev = deviation_from_median(trace, cfg.clock_peak_k);
    const auto &d = dev.d;
    const size_t n = d.size();

    // Candidate pulses: extremum of each super-threshold run.
    vector<Pulse> pulses;
    for (size_t i = 0; i < n;) {
        if (!(std::fabs(d[i]) > dev.threshold)) {
            i++;
            continue;
        }
        size_t at = i;
        size_t j = i;
        for (; j < n && std::fabs(d[j]) > dev.threshold; j++)
            if (std::fabs(d[j]) > std::fabs(d[at]))
                at = j;
        pulses.push_back({at, d[at]});
        i = j;
    }

    const vector<Pulse> clock = clock_train(pulses);
    const unsigned bits = cfg.bits_per_word;
    if (clock.size() < bits)
        throw ProcessingError("no periodic clock-peak train found (" +
                              std::to_string(clock.size()) + " large peaks)");

    vector<double> spacing;
    for (size_t i = 1; i < clock.size(); i++)
        spacing.push_back(static_cast<double>(clock[i].pos - clock[i - 1].pos));
    const double period = spacing.empty() ? 0.0 : median(spacing);
    if (!(period >= 2.0))
        throw ProcessingError("clock-peak train has no usable period");

    vector<vector<size_t>> words(1);
    words.back().push_back(clock[0].pos);
    for (size_t i = 1; i < clock.size(); i++) {
        if (static_cast<double>(clock[i].pos - clock[i - 1].pos) > 4.0 * period)
            words.emplace_back();
        words.back().push_back(clock[i].pos);
    }
    for (const auto &w : words)
        if (w.size() != bits)
            throw ProcessingError(
                "word at samples [" + std::to_string(w.front()) + ", " +
                std::to_string(w.back()) + "] has " + std::to_string(w.size()) +
                " clock peaks, expected " + std::to_string(bits));

    // Data transitions sit midway between clock edges (for the first bit of a
    // word, half a period before its clock edge). A short box filter over the
    // deviation trace raises the peak above the noise.
    const long half_window = std::max(1L, std::lround(period / 8.0));
    const long smooth = std::lround(std::floor(period / 16.0));
    auto smoothed = [&](long t) {
        double acc = 0.0;
        long cnt = 0;
        for (long u = t - smooth; u <= t + smooth; u++)
            if (u >= 0 && u < static_cast<long>(n)) {
                acc += d[u];
                cnt++;
            }
        return cnt ? acc / cnt : 0.0;
    };

    vector<double> amps;
    vector<std::pair<size_t, size_t>> windows;
    for (const auto &w : words) {
        const long start = std::max(0L, std::lround(w.front() - period));
        windows.emplace_back(static_cast<size_t>(start),
                             std::min(n, static_cast<size_t>(std::lround(
                                             w.back() + period / 2.0))));
        for (size_t b = 0; b < bits; b++) {
            const double center =
                b == 0 ? w[0] - period / 2.0 : (w[b - 1] + w[b]) / 2.0;
            const long c = std::lround(center);
            double best = 0.0;
            for (long t = c - half_window; t <= c + half_window; t++) {
                if (t < 0 || t >= static_cast<long>(n))
                    continue;
                const double v = smoothed(t);
                if (std::fabs(v) > std::fabs(best))
                    best = v;
            }
            amps.push_back(best);
        }
    }

    // Averaging 2 * smooth + 1 samples shrinks the noise by its square root.
    const double smoothed_threshold = dev.threshold / std::sqrt(2.0 * smooth + 1.0);
    vector<double> present;
    for (double a : amps)
        if (std::fabs(a) > smoothed_threshold)
            present.push_back(std::fabs(a));
    const double level_cut = present.empty() ? 0.0 : 0.5 * median(present);

    SpiDecodeResult res;
    res.byte_windows = std::move(windows);
    bool level = cfg.idle_level == IdleLevel::High;
    for (size_t w = 0; w < words.size(); w++) {
        uint8_t byte = 0;
        for (size_t b = 0; b < bits; b++) {
            const double a = amps[w * bits + b];
            BitEdge e = BitEdge::None;
            if (!present.empty()) {
                // A rising data line draws current: voltage drop.
                if (a <= -level_cut)
                    e = BitEdge::Rising;
                else if (a >= level_cut)
                    e = BitEdge::Falling;
            }
            if (e == BitEdge::Rising)
                level = true;
            else if (e == BitEdge::Falling)
                level = false;
            res.bit_edges.push_back(e);
            if (level) {
                const unsigned pos =
                    cfg.bit_order == BitOrder::MsbFirst ? bits - 1 - b : b;
                byte |= static_cast<uint8_t>(1u << pos);
            }
        }
        res.bytes.push_back(byte);
    }
    return res;
}

} // namespace sidetrace
