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

#include "sidetrace/analysis.h"
#include "sidetrace/error.h"
#include "sidetrace/parallel.h"
#include "sidetrace/wavelet.h"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

using std::optional;
using std::span;
using std::vector;

namespace sidetrace {

double pearson(span<const double> a, span<const double> b) {
    if (a.size() != b.size())
        throw ValidationError("pearson needs equal-length vectors");
    const size_t n = a.size();
    if (n == 0)
        return 0.0;
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < n; i++) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (size_t i = 0; i < n; i++) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        return 0.0;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

SimilarityReport compare_fingerprints(const Fingerprint &a, const Fingerprint &b,
                                      SimilarityMetric metric,
                                      size_t smoothing_halfwidth) {
    const double spc_a = a.samples_per_clock, spc_b = b.samples_per_clock;
    if (std::fabs(spc_a - spc_b) > 1e-9 * std::max(spc_a, spc_b))
        throw ValidationError("fingerprints have different samples_per_clock (" +
                              std::to_string(spc_a) + " vs " +
                              std::to_string(spc_b) + ")");
    if (a.cycles.empty() && b.cycles.empty())
        throw ValidationError("both fingerprints are empty");

    uint64_t last = 0;
    if (!a.cycles.empty())
        last = std::max(last, a.cycles.back());
    if (!b.cycles.empty())
        last = std::max(last, b.cycles.back());
    const size_t len = static_cast<size_t>(last) + 1;

    const auto ra = rasterize(a, len, smoothing_halfwidth);
    const auto rb = rasterize(b, len, smoothing_halfwidth);

    SimilarityReport rep;
    rep.metric = metric;
    rep.aligned_length_cycles = len;
    rep.smoothing_halfwidth = smoothing_halfwidth;
    if (metric == SimilarityMetric::Mse) {
        double acc = 0.0;
        for (size_t i = 0; i < len; i++)
            acc += (ra[i] - rb[i]) * (ra[i] - rb[i]);
        rep.score = acc / len;
    } else {
        rep.score = pearson(ra, rb);
    }
    return rep;
}

namespace {

/// Window of length `len` starting at `start` (possibly negative), zero
/// outside the raster.
vector<double> window_at(const vector<double> &x, long start, size_t len) {
    vector<double> w(len, 0.0);
    for (size_t j = 0; j < len; j++) {
        const long i = start + static_cast<long>(j);
        if (i >= 0 && i < static_cast<long>(x.size()))
            w[j] = x[i];
    }
    return w;
}

/// Phase in [0, period) where window boundaries cut the least raster mass:
/// the middle of the longest circular run of phases whose folded mass stays
/// within a quarter of the range above the minimum, so isolated aperiodic
/// events do not break up an otherwise quiet gap.
size_t quiet_phase(const vector<double> &x, size_t period) {
    vector<double> cut(period, 0.0);
    for (size_t i = 0; i < x.size(); i++)
        cut[i % period] += x[i];
    const double lo = *std::min_element(cut.begin(), cut.end());
    const double hi = *std::max_element(cut.begin(), cut.end());
    const double tol = 0.25 * (hi - lo) + 1e-12 * (1.0 + std::fabs(lo));

    auto quiet = [&](size_t i) { return cut[i % period] <= lo + tol; };
    size_t best_start = 0, best_len = period;
    bool any_start = false;
    for (size_t s = 0; s < period; s++) {
        if (!quiet(s) || quiet(s + period - 1))
            continue;
        size_t len = 0;
        while (len < period && quiet(s + len))
            len++;
        if (!any_start || len > best_len) {
            best_start = s;
            best_len = len;
            any_start = true;
        }
    }
    return (best_start + best_len / 2) % period;
}

} // namespace

optional<MotifReport> detect_motif(const Fingerprint &fp, size_t min_period,
                                   size_t max_period, const MotifOptions &options) {
    if (fp.cycles.empty())
        throw ValidationError("motif detection on an empty fingerprint");
    if (min_period < 2)
        throw ValidationError("min_period must be at least 2");
    if (max_period < min_period)
        throw ValidationError("max_period must not be below min_period");
    const uint64_t first = fp.cycles.front();
    const uint64_t last = fp.cycles.back();
    const uint64_t span_cycles = last - first + 1;
    if (max_period > span_cycles / 2)
        throw ValidationError("max_period " + std::to_string(max_period) +
                              " exceeds half the fingerprint span (" +
                              std::to_string(span_cycles) + " cycles)");

    const size_t hw = options.smoothing_halfwidth;
    const uint64_t offset = first >= hw ? first - hw : 0;
    const auto full = rasterize(fp, static_cast<size_t>(last + hw + 1), hw);
    const vector<double> x(full.begin() + offset, full.end());
    const size_t n = x.size();

    double mean = 0.0;
    for (double v : x)
        mean += v;
    mean /= n;
    vector<double> xc(n);
    double energy = 0.0;
    for (size_t i = 0; i < n; i++) {
        xc[i] = x[i] - mean;
        energy += xc[i] * xc[i];
    }
    if (energy == 0.0)
        return std::nullopt;

    size_t period = 0;
    double peak = -std::numeric_limits<double>::infinity();
    for (size_t lag = min_period; lag <= max_period && lag < n; lag++) {
        double acc = 0.0;
        for (size_t i = 0; i + lag < n; i++)
            acc += xc[i] * xc[i + lag];
        const double r = acc / energy;
        if (r > peak) {
            peak = r;
            period = lag;
        }
    }
    if (period == 0)
        return std::nullopt;
    const double strength = std::clamp(peak, 0.0, 1.0);
    if (strength < options.min_strength)
        return std::nullopt;

    // Fixed windows at the quiet phase give the template.
    const long P = static_cast<long>(period);
    const long phase = static_cast<long>(quiet_phase(x, period));
    long first_start = phase;
    while (first_start + P > 0)
        first_start -= P;
    first_start += P;

    vector<double> tmpl(period, 0.0);
    size_t used = 0;
    for (long s = first_start; s < static_cast<long>(n); s += P) {
        const auto w = window_at(x, s, period);
        bool any = false;
        for (double v : w)
            any = any || v != 0.0;
        if (!any)
            continue;
        for (size_t j = 0; j < period; j++)
            tmpl[j] += w[j];
        used++;
    }
    for (double &v : tmpl)
        v /= static_cast<double>(used);

    const long tol = static_cast<long>(std::floor(0.2 * period));
    vector<long> best_run, run;
    auto close_run = [&] {
        if (run.size() > best_run.size())
            best_run = run;
        run.clear();
    };

    long center = first_start;
    while (center < static_cast<long>(n)) {
        double best_corr = -2.0;
        long best_pos = center;
        for (long d = -tol; d <= tol; d++) {
            const long s = center + d;
            if (!run.empty() && s <= run.back())
                continue;
            const double c = pearson(tmpl, window_at(x, s, period));
            if (c > best_corr) {
                best_corr = c;
                best_pos = s;
            }
        }
        if (best_corr >= options.min_strength) {
            run.push_back(best_pos);
            center = best_pos + P;
        } else {
            close_run();
            center += P;
        }
    }
    close_run();

    if (best_run.size() < 2)
        return std::nullopt;

    MotifReport rep;
    rep.period_cycles = period;
    rep.strength = strength;
    rep.occurrences = best_run.size();
    for (long s : best_run) {
        const long c = static_cast<long>(offset) + s;
        rep.occurrence_starts.push_back(static_cast<uint64_t>(std::max(0L, c)));
    }
    // Clamping at cycle zero may collapse the first start onto the second.
    rep.occurrence_starts.erase(
        std::unique(rep.occurrence_starts.begin(), rep.occurrence_starts.end()),
        rep.occurrence_starts.end());
    rep.occurrences = rep.occurrence_starts.size();
    if (rep.occurrences < 2)
        return std::nullopt;
    return rep;
}

double correlation_distance(span<const double> a, span<const double> b,
                            size_t max_lag) {
    const long na = static_cast<long>(a.size());
    const long nb = static_cast<long>(b.size());
    double ea = 0.0, eb = 0.0;
    for (double v : a)
        ea += v * v;
    for (double v : b)
        eb += v * v;
    if (ea == 0.0 || eb == 0.0)
        return 1.0;
    const double norm = std::sqrt(ea * eb);
    const long L = static_cast<long>(max_lag);
    double best = -1.0;
    for (long lag = -L; lag <= L; lag++) {
        double acc = 0.0;
        const long lo = std::max(0L, -lag);
        const long hi = std::min(na, nb - lag);
        for (long t = lo; t < hi; t++)
            acc += a[t] * b[t + lag];
        best = std::max(best, acc / norm);
    }
    return std::clamp(1.0 - best, 0.0, 2.0);
}

CrashClusterReport cluster_crashes(span<const PowerTrace> traces,
                                   double lowpass_cutoff_hz,
                                   double linkage_threshold,
                                   const ClusterOptions &options) {
    const size_t n = traces.size();
    if (n < 2)
        throw ValidationError("crash clustering needs at least two traces");
    if (!(linkage_threshold >= 0.0 && std::isfinite(linkage_threshold)))
        throw ValidationError("linkage threshold must be a non-negative number");
    const double rate = traces[0].sample_rate_hz();
    for (size_t i = 0; i < n; i++) {
        if (std::fabs(traces[i].sample_rate_hz() - rate) > 1e-9 * rate)
            throw ValidationError("trace " + std::to_string(i) +
                                  " has a different sample rate");
        if (traces[i].empty())
            throw ValidationError("trace " + std::to_string(i) + " is empty");
    }
    const FilterSpec lp = FilterSpec::lowpass(
        lowpass_cutoff_hz, options.lowpass_order, options.lowpass_phase);
    lp.validate(rate);

    vector<vector<double>> norm(n);
    parallel_for(n, [&](size_t i) {
        const PowerTrace filtered = butterworth(traces[i], lp);
        vector<double> y(filtered.samples().begin(), filtered.samples().end());
        double mean = 0.0;
        for (double v : y)
            mean += v;
        mean /= y.size();
        double ss = 0.0;
        for (double &v : y) {
            v -= mean;
            ss += v * v;
        }
        const double rms = std::sqrt(ss / y.size());
        if (rms > 0.0)
            for (double &v : y)
                v /= rms;
        norm[i] = std::move(y);
    });

    vector<std::pair<size_t, size_t>> pairs;
    for (size_t i = 0; i < n; i++)
        for (size_t j = i + 1; j < n; j++)
            pairs.emplace_back(i, j);
    vector<double> dist(n * n, 0.0);
    parallel_for(pairs.size(), [&](size_t p) {
        const auto [i, j] = pairs[p];
        const size_t len = std::min(norm[i].size(), norm[j].size());
        const auto lag = static_cast<size_t>(
            std::floor(options.max_lag_fraction * static_cast<double>(len)));
        const double d = correlation_distance(norm[i], norm[j], lag);
        dist[i * n + j] = d;
        dist[j * n + i] = d;
    });

    // Average linkage, merging the closest pair while it is within the cut.
    vector<vector<size_t>> clusters;
    for (size_t i = 0; i < n; i++)
        clusters.push_back({i});
    auto linkage = [&](const vector<size_t> &a, const vector<size_t> &b) {
        double acc = 0.0;
        for (size_t i : a)
            for (size_t j : b)
                acc += dist[i * n + j];
        return acc / static_cast<double>(a.size() * b.size());
    };
    while (clusters.size() > 1) {
        double best = std::numeric_limits<double>::infinity();
        size_t bi = 0, bj = 0;
        for (size_t i = 0; i < clusters.size(); i++)
            for (size_t j = i + 1; j < clusters.size(); j++) {
                const double l = linkage(clusters[i], clusters[j]);
                if (l < best) {
                    best = l;
                    bi = i;
                    bj = j;
                }
            }
        if (best > linkage_threshold)
            break;
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(),
                            clusters[bj].end());
        clusters.erase(clusters.begin() + static_cast<long>(bj));
    }

    for (auto &c : clusters)
        std::sort(c.begin(), c.end());
    std::sort(clusters.begin(), clusters.end(),
              [](const auto &a, const auto &b) { return a.front() < b.front(); });

    CrashClusterReport rep;
    rep.linkage_threshold = linkage_threshold;
    rep.labels.assign(n, 0);
    for (size_t c = 0; c < clusters.size(); c++) {
        size_t medoid = clusters[c].front();
        double best = std::numeric_limits<double>::infinity();
        for (size_t i : clusters[c]) {
            rep.labels[i] = c;
            double sum = 0.0;
            for (size_t j : clusters[c])
                sum += dist[i * n + j];
            if (sum < best) {
                best = sum;
                medoid = i;
            }
        }
        rep.medoids.push_back(medoid);
    }
    rep.distances = std::move(dist);
    return rep;
}

DetectionScore score_detections(span<const uint64_t> truth,
                                span<const uint64_t> detected,
                                uint64_t tolerance) {
    DetectionScore s;
    s.true_events = truth.size();
    s.detections = detected.size();

    vector<std::tuple<uint64_t, size_t, size_t>> pairs;
    for (size_t i = 0; i < truth.size(); i++)
        for (size_t j = 0; j < detected.size(); j++) {
            const uint64_t d = truth[i] > detected[j] ? truth[i] - detected[j]
                                                      : detected[j] - truth[i];
            if (d <= tolerance)
                pairs.emplace_back(d, i, j);
        }
    std::sort(pairs.begin(), pairs.end());
    vector<bool> t_used(truth.size(), false), d_used(detected.size(), false);
    for (const auto &[d, i, j] : pairs) {
        if (t_used[i] || d_used[j])
            continue;
        t_used[i] = d_used[j] = true;
        s.matched++;
    }
    s.false_positives = s.detections - s.matched;
    if (s.true_events > 0) {
        s.recall = static_cast<double>(s.matched) / s.true_events;
        s.false_positive_rate =
            static_cast<double>(s.false_positives) / s.true_events;
    }
    return s;
}

std::string to_json(const SimilarityReport &r) {
    nlohmann::ordered_json j;
    j["metric"] = r.metric == SimilarityMetric::Mse ? "mse" : "pearson";
    j["score"] = r.score;
    j["aligned_length_cycles"] = r.aligned_length_cycles;
    j["smoothing_halfwidth"] = r.smoothing_halfwidth;
    return j.dump();
}

std::string to_json(const optional<MotifReport> &r) {
    if (!r)
        return "null";
    nlohmann::ordered_json j;
    j["period_cycles"] = r->period_cycles;
    j["occurrences"] = r->occurrences;
    j["occurrence_starts"] = r->occurrence_starts;
    j["strength"] = r->strength;
    return j.dump();
}

std::string to_json(const CrashClusterReport &r) {
    nlohmann::ordered_json j;
    j["labels"] = r.labels;
    j["medoids"] = r.medoids;
    j["linkage_threshold"] = r.linkage_threshold;
    return j.dump();
}

std::string to_json(const DetectionScore &s) {
    nlohmann::ordered_json j;
    j["true_events"] = s.true_events;
    j["detections"] = s.detections;
    j["matched"] = s.matched;
    j["false_positives"] = s.false_positives;
    j["recall"] = s.recall;
    j["false_positive_rate"] = s.false_positive_rate;
    return j.dump();
}

} // namespace sidetrace
