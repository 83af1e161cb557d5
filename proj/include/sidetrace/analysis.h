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
#include "sidetrace/trace.h"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sidetrace {

enum class SimilarityMetric { Mse, Pearson };

struct SimilarityReport {
    SimilarityMetric metric = SimilarityMetric::Pearson;
    double score = 0.0;
    size_t aligned_length_cycles = 0;
    size_t smoothing_halfwidth = 0;
};

/// Pearson correlation of two equal-length vectors; 0 when either is constant.
double pearson(std::span<const double> a, std::span<const double> b);

/// Rasterizes both fingerprints over [0, max cycle + 1) with the same
/// triangular smoothing and scores them by mean squared difference or Pearson
/// correlation.
SimilarityReport compare_fingerprints(const Fingerprint &a, const Fingerprint &b,
                                      SimilarityMetric metric,
                                      size_t smoothing_halfwidth = 2);

struct MotifReport {
    size_t period_cycles = 0;
    size_t occurrences = 0;
    std::vector<uint64_t> occurrence_starts;
    double strength = 0.0;

    bool operator==(const MotifReport &) const = default;
};

struct MotifOptions {
    /// Minimum normalized autocorrelation peak for a motif to be reported;
    /// also the minimum template correlation for an occurrence.
    double min_strength = 0.5;
    size_t smoothing_halfwidth = 2;
};

/// Finds the dominant repetition period of a fingerprint and its occurrences.
///
/// The period is the lag in [min_period, max_period] maximizing the
/// normalized autocorrelation of the mean-removed, smoothed raster. The
/// raster is then cut into period-long windows at the phase where the fewest
/// events straddle a window boundary; the motif template is the mean of those
/// windows. Occurrences are matched greedily from left to right, each search
/// centered one period after the previous match and allowed to move by 20% of
/// the period. The longest run of consecutive matches is reported.
std::optional<MotifReport> detect_motif(const Fingerprint &fp, size_t min_period,
                                        size_t max_period,
                                        const MotifOptions &options = {});

struct CrashClusterReport {
    std::vector<size_t> labels;  ///< cluster id per input trace
    std::vector<size_t> medoids; ///< trace index per cluster id
    double linkage_threshold = 0.0;
    /// Pairwise correlation distances, row-major n x n.
    std::vector<double> distances;
};

struct ClusterOptions {
    unsigned lowpass_order = 5;
    PhaseMode lowpass_phase = PhaseMode::ZeroPhase;
    double max_lag_fraction = 0.05;
};

/// 1 - max normalized cross-correlation over lags within +/- max_lag samples.
/// Inputs are expected to be mean-removed and unit-RMS.
double correlation_distance(std::span<const double> a, std::span<const double> b,
                            size_t max_lag);

/// Groups fault-window traces by the shape of their power pattern: low-pass,
/// mean removal, unit-RMS scaling, pairwise correlation distance with a lag
/// search of +/- 5% of the length, and average-linkage agglomerative
/// clustering cut at linkage_threshold. Cluster ids follow the order in which
/// clusters first appear in the input.
CrashClusterReport cluster_crashes(std::span<const PowerTrace> traces,
                                   double lowpass_cutoff_hz,
                                   double linkage_threshold,
                                   const ClusterOptions &options = {});

/// Detection scoring against known event cycles. Every true event is matched
/// to at most one detection within +/- tolerance cycles (closest first).
struct DetectionScore {
    size_t true_events = 0;
    size_t detections = 0;
    size_t matched = 0;
    size_t false_positives = 0;
    double recall = 0.0;
    /// Unmatched detections divided by the number of true events.
    double false_positive_rate = 0.0;
};

DetectionScore score_detections(std::span<const uint64_t> truth,
                                std::span<const uint64_t> detected,
                                uint64_t tolerance = 1);

std::string to_json(const SimilarityReport &r);
std::string to_json(const std::optional<MotifReport> &r);
std::string to_json(const CrashClusterReport &r);
std::string to_json(const DetectionScore &s);

} // namespace sidetrace
