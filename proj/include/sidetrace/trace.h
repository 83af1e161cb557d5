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

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sidetrace {

/// A sampled power trace: voltages at a fixed sample rate, with an optional
/// device clock frequency. Instances are immutable once constructed, and the
/// constructor enforces the invariants (positive rate, finite samples, at
/// least one sample per clock cycle when the clock is known).
class PowerTrace {
  public:
    PowerTrace(std::vector<double> samples, double sample_rate_hz,
               std::optional<double> clock_hz = std::nullopt,
               std::string label = {});

    std::span<const double> samples() const { return samples_; }
    size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    double operator[](size_t i) const { return samples_[i]; }

    double sample_rate_hz() const { return sample_rate_hz_; }
    const std::optional<double> &clock_hz() const { return clock_hz_; }
    const std::string &label() const { return label_; }

    /// Fs / clk. Throws ValidationError when the clock is unknown.
    double samples_per_clock() const;

    /// A trace with the same rates and label but different samples.
    PowerTrace with_samples(std::vector<double> samples) const;

    bool operator==(const PowerTrace &) const = default;

  private:
    std::vector<double> samples_;
    double sample_rate_hz_;
    std::optional<double> clock_hz_;
    std::string label_;
};

struct TraceStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double std_dev = 0.0; ///< population standard deviation
    double median = 0.0;
    double mad = 0.0; ///< median absolute deviation from the median, unscaled
};

/// The control-flow fingerprint: unique clock-cycle indices of high-frequency
/// events, together with the parameters that produced it.
struct Fingerprint {
    std::vector<uint64_t> cycles; ///< strictly increasing
    double theta = 0.3;
    double samples_per_clock = 1.0;

    bool operator==(const Fingerprint &) const = default;
};

/// Reads a CSV trace: either one voltage column, or a `time_s,voltage_v`
/// header followed by two columns. In the two-column form the rate is
/// inferred from the median time step; a supplied rate must agree within 1%.
PowerTrace load_trace_csv(std::istream &source,
                          std::optional<double> sample_rate_hz,
                          std::optional<double> clock_hz = std::nullopt);

/// Binary trace format, little-endian:
///   "PSCT" | u16 version=1 | u16 flags (bit0: clock present) |
///   f64 sample_rate_hz | f64 clock_hz (0 when absent) | u64 count |
///   count x f64 samples
PowerTrace load_trace_bin(std::istream &source);
void save_trace_bin(const PowerTrace &trace, std::ostream &sink);

/// Samples [start, end) of the trace, with the same rates.
PowerTrace slice_trace(const PowerTrace &trace, size_t start, size_t end);

TraceStats trace_stats(const PowerTrace &trace);

/// Exact median (average of the two middle values for even sizes).
double median(std::span<const double> values);

/// Median absolute deviation around the given center.
double median_abs_deviation(std::span<const double> values, double center);

/// Fingerprint JSON: {"theta": x, "samples_per_clock": y, "cycles": [...]}.
Fingerprint load_fingerprint_json(std::istream &source);
void save_fingerprint_json(const Fingerprint &fp, std::ostream &sink);

/// Checks the Fingerprint invariants; throws ValidationError.
void validate_fingerprint(const Fingerprint &fp);

/// File helpers that name the path in their errors.
PowerTrace read_trace_file(const std::string &path,
                           std::optional<double> sample_rate_hz = std::nullopt,
                           std::optional<double> clock_hz = std::nullopt);
void write_trace_file(const PowerTrace &trace, const std::string &path);
Fingerprint read_fingerprint_file(const std::string &path);
void write_fingerprint_file(const Fingerprint &fp, const std::string &path);

} // namespace sidetrace
