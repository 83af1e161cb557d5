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

#include "sidetrace/trace.h"
#include "sidetrace/error.h"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

using std::optional;
using std::string;
using std::vector;

namespace sidetrace {

PowerTrace::PowerTrace(vector<double> samples, double sample_rate_hz,
                       optional<double> clock_hz, string label)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz),
      clock_hz_(clock_hz), label_(std::move(label)) {
    if (!(std::isfinite(sample_rate_hz_) && sample_rate_hz_ > 0.0))
        throw ValidationError("sample rate must be a positive finite number");
    if (clock_hz_) {
        if (!(std::isfinite(*clock_hz_) && *clock_hz_ > 0.0))
            throw ValidationError("clock frequency must be positive");
        if (*clock_hz_ > sample_rate_hz_)
            throw ValidationError(
                "clock frequency exceeds sample rate (fewer than one sample "
                "per clock cycle)");
    }
    for (size_t i = 0; i < samples_.size(); i++)
        if (!std::isfinite(samples_[i]))
            throw ValidationError("non-finite sample at index " +
                                  std::to_string(i));
}

double PowerTrace::samples_per_clock() const {
    if (!clock_hz_)
        throw ValidationError(
            "clock frequency unknown: samples per clock cannot be computed");
    return sample_rate_hz_ / *clock_hz_;
}

PowerTrace PowerTrace::with_samples(vector<double> samples) const {
    return PowerTrace(std::move(samples), sample_rate_hz_, clock_hz_, label_);
}

namespace {

std::string_view trim(std::string_view s) {
    const char *ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double &out) {
    s = trim(s);
    if (s.empty())
        return false;
    if (s.front() == '+')
        s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() &&
           std::isfinite(out);
}

bool rates_agree(double a, double b) {
    return std::fabs(a - b) <= 0.01 * std::max(std::fabs(a), std::fabs(b));
}

} // namespace

PowerTrace load_trace_csv(std::istream &source, optional<double> sample_rate_hz,
                          optional<double> clock_hz) {
    vector<double> times;
    vector<double> volts;
    vector<size_t> lines;
    bool two_columns = false;
    bool first = true;
    string line;
    size_t lineno = 0;

    while (std::getline(source, line)) {
        lineno++;
        std::string_view row = trim(line);
        if (first && row.size() >= 3 && row.substr(0, 3) == "\xEF\xBB\xBF")
            row = trim(row.substr(3));
        if (row.empty())
            continue;

        if (first) {
            first = false;
            if (row == "time_s,voltage_v") {
                two_columns = true;
                continue;
            }
        }

        const auto comma = row.find(',');
        if (two_columns) {
            double t, v;
            if (comma == std::string_view::npos ||
                !parse_double(row.substr(0, comma), t) ||
                !parse_double(row.substr(comma + 1), v))
                throw ValidationError("malformed CSV row at line " +
                                      std::to_string(lineno));
            if (!times.empty() && !(t > times.back()))
                throw ValidationError("non-monotone time column at line " +
                                      std::to_string(lineno));
            times.push_back(t);
            volts.push_back(v);
            lines.push_back(lineno);
        } else {
            double v;
            if (comma != std::string_view::npos || !parse_double(row, v))
                throw ValidationError("malformed CSV row at line " +
                                      std::to_string(lineno));
            volts.push_back(v);
        }
    }

    if (!two_columns) {
        if (!sample_rate_hz)
            throw ValidationError(
                "single-column CSV needs an explicit sample rate");
        return PowerTrace(std::move(volts), *sample_rate_hz, clock_hz);
    }

    if (times.size() < 2)
        throw ValidationError(
            "two-column CSV needs at least two rows to infer the sample rate");
    vector<double> deltas(times.size() - 1);
    for (size_t i = 0; i + 1 < times.size(); i++)
        deltas[i] = times[i + 1] - times[i];
    const double step = median(deltas);
    for (size_t i = 0; i < deltas.size(); i++)
        if (std::fabs(deltas[i] - step) > 0.01 * step)
            throw ValidationError(
                "non-uniform sampling: time step at line " +
                std::to_string(lines[i + 1]) + " deviates more than 1% from median");
    const double inferred = 1.0 / step;
    if (sample_rate_hz && !rates_agree(*sample_rate_hz, inferred))
        throw ValidationError("inferred sample rate " +
                              std::to_string(inferred) +
                              " Hz conflicts with supplied rate " +
                              std::to_string(*sample_rate_hz) + " Hz");
    return PowerTrace(std::move(volts), inferred, clock_hz);
}

namespace {

constexpr std::array<char, 4> kTraceMagic = {'P', 'S', 'C', 'T'};
constexpr uint16_t kTraceVersion = 1;

template <typename T> void put_le(std::ostream &os, T v) {
    std::array<char, sizeof(T)> bytes;
    for (size_t i = 0; i < sizeof(T); i++)
        bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(bytes.data(), bytes.size());
}

void put_f64(std::ostream &os, double v) {
    put_le<uint64_t>(os, std::bit_cast<uint64_t>(v));
}

template <typename T> T get_le(std::istream &is, const char *what) {
    std::array<unsigned char, sizeof(T)> bytes;
    is.read(reinterpret_cast<char *>(bytes.data()), bytes.size());
    if (is.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw ValidationError(string("truncated trace header (") + what + ")");
    T v = 0;
    for (size_t i = 0; i < sizeof(T); i++)
        v |= static_cast<T>(bytes[i]) << (8 * i);
    return v;
}

double get_f64(std::istream &is, const char *what) {
    return std::bit_cast<double>(get_le<uint64_t>(is, what));
}

} // namespace

PowerTrace load_trace_bin(std::istream &source) {
    std::array<char, 4> magic{};
    source.read(magic.data(), magic.size());
    if (source.gcount() != 4 || magic != kTraceMagic)
        throw ValidationError("bad magic: not a PSCT trace");
    const auto version = get_le<uint16_t>(source, "version");
    if (version != kTraceVersion)
        throw ValidationError("unsupported trace version " +
                              std::to_string(version));
    const auto flags = get_le<uint16_t>(source, "flags");
    const double rate = get_f64(source, "sample_rate_hz");
    const double clock = get_f64(source, "clock_hz");
    const auto count = get_le<uint64_t>(source, "count");

    vector<double> samples;
    // Grow as data arrives so a corrupt count cannot trigger a huge
    // allocation up front.
    samples.reserve(std::min<uint64_t>(count, 1u << 20));
    std::array<unsigned char, 8> buf;
    for (uint64_t i = 0; i < count; i++) {
        source.read(reinterpret_cast<char *>(buf.data()), buf.size());
        if (source.gcount() != 8)
            throw ValidationError("truncated payload: header declares " +
                                  std::to_string(count) + " samples, found " +
                                  std::to_string(i));
        uint64_t bits = 0;
        for (size_t b = 0; b < 8; b++)
            bits |= static_cast<uint64_t>(buf[b]) << (8 * b);
        samples.push_back(std::bit_cast<double>(bits));
    }
    if (source.peek() != std::char_traits<char>::eof())
        throw ValidationError("trailing bytes after " + std::to_string(count) +
                              " declared samples");

    optional<double> clk;
    if (flags & 1u)
        clk = clock;
    return PowerTrace(std::move(samples), rate, clk);
}

void save_trace_bin(const PowerTrace &trace, std::ostream &sink) {
    sink.write(kTraceMagic.data(), kTraceMagic.size());
    put_le<uint16_t>(sink, kTraceVersion);
    put_le<uint16_t>(sink, trace.clock_hz() ? 1 : 0);
    put_f64(sink, trace.sample_rate_hz());
    put_f64(sink, trace.clock_hz().value_or(0.0));
    put_le<uint64_t>(sink, trace.size());
    for (double v : trace.samples())
        put_f64(sink, v);
}

PowerTrace slice_trace(const PowerTrace &trace, size_t start, size_t end) {
    if (!(start < end && end <= trace.size()))
        throw ValidationError("slice [" + std::to_string(start) + ", " +
                              std::to_string(end) +
                              ") out of range for trace of length " +
                              std::to_string(trace.size()));
    auto s = trace.samples();
    return trace.with_samples(vector<double>(s.begin() + start, s.begin() + end));
}

double median(std::span<const double> values) {
    if (values.empty())
        throw ValidationError("median of an empty sequence");
    vector<double> v(values.begin(), values.end());
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1)
        return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + mid);
    return lower + (upper - lower) / 2.0;
}

double median_abs_deviation(std::span<const double> values, double center) {
    vector<double> dev(values.size());
    for (size_t i = 0; i < values.size(); i++)
        dev[i] = std::fabs(values[i] - center);
    return median(dev);
}

TraceStats trace_stats(const PowerTrace &trace) {
    if (trace.empty())
        throw ValidationError("statistics of an empty trace");
    auto s = trace.samples();
    TraceStats st;
    auto [mn, mx] = std::minmax_element(s.begin(), s.end());
    st.min = *mn;
    st.max = *mx;
    double sum = 0.0;
    for (double v : s)
        sum += v;
    st.mean = sum / s.size();
    double ss = 0.0;
    for (double v : s)
        ss += (v - st.mean) * (v - st.mean);
    st.std_dev = std::sqrt(ss / s.size());
    st.median = median(s);
    st.mad = median_abs_deviation(s, st.median);
    return st;
}

void validate_fingerprint(const Fingerprint &fp) {
    if (!(fp.theta > 0.0 && fp.theta < 1.0))
        throw ValidationError("fingerprint theta must lie in (0, 1)");
    if (!(std::isfinite(fp.samples_per_clock) && fp.samples_per_clock >= 1.0))
        throw ValidationError("fingerprint samples_per_clock must be >= 1");
    for (size_t i = 1; i < fp.cycles.size(); i++)
        if (fp.cycles[i] <= fp.cycles[i - 1])
            throw ValidationError(
                "fingerprint cycles must be strictly increasing (index " +
                std::to_string(i) + ")");
}

Fingerprint load_fingerprint_json(std::istream &source) {
    nlohmann::json j;
    try {
        source >> j;
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(string("malformed fingerprint JSON: ") +
                              e.what());
    }
    Fingerprint fp;
    try {
        if (!j.is_object())
            throw ValidationError("fingerprint JSON must be an object");
        fp.theta = j.at("theta").get<double>();
        fp.samples_per_clock = j.at("samples_per_clock").get<double>();
        for (const auto &c : j.at("cycles")) {
            if (!c.is_number_integer() || c.get<int64_t>() < 0)
                throw ValidationError(
                    "fingerprint cycles must be non-negative integers");
            fp.cycles.push_back(c.get<uint64_t>());
        }
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(string("invalid fingerprint JSON: ") + e.what());
    }
    validate_fingerprint(fp);
    return fp;
}

void save_fingerprint_json(const Fingerprint &fp, std::ostream &sink) {
    validate_fingerprint(fp);
    nlohmann::ordered_json j;
    j["theta"] = fp.theta;
    j["samples_per_clock"] = fp.samples_per_clock;
    j["cycles"] = fp.cycles;
    sink << j.dump() << "\n";
}

namespace {

bool has_suffix(const string &s, const string &suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <typename Fn> auto with_path(const string &path, Fn &&fn) {
    try {
        return fn();
    } catch (const ValidationError &e) {
        throw ValidationError(path + ": " + e.what());
    } catch (const ProcessingError &e) {
        throw ProcessingError(path + ": " + e.what());
    }
}

} // namespace

PowerTrace read_trace_file(const string &path, optional<double> sample_rate_hz,
                           optional<double> clock_hz) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError(path + ": cannot open for reading");
    return with_path(path, [&] {
        if (has_suffix(path, ".csv"))
            return load_trace_csv(in, sample_rate_hz, clock_hz);
        PowerTrace t = load_trace_bin(in);
        if (sample_rate_hz && !rates_agree(*sample_rate_hz, t.sample_rate_hz()))
            throw ValidationError("stored sample rate " +
                                  std::to_string(t.sample_rate_hz()) +
                                  " Hz conflicts with --rate");
        if (clock_hz) {
            if (t.clock_hz() && !rates_agree(*clock_hz, *t.clock_hz()))
                throw ValidationError("stored clock " +
                                      std::to_string(*t.clock_hz()) +
                                      " Hz conflicts with --clock");
            vector<double> s(t.samples().begin(), t.samples().end());
            return PowerTrace(std::move(s), t.sample_rate_hz(), clock_hz);
        }
        return t;
    });
}

void write_trace_file(const PowerTrace &trace, const string &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ValidationError(path + ": cannot open for writing");
    save_trace_bin(trace, out);
    if (!out)
        throw ProcessingError(path + ": write failed");
}

Fingerprint read_fingerprint_file(const string &path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError(path + ": cannot open for reading");
    return with_path(path, [&] { return load_fingerprint_json(in); });
}

void write_fingerprint_file(const Fingerprint &fp, const string &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw ValidationError(path + ": cannot open for writing");
    save_fingerprint_json(fp, out);
    if (!out)
        throw ProcessingError(path + ": write failed");
}

} // namespace sidetrace
