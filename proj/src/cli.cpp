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

#include "sidetrace/cli.h"
#include "sidetrace/analysis.h"
#include "sidetrace/dsp.h"
#include "sidetrace/error.h"
#include "sidetrace/peripheral.h"
#include "sidetrace/svg.h"
#include "sidetrace/synth.h"
#include "sidetrace/trace.h"
#include "sidetrace/wavelet.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

using std::optional;
using std::string;
using std::vector;

namespace sidetrace {
namespace cli {

namespace {

/// An optional numeric flag: its value is only used when given.
template <typename T> struct Opt {
    T value{};
    CLI::Option *option = nullptr;

    optional<T> get() const {
        return option && option->count() ? optional<T>(value) : std::nullopt;
    }
};

struct Rates {
    Opt<double> rate, clock;

    void add(CLI::App *app, bool with_clock = true) {
        rate.option = app->add_option("--rate", rate.value,
                                      "Sample rate in Hz (needed for CSV input)")
                          ->check(CLI::PositiveNumber);
        if (with_clock)
            clock.option = app->add_option("--clock", clock.value,
                                           "Target clock frequency in Hz")
                               ->check(CLI::PositiveNumber);
    }

    PowerTrace read(const string &path) const {
        return read_trace_file(path, rate.get(), clock.get());
    }
};

/// Writes to path, or to out when path is empty.
void emit(const string &path, const string &data, std::ostream &out) {
    if (path.empty()) {
        out << data;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw ValidationError(path + ": cannot open for writing");
    f << data;
    if (!f)
        throw ProcessingError(path + ": write failed");
}

string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

/// Rethrows a module validation error with the flags that feed it named.
template <typename F> auto naming(const string &flags, F &&f) {
    try {
        return f();
    } catch (const ValidationError &e) {
        throw ValidationError(flags + ": " + e.what());
    }
}

vector<uint8_t> parse_hex(string s) {
    if (s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0)
        s = s.substr(2);
    if (s.empty() || s.size() % 2)
        throw ValidationError("BYTES: expected an even number of hex digits");
    vector<uint8_t> bytes;
    for (size_t i = 0; i < s.size(); i += 2) {
        unsigned v = 0;
        for (size_t j = i; j < i + 2; j++) {
            const char c = s[j];
            unsigned d;
            if (c >= '0' && c <= '9')
                d = c - '0';
            else if (c >= 'a' && c <= 'f')
                d = c - 'a' + 10;
            else if (c >= 'A' && c <= 'F')
                d = c - 'A' + 10;
            else
                throw ValidationError("BYTES: invalid hex digit '" + string(1, c) +
                                      "' at position " + std::to_string(j));
            v = v * 16 + d;
        }
        bytes.push_back(static_cast<uint8_t>(v));
    }
    return bytes;
}

/// Plot titles carry the file name only, so output does not depend on the
/// working directory.
string base_name(const string &path) { return std::filesystem::path(path).filename().string(); }

const char *polarity_name(Polarity p) { return p == Polarity::Drop ? "drop" : "rise"; }

using Handler = std::function<void()>;

void add_filter(CLI::App &app, vector<std::pair<CLI::App *, Handler>> &subs,
                std::ostream &) {
    auto *sub = app.add_subcommand("filter", "Filter a trace");
    auto in = std::make_shared<string>();
    auto outp = std::make_shared<string>();
    auto kind = std::make_shared<string>("highpass");
    auto lo = std::make_shared<Opt<double>>();
    auto hi = std::make_shared<Opt<double>>();
    auto order = std::make_shared<unsigned>(5);
    auto zero = std::make_shared<bool>(false);
    auto rates = std::make_shared<Rates>();

    sub->add_option("input", *in, "Input trace (.csv or .psct)")->required();
    sub->add_option("output", *outp, "Output trace (.psct)")->required();
    sub->add_option("--kind", *kind, "bandpass, highpass or lowpass")
        ->check(CLI::IsMember({"bandpass", "highpass", "lowpass"}));
    lo->option = sub->add_option("--low", lo->value, "Lower cutoff in Hz")
                     ->check(CLI::PositiveNumber);
    hi->option = sub->add_option("--high", hi->value, "Upper cutoff in Hz")
                     ->check(CLI::PositiveNumber);
    sub->add_option("--order", *order, "Butterworth order")
        ->check(CLI::Range(1u, 20u));
    sub->add_flag("--zero-phase", *zero, "Forward-backward filtering");
    rates->add(sub);

    subs.emplace_back(sub, [=] {
        const PhaseMode phase = *zero ? PhaseMode::ZeroPhase : PhaseMode::Causal;
        FilterSpec spec;
        if (*kind == "bandpass") {
            if (!lo->get() || !hi->get())
                throw ValidationError("--kind bandpass needs --low and --high");
            spec = FilterSpec::bandpass(lo->value, hi->value);
        } else if (*kind == "highpass") {
            if (!lo->get())
                throw ValidationError("--kind highpass needs --low");
            spec = FilterSpec::highpass(lo->value, *order, phase);
        } else {
            if (!hi->get())
                throw ValidationError("--kind lowpass needs --high");
            spec = FilterSpec::lowpass(hi->value, *order, phase);
        }
        const PowerTrace t = rates->read(*in);
        naming("--low/--high/--order", [&] { spec.validate(t.sample_rate_hz()); });
        write_trace_file(apply_filter(t, spec), *outp);
    });
}

void add_spectrum(CLI::App &app, vector<std::pair<CLI::App *, Handler>> &subs,
                  std::ostream &out) {
    auto *sub = app.add_subcommand("spectrum", "List the strongest spectral peaks");
    auto in = std::make_shared<string>();
    auto outp = std::make_shared<string>();
    auto plot = std::make_shared<string>();
    auto top = std::make_shared<size_t>(10);
    auto rates = std::make_shared<Rates>();

    sub->add_option("input", *in, "Input trace")->required();
    sub->add_option("--top-k", *top, "Number of peaks")->check(CLI::PositiveNumber);
    sub->add_option("-o,--output", *outp, "CSV output (default: stdout)");
    sub->add_option("--svg", *plot, "Magnitude spectrum plot");
    rates->add(sub, false);

    subs.emplace_back(sub, [=, &out] {
        const Spectrum s = fft_forward(rates->read(*in));
        string csv = "frequency_hz,magnitude\n";
        for (const auto &p : spectral_peaks(s, *top))
            csv += fmt(p.frequency_hz) + "," + fmt(p.magnitude) + "\n";
        emit(*outp, csv, out);
        if (!plot->empty()) {
            const size_t n = s.size();
            vector<double> mag(n / 2 + 1);
            for (size_t k = 0; k < mag.size(); k++)
                mag[k] = std::abs(s.bins[k]) / n;
            emit(*plot, svg::line_plot({mag}, "spectrum " + base_name(*in)), out);
        }
    });
}

void add_fingerprint(CLI::App &app, vector<std::pair<CLI::App *, Handler>> &subs,
                     std::ostream &out) {
    auto *sub = app.add_subcommand("fingerprint", "Detect branch cycles in a trace");
    auto in = std::make_shared<string>();
    auto outp = std::make_shared<string>();
    auto plot = std::make_shared<string>();
    auto theta = std::make_shared<double>(0.3);
    auto highpass = std::make_shared<Opt<double>>();
    auto excise_flag = std::make_shared<bool>(false);
    auto peak_k = std::make_shared<double>(8.0);
    auto merge_gap = std::make_shared<Opt<size_t>>();
    auto guard = std::make_shared<Opt<size_t>>();
    auto family = std::make_shared<string>("ricker");
    auto scales = std::make_shared<size_t>(8);
    auto radius = std::make_shared<size_t>(2);
    auto rates = std::make_shared<Rates>();

    sub->add_option("input", *in, "Input trace")->required();
    sub->add_option("output", *outp, "Fingerprint JSON")->required();
    sub->add_option("--theta", *theta, "Relative threshold in (0, 1)")
        ->check(CLI::Range(0.0, 1.0));
    highpass->option = sub->add_option("--highpass", highpass->value,
                                       "Order-5 Butterworth high-pass cutoff in Hz")
                           ->check(CLI::PositiveNumber);
    sub->add_flag("--excise", *excise_flag, "Remove peripheral peaks first");
    sub->add_option("--peak-k", *peak_k, "MAD multiplier for peripheral peaks")
        ->check(CLI::PositiveNumber);
    merge_gap->option =
        sub->add_option("--merge-gap", merge_gap->value, "Peak merge gap in samples");
    guard->option = sub->add_option("--guard", guard->value, "Excision guard in samples");
    sub->add_option("--wavelet", *family, "ricker or morlet")
        ->check(CLI::IsMember({"ricker", "morlet"}));
    sub->add_option("--scales", *scales, "Number of scales up to one clock cycle")
        ->check(CLI::Range(size_t{1}, size_t{64}));
    sub->add_option("--slot-radius", *radius, "Spectral duplicate radius in samples");
    sub->add_option("--svg", *plot, "Event plot");
    rates->add(sub);

    subs.emplace_back(sub, [=, &out] {
        if (!(*theta > 0.0 && *theta < 1.0))
            throw ValidationError("--theta must lie in (0, 1)");
        const PowerTrace t = rates->read(*in);
        if (!t.clock_hz())
            throw ValidationError("--clock is required (" + *in +
                                  " carries no clock frequency)");
        FingerprintOptions opts;
        opts.slot_radius = *radius;
        opts.excise_peripheral = *excise_flag;
        opts.peripheral.k = *peak_k;
        opts.peripheral.merge_gap = merge_gap->get();
        opts.peripheral.guard = guard->get();
        if (auto hp = highpass->get()) {
            opts.highpass = FilterSpec::highpass(*hp);
            naming("--highpass", [&] { opts.highpass->validate(t.sample_rate_hz()); });
        }
        const WaveletSpec spec = WaveletSpec::clock_ladder(
            t.samples_per_clock(), *scales,
            *family == "morlet" ? WaveletFamily::Morlet : WaveletFamily::Ricker);
        naming("--scales/--wavelet", [&] { spec.validate(); });
        const Fingerprint fp = fingerprint(t, *theta, spec, opts);
        write_fingerprint_file(fp, *outp);
        if (!plot->empty()) {
            const auto cycles = static_cast<size_t>(
                std::ceil(t.size() / t.samples_per_clock()));
            emit(*plot,
                 svg::event_plot(fp, std::max<size_t>(cycles, fp.cycles.empty()
                                                                  ? 1
                                                                  : fp.cycles.back() + 1),
                                 "fingerprint " + base_name(*in)),
                 out);
        }
    });
}

void add_compare(CLI::App &app, vector<std::pair<CLI::App *, Handler>> &subs,
                 std::ostream &out) {
    auto *sub = app.add_subcommand("compare", "Score the similarity of two fingerprints");
    auto a = std::make_shared<string>();
    auto b = std::make_shared<string>();
    auto metric = std::make_shared<string>("pearson");
    auto smoothing = std::make_shared<size_t>(2);
    auto outp = std::make_shared<string>();

    sub->add_option("first", *a, "Fingerprint JSON")->required();
    sub->add_option("second", *b, "Fingerprint JSON")->required();
    sub->add_option("--metric", *metric, "mse or pearson")
        ->check(CLI::IsMember({"mse", "pearson"}));
    sub->add_option("--smoothing", *smoothing, "Raster smoothing half-width in cycles");
    sub->add_option("-o,--output", *outp, "JSON output (default: stdout)");

    subs.emplace_back(sub, [=, &out] {
        const Fingerprint fa = read_fingerprint_file(*a);
        const Fingerprint fb = read_fingerprint_file(*b);
        const auto report = compare_fingerprints(
            fa, fb, *metric == "mse" ? SimilarityMetric::Mse : SimilarityMetric::Pearson,
            *smoothing);
        emit(*outp, to_json(report) + "\n", out);
    });
}

void add_motif(CLI::App &app, vector<std::pair<CLI::App *, Handler>> &subs,
               std::ostream &out) {
    auto *sub = app.add_subcommand("motif", "Find the repeating motif of a fingerprint");
    auto in = std::make_shared<string>();
    auto outp = std::make_shared<string>();
    auto plot = std::make_shared<string>();
    auto min_period = std::make_shared<size_t>(4);
    auto max_period = std::make_shared<Opt<size_t>>();
    auto strength = std::make_shared<double>(0.5);
    auto smoothing = std::make_shared<size_t>(2);

    sub->add_option("input", *in, "Fingerprint JSON")->required();
    sub->add_option("--min-period", *min_period, "Shortest period in cycles")
        ->check(CLI::PositiveNumber);
    max_period->option = sub->add_option("--max-period", max_period->value,
                                         "Longest period in cycles (default: half the span)");
    sub->add_option("--min-strength", *strength, "Autocorrelation cutoff")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--smoothing", *smoothing, "Raster smoothing half-width in cycles");
    sub->add_option("-o,--output", *outp, "JSON output (default: stdout)");
    sub->add_option("--svg", *plot, "Event plot with occurrence markers");

    subs.emplace_back(sub, [=, &out] {
        const Fingerprint fp = read_fingerprint_file(*in);
        const size_t span = fp.cycles.empty() ? 0 : fp.cycles.back() + 1;
        const size_t occupied = fp.cycles.empty() ? 0 : span - fp.cycles.front();
        const size_t hi =
            max_period->get().value_or(std::max<size_t>(occupied / 2, *min_period));
        if (hi < *min_period)
            throw ValidationError("--max-period must not be below --min-period");
        MotifOptions opts;
        opts.min_strength = *strength;
        opts.smoothing_halfwidth = *smoothing;
        const auto report = detect_motif(fp, *min_period, hi, opts);
        emit(*outp, to_json(report) + "\n", out);
        if (!plot->empty()) {
            const vector<uint64_t> none;
            emit(*plot,
                 svg::event_plot(fp, std::max<size_t>(span, 1), "motif " + base_name(*in),
                                 report ? std::span<const uint64_t>(report->occurrence_starts)
                                        : std::span<const uint64_t>(none)),
                 out);
        }
    });
}

void add_peaks(CLI::App &app, vector<std::pair<CLI::App *, Handler>> &subs,
               std::ostream &out) {
    auto *sub = app.add_subcommand("peaks", "Detect and excise peripheral peaks");
    auto in = std::make_shared<string>();
    auto outp = std::make_shared<string>();
    auto excised = std::make_shared<string>();
    auto k = std::make_shared<double>(8.0);
    auto merge_gap = std::make_shared<Opt<size_t>>();
    auto guard = std::make_shared<Opt<size_t>>();
    auto rates = std::make_shared<Rates>();

    sub->add_option("input", *in, "Input trace")->required();
    sub->add_option("-k,--k", *k, "MAD multiplier")->check(CLI::PositiveNumber);
    merge_gap->option = sub->add_option("--merge-gap", merge_gap->value,
                                        "Merge gap in samples (default: one clock cycle)");
    guard->option = sub->add_option("--guard", guard->value,
                                    "Guard in samples (default: two clock cycles)");
    sub->add_option("-o,--output", *outp, "Segments JSON (default: stdout)");
    sub->add_option("--excised", *excised, "Write the excised trace here");
    rates->add(sub);

    subs.emplace_back(sub, [=, &out] {
        const PowerTrace t = rates->read(*in);
        auto per_clock = [&](const char *flag, double cycles) {
            if (!t.clock_hz())
                throw ValidationError(string(flag) + " or --clock is required");
            return static_cast<size_t>(std::lround(cycles * t.samples_per_clock()));
        };
        const size_t gap = merge_gap->get() ? merge_gap->value : per_clock("--merge-gap", 1);
        const size_t g = guard->get() ? guard->value : per_clock("--guard", 2);
        const auto segs = detect_peaks(t, *k, gap);

        nlohmann::ordered_json j;
        auto arr = nlohmann::ordered_json::array();
        for (const auto &s : segs)
            arr.push_back({{"start", s.start},
                           {"end", s.end},
                           {"polarity", polarity_name(s.polarity)},
                           {"peak_magnitude", s.peak_magnitude}});
        j["segments"] = arr;
        j["merge_gap"] = gap;
        j["guard"] = g;
        if (!excised->empty()) {
            const ExcisedTrace e = excise(t, segs, g);
            j["excised_length"] = e.trace.size();
            write_trace_file(e.trace, *excised);
        }
        emit(*outp, j.dump() + "\n", out);
    });
}

void add_decode_spi(CLI::App &app, vector<std::pair<CLI::App *, Handler>> &subs,
                    std::ostream &out) {
    auto *sub = app.add_subcommand("decode-spi", "Recover SPI bytes from supply peaks");
    auto in = std::make_shared<string>();
    auto outp = std::make_shared<string>();
    auto format = std::make_shared<string>("hex");
    auto cfg = std::make_shared<SpiConfig>();
    auto lsb = std::make_shared<bool>(false);
    auto idle_high = std::make_shared<bool>(false);
    auto rates = std::make_shared<Rates>();

    sub->add_option("input", *in, "Input trace")->required();
    sub->add_option("-k,--k", cfg->clock_peak_k, "MAD multiplier for peaks")
        ->check(CLI::PositiveNumber);
    sub->add_option("--bits", cfg->bits_per_word, "Bits per word")
        ->check(CLI::Range(1u, 8u));
    sub->add_flag("--lsb-first", *lsb, "Least significant bit first");
    sub->add_flag("--idle-high", *idle_high, "Data line idles high");
    sub->add_option("--format", *format, "hex or raw")
        ->check(CLI::IsMember({"hex", "raw"}));
    sub->add_option("-o,--output", *outp, "Output (default: stdout)");
    rates->add(sub, false);

    subs.emplace_back(sub, [=, &out] {
        SpiConfig c = *cfg;
        c.bit_order = *lsb ? BitOrder::LsbFirst : BitOrder::MsbFirst;
        c.idle_level = *idle_high ? IdleLevel::High : IdleLevel::Low;
        const auto res = decode_spi(rates->read(*in), c);
        string data;
        if (*format == "raw") {
            data.assign(res.bytes.begin(), res.bytes.end());
        } else {
            char buf[4];
            for (uint8_t b : res.bytes) {
                std::snprintf(buf, sizeof buf, "%02x", b);
                data += buf;
            }
            data += "\n";
        }
        emit(*outp, data, out);
    });
}

void add_cluster(CLI::App &app, vector<std::pair<CLI::App *, Handler>> &subs,
                 std::ostream &out) {
    auto *sub = app.add_subcommand("cluster", "Group crash traces by power pattern");
    auto inputs = std::make_shared<vector<string>>();
    auto cutoff = std::make_shared<double>(0.0);
    auto threshold = std::make_shared<double>(0.3);
    auto order = std::make_shared<unsigned>(5);
    auto outp = std::make_shared<string>();
    auto rates = std::make_shared<Rates>();

    sub->add_option("inputs", *inputs, "Fault-window traces")->required()->expected(2, -1);
    sub->add_option("--cutoff", *cutoff, "Low-pass cutoff in Hz")
        ->required()
        ->check(CLI::PositiveNumber);
    sub->add_option("--threshold", *threshold, "Average-linkage distance cut")
        ->check(CLI::Range(0.0, 2.0));
    sub->add_option("--order", *order, "Low-pass order")->check(CLI::Range(1u, 20u));
    sub->add_option("-o,--output", *outp, "JSON output (default: stdout)");
    rates->add(sub, false);

    subs.emplace_back(sub, [=, &out] {
        vector<PowerTrace> traces;
        for (const auto &p : *inputs)
            traces.push_back(rates->read(p));
        ClusterOptions opts;
        opts.lowpass_order = *order;
        const auto report = naming("--cutoff", [&] {
            return cluster_crashes(traces, *cutoff, *threshold, opts);
        });
        emit(*outp, to_json(report) + "\n", out);
    });
}

void add_synth(CLI::App &app, vector<std::pair<CLI::App *, Handler>> &subs,
               std::ostream &out) {
    auto *sub = app.add_subcommand("synth", "Generate a trace from an event script");
    auto script = std::make_shared<string>();
    auto trace = std::make_shared<string>();
    auto truth = std::make_shared<string>();
    auto seed = std::make_shared<Opt<uint64_t>>();

    sub->add_option("script", *script, "Synth script JSON")->required();
    sub->add_option("trace", *trace, "Output trace (.psct)")->required();
    sub->add_option("truth", *truth, "Ground truth JSON")->required();
    seed->option = sub->add_option("--seed", seed->value, "Override the script seed");

    subs.emplace_back(sub, [=, &out] {
        std::ifstream f(*script);
        if (!f)
            throw ValidationError(*script + ": cannot open for reading");
        SynthScript s = naming(*script, [&] { return load_synth_script(f); });
        if (auto v = seed->get())
            s.seed = *v;
        const SynthResult r = synth_trace(s);
        write_trace_file(r.trace, *trace);
        std::ostringstream gt;
        save_ground_truth_json(r.truth, gt);
        emit(*truth, gt.str(), out);
    });
}

void add_synth_spi(CLI::App &app, vector<std::pair<CLI::App *, Handler>> &subs,
                   std::ostream &out) {
    auto *sub = app.add_subcommand("synth-spi", "Generate SPI supply traffic");
    auto hex = std::make_shared<string>();
    auto trace = std::make_shared<string>();
    auto truth = std::make_shared<string>();
    auto cfg = std::make_shared<SpiSynthConfig>();
    auto lsb = std::make_shared<bool>(false);
    auto idle_high = std::make_shared<bool>(false);

    sub->add_option("bytes", *hex, "Payload as hex digits")->required();
    sub->add_option("trace", *trace, "Output trace (.psct)")->required();
    sub->add_option("truth", *truth, "Ground truth JSON")->required();
    sub->add_option("--edge", cfg->samples_per_clock_edge, "Samples per clock edge")
        ->check(CLI::Range(size_t{4}, size_t{1} << 20));
    sub->add_option("--clock-amp", cfg->clock_peak_amp, "Clock peak amplitude")
        ->check(CLI::PositiveNumber);
    sub->add_option("--data-amp", cfg->data_peak_amp, "Data peak amplitude")
        ->check(CLI::PositiveNumber);
    sub->add_option("--noise", cfg->noise_sigma, "White noise sigma")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", cfg->seed, "Noise seed");
    sub->add_option("--rate", cfg->sample_rate_hz, "Sample rate in Hz")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--lsb-first", *lsb, "Least significant bit first");
    sub->add_flag("--idle-high", *idle_high, "Data line idles high");

    subs.emplace_back(sub, [=, &out] {
        SpiSynthConfig c = *cfg;
        c.bit_order = *lsb ? BitOrder::LsbFirst : BitOrder::MsbFirst;
        c.idle_level = *idle_high ? IdleLevel::High : IdleLevel::Low;
        const vector<uint8_t> bytes = parse_hex(*hex);
        const SynthResult r = synth_spi(bytes, c);
        write_trace_file(r.trace, *trace);
        std::ostringstream gt;
        save_ground_truth_json(r.truth, gt);
        emit(*truth, gt.str(), out);
    });
}

vector<uint64_t> load_truth_cycles(const string &path) {
    std::ifstream f(path);
    if (!f)
        throw ValidationError(path + ": cannot open for reading");
    try {
        const auto j = nlohmann::json::parse(f);
        return j.at("branch_cycles").get<vector<uint64_t>>();
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(path + ": " + e.what());
    }
}

void add_score(CLI::App &app, vector<std::pair<CLI::App *, Handler>> &subs,
               std::ostream &out) {
    auto *sub = app.add_subcommand("score", "Score a fingerprint against ground truth");
    auto fp = std::make_shared<string>();
    auto truth = std::make_shared<string>();
    auto tol = std::make_shared<uint64_t>(1);
    auto outp = std::make_shared<string>();

    sub->add_option("fingerprint", *fp, "Fingerprint JSON")->required();
    sub->add_option("truth", *truth, "Ground truth JSON")->required();
    sub->add_option("--tolerance", *tol, "Match tolerance in cycles");
    sub->add_option("-o,--output", *outp, "JSON output (default: stdout)");

    subs.emplace_back(sub, [=, &out] {
        const Fingerprint f = read_fingerprint_file(*fp);
        const vector<uint64_t> t = load_truth_cycles(*truth);
        emit(*outp, to_json(score_detections(t, f.cycles, *tol)) + "\n", out);
    });
}

} // namespace

int run(const vector<string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Power side-channel trace analysis", "sidetrace"};
    app.require_subcommand(1);

    vector<std::pair<CLI::App *, Handler>> subs;
    add_filter(app, subs, out);
    add_spectrum(app, subs, out);
    add_fingerprint(app, subs, out);
    add_compare(app, subs, out);
    add_motif(app, subs, out);
    add_peaks(app, subs, out);
    add_decode_spi(app, subs, out);
    add_cluster(app, subs, out);
    add_synth(app, subs, out);
    add_synth_spi(app, subs, out);
    add_score(app, subs, out);

    if (!args.empty() && !args[0].empty() && args[0][0] != '-' &&
        std::none_of(subs.begin(), subs.end(),
                     [&](const auto &s) { return s.first->get_name() == args[0]; })) {
        err << "sidetrace: unknown subcommand '" << args[0] << "'\n" << app.help();
        return kValidationError;
    }

    try {
        vector<string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        const CLI::App *where = &app;
        for (const auto &[sub, h] : subs)
            if (sub->parsed())
                where = sub;
        out << where->help();
        return kOk;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError &e) {
        err << "sidetrace: " << e.what() << "\n";
        const CLI::App *where = &app;
        for (const auto &[sub, h] : subs)
            if (sub->parsed())
                where = sub;
        err << where->help();
        return kValidationError;
    }

    try {
        for (const auto &[sub, handler] : subs)
            if (sub->parsed())
                handler();
    } catch (const ValidationError &e) {
        err << "sidetrace: " << e.what() << "\n";
        return kValidationError;
    } catch (const std::exception &e) {
        err << "sidetrace: " << e.what() << "\n";
        return kProcessingError;
    }
    return kOk;
}

} // namespace cli
} // namespace sidetrace
