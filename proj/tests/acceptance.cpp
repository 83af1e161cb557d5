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

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "sidetrace/analysis.h"
#include "sidetrace/dsp.h"
#include "sidetrace/peripheral.h"
#include "sidetrace/synth.h"
#include "sidetrace/trace.h"
#include "sidetrace/wavelet.h"

#include "oracles.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

using namespace sidetrace;
using std::string;
using std::vector;

namespace {

struct Outcome {
    bool pass;
    string detail;
};

double elapsed_s(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

/// Event script used by the detection criteria: burst amplitude over noise
/// sigma of 10.
SynthScript detection_script(uint64_t seed, size_t events, uint64_t cycles, double spc,
                             std::mt19937_64 &rng) {
    const auto c = oracle::spaced_cycles(rng, events, cycles, 4, 4);
    return oracle::branch_script(c, cycles, spc, 1.0, 0.1, seed);
}

Outcome recall_and_false_positives() {
    const auto t0 = std::chrono::steady_clock::now();
    size_t truth = 0, matched = 0, false_pos = 0;
    for (uint64_t seed = 0; seed < 100; seed++) {
        std::mt19937_64 rng(seed);
        const SynthResult r = synth_trace(detection_script(seed, 50, 1000, 32.0, rng));
        const Fingerprint f = fingerprint(r.trace, 0.3);
        const DetectionScore s = score_detections(r.truth.branch_cycles, f.cycles, 1);
        truth += s.true_events;
        matched += s.matched;
        false_pos += s.false_positives;
    }
    const double recall = static_cast<double>(matched) / truth;
    const double fpr = static_cast<double>(false_pos) / truth;
    const double secs = elapsed_s(t0);
    return {recall >= 0.95 && fpr <= 0.12 && secs <= 60.0,
            "recall " + num(recall) + ", false positives " + num(fpr) + " of true events, " +
                num(secs) + " s"};
}

Outcome amplitude_invariance() {
    size_t bad = 0;
    for (uint64_t seed = 0; seed < 20; seed++) {
        std::mt19937_64 rng(1000 + seed);
        const PowerTrace t = synth_trace(detection_script(seed, 20, 300, 32.0, rng)).trace;
        const Fingerprint ref = fingerprint(t, 0.3);
        for (double alpha : {0.5, 2.0, 10.0})
            bad += fingerprint(oracle::scaled(t, alpha), 0.3).cycles != ref.cycles;
    }
    return {bad == 0, std::to_string(bad) + " of 60 scaled fingerprints differ"};
}

Outcome shift_equivariance() {
    size_t bad = 0;
    for (uint64_t seed = 0; seed < 20; seed++) {
        std::mt19937_64 rng(2000 + seed);
        const SynthScript s = detection_script(seed, 20, 300, 32.0, rng);
        const PowerTrace t = synth_trace(s).trace;
        const Fingerprint ref = fingerprint(t, 0.3);
        for (uint64_t k : {10u, 100u}) {
            SynthScript quiet = oracle::branch_script({}, k, 32.0, 0.0, 0.1, seed + 7777);
            const PowerTrace lead = synth_trace(quiet).trace;
            vector<double> x(lead.samples().begin(), lead.samples().end());
            x.insert(x.end(), t.samples().begin(), t.samples().end());
            const Fingerprint got = fingerprint(t.with_samples(std::move(x)), 0.3);
            vector<uint64_t> expect = ref.cycles;
            for (auto &c : expect)
                c += k;
            bad += !oracle::within_one(got.cycles, expect);
        }
    }
    return {bad == 0, std::to_string(bad) + " of 40 shifted fingerprints off"};
}

Outcome cwt_oracle() {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int trial = 0; trial < 50; trial++) {
        const size_t n = 64 + rng() % 193;
        vector<double> x(n);
        for (double &v : x)
            v = g(rng);
        const double top = std::floor((n - 1) / 10.0);
        vector<double> scales = {1.0};
        for (int i = 0; i < 4; i++)
            scales.push_back(1.0 + (top - 1.0) * std::uniform_real_distribution<double>()(rng));
        scales.push_back(top);
        std::sort(scales.begin(), scales.end());
        scales.erase(std::unique(scales.begin(), scales.end()), scales.end());
        const auto family = trial % 2 ? WaveletFamily::Morlet : WaveletFamily::Ricker;
        WaveletSpec spec;
        spec.family = family;
        spec.scales = scales;
        const Scalogram got = cwt(PowerTrace(x, 1.0), spec);
        const auto want = oracle::direct_cwt(x, family, scales);
        for (size_t i = 0; i < scales.size(); i++) {
            double peak = 0.0, err = 0.0;
            for (size_t t = 0; t < n; t++) {
                peak = std::max(peak, std::fabs(want[i][t]));
                err = std::max(err, std::fabs(got.at(i, t) - want[i][t]));
            }
            worst = std::max(worst, err / peak);
        }
    }
    return {worst <= 1e-9, "max relative error " + num(worst)};
}

double steady_gain(const vector<Biquad> &sos, double f, double fs) {
    const size_t n = 1 << 16;
    const auto x = oracle::tone(n, f, fs);
    const auto y = sosfilt(sos, x);
    return oracle::rms(std::span(y).subspan(n / 2)) / oracle::rms(std::span(x).subspan(n / 2));
}

Outcome filter_responses() {
    const double fs = 1e6, fc = 2e4;
    const auto sos = butterworth_sections(FilterKind::ButterworthHighpass, 5, fc, fs);
    const double at_cut = 20 * std::log10(steady_gain(sos, fc, fs));
    const double octave = 20 * std::log10(steady_gain(sos, fc / 2, fs));

    const size_t n = 4096;
    const double fsb = 4096.0;
    vector<double> in(n, 0.0), out(n, 0.0);
    for (double f : {100.0, 300.0})
        for (size_t i = 0; i < n; i++)
            in[i] += std::cos(2 * oracle::kPi * f * i / fsb);
    vector<double> x = in;
    for (double f : {20.0, 900.0, 1500.0})
        for (size_t i = 0; i < n; i++)
            x[i] += std::cos(2 * oracle::kPi * f * i / fsb + 0.3);
    const PowerTrace y = fft_bandpass(PowerTrace(x, fsb), 50.0, 500.0);
    const auto Y = oracle::direct_dft(y.samples());
    double in_band_err = 0.0, out_band_db = -400.0;
    for (double f : {100.0, 300.0})
        in_band_err = std::max(in_band_err, std::fabs(std::abs(Y[size_t(f)]) / (n / 2.0) - 1.0));
    for (double f : {20.0, 900.0, 1500.0})
        out_band_db = std::max(out_band_db,
                               20 * std::log10(std::abs(Y[size_t(f)]) / (n / 2.0) + 1e-300));

    const bool ok = std::fabs(at_cut + 3.0) <= 0.5 && std::fabs(octave + 30.0) <= 3.0 &&
                    in_band_err <= 0.01 && out_band_db <= -60.0;
    return {ok, "high-pass " + num(at_cut) + " dB at cutoff, " + num(octave) +
                    " dB an octave below; bandpass in-band error " + num(in_band_err) +
                    ", out-of-band " + num(out_band_db) + " dB"};
}

Outcome peripheral_excision() {
    size_t bad = 0;
    for (uint64_t seed = 0; seed < 20; seed++) {
        std::mt19937_64 rng(6000 + seed);
        const auto events = oracle::spaced_cycles(rng, 15, 300, 8, 6);
        SynthScript clean = oracle::branch_script(events, 300, 32.0, 1.0, 0.1, seed);
        SynthScript spiked = clean;
        for (uint64_t c : oracle::quiet_cycles(rng, events, 3, 300, 8))
            spiked.peripheral_events.push_back({c, 20.0, 0.5});
        const Fingerprint want = fingerprint(synth_trace(clean).trace, 0.3);
        FingerprintOptions opts;
        opts.excise_peripheral = true;
        opts.peripheral.k = 25.0;
        bad += !oracle::within_one(fingerprint(synth_trace(spiked).trace, 0.3, opts).cycles,
                                   want.cycles);
    }
    return {bad == 0, std::to_string(bad) + " of 20 seeds differ"};
}

Outcome spi_round_trip() {
    std::mt19937_64 rng(7);
    size_t bad = 0;
    for (uint64_t seed = 0; seed < 200; seed++) {
        vector<uint8_t> bytes(1 + rng() % 64);
        for (auto &b : bytes)
            b = static_cast<uint8_t>(rng());
        SpiSynthConfig cfg;
        cfg.seed = seed;
        cfg.noise_sigma = cfg.data_peak_amp / 10.0;
        try {
            const bool ok = decode_spi(synth_spi(bytes, cfg).trace).bytes == bytes;
            if (!ok && std::getenv("SIDETRACE_ACCEPTANCE_VERBOSE"))
                std::cerr << "spi seed " << seed << " length " << bytes.size() << "\n";
            bad += !ok;
        } catch (const std::exception &) {
            bad++;
        }
    }
    return {bad == 0, std::to_string(bad) + " of 200 sequences wrong"};
}

Outcome motif_rounds() {
    string detail;
    bool ok = true;
    for (size_t rounds : {10u, 14u}) {
        size_t good = 0;
        for (uint64_t seed = 0; seed < 20; seed++) {
            vector<uint64_t> cycles = {5, 11, 23};
            for (size_t r = 0; r < rounds; r++)
                for (uint64_t off : {4u, 19u, 37u, 62u, 88u})
                    cycles.push_back(40 + r * 120 + off);
            const uint64_t total = cycles.back() + 30;
            const auto s = oracle::branch_script(cycles, total, 32.0, 1.0, 0.1, 8000 + seed);
            const Fingerprint f = fingerprint(synth_trace(s).trace, 0.3);
            const size_t occupied = f.cycles.back() + 1 - f.cycles.front();
            const auto rep = detect_motif(f, 20, occupied / 2);
            good += rep && rep->occurrences == rounds;
        }
        ok = ok && good == 20;
        detail += std::to_string(rounds) + " rounds: " + std::to_string(good) + "/20 ";
    }
    return {ok, detail};
}

Outcome crash_clustering() {
    size_t perfect = 0;
    for (uint64_t seed = 0; seed < 20; seed++) {
        vector<PowerTrace> set;
        vector<size_t> truth;
        size_t k = 0;
        for (auto kind : {FaultKind::RisingPeak, FaultKind::FallingPeak, FaultKind::FlatLatePeak}) {
            for (size_t c = 0; c < 5; c++) {
                FaultSynthConfig cfg;
                cfg.seed = seed * 100 + set.size();
                cfg.snr_db = 20.0;
                set.push_back(synth_fault(kind, cfg));
                truth.push_back(k);
            }
            k++;
        }
        const auto rep = cluster_crashes(set, 625e6 / 40.0, 0.3);
        perfect += oracle::adjusted_rand_index(rep.labels, truth) == 1.0;
    }
    return {perfect == 20, std::to_string(perfect) + "/20 seeds with ARI 1.0"};
}

/// Runs the command-line tool and captures stdout to a file.
bool tool(const string &threads, const string &args, const string &stdout_path) {
    const string cmd = "SIDETRACE_THREADS=" + threads + " '" + SIDETRACE_TOOL + "' " + args +
                       " > '" + stdout_path + "' 2>/dev/null";
    return std::system(cmd.c_str()) == 0;
}

Outcome cli_determinism() {
    oracle::TempDir dir;
    const string in = dir / "";
    SynthScript s = oracle::branch_script({10, 25, 47, 80, 120, 155, 200, 230}, 260, 32.0, 1.0,
                                          0.1, 5);
    s.peripheral_events = {{100, 20.0, 0.5}};
    {
        std::ofstream f(in + "script.json");
        save_synth_script(s, f);
    }
    write_trace_file(synth_trace(s).trace, in + "t.psct");
    write_fingerprint_file({{10, 25, 48, 80}, 0.3, 32.0}, in + "ref.json");
    string faults;
    for (size_t i = 0; i < 6; i++) {
        FaultSynthConfig cfg;
        cfg.seed = i;
        const string p = in + "f" + std::to_string(i) + ".psct";
        write_trace_file(synth_fault(i < 3 ? FaultKind::RisingPeak : FaultKind::FlatLatePeak, cfg),
                         p);
        faults += " " + p;
    }

    // name, arguments (with @ for the run's output directory), output files
    const vector<std::tuple<string, string, vector<string>>> commands = {
        {"synth", "synth " + in + "script.json @t.psct @g.json", {"t.psct", "g.json"}},
        {"synth-spi", "synth-spi a55a01 @s.psct @s.json", {"s.psct", "s.json"}},
        {"filter", "filter " + in + "t.psct @f.psct --kind bandpass --low 1e6 --high 6e7",
         {"f.psct"}},
        {"spectrum", "spectrum " + in + "t.psct -o @sp.csv --svg @sp.svg", {"sp.csv", "sp.svg"}},
        {"fingerprint", "fingerprint " + in + "t.psct @fp.json --excise --peak-k 25 --svg @fp.svg",
         {"fp.json", "fp.svg"}},
        {"compare", "compare @fp.json " + in + "ref.json --metric pearson", {}},
        {"motif", "motif @fp.json -o @m.json --svg @m.svg", {"m.json", "m.svg"}},
        {"peaks", "peaks " + in + "t.psct -o @p.json --excised @e.psct", {"p.json", "e.psct"}},
        {"decode-spi", "decode-spi @s.psct -o @d.txt", {"d.txt"}},
        {"cluster", "cluster" + faults + " --cutoff 15.625e6 -o @c.json", {"c.json"}},
        {"score", "score @fp.json @g.json -o @sc.json", {"sc.json"}},
    };

    vector<string> failures;
    std::map<string, string> first;
    int run_index = 0;
    for (const string threads : {"1", "4"}) {
        for (int rep = 0; rep < 2; rep++, run_index++) {
            const string out = dir / ("run" + std::to_string(run_index));
            std::filesystem::create_directories(out);
            for (const auto &[name, args, files] : commands) {
                string a = args;
                for (size_t p; (p = a.find('@')) != string::npos;)
                    a.replace(p, 1, out + "/");
                const string captured = out + "/" + name + ".stdout";
                if (!tool(threads, a, captured)) {
                    failures.push_back(name + " failed");
                    continue;
                }
                vector<string> check = files;
                check.push_back(name + ".stdout");
                for (const string &file : check) {
                    const string bytes = oracle::slurp(out + "/" + file);
                    auto [it, fresh] = first.emplace(name + "/" + file, bytes);
                    if (!fresh && it->second != bytes)
                        failures.push_back(name + "/" + file + " differs (threads " + threads +
                                           ")");
                }
            }
        }
    }
    string detail = std::to_string(commands.size()) + " subcommands x 2 runs x 2 thread counts";
    for (const auto &f : failures)
        detail += "; " + f;
    return {failures.empty(), detail};
}

Outcome cross_architecture() {
    size_t bad = 0;
    for (uint64_t seed = 0; seed < 10; seed++) {
        std::mt19937_64 rng(11000 + seed);
        const auto cycles = oracle::spaced_cycles(rng, 20, 300, 4, 4);
        SynthScript fast = oracle::branch_script(cycles, 300, 390.625, 1.0, 0.1, seed);
        SynthScript slow = oracle::branch_script(cycles, 300, 48.0, 1.0, 0.1, seed);
        const Fingerprint a = fingerprint(synth_trace(fast).trace, 0.3);
        const Fingerprint b = fingerprint(synth_trace(slow).trace, 0.3);
        bad += !oracle::within_one(a.cycles, b.cycles);
    }
    return {bad == 0, std::to_string(bad) + " of 10 script pairs differ"};
}

} // namespace

int main() {
    const vector<std::pair<string, std::function<Outcome()>>> criteria = {
        {"fingerprint recall and false positives", recall_and_false_positives},
        {"amplitude invariance", amplitude_invariance},
        {"shift equivariance", shift_equivariance},
        {"cwt matches direct convolution", cwt_oracle},
        {"filter responses", filter_responses},
        {"peripheral excision", peripheral_excision},
        {"spi round trip", spi_round_trip},
        {"motif occurrences", motif_rounds},
        {"crash clustering", crash_clustering},
        {"cli determinism", cli_determinism},
        {"cross-clock fingerprints", cross_architecture},
    };
    int failed = 0;
    for (size_t i = 0; i < criteria.size(); i++) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception &e) {
            o = {false, string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << "criterion " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << " "
                  << criteria[i].first << " (" << o.detail << ")" << std::endl;
    }
    return failed ? 1 : 0;
}
