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

#include "sidetrace/error.h"
#include "sidetrace/synth.h"
#include "sidetrace/wavelet.h"

#include "oracles.h"

#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <sstream>

using namespace sidetrace;
using std::vector;

namespace {

vector<double> random_signal(std::mt19937_64 &rng, size_t n) {
    std::normal_distribution<double> g(0.0, 1.0);
    vector<double> x(n);
    for (double &v : x)
        v = g(rng);
    return x;
}

Scalogram one_row(const vector<double> &row) {
    Scalogram s(1, row.size(), {1.0}, 1.0);
    std::copy(row.begin(), row.end(), s.row(0).begin());
    return s;
}

vector<size_t> slots_of(const CandidateSet &c) {
    vector<size_t> out;
    for (const auto &e : c.entries)
        out.push_back(e.time_slot);
    return out;
}

double max_rel_err(const Scalogram &w, const vector<vector<double>> &ref) {
    double peak = 0.0, err = 0.0;
    for (size_t i = 0; i < ref.size(); i++)
        for (size_t t = 0; t < ref[i].size(); t++) {
            peak = std::max(peak, std::fabs(ref[i][t]));
            err = std::max(err, std::fabs(w.at(i, t) - ref[i][t]));
        }
    return peak > 0 ? err / peak : err;
}

SynthResult three_bursts(uint64_t seed, double sigma = 0.1) {
    return synth_trace(oracle::branch_script({100, 250, 400}, 500, 32.0, 1.0, sigma, seed));
}

} // namespace

TEST(DaughterWavelet, UnitEnergyAndSupport) {
    for (auto family : {WaveletFamily::Ricker, WaveletFamily::Morlet}) {
        for (double a : {1.0, 2.5, 7.3, 32.0}) {
            const auto psi = daughter_wavelet(family, a);
            const size_t h = wavelet_half_support(a);
            EXPECT_EQ(h, static_cast<size_t>(std::ceil(5 * a)));
            ASSERT_EQ(psi.size(), 2 * h + 1);
            double e = 0.0;
            for (double v : psi)
                e += v * v;
            EXPECT_NEAR(e, 1.0, 1e-12);
            const auto ref = oracle::wavelet(family, a);
            for (size_t j = 0; j < psi.size(); j++) {
                EXPECT_NEAR(psi[j], ref[j], 1e-12);
                EXPECT_NEAR(psi[j], psi[psi.size() - 1 - j], 1e-15);
            }
        }
    }
}

TEST(WaveletSpec, ClockLadder) {
    const WaveletSpec s = WaveletSpec::clock_ladder(390.625);
    ASSERT_EQ(s.scales.size(), 8u);
    EXPECT_DOUBLE_EQ(s.scales.front(), 1.0);
    EXPECT_NEAR(s.scales.back(), 390.625, 1e-9);
    for (size_t i = 2; i < s.scales.size(); i++)
        EXPECT_NEAR(s.scales[i] / s.scales[i - 1], s.scales[1] / s.scales[0], 1e-9);
    // Degenerate ladder collapses to a single scale.
    EXPECT_EQ(WaveletSpec::clock_ladder(1.0).scales.size(), 1u);
}

TEST(WaveletSpec, Validation) {
    WaveletSpec s;
    EXPECT_THROW(s.validate(), ValidationError);
    s.scales = {2.0, 1.0};
    EXPECT_THROW(s.validate(), ValidationError);
    s.scales = {0.5};
    EXPECT_THROW(s.validate(), ValidationError);
    s.scales = {1.0, 4.0};
    EXPECT_NO_THROW(s.validate(41));
    EXPECT_THROW(s.validate(40), ValidationError);
    EXPECT_THROW(cwt(PowerTrace(vector<double>(40, 0.0), 1.0), s), ValidationError);
}

TEST(Cwt, ZeroTraceGivesZeroScalogram) {
    WaveletSpec s;
    s.scales = {1.0, 3.0, 15.0};
    const Scalogram w = cwt(PowerTrace(vector<double>(200, 0.0), 1.0), s);
    EXPECT_EQ(w.max_abs(), 0.0);
}

TEST(Cwt, ImpulseResponseIsTheWavelet) {
    for (auto family : {WaveletFamily::Ricker, WaveletFamily::Morlet}) {
        WaveletSpec s;
        s.family = family;
        s.scales = {1.0, 4.0, 14.0, 20.0};
        const size_t n = 256, at = 128;
        vector<double> x(n, 0.0);
        x[at] = 1.0;
        const Scalogram w = cwt(PowerTrace(x, 1.0), s);
        for (size_t i = 0; i < s.scales.size(); i++) {
            const auto psi = oracle::wavelet(family, s.scales[i]);
            const long h = static_cast<long>(psi.size() / 2);
            for (long t = 0; t < static_cast<long>(n); t++) {
                // W[t] = psi(at - t): the wavelet reversed about the impulse.
                const long d = static_cast<long>(at) - t;
                const double expect = std::labs(d) <= h ? psi[d + h] : 0.0;
                EXPECT_NEAR(w.at(i, t), expect, 1e-12) << "row " << i << " t " << t;
            }
        }
    }
}

TEST(Cwt, MatchesDirectConvolution) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; trial++) {
        const size_t n = 64 + rng() % 193;
        const auto x = random_signal(rng, n);
        WaveletSpec s;
        s.family = trial % 2 ? WaveletFamily::Morlet : WaveletFamily::Ricker;
        const double widest = std::floor((n - 1) / 10.0);
        s.scales = {1.0, 2.2, std::max(2.5, widest * 0.6), widest};
        const Scalogram w = cwt(PowerTrace(x, 1.0), s);
        const auto ref = oracle::direct_cwt(x, s.family, s.scales);
        EXPECT_LT(max_rel_err(w, ref), 1e-9) << "n=" << n;
    }
}

TEST(Cwt, Linear) {
    std::mt19937_64 rng(22);
    const auto x = random_signal(rng, 300);
    vector<double> x2(x);
    for (double &v : x2)
        v *= 2.0;
    WaveletSpec s;
    s.scales = {1.0, 6.0, 20.0};
    const Scalogram a = cwt(PowerTrace(x, 1.0), s);
    const Scalogram b = cwt(PowerTrace(x2, 1.0), s);
    for (size_t k = 0; k < a.data().size(); k++)
        EXPECT_NEAR(b.data()[k], 2.0 * a.data()[k], 1e-9 * (1 + std::fabs(a.data()[k])));
}

TEST(Cwt, SameResultForAnyWorkerCount) {
    std::mt19937_64 rng(23);
    const PowerTrace t(random_signal(rng, 2000), 1.0);
    const WaveletSpec s = WaveletSpec::clock_ladder(40.0);
    setenv("SIDETRACE_THREADS", "1", 1);
    const Scalogram one = cwt(t, s);
    setenv("SIDETRACE_THREADS", "4", 1);
    const Scalogram four = cwt(t, s);
    unsetenv("SIDETRACE_THREADS");
    ASSERT_EQ(one.data().size(), four.data().size());
    for (size_t k = 0; k < one.data().size(); k++)
        ASSERT_EQ(one.data()[k], four.data()[k]);
}

TEST(Scalogram, BinaryRoundTrip) {
    std::mt19937_64 rng(24);
    WaveletSpec s;
    s.scales = {1.0, 3.0};
    const Scalogram w = cwt(PowerTrace(random_signal(rng, 100), 5.0), s);
    std::stringstream io;
    save_scalogram_bin(w, io);
    EXPECT_EQ(io.str().size(), 12u + 8 * w.data().size());
    const Scalogram back = load_scalogram_bin(io, 5.0);
    ASSERT_EQ(back.rows(), 2u);
    ASSERT_EQ(back.cols(), 100u);
    for (size_t k = 0; k < w.data().size(); k++)
        EXPECT_EQ(back.data()[k], w.data()[k]);

    std::istringstream bad("PSCW\x01\x00\x00\x00\x05\x00\x00\x00");
    EXPECT_THROW(load_scalogram_bin(bad), ValidationError);
}

TEST(ThresholdCandidates, AbsoluteThresholdFollowsPeak) {
    const CandidateSet c = threshold_candidates(one_row({0.0, -2.0, 0.0, 1.0, 0.0}), 0.3);
    EXPECT_DOUBLE_EQ(c.theta_abs, 0.6);
    EXPECT_EQ(slots_of(c), (vector<size_t>{1, 3}));
}

TEST(ThresholdCandidates, LonePeak) {
    EXPECT_EQ(slots_of(threshold_candidates(one_row({0, 1, 0}), 0.5)), (vector<size_t>{1}));
}

TEST(ThresholdCandidates, ShouldersSuppressed) {
    EXPECT_EQ(slots_of(threshold_candidates(one_row({0, 0.9, 1.0, 0.9, 0}), 0.5)),
              (vector<size_t>{2}));
}

TEST(ThresholdCandidates, PlateauKeepsLeftmost) {
    EXPECT_EQ(slots_of(threshold_candidates(one_row({0, 1, 1, 1, 0}), 0.5)),
              (vector<size_t>{1}));
    EXPECT_EQ(slots_of(threshold_candidates(one_row({1, 1, 0.2}), 0.5)), (vector<size_t>{0}));
}

TEST(ThresholdCandidates, Errors) {
    EXPECT_THROW(threshold_candidates(one_row({0, 1, 0}), 0.0), ValidationError);
    EXPECT_THROW(threshold_candidates(one_row({0, 1, 0}), 1.0), ValidationError);
    EXPECT_THROW(threshold_candidates(one_row({0, 0, 0}), 0.3), ProcessingError);
}

TEST(ThresholdCandidates, MatchesBruteForceScan) {
    std::mt19937_64 rng(25);
    std::uniform_int_distribution<int> level(-4, 4); // coarse values force ties
    for (int trial = 0; trial < 200; trial++) {
        const size_t rows = 1 + rng() % 3, cols = 1 + rng() % 20;
        Scalogram w(rows, cols, vector<double>(rows, 1.0), 1.0);
        for (size_t i = 0; i < rows; i++)
            for (auto &v : w.row(i))
                v = level(rng) / 4.0;
        if (w.max_abs() == 0.0)
            continue;
        const double theta = 0.3;
        const CandidateSet got = threshold_candidates(w, theta);
        vector<Candidate> want;
        for (size_t i = 0; i < rows; i++) {
            for (size_t t = 0; t < cols; t++) {
                const double v = std::fabs(w.at(i, t));
                if (!(v > theta * w.max_abs()))
                    continue;
                // Extend the plateau both ways; keep its leftmost sample if
                // both outer neighbours are lower.
                size_t l = t, r = t;
                while (l > 0 && std::fabs(w.at(i, l - 1)) == v)
                    l--;
                while (r + 1 < cols && std::fabs(w.at(i, r + 1)) == v)
                    r++;
                const bool left_ok = l == 0 || std::fabs(w.at(i, l - 1)) < v;
                const bool right_ok = r + 1 == cols || std::fabs(w.at(i, r + 1)) < v;
                if (l == t && left_ok && right_ok)
                    want.push_back({t, i, v});
            }
        }
        EXPECT_EQ(got.entries, want);
        for (const auto &e : got.entries)
            EXPECT_GT(e.magnitude, got.theta_abs);
    }
}

TEST(DedupeSpectral, Examples) {
    const vector<Candidate> a = {{5, 2, 1.0}, {5, 3, 1.0}, {9, 1, 1.0}};
    EXPECT_EQ(dedupe_spectral(a, 0), (vector<size_t>{5, 9}));
    const vector<Candidate> b = {{100, 0, 1.0}, {101, 1, 0.7}};
    EXPECT_EQ(dedupe_spectral(b, 2), (vector<size_t>{100}));
    EXPECT_TRUE(dedupe_spectral({}, 2).empty());
}

TEST(DedupeSpectral, IdempotentAndSorted) {
    std::mt19937_64 rng(26);
    std::uniform_real_distribution<double> mag(0.1, 1.0);
    for (int trial = 0; trial < 200; trial++) {
        vector<Candidate> c;
        const size_t n = rng() % 40;
        for (size_t i = 0; i < n; i++)
            c.push_back({rng() % 200, rng() % 5, mag(rng)});
        const size_t radius = rng() % 4;
        const auto slots = dedupe_spectral(c, radius);
        EXPECT_TRUE(std::is_sorted(slots.begin(), slots.end()));
        EXPECT_EQ(std::adjacent_find(slots.begin(), slots.end()), slots.end());
        vector<Candidate> again;
        for (size_t s : slots)
            again.push_back({s, 0, 1.0});
        // Singletons more than radius apart stay as they are.
        if (radius == 0) {
            EXPECT_EQ(dedupe_spectral(again, radius), slots);
        }
        EXPECT_EQ(dedupe_spectral(again, 0), slots);
    }
}

TEST(MapToCycles, Examples) {
    const double fs = 3.125e9, clk = 8e6;
    const vector<size_t> a = {780, 781};
    const Fingerprint fa = map_to_cycles(a, fs, clk, 0.3);
    EXPECT_EQ(fa.cycles, (vector<uint64_t>{1}));
    const vector<size_t> over = {780, 785};
    EXPECT_EQ(map_to_cycles(over, fs, clk, 0.3).cycles, (vector<uint64_t>{1, 2}));
    EXPECT_DOUBLE_EQ(fa.samples_per_clock, 390.625);
    EXPECT_DOUBLE_EQ(fa.theta, 0.3);
    const vector<size_t> b = {0, 391, 782};
    EXPECT_EQ(map_to_cycles(b, fs, clk, 0.3).cycles, (vector<uint64_t>{0, 1, 2}));
    EXPECT_THROW(map_to_cycles(b, fs, std::nullopt, 0.3), ValidationError);
}

TEST(Rasterize, Examples) {
    EXPECT_EQ(rasterize({{1, 3}, 0.3, 1.0}, 5, 0), (vector<double>{0, 1, 0, 1, 0}));
    EXPECT_EQ(rasterize({{}, 0.3, 1.0}, 4, 2), (vector<double>{0, 0, 0, 0}));
    EXPECT_EQ(rasterize({{2}, 0.3, 1.0}, 5, 1), (vector<double>{0, 0.5, 1, 0.5, 0}));
    EXPECT_THROW(rasterize({{7}, 0.3, 1.0}, 5, 1), ValidationError);
}

TEST(Fingerprint, ConstantTraceHasNoEvents) {
    EXPECT_THROW(fingerprint(PowerTrace(vector<double>(2000, 1.2), 256e6, 8e6), 0.3),
                 ProcessingError);
}

TEST(Fingerprint, NeedsClock) {
    EXPECT_THROW(fingerprint(PowerTrace(vector<double>(2000, 1.2), 256e6), 0.3),
                 ValidationError);
}

TEST(Fingerprint, FindsSyntheticBursts) {
    for (uint64_t seed = 0; seed < 5; seed++) {
        const SynthResult r = three_bursts(seed);
        FingerprintDiagnostics d;
        const Fingerprint fp = fingerprint(r.trace, 0.3, {}, &d);
        EXPECT_TRUE(oracle::within_one(fp.cycles, {100, 250, 400}))
            << "seed " << seed << " got " << ::testing::PrintToString(fp.cycles);
        EXPECT_DOUBLE_EQ(fp.samples_per_clock, 32.0);
        EXPECT_GT(d.theta_abs, 0.0);
        EXPECT_GE(d.candidates, d.time_slots);
    }
}

TEST(Fingerprint, AmplitudeInvariant) {
    for (uint64_t seed = 0; seed < 5; seed++) {
        const SynthResult r = three_bursts(seed, 0.2);
        const Fingerprint base = fingerprint(r.trace, 0.3);
        for (double alpha : {0.5, 2.0, 10.0})
            EXPECT_EQ(fingerprint(oracle::scaled(r.trace, alpha), 0.3), base)
                << "alpha " << alpha;
    }
}

TEST(Fingerprint, ShiftEquivariant) {
    const vector<uint64_t> events = {40, 90, 150};
    const SynthScript s = oracle::branch_script(events, 200, 32.0, 1.0, 0.0, 1);
    const Fingerprint base = fingerprint(synth_trace(s).trace, 0.3);
    ASSERT_TRUE(oracle::within_one(base.cycles, events));
    for (uint64_t k : {10u, 100u}) {
        vector<uint64_t> moved;
        for (uint64_t e : events)
            moved.push_back(e + k);
        const SynthScript sk =
            oracle::branch_script(moved, 200 + k, 32.0, 1.0, 0.0, 1);
        const Fingerprint fk = fingerprint(synth_trace(sk).trace, 0.3);
        ASSERT_EQ(fk.cycles.size(), base.cycles.size());
        for (size_t i = 0; i < fk.cycles.size(); i++)
            EXPECT_LE(std::llabs(static_cast<long long>(fk.cycles[i] - base.cycles[i]) -
                                 static_cast<long long>(k)),
                      1);
    }
}

TEST(Fingerprint, RaisingThetaNeverAddsCycles) {
    for (uint64_t seed = 0; seed < 5; seed++) {
        std::mt19937_64 rng(seed);
        const auto events = oracle::spaced_cycles(rng, 20, 400, 8, 4);
        const SynthResult r =
            synth_trace(oracle::branch_script(events, 400, 32.0, 1.0, 0.15, seed));
        const WaveletSpec spec = WaveletSpec::clock_ladder(32.0);
        const Scalogram w = cwt(r.trace, spec);
        size_t prev_candidates = SIZE_MAX;
        vector<uint64_t> prev;
        bool first = true;
        for (double theta : {0.2, 0.3, 0.4, 0.5, 0.7}) {
            const size_t n = threshold_candidates(w, theta).entries.size();
            EXPECT_LE(n, prev_candidates);
            prev_candidates = n;
            const auto cycles = fingerprint(r.trace, theta).cycles;
            if (!first) {
                EXPECT_TRUE(std::includes(prev.begin(), prev.end(), cycles.begin(),
                                          cycles.end()))
                    << "seed " << seed << " theta " << theta;
            }
            prev = cycles;
            first = false;
        }
    }
}

TEST(Fingerprint, SameForAnyWorkerCount) {
    const SynthResult r = three_bursts(9, 0.3);
    setenv("SIDETRACE_THREADS", "1", 1);
    const Fingerprint one = fingerprint(r.trace, 0.3);
    setenv("SIDETRACE_THREADS", "4", 1);
    const Fingerprint four = fingerprint(r.trace, 0.3);
    unsetenv("SIDETRACE_THREADS");
    EXPECT_EQ(one, four);
    EXPECT_EQ(fingerprint(r.trace, 0.3), one);
}

TEST(Fingerprint, HighpassRemovesDrift) {
    SynthScript s = oracle::branch_script({100, 250, 400}, 500, 32.0, 1.0, 0.05, 3);
    s.noise.drift_amplitude = 5.0;
    s.noise.drift_freq_hz = 2e3;
    const SynthResult r = synth_trace(s);
    FingerprintOptions opts;
    opts.highpass = FilterSpec::highpass(2e6);
    EXPECT_TRUE(oracle::within_one(fingerprint(r.trace, 0.3, opts).cycles, {100, 250, 400}));
}
