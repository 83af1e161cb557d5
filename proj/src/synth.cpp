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

#include "sidetrace/synth.h"
#include "sidetrace/error.h"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <istream>
#include <ostream>

using std::vector;

namespace sidetrace {

namespace {
// Distinct counter streams so each noise source is independent.
constexpr uint64_t kWhiteStream = 1;
constexpr uint64_t kSpiStream = 2;
constexpr uint64_t kFaultStream = 3;

constexpr double kTwoPi = 2.0 * std::numbers::pi;
} // namespace

uint64_t CounterRng::mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double CounterRng::uniform(uint64_t index) const {
    return (static_cast<double>(bits(index) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::gaussian(uint64_t index) const {
    const double u1 = uniform(2 * index);
    const double u2 = uniform(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

void SynthScript::validate() const {
    if (total_cycles == 0)
        throw ValidationError("synth script: total_cycles must be positive");
    if (!(std::isfinite(samples_per_clock) && samples_per_clock >= 1.0))
        throw ValidationError("synth script: samples_per_clock must be >= 1");
    if (!(std::isfinite(clock_hz) && clock_hz > 0.0))
        throw ValidationError("synth script: clock_hz must be positive");
    for (size_t i = 0; i < branch_events.size(); i++) {
        const auto &e = branch_events[i];
        if (e.cycle >= total_cycles)
            throw ValidationError("synth script: branch event " +
                                  std::to_string(i) + " beyond total_cycles");
        if (!(std::isfinite(e.burst_amplitude) && e.burst_amplitude >= 0.0))
            throw ValidationError("synth script: branch event " +
                                  std::to_string(i) + " has negative amplitude");
    }
    for (size_t i = 0; i < peripheral_events.size(); i++) {
        const auto &e = peripheral_events[i];
        if (e.cycle >= total_cycles)
            throw ValidationError("synth script: peripheral event " +
                                  std::to_string(i) + " beyond total_cycles");
        if (!(std::isfinite(e.spike_amplitude) && e.spike_amplitude >= 0.0))
            throw ValidationError("synth script: peripheral event " +
                                  std::to_string(i) + " has negative amplitude");
        if (!(std::isfinite(e.ring_decay_cycles) && e.ring_decay_cycles > 0.0))
            throw ValidationError("synth script: peripheral event " +
                                  std::to_string(i) +
                                  " needs a positive ring_decay_cycles");
    }
    if (!(std::isfinite(noise.white_sigma) && noise.white_sigma >= 0.0))
        throw ValidationError("synth script: white_sigma must be >= 0");
    if (!std::isfinite(noise.drift_amplitude) || noise.drift_amplitude < 0.0)
        throw ValidationError("synth script: drift_amplitude must be >= 0");
    if (!std::isfinite(noise.drift_freq_hz) || noise.drift_freq_hz < 0.0)
        throw ValidationError("synth script: drift_freq_hz must be >= 0");
    if (!std::isfinite(baseline_volts))
        throw ValidationError("synth script: baseline_volts must be finite");
}

size_t SynthScript::total_samples() const {
    return static_cast<size_t>(
        std::ceil(static_cast<double>(total_cycles) * samples_per_clock));
}

namespace {

// Peripheral rings are cut once the envelope falls below 1e-6.
constexpr double kRingCutoff = 13.815510557964274; // ln(1e6)
// Ground-truth segment: until the envelope falls below 1e-3.
constexpr double kRingVisible = 6.907755278982137; // ln(1e3)

void add_events(const SynthScript &script, vector<double> &x) {
    const double spc = script.samples_per_clock;
    const long n = static_cast<long>(x.size());

    const double sigma = spc / 8.0;
    const double carrier = spc / 4.0;
    for (const auto &e : script.branch_events) {
        const double center = (static_cast<double>(e.cycle) + 0.5) * spc;
        const long lo = std::max(0L, static_cast<long>(std::ceil(center - 4 * sigma)));
        const long hi = std::min(n - 1, static_cast<long>(std::floor(center + 4 * sigma)));
        for (long i = lo; i <= hi; i++) {
            const double t = static_cast<double>(i) - center;
            x[i] += e.burst_amplitude * std::exp(-0.5 * (t / sigma) * (t / sigma)) *
                    std::cos(kTwoPi * t / carrier);
        }
    }

    for (const auto &e : script.peripheral_events) {
        const double onset = static_cast<double>(e.cycle) * spc;
        const double tau = e.ring_decay_cycles * spc;
        const long lo = static_cast<long>(std::ceil(onset));
        const long hi = std::min(n - 1, static_cast<long>(std::floor(onset + kRingCutoff * tau)));
        for (long i = lo; i <= hi; i++) {
            const double t = static_cast<double>(i) - onset;
            x[i] += e.spike_amplitude * std::exp(-t / tau) * std::cos(kTwoPi * t / spc);
        }
    }
}

} // namespace

vector<double> synth_event_waveform(const SynthScript &script) {
    script.validate();
    vector<double> x(script.total_samples(), 0.0);
    add_events(script, x);
    return x;
}

SynthResult synth_trace(const SynthScript &script) {
    script.validate();
    const size_t n = script.total_samples();
    const double fs = script.sample_rate_hz();
    const CounterRng rng(script.seed, kWhiteStream);

    vector<double> background(n);
    for (size_t i = 0; i < n; i++) {
        double v = script.baseline_volts;
        if (script.noise.white_sigma > 0.0)
            v += script.noise.white_sigma * rng.gaussian(i);
        if (script.noise.drift_amplitude > 0.0)
            v += script.noise.drift_amplitude *
                 std::sin(kTwoPi * script.noise.drift_freq_hz * i / fs);
        background[i] = v;
    }
    vector<double> events(n, 0.0);
    add_events(script, events);
    for (size_t i = 0; i < n; i++)
        background[i] += events[i];

    GroundTruth gt;
    for (const auto &e : script.branch_events)
        gt.branch_cycles.push_back(e.cycle);
    std::sort(gt.branch_cycles.begin(), gt.branch_cycles.end());
    for (const auto &e : script.peripheral_events) {
        const auto start = static_cast<size_t>(
            std::ceil(static_cast<double>(e.cycle) * script.samples_per_clock));
        const auto len = static_cast<size_t>(
            std::ceil(kRingVisible * e.ring_decay_cycles * script.samples_per_clock));
        gt.peripheral_segments.emplace_back(start, std::min(n, start + len));
    }
    std::sort(gt.peripheral_segments.begin(), gt.peripheral_segments.end());

    return {PowerTrace(std::move(background), fs, script.clock_hz), std::move(gt)};
}

SynthScript load_synth_script(std::istream &source) {
    nlohmann::json j;
    try {
        source >> j;
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(std::string("malformed synth script JSON: ") +
                              e.what());
    }
    SynthScript s;
    try {
        s.total_cycles = j.at("total_cycles").get<uint64_t>();
        s.samples_per_clock = j.at("samples_per_clock").get<double>();
        s.clock_hz = j.value("clock_hz", s.clock_hz);
        for (const auto &e : j.value("branch_events", nlohmann::json::array()))
            s.branch_events.push_back(
                {e.at("cycle").get<uint64_t>(), e.at("burst_amplitude").get<double>()});
        for (const auto &e : j.value("peripheral_events", nlohmann::json::array()))
            s.peripheral_events.push_back({e.at("cycle").get<uint64_t>(),
                                           e.at("spike_amplitude").get<double>(),
                                           e.value("ring_decay_cycles", 1.0)});
        if (j.contains("noise")) {
            const auto &nz = j.at("noise");
            s.noise.white_sigma = nz.value("white_sigma", 0.0);
            s.noise.drift_amplitude = nz.value("drift_amplitude", 0.0);
            s.noise.drift_freq_hz = nz.value("drift_freq_hz", 0.0);
        }
        s.baseline_volts = j.value("baseline_volts", 0.0);
        s.seed = j.value("seed", uint64_t{0});
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(std::string("invalid synth script: ") + e.what());
    }
    s.validate();
    return s;
}

void save_synth_script(const SynthScript &s, std::ostream &sink) {
    nlohmann::ordered_json j;
    j["total_cycles"] = s.total_cycles;
    j["samples_per_clock"] = s.samples_per_clock;
    j["clock_hz"] = s.clock_hz;
    auto br = nlohmann::ordered_json::array();
    for (const auto &e : s.branch_events)
        br.push_back({{"cycle", e.cycle}, {"burst_amplitude", e.burst_amplitude}});
    j["branch_events"] = br;
    auto pe = nlohmann::ordered_json::array();
    for (const auto &e : s.peripheral_events)
        pe.push_back({{"cycle", e.cycle},
                      {"spike_amplitude", e.spike_amplitude},
                      {"ring_decay_cycles", e.ring_decay_cycles}});
    j["peripheral_events"] = pe;
    j["noise"] = {{"white_sigma", s.noise.white_sigma},
                  {"drift_amplitude", s.noise.drift_amplitude},
                  {"drift_freq_hz", s.noise.drift_freq_hz}};
    j["baseline_volts"] = s.baseline_volts;
    j["seed"] = s.seed;
    sink << j.dump(2) << "\n";
}

void save_ground_truth_json(const GroundTruth &gt, std::ostream &sink) {
    nlohmann::ordered_json j;
    j["branch_cycles"] = gt.branch_cycles;
    auto segs = nlohmann::ordered_json::array();
    for (const auto &[a, b] : gt.peripheral_segments)
        segs.push_back({a, b});
    j["peripheral_segments"] = segs;
    j["spi_bytes"] = gt.spi_bytes;
    auto peaks = [](const vector<SpiPeak> &ps) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto &p : ps)
            arr.push_back({{"sample", p.sample},
                           {"polarity", p.polarity == Polarity::Drop ? "drop" : "rise"}});
        return arr;
    };
    j["clock_peaks"] = peaks(gt.clock_peaks);
    j["data_peaks"] = peaks(gt.data_peaks);
    sink << j.dump() << "\n";
}

void SpiSynthConfig::validate() const {
    if (samples_per_clock_edge < 4)
        throw ValidationError("SPI synth: samples_per_clock_edge must be >= 4");
    if (!(clock_peak_amp > 0.0 && data_peak_amp > 0.0))
        throw ValidationError("SPI synth: peak amplitudes must be positive");
    if (!(noise_sigma >= 0.0 && std::isfinite(noise_sigma)))
        throw ValidationError("SPI synth: noise_sigma must be >= 0");
    if (!(sample_rate_hz > 0.0 && std::isfinite(sample_rate_hz)))
        throw ValidationError("SPI synth: sample_rate_hz must be positive");
}

SynthResult synth_spi(std::span<const uint8_t> bytes, const SpiSynthConfig &cfg) {
    cfg.validate();
    if (bytes.empty())
        throw ValidationError("SPI synth: no bytes to emit");

    const size_t edge = cfg.samples_per_clock_edge;
    const size_t lead = 8 * edge;
    const size_t stride = 24 * edge; // 16 edges of data, 8 idle
    const size_t n = lead + bytes.size() * stride + 8 * edge;
    const double sigma = edge / 8.0;
    const long reach = static_cast<long>(std::ceil(4.0 * sigma));

    vector<double> x(n, cfg.baseline_volts);
    auto pulse = [&](size_t at, double amp) {
        for (long d = -reach; d <= reach; d++) {
            const long i = static_cast<long>(at) + d;
            if (i >= 0 && i < static_cast<long>(n))
                x[i] += amp * std::exp(-0.5 * (d / sigma) * (d / sigma));
        }
    };

    GroundTruth gt;
    gt.spi_bytes.assign(bytes.begin(), bytes.end());
    bool level = cfg.idle_level == IdleLevel::High;
    for (size_t b = 0; b < bytes.size(); b++) {
        const size_t start = lead + b * stride;
        for (unsigned bit = 0; bit < 8; bit++) {
            const unsigned pos = cfg.bit_order == BitOrder::MsbFirst ? 7 - bit : bit;
            const bool value = (bytes[b] >> pos) & 1u;
            const size_t data_at = start + 2 * bit * edge;
            if (value != level) {
                // Rising line: current surge, voltage drop.
                const Polarity p = value ? Polarity::Drop : Polarity::Rise;
                pulse(data_at, p == Polarity::Drop ? -cfg.data_peak_amp
                                                   : cfg.data_peak_amp);
                gt.data_peaks.push_back({data_at, p});
                level = value;
            }
            const size_t clock_at = data_at + edge;
            pulse(clock_at, -cfg.clock_peak_amp);
            gt.clock_peaks.push_back({clock_at, Polarity::Drop});
        }
    }

    if (cfg.noise_sigma > 0.0) {
        const CounterRng rng(cfg.seed, kSpiStream);
        for (size_t i = 0; i < n; i++)
            x[i] += cfg.noise_sigma * rng.gaussian(i);
    }
    return {PowerTrace(std::move(x), cfg.sample_rate_hz), std::move(gt)};
}

PowerTrace synth_fault(FaultKind kind, const FaultSynthConfig &cfg) {
    if (cfg.length < 16)
        throw ValidationError("fault synth: length must be at least 16 samples");
    if (!(cfg.sample_rate_hz > 0.0))
        throw ValidationError("fault synth: sample rate must be positive");
    const size_t n = cfg.length;
    const CounterRng rng(cfg.seed, kFaultStream);

    auto bump = [](double u, double at, double width) {
        const double z = (u - at) / width;
        return std::exp(-0.5 * z * z);
    };

    vector<double> pattern(n);
    for (size_t i = 0; i < n; i++) {
        const double u = static_cast<double>(i) / n;
        // Shared pre-fault workload.
        double v = u < 0.4 ? 0.3 * std::sin(kTwoPi * 6.0 * u) : 0.0;
        switch (kind) {
        case FaultKind::RisingPeak:
            v += bump(u, 0.55, 0.03) + 0.2 * bump(u, 0.62, 0.05);
            break;
        case FaultKind::FallingPeak:
            v -= bump(u, 0.55, 0.03) + 0.2 * bump(u, 0.62, 0.05);
            break;
        case FaultKind::FlatLatePeak:
            v += bump(u, 0.82, 0.03);
            break;
        }
        pattern[i] = v;
    }

    double ss = 0.0;
    for (double v : pattern)
        ss += v * v;
    const double rms = std::sqrt(ss / n);
    const double noise = rms / std::pow(10.0, cfg.snr_db / 20.0);

    // Clock-rate jitter riding on the pattern, removed by the low-pass stage.
    const double jitter_phase = kTwoPi * rng.uniform(~0ULL);
    vector<double> x(n);
    const long len = static_cast<long>(n);
    for (long i = 0; i < len; i++) {
        const long src = ((i - cfg.shift) % len + len) % len;
        x[i] = pattern[src] + 0.1 * std::sin(kTwoPi * i / 8.0 + jitter_phase) +
               noise * rng.gaussian(static_cast<uint64_t>(i));
    }
    return PowerTrace(std::move(x), cfg.sample_rate_hz);
}

} // namespace sidetrace
