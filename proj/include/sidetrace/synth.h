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

#include "sidetrace/peripheral.h"
#include "sidetrace/trace.h"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace sidetrace {

/// Counter-based random numbers: every value is a pure function of
/// (seed, stream, index), so generation order and parallelism never change
/// the output.
class CounterRng {
  public:
    CounterRng(uint64_t seed, uint64_t stream) : key_(mix(seed ^ mix(stream))) {}

    uint64_t bits(uint64_t index) const { return mix(key_ + mix(index)); }
    /// Uniform in (0, 1).
    double uniform(uint64_t index) const;
    /// Standard normal (Box-Muller over two counter draws).
    double gaussian(uint64_t index) const;

    static uint64_t mix(uint64_t z);

  private:
    uint64_t key_;
};

struct BranchEvent {
    uint64_t cycle = 0;
    double burst_amplitude = 0.0;
};

struct PeripheralEvent {
    uint64_t cycle = 0;
    double spike_amplitude = 0.0;
    double ring_decay_cycles = 1.0;
};

struct NoiseModel {
    double white_sigma = 0.0;
    double drift_amplitude = 0.0;
    double drift_freq_hz = 0.0;
};

/// Event program for a synthetic power trace.
struct SynthScript {
    uint64_t total_cycles = 0;
    double samples_per_clock = 32.0;
    double clock_hz = 8e6;
    std::vector<BranchEvent> branch_events;
    std::vector<PeripheralEvent> peripheral_events;
    NoiseModel noise;
    double baseline_volts = 0.0;
    uint64_t seed = 0;

    void validate() const;
    double sample_rate_hz() const { return samples_per_clock * clock_hz; }
    size_t total_samples() const;
};

struct SpiPeak {
    size_t sample = 0;
    Polarity polarity = Polarity::Drop;
};

struct GroundTruth {
    std::vector<uint64_t> branch_cycles;
    std::vector<std::pair<size_t, size_t>> peripheral_segments;
    std::vector<uint8_t> spi_bytes;
    std::vector<SpiPeak> clock_peaks;
    std::vector<SpiPeak> data_peaks;
};

struct SynthResult {
    PowerTrace trace;
    GroundTruth truth;
};

/// baseline + white noise + sinusoidal drift + one burst per branch event +
/// one ringing spike per peripheral event.
///
/// A branch burst is a cosine carrier with a period of a quarter clock cycle
/// under a Gaussian envelope of sigma = samples_per_clock / 8 (a half-width of
/// a quarter cycle at two sigma), centered mid-cycle and confined to its
/// cycle. Its peak equals burst_amplitude. A peripheral spike starts at its
/// cycle boundary: A * exp(-t / tau) * cos(2 pi t / samples_per_clock) with
/// tau = ring_decay_cycles * samples_per_clock.
SynthResult synth_trace(const SynthScript &script);

/// Only the injected event waveforms of the script (no baseline or noise).
std::vector<double> synth_event_waveform(const SynthScript &script);

SynthScript load_synth_script(std::istream &source);
void save_synth_script(const SynthScript &script, std::ostream &sink);
void save_ground_truth_json(const GroundTruth &truth, std::ostream &sink);

struct SpiSynthConfig {
    size_t samples_per_clock_edge = 16; ///< half an SPI clock period
    double clock_peak_amp = 4.0;
    double data_peak_amp = 1.0;
    double noise_sigma = 0.1;
    uint64_t seed = 0;
    double sample_rate_hz = 1.25e9;
    double baseline_volts = 0.0;
    BitOrder bit_order = BitOrder::MsbFirst;
    IdleLevel idle_level = IdleLevel::Low;

    void validate() const;
};

/// SPI mode 0 traffic as seen on the supply: one voltage drop of
/// clock_peak_amp per rising clock edge (eight per byte), and between clock
/// edges a data-line peak of data_peak_amp whenever the data line toggles,
/// a drop for a rising and a rise for a falling line. Bytes are separated by
/// eight idle edge periods. Peaks are Gaussian with sigma = edge/8 samples.
SynthResult synth_spi(std::span<const uint8_t> bytes, const SpiSynthConfig &cfg);

enum class FaultKind { RisingPeak, FallingPeak, FlatLatePeak };

struct FaultSynthConfig {
    size_t length = 4000;
    double sample_rate_hz = 625e6;
    double snr_db = 20.0;
    /// Circular delay applied to the pattern, in samples.
    long shift = 0;
    uint64_t seed = 0;
};

/// Power pattern of a hardware fault window: a shared pre-fault workload
/// followed by a fault-specific excursion (a large rising peak, a large
/// falling peak, or a flat stretch with a late peak). White noise is scaled
/// to the requested SNR against the pattern's RMS.
PowerTrace synth_fault(FaultKind kind, const FaultSynthConfig &cfg);

} // namespace sidetrace
