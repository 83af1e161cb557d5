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

// Thin RAII layer over FFTW. Plan creation and destruction are serialized
// because the FFTW planner is not thread-safe; execution on caller-owned
// buffers is. Plans use FFTW_ESTIMATE so the same size always gets the same
// algorithm, and every buffer comes from fftw_malloc so SIMD alignment (and
// with it the codelet choice) never varies between calls.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>

namespace sidetrace::detail {

struct FftwFree {
    void operator()(void *p) const { fftw_free(p); }
};

using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;
using RealBuffer = std::unique_ptr<double[], FftwFree>;

ComplexBuffer alloc_complex(size_t n);
RealBuffer alloc_real(size_t n);

enum class Direction { Forward, Backward };

/// Complex-to-complex transform of fixed size (unnormalized).
class ComplexFft {
  public:
    ComplexFft(size_t n, Direction dir);
    ~ComplexFft();
    ComplexFft(const ComplexFft &) = delete;
    ComplexFft &operator=(const ComplexFft &) = delete;

    void execute(fftw_complex *in, fftw_complex *out) const;
    size_t size() const { return n_; }

  private:
    size_t n_;
    fftw_plan plan_;
};

/// Real-to-halfcomplex (n/2+1 bins) forward transform.
class RealForwardFft {
  public:
    explicit RealForwardFft(size_t n);
    ~RealForwardFft();
    RealForwardFft(const RealForwardFft &) = delete;
    RealForwardFft &operator=(const RealForwardFft &) = delete;

    void execute(double *in, fftw_complex *out) const;

  private:
    fftw_plan plan_;
};

/// Halfcomplex-to-real inverse (unnormalized). Destroys its input.
class RealInverseFft {
  public:
    explicit RealInverseFft(size_t n);
    ~RealInverseFft();
    RealInverseFft(const RealInverseFft &) = delete;
    RealInverseFft &operator=(const RealInverseFft &) = delete;

    void execute(fftw_complex *in, double *out) const;

  private:
    fftw_plan plan_;
};

/// Smallest size >= n of the form 2^a 3^b 5^c.
size_t fast_fft_size(size_t n);

} // namespace sidetrace::detail
