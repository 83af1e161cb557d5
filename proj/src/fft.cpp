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

#include "fft.h"

#include <mutex>
#include <new>

namespace sidetrace::detail {

namespace {
std::mutex &planner_lock() {
    static std::mutex m;
    return m;
}

constexpr unsigned kPlanFlags = FFTW_ESTIMATE;
} // namespace

ComplexBuffer alloc_complex(size_t n) {
    auto *p = fftw_alloc_complex(n == 0 ? 1 : n);
    if (!p)
        throw std::bad_alloc();
    return ComplexBuffer(p);
}

RealBuffer alloc_real(size_t n) {
    auto *p = fftw_alloc_real(n == 0 ? 1 : n);
    if (!p)
        throw std::bad_alloc();
    return RealBuffer(p);
}

ComplexFft::ComplexFft(size_t n, Direction dir) : n_(n) {
    auto in = alloc_complex(n);
    auto out = alloc_complex(n);
    std::lock_guard<std::mutex> guard(planner_lock());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), in.get(), out.get(),
                             dir == Direction::Forward ? FFTW_FORWARD
                                                       : FFTW_BACKWARD,
                             kPlanFlags);
}

ComplexFft::~ComplexFft() {
    std::lock_guard<std::mutex> guard(planner_lock());
    fftw_destroy_plan(plan_);
}

void ComplexFft::execute(fftw_complex *in, fftw_complex *out) const {
    fftw_execute_dft(plan_, in, out);
}

RealForwardFft::RealForwardFft(size_t n) {
    auto in = alloc_real(n);
    auto out = alloc_complex(n / 2 + 1);
    std::lock_guard<std::mutex> guard(planner_lock());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(),
                                 kPlanFlags);
}

RealForwardFft::~RealForwardFft() {
    std::lock_guard<std::mutex> guard(planner_lock());
    fftw_destroy_plan(plan_);
}

void RealForwardFft::execute(double *in, fftw_complex *out) const {
    fftw_execute_dft_r2c(plan_, in, out);
}

RealInverseFft::RealInverseFft(size_t n) {
    auto in = alloc_complex(n / 2 + 1);
    auto out = alloc_real(n);
    std::lock_guard<std::mutex> guard(planner_lock());
    plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), in.get(), out.get(),
                                 kPlanFlags);
}

RealInverseFft::~RealInverseFft() {
    std::lock_guard<std::mutex> guard(planner_lock());
    fftw_destroy_plan(plan_);
}

void RealInverseFft::execute(fftw_complex *in, double *out) const {
    fftw_execute_dft_c2r(plan_, in, out);
}

size_t fast_fft_size(size_t n) {
    for (size_t m = n < 1 ? 1 : n;; m++) {
        size_t r = m;
        for (size_t f : {2u, 3u, 5u})
            while (r % f == 0)
                r /= f;
        if (r == 1)
            return m;
    }
}

} // namespace sidetrace::detail
