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

#include "sidetrace/svg.h"
#include "sidetrace/wavelet.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace sidetrace {
namespace svg {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 300.0;
constexpr double kMargin = 30.0;

const char *const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string &s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string header(const std::string &title) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) +
           "\" height=\"" + num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) +
           " " + num(kHeight) + "\">\n<title>" + escape(title) +
           "</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           "<text x=\"" + num(kMargin) + "\" y=\"18\" font-family=\"sans-serif\" "
           "font-size=\"12\">" + escape(title) + "</text>\n";
}

struct Frame {
    double x_span;
    double lo, hi;

    double x(double i) const {
        return kMargin + (x_span > 0 ? i / x_span : 0.0) * (kWidth - 2 * kMargin);
    }
    double y(double v) const {
        const double f = hi > lo ? (v - lo) / (hi - lo) : 0.5;
        return kHeight - kMargin - f * (kHeight - 2 * kMargin);
    }
};

std::string polyline(std::span<const double> ys, const Frame &f,
                     const char *color) {
    std::string pts;
    for (size_t i = 0; i < ys.size(); i++) {
        if (i)
            pts += ' ';
        pts += num(f.x(static_cast<double>(i))) + "," + num(f.y(ys[i]));
    }
    return "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1\" points=\"" + pts + "\"/>\n";
}

} // namespace

std::string line_plot(const std::vector<std::vector<double>> &series,
                      const std::string &title) {
    double lo = 0.0, hi = 0.0;
    size_t len = 0;
    bool first = true;
    for (const auto &s : series)
        for (double v : s) {
            lo = first ? v : std::min(lo, v);
            hi = first ? v : std::max(hi, v);
            first = false;
        }
    for (const auto &s : series)
        len = std::max(len, s.size());

    const Frame f{len > 1 ? static_cast<double>(len - 1) : 0.0, lo, hi};
    std::string out = header(title);
    for (size_t i = 0; i < series.size(); i++)
        out += polyline(series[i], f, kColors[i % std::size(kColors)]);
    out += "</svg>\n";
    return out;
}

std::string event_plot(const Fingerprint &fp, size_t length_cycles,
                       const std::string &title,
                       std::span<const uint64_t> markers) {
    const std::vector<double> raster = rasterize(fp, length_cycles, 2);
    double top = 1.0;
    for (double v : raster)
        top = std::max(top, v);
    const Frame f{length_cycles > 1 ? static_cast<double>(length_cycles - 1) : 0.0,
                  0.0, top};
    std::string out = header(title);
    out += polyline(raster, f, kColors[0]);
    for (uint64_t c : fp.cycles) {
        const std::string x = num(f.x(static_cast<double>(c)));
        out += "<line x1=\"" + x + "\" y1=\"" + num(f.y(0.0)) + "\" x2=\"" + x +
               "\" y2=\"" + num(f.y(-0.08 * top)) + "\" stroke=\"black\"/>\n";
    }
    for (uint64_t m : markers) {
        const std::string x = num(f.x(static_cast<double>(m)));
        out += "<line x1=\"" + x + "\" y1=\"" + num(f.y(0.0)) + "\" x2=\"" + x +
               "\" y2=\"" + num(f.y(top)) +
               "\" stroke=\"" + kColors[1] + "\" stroke-dasharray=\"4 3\"/>\n";
    }
    out += "</svg>\n";
    return out;
}

} // namespace svg
} // namespace sidetrace
