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

#include <stdexcept>
#include <string>

namespace sidetrace {

/// Bad parameters or malformed input data. Maps to CLI exit status 1.
class ValidationError : public std::invalid_argument {
  public:
    explicit ValidationError(const std::string &what)
        : std::invalid_argument(what) {}
};

/// The input was well formed but the processing stage could not produce a
/// result (no events, no peak train, ...). Maps to CLI exit status 2.
class ProcessingError : public std::runtime_error {
  public:
    explicit ProcessingError(const std::string &what)
        : std::runtime_error(what) {}
};

} // namespace sidetrace
