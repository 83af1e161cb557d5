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

#include <iosfwd>
#include <string>
#include <vector>

namespace sidetrace {
namespace cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kOk = 0,
    kValidationError = 1,
    kProcessingError = 2,
};

/// Runs one subcommand. args excludes the program name. Data goes to out or
/// to the files named on the command line; diagnostics go to err.
int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err);

} // namespace cli
} // namespace sidetrace
