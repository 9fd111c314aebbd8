// SPDX-License-Identifier: Apache-2.0
//
// nrpos: carrier-phase positioning toolkit for 5G NR reference signals
// Copyright (C) 2026 The nrpos Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <iosfwd>

namespace nrpos
{

/// Entry point of the `nrpos` tool. Returns 0 on success, 1 on a usage
/// error, 2 on a runtime error. Data goes to `out` or to files under
/// --out; diagnostics go to `err`.
int dispatch(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

const char *build_id();

} // namespace nrpos
