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

#include "nrpos/common.hpp"

#include <istream>
#include <sstream>
#include <string>
#include <vector>

namespace nrpos::detail
{

inline std::vector<std::string> split_csv_line(const std::string &line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

inline double parse_number(const std::string &s, const char *what)
{
    std::size_t used = 0;
    double v = 0.0;
    try
    {
        v = std::stod(s, &used);
    }
    catch (const std::exception &)
    {
        throw Error(std::string(what) + ": bad number '" + s + "'");
    }
    if (used != s.size() && s.find_first_not_of(" \t\r", used) != std::string::npos)
        throw Error(std::string(what) + ": bad number '" + s + "'");
    return v;
}

/// Rows of at least `columns` fields; the first line is skipped when it does
/// not start with a number.
inline std::vector<std::vector<std::string>> read_csv_rows(std::istream &in, std::size_t columns, const char *what)
{
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line))
    {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        auto f = split_csv_line(line);
        if (first)
        {
            first = false;
            const char c = f.empty() || f[0].empty() ? 'x' : f[0][0];
            if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.'))
                continue;
        }
        if (f.size() < columns)
            throw Error(std::string(what) + ": expected " + std::to_string(columns) + " columns in \"" + line + "\"");
        rows.push_back(std::move(f));
    }
    return rows;
}

} // namespace nrpos::detail
