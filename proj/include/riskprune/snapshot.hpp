// Copyright 2026 The riskprune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "riskprune/types.hpp"

namespace riskprune {

// Versioned text format for a Dataset. One header line
// (riskprune.dataset.v1 plus tab-separated key=value pairs), then one line
// per query with tab-separated blocks:
//   q <query_id> \t g [gold ids...] \t c <doc> <raw> <cal|-> <rr> <fused|-> \t ...
// Doubles are written in shortest round-trip form, so save followed by load
// reproduces every score bit for bit. '-' marks scores that are not present.
void save_snapshot(const Dataset& dataset, std::ostream& out);
void save_snapshot_file(const Dataset& dataset, const std::string& path);

Dataset load_snapshot(std::istream& in, std::string_view name);
Dataset load_snapshot_file(const std::string& path);

// Shortest decimal form of v that parses back to exactly v.
std::string format_double(double v);

}  // namespace riskprune
