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

#include <span>
#include <string_view>
#include <vector>

namespace riskprune {

// Two constructions of the betting fraction for the martingale bound.
//
// predictable: the variance estimate entering the bet at step i uses only
// losses 1..i-1 (lagged, with a 1/4 prior at step 1). This is the original
// construction; the bet never peeks at the loss it is about to see.
//
// printed: the variance at step i includes loss i itself, and the deviations
// are taken around the step-i mean. Kept as a compatibility mode for
// reproducing results computed that way.
enum class WsrVariant { predictable, printed };

WsrVariant wsr_variant_from_string(std::string_view s);
const char* to_string(WsrVariant v);

// Upper confidence bound on the mean of bounded losses via a betting
// martingale: the bound is the smallest R whose capital process
//   K_i(R) = prod_{j<=i} (1 - nu_j (L_j - R))
// never exceeds 1/delta, found by bisection to 1e-6 and clamped to 1.
// Sample order matters; callers own the ordering policy. With probability at
// least 1 - delta the true mean is below the returned value, assuming the
// losses are exchangeable draws. At delta = 1 the construction degenerates
// (all bets are zero) and the bound is the vacuous 1.0.
double wsr_ucb(std::span<const double> losses, double delta,
               WsrVariant variant = WsrVariant::predictable);

// Closed-form baseline: mean + sqrt(log(1/delta) / (2m)), clamped to 1.
double hoeffding_ucb(std::span<const double> losses, double delta);

// Reusable evaluator for tight loops: keeps the betting-fraction buffer
// alive across calls so a grid sweep does not reallocate per point.
class WsrBound {
 public:
  WsrBound(double delta, WsrVariant variant = WsrVariant::predictable);

  double ucb(std::span<const double> losses);

  double delta() const { return delta_; }
  WsrVariant variant() const { return variant_; }

 private:
  void compute_fractions(std::span<const double> losses);
  bool capital_exceeds(std::span<const double> losses, double r) const;

  double delta_;
  double inv_delta_;
  double log_inv_delta_;
  WsrVariant variant_;
  std::vector<double> nu_;
};

}  // namespace riskprune
