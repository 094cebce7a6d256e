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

#include "riskprune/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "riskprune/error.hpp"

namespace riskprune {

namespace {

constexpr double kBisectionTol = 1e-6;
// Rescaling bounds keep the running capital product inside normal double
// range; the capital itself can over- or underflow double for large m.
constexpr double kScaleLo = 1e-300;
constexpr double kScaleHi = 1e300;

void validate_inputs(std::span<const double> losses, double delta) {
  if (losses.empty()) throw_invalid("need at least one loss sample");
  if (!(delta > 0.0) || delta > 1.0)
    throw_invalid("delta must lie in (0, 1], got " + std::to_string(delta));
  for (double l : losses) {
    if (!(l >= 0.0) || !(l <= 1.0))
      throw_domain("loss outside [0, 1]: " + std::to_string(l));
  }
}

}  // namespace

WsrVariant wsr_variant_from_string(std::string_view s) {
  if (s == "predictable") return WsrVariant::predictable;
  if (s == "printed") return WsrVariant::printed;
  throw_invalid("unknown wsr variant: " + std::string(s));
}

const char* to_string(WsrVariant v) {
  return v == WsrVariant::printed ? "printed" : "predictable";
}

WsrBound::WsrBound(double delta, WsrVariant variant)
    : delta_(delta),
      inv_delta_(1.0 / delta),
      log_inv_delta_(std::log(1.0 / delta)),
      variant_(variant) {
  if (!(delta > 0.0) || delta > 1.0)
    throw_invalid("delta must lie in (0, 1], got " + std::to_string(delta));
}

void WsrBound::compute_fractions(std::span<const double> losses) {
  const size_t m = losses.size();
  nu_.resize(m);
  const double c = 2.0 * log_inv_delta_ / static_cast<double>(m);
  if (variant_ == WsrVariant::predictable) {
    double sum = 0.0;
    double devsq = 0.0;
    double sig2_lag = 0.25;
    for (size_t i = 0; i < m; ++i) {
      nu_[i] = std::min(1.0, std::sqrt(c / sig2_lag));
      sum += losses[i];
      const double denom = static_cast<double>(i + 2);  // 1 + (i+1)
      const double mu = (0.5 + sum) / denom;
      const double dev = losses[i] - mu;
      devsq += dev * dev;
      sig2_lag = (0.25 + devsq) / denom;
    }
  } else {
    double sum = 0.0;
    double sumsq = 0.0;
    for (size_t i = 0; i < m; ++i) {
      sum += losses[i];
      sumsq += losses[i] * losses[i];
      const double t = static_cast<double>(i + 1);
      const double mu = (0.5 + sum) / (1.0 + t);
      const double sig2 =
          (0.25 + sumsq - 2.0 * mu * sum + t * mu * mu) / (1.0 + t);
      nu_[i] = std::min(1.0, std::sqrt(c / sig2));
    }
  }
}

bool WsrBound::capital_exceeds(std::span<const double> losses,
                               double r) const {
  // Runs the capital process and reports whether it ever exceeds 1/delta.
  // The product is tracked multiplicatively with explicit rescaling instead
  // of in log space: same decision, no per-factor log on the hot path.
  double prod = 1.0;
  int scale = 0;  // value = prod * kScaleLo^scale
  const double* nu = nu_.data();
  const double* l = losses.data();
  const size_t m = losses.size();
  for (size_t i = 0; i < m; ++i) {
    prod *= 1.0 - nu[i] * (l[i] - r);
    if (prod <= 0.0) return false;  // capital hit zero and stays there
    if (scale == 0) {
      if (prod > inv_delta_) return true;
      if (prod < kScaleLo) {
        prod /= kScaleLo;
        ++scale;
      }
    } else if (prod > kScaleHi) {
      prod *= kScaleLo;
      --scale;
      if (scale == 0 && prod > inv_delta_) return true;
    }
  }
  return false;
}

double WsrBound::ucb(std::span<const double> losses) {
  validate_inputs(losses, delta_);
  compute_fractions(losses);
  // The capital never exceeds 1/delta at r = 0 (every factor is <= 1), and
  // grows with r, so the infimum is bracketed by [0, 1] whenever the capital
  // clears the threshold at r = 1; otherwise the bound clamps to 1.
  if (!capital_exceeds(losses, 1.0)) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > kBisectionTol) {
    const double mid = 0.5 * (lo + hi);
    if (capital_exceeds(losses, mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

double wsr_ucb(std::span<const double> losses, double delta,
               WsrVariant variant) {
  WsrBound bound(delta, variant);
  return bound.ucb(losses);
}

double hoeffding_ucb(std::span<const double> losses, double delta) {
  validate_inputs(losses, delta);
  double sum = 0.0;
  for (double l : losses) sum += l;
  const double mean = sum / static_cast<double>(losses.size());
  const double width =
      std::sqrt(std::log(1.0 / delta) / (2.0 * static_cast<double>(losses.size())));
  return std::min(1.0, mean + width);
}

}  // namespace riskprune
