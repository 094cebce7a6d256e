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

#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "naive_oracle.hpp"
#include "riskprune/bounds.hpp"
#include "riskprune/error.hpp"
#include "riskprune/rng.hpp"

using namespace riskprune;

namespace {

std::vector<double> bernoulli(Rng& rng, size_t m, double p) {
  std::vector<double> v(m);
  for (double& x : v) x = rng.next_u01() <= p ? 1.0 : 0.0;
  return v;
}

std::vector<double> uniform(Rng& rng, size_t m) {
  std::vector<double> v(m);
  for (double& x : v) x = rng.next_u01();
  return v;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

// Betting fractions of the compatibility variant, from its definition: the
// variance at step i includes loss i, deviations taken around the step-i
// mean.
std::vector<double> printed_fractions(const std::vector<double>& losses,
                                      double delta) {
  const size_t m = losses.size();
  std::vector<double> nu(m);
  double sum = 0.0, sumsq = 0.0;
  for (size_t i = 0; i < m; ++i) {
    sum += losses[i];
    sumsq += losses[i] * losses[i];
    const double t = static_cast<double>(i) + 1.0;
    const double mu = (0.5 + sum) / (1.0 + t);
    const double sig2 =
        (0.25 + sumsq - 2.0 * mu * sum + t * mu * mu) / (1.0 + t);
    nu[i] = std::min(1.0, std::sqrt(2.0 * std::log(1.0 / delta) /
                                    (static_cast<double>(m) * sig2)));
  }
  return nu;
}

double grid_ucb_with(const std::vector<double>& losses,
                     const std::vector<double>& nu, double delta,
                     double step) {
  const int n = static_cast<int>(std::ceil(1.0 / step));
  for (int i = 0; i <= n; ++i) {
    const double r = std::min(1.0, static_cast<double>(i) * step);
    if (oracle::capital_ever_exceeds(losses, nu, r, delta)) return r;
  }
  return 1.0;
}

}  // namespace

TEST_CASE("betting bound agrees with the brute-force grid") {
  Rng rng(101);
  const double step = 1e-3;
  const double tol = step + 2e-6;
  for (double delta : {0.05, 0.1, 0.5}) {
    for (size_t m : {5u, 37u, 200u}) {
      for (int rep = 0; rep < 4; ++rep) {
        std::vector<double> losses =
            rep % 2 == 0 ? bernoulli(rng, m, 0.3) : uniform(rng, m);
        const double fast = wsr_ucb(losses, delta);
        const double slow = oracle::grid_wsr_ucb(losses, delta, step);
        CHECK(std::abs(fast - slow) <= tol);
      }
    }
  }
}

TEST_CASE("betting bound matches a fine grid on a few vectors") {
  Rng rng(202);
  const double step = 1e-5;
  const double tol = step + 2e-6;
  for (int rep = 0; rep < 3; ++rep) {
    std::vector<double> losses = bernoulli(rng, 100, 0.25);
    const double fast = wsr_ucb(losses, 0.1);
    const double slow = oracle::grid_wsr_ucb(losses, 0.1, step);
    CHECK(std::abs(fast - slow) <= tol);
  }
}

TEST_CASE("compatibility variant matches its own grid oracle") {
  Rng rng(303);
  const double step = 1e-3;
  const double tol = step + 2e-6;
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> losses = uniform(rng, 150);
    const double fast = wsr_ucb(losses, 0.1, WsrVariant::printed);
    const double slow =
        grid_ucb_with(losses, printed_fractions(losses, 0.1), 0.1, step);
    CHECK(std::abs(fast - slow) <= tol);
  }
}

TEST_CASE("all-zero losses certify a tiny bound") {
  const std::vector<double> zeros(1000, 0.0);
  const double u = wsr_ucb(zeros, 0.1);
  CHECK(u > 0.0);
  CHECK(u <= 0.02);
}

TEST_CASE("tiny samples cannot certify anything") {
  // Three samples at 1/2: the capital can reach at most 1.5^3 < 10.
  const std::vector<double> half(3, 0.5);
  CHECK(wsr_ucb(half, 0.1) == 1.0);
}

TEST_CASE("bound is vacuous at delta = 1") {
  const std::vector<double> zeros(50, 0.0);
  CHECK(wsr_ucb(zeros, 1.0) == 1.0);
}

TEST_CASE("bound covers the true mean at the advertised rate") {
  Rng rng(404);
  const double p = 0.3;
  int covered = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<double> losses = bernoulli(rng, 500, p);
    if (wsr_ucb(losses, 0.1) >= p) ++covered;
  }
  // Expected coverage 0.9; allow a little over two binomial standard errors.
  CHECK(static_cast<double>(covered) / reps >= 0.85);
}

TEST_CASE("bound tightens as delta grows") {
  Rng rng(505);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> losses = bernoulli(rng, 300, 0.2);
    const double strict = wsr_ucb(losses, 0.05);
    const double loose = wsr_ucb(losses, 0.2);
    CHECK(strict >= loose - 2e-6);
  }
}

TEST_CASE("bound depends on sample order") {
  std::vector<double> zeros_then_ones(100, 0.0);
  std::fill(zeros_then_ones.begin() + 50, zeros_then_ones.end(), 1.0);
  std::vector<double> ones_then_zeros(100, 1.0);
  std::fill(ones_then_zeros.begin() + 50, ones_then_zeros.end(), 0.0);
  const double a = wsr_ucb(zeros_then_ones, 0.1);
  const double b = wsr_ucb(ones_then_zeros, 0.1);
  CHECK(std::abs(a - b) > 1e-3);
}

TEST_CASE("closed-form baseline bound") {
  Rng rng(606);
  std::vector<double> losses = uniform(rng, 400);
  const double mean = mean_of(losses);
  const double expect =
      std::min(1.0, mean + std::sqrt(std::log(1.0 / 0.1) / (2.0 * 400.0)));
  CHECK(hoeffding_ucb(losses, 0.1) == doctest::Approx(expect).epsilon(1e-12));
  // A tiny sample clamps at 1.
  const std::vector<double> one(1, 0.9);
  CHECK(hoeffding_ucb(one, 0.01) == 1.0);
}

TEST_CASE("reusable evaluator matches the free function") {
  Rng rng(707);
  WsrBound bound(0.1);
  for (size_t m : {10u, 200u, 37u}) {  // shrinking length reuses the buffer
    std::vector<double> losses = bernoulli(rng, m, 0.4);
    CHECK(bound.ucb(losses) == wsr_ucb(losses, 0.1));
  }
}

TEST_CASE("invalid inputs are rejected") {
  const std::vector<double> ok = {0.1, 0.2};
  const std::vector<double> empty;
  const std::vector<double> below = {-0.1, 0.2};
  const std::vector<double> above = {0.1, 1.2};
  CHECK_THROWS_AS(wsr_ucb(empty, 0.1), Error);
  CHECK_THROWS_AS(wsr_ucb(ok, 0.0), Error);
  CHECK_THROWS_AS(wsr_ucb(ok, 1.5), Error);
  CHECK_THROWS_AS(wsr_ucb(below, 0.1), Error);
  CHECK_THROWS_AS(wsr_ucb(above, 0.1), Error);
  CHECK_THROWS_AS(hoeffding_ucb(ok, 0.0), Error);
  try {
    wsr_ucb(ok, 0.0);
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::invalid_argument);
  }
  try {
    wsr_ucb(above, 0.1);
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::domain);
  }
}

TEST_CASE("variant names round-trip") {
  CHECK(wsr_variant_from_string("predictable") == WsrVariant::predictable);
  CHECK(wsr_variant_from_string("printed") == WsrVariant::printed);
  CHECK(std::string(to_string(WsrVariant::predictable)) == "predictable");
  CHECK(std::string(to_string(WsrVariant::printed)) == "printed");
  CHECK_THROWS_AS(wsr_variant_from_string("hedged"), Error);
}
