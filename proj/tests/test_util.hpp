#pragma once

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tokrl/policy.hpp"
#include "tokrl/rng.hpp"

namespace tokrl::testutil {

// Central finite differences against analytic gradients on randomly probed
// coordinates.  loss_fn must recompute the scalar objective at the current
// params without touching grads.  The denominator floor keeps near-zero
// coordinates from amplifying FD noise into a spurious relative error.
inline void check_gradients(PolicyParams& params, const ParamSet& grads,
                            const std::function<double()>& loss_fn, int n_coords,
                            std::uint64_t seed, double h = 1e-5, double tol = 1e-4) {
  auto p_named = params.t.named();
  auto g_named = grads.named();
  REQUIRE(p_named.size() == g_named.size());

  std::size_t total = 0;
  for (auto& [name, tensor] : p_named) total += tensor->size();

  Rng rng(seed);
  int checked = 0;
  int nonzero = 0;
  for (int probe = 0; probe < n_coords; ++probe) {
    std::size_t flat = rng.uniform_int(total);
    std::size_t t = 0;
    while (flat >= p_named[t].second->size()) {
      flat -= p_named[t].second->size();
      ++t;
    }
    double* x = &p_named[t].second->v[flat];
    double g = g_named[t].second->v[flat];
    double x0 = *x;
    *x = x0 + h;
    double lp = loss_fn();
    *x = x0 - h;
    double lm = loss_fn();
    *x = x0;
    double fd = (lp - lm) / (2.0 * h);
    double rel = std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-3});
    CAPTURE(p_named[t].first);
    CAPTURE(flat);
    CAPTURE(fd);
    CAPTURE(g);
    CHECK(rel <= tol);
    ++checked;
    if (std::abs(g) > 1e-8) ++nonzero;
  }
  CHECK(checked >= n_coords);
  // The probe must have exercised real gradient signal, not an all-zero field.
  CHECK(nonzero > n_coords / 4);
}

}  // namespace tokrl::testutil
