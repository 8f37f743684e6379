#pragma once

// Library potential with the same pieces as a random oracle potential.

#include <algorithm>
#include <optional>
#include <vector>

#include "support/oracles.hpp"
#include "svilab/convex.hpp"

inline svilab::Potential from_pwl(const oracle::PwlPotential& p) {
  std::vector<svilab::Polynomial> pieces;
  for (std::size_t k = 0; k < p.jump_to.size(); ++k) pieces.push_back(svilab::Polynomial{p.coeffs(k)});
  // inf|η|² ≤ C(1 + r²) with C = 2 max(φ(b)² over pieces) + 2 slope²: loose but valid.
  double c = 1.0;
  for (std::size_t k = 0; k < p.jump_to.size(); ++k) {
    const double end = k < p.breaks.size() ? p.breaks[k] : p.start(k) + 1.0;
    const double v = p.jump_to[k] + p.slope[k] * (end - p.start(k));
    c = std::max(c, 2.0 * v * v + 2.0 * p.slope[k] * p.slope[k] * (1.0 + end * end));
  }
  std::optional<double> witness;
  if (!p.superlinear()) witness = p.breaks.back() + 1.0;
  return svilab::Potential::custom(p.breaks, pieces, c, witness);
}
