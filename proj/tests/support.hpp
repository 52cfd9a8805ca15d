#pragma once

#include <cmath>
#include <random>

#include "bubblekit/boundary.hpp"
#include "bubblekit/closedform.hpp"
#include "bubblekit/smoothmaps.hpp"

namespace bktest {

using namespace bubblekit;

/// Boundary table filled with the closed-form Θ of the reciprocal Bessel forward.
inline ThetaTable exact_recip_theta(double j, double T, int nodes) {
  ThetaTable t;
  t.j = j;
  t.map_descriptor = power_law_map(-1.0, 0.0).descriptor();
  t.payoff_descriptor = PayoffSpec::forward().descriptor();
  for (int i = 0; i <= nodes; ++i) {
    const double tau = T * i / nodes;
    t.taus.push_back(tau);
    t.theta.push_back(theta_recip_bessel_forward(tau, j));
    t.std_error.push_back(0.0);
  }
  return t;
}

/// Same for the Brownian model with the identity price map: Θ(τ, j) = j + 4√τ φ(0).
inline ThetaTable exact_bm_theta(double j, double T, int nodes) {
  ThetaTable t;
  t.j = j;
  t.map_descriptor = power_law_map(1.0, 0.0).descriptor();
  t.payoff_descriptor = PayoffSpec::forward().descriptor();
  for (int i = 0; i <= nodes; ++i) {
    const double tau = T * i / nodes;
    t.taus.push_back(tau);
    t.theta.push_back(tau == 0.0 ? j : forward_bm_fundraiser(j, j, tau));
    t.std_error.push_back(0.0);
  }
  return t;
}

inline double joint_z(double a, double sa, double b, double sb = 0.0) {
  return (a - b) / std::sqrt(sa * sa + sb * sb);
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-12) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b)}) + abs_floor;
}

}  // namespace bktest
