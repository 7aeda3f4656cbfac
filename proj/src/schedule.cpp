// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "c2dfb/outer_solver.hpp"

namespace c2dfb {

Schedule default_schedule(double epsilon, const ProblemConstants& constants, double spectral_gap,
                          const ScheduleCoefficients& coeff) {
  if (!(epsilon > 0.0)) throw InvalidConfigError("schedule.epsilon: must be positive");
  if (!constants.known())
    throw InvalidConfigError("problem constants unknown; supply manual hyperparameters (lambda, K, eta_out, gamma_out)");
  if (!(spectral_gap > 0.0)) throw InvalidConfigError("default schedule needs a positive spectral gap");
  const double l = constants.l();
  const double kappa = constants.kappa();
  Schedule s;
  s.lambda = coeff.c_lambda * l * std::pow(kappa, 3) / epsilon;
  s.K = std::max(1, static_cast<int>(std::ceil(coeff.c_K * std::log(1.0 / std::pow(epsilon, 4)))));
  s.gamma_out = std::min(1.0, coeff.c_gamma * spectral_gap * spectral_gap);
  s.eta_out = coeff.c_eta * s.gamma_out * epsilon * epsilon / (std::pow(l, 4) * std::pow(kappa, 6));
  return s;
}

}  // namespace c2dfb
