#pragma once

#include <utility>
#include <vector>

#include "tobart/chain.hpp"
#include "tobart/data.hpp"

namespace tobart {

// E[Y] under Type-I censoring of N(f + gamma, sigma^2) to [a, b]:
//   a Phi(za) + loc (Phi(zb) - Phi(za)) + sigma (phi(za) - phi(zb)) + b (1 - Phi(zb)),
// with the infinite-limit terms dropped exactly.
double censored_expectation(double f, double gamma, double sigma, const CensoringBounds& bounds);

// E[Y | a < Y < b]; throws on vanishing interior mass.
double truncated_expectation(double f, double gamma, double sigma, const CensoringBounds& bounds);

// (P(Y* <= a), P(Y* >= b)).
std::pair<double, double> censoring_probs(double f, double gamma, double sigma,
                                          const CensoringBounds& bounds);

struct PredictionRecord {
  int row = 0;
  double latent_mean = 0.0;   // posterior mean of f
  double outcome_mean = 0.0;  // posterior mean of E[Y]
  double p_below = 0.0;
  double p_above = 0.0;
  double latent_lower = 0.0;  // equal-tailed predictive interval for y*
  double latent_upper = 0.0;
  double outcome_lower = 0.0;  // same, after the censoring transform
  double outcome_upper = 0.0;
  double level = 0.95;
};

// Per-row posterior summaries over the retained draws' test-row values.
// Predictive intervals come from one simulated error per (row, draw); the DP
// mixture uses the recorded out-of-sample error draws.
std::vector<PredictionRecord> posterior_predict(const PosteriorDraws& draws,
                                                const CensoringBounds& bounds, double level,
                                                RngStream& rng);

// Equal-tailed empirical quantile (linear interpolation on the sorted copy).
double empirical_quantile(std::vector<double> values, double q);

}  // namespace tobart
