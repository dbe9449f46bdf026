#pragma once

#include <string>

#include "tobart/chain.hpp"
#include "tobart/forest.hpp"

namespace tobart {

// Versioned JSON round-trips. Node values serialize through the shortest
// round-trip double representation, so a reloaded model predicts
// bit-identically.

std::string forest_to_json(const ForestState& forest);
ForestState forest_from_json(const std::string& json_text);

// Full posterior dump: per-draw forest snapshots plus the error-state draws,
// bounds, centering and calibration needed to predict at new covariates.
std::string model_to_json(const PosteriorDraws& draws);
PosteriorDraws model_from_json(const std::string& json_text);

void save_model(const PosteriorDraws& draws, const std::string& path);
PosteriorDraws load_model(const std::string& path);

// Posterior prediction from a reloaded dump at new covariate rows: evaluates
// every retained forest snapshot (and, in DP mode, redraws out-of-sample
// error parameters from the stored per-draw cluster lists).
PosteriorDraws predict_draws_from_model(const PosteriorDraws& model, const Eigen::MatrixXd& x,
                                        RngStream& rng);

}  // namespace tobart
