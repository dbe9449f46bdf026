#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "tobart/calibrate.hpp"
#include "tobart/data.hpp"
#include "tobart/dp.hpp"
#include "tobart/forest.hpp"

namespace tobart {

enum class ErrorModel { kHomoskedastic, kDp };

struct ChainConfig {
  int burn_in = 1000;
  int draws = 1000;
  int thin = 1;
  int m = 0;  // 0: default by mode (200 hard, 25 soft)
  TreeMode mode = TreeMode::kHard;
  ErrorModel error_model = ErrorModel::kHomoskedastic;
  std::uint64_t seed = 1;
  std::uint64_t stream_id = 0;
  ForestOptions forest;      // m/mode fields here are overwritten from above
  bool keep_forests = false; // retain per-draw forest snapshots (fit/predict)

  int tree_count() const { return m > 0 ? m : (mode == TreeMode::kSoft ? 25 : 200); }
};

struct DpDrawRecord {
  int cluster_count = 0;
  double alpha_dp = 0.0;
  double largest_share = 0.0;
};

// Retained per-iteration state of a chain; everything on the original
// outcome scale.
struct PosteriorDraws {
  std::vector<Eigen::VectorXd> f_train;
  std::vector<Eigen::VectorXd> f_test;
  std::vector<double> sigma;  // homoskedastic mode

  // DP mixture mode
  std::vector<Eigen::VectorXd> gamma_train;
  std::vector<Eigen::VectorXd> sigma_train;
  std::vector<std::vector<std::pair<double, double>>> oos_test;  // per draw, per test row
  std::vector<DpDrawRecord> dp_diag;
  BaseMeasure base;

  // optional forest snapshots for later prediction; error offsets gamma are
  // additive on top of the recorded (already re-centered) f values
  std::vector<std::vector<Tree>> forests;
  std::vector<std::vector<DpCluster>> dp_clusters;
  std::vector<double> dp_alpha;

  ErrorModel error_model = ErrorModel::kHomoskedastic;
  TreeMode mode = TreeMode::kHard;
  CensoringBounds bounds;
  double center = 0.0;
  ChainConfig config;
  CalibratedPriors calib;

  std::size_t size() const { return f_test.size(); }
};

// One latent-outcome data-augmentation draw: interior outcomes pass through,
// censored ones are truncated-normal draws around f + gamma.
double draw_latent(RngStream& rng, const ObservedOutcome& obs, double f_i, double gamma_i,
                   double sigma_i, const CensoringBounds& bounds);

// Homoskedastic variance draw from IG((n+nu)/2, (SSR + nu lambda)/2).
double draw_sigma2(RngStream& rng, const Eigen::VectorXd& residuals, double nu, double lambda);

// A single Tobit chain with explicit stepping, usable both by run_chain and
// by calibration tests that need to drive iterations manually. All internal
// state is on the centered outcome scale.
class TobitChain {
 public:
  TobitChain(const Dataset& data, const ChainConfig& cfg, const CalibratedPriors& calib);

  void step(RngStream& rng);

  // Replace the observed outcomes (same censoring bounds); latent values for
  // censored rows are re-clamped into their truncation regions.
  void set_outcomes(const std::vector<ObservedOutcome>& y);

  const ForestState& forest() const { return forest_; }
  double sigma() const { return sigma_; }  // centered == original scale
  const Eigen::VectorXd& latent() const { return y_star_; }
  const DpState& dp_state() const { return dp_; }
  double center() const { return center_; }

  // fitted forest values on the original scale
  Eigen::VectorXd fitted_original() const;
  Eigen::VectorXd predict_original(const Eigen::MatrixXd& x) const;

  const Dataset& data() const { return data_; }

 private:
  void refresh_error_values();

  Dataset data_;  // outcomes on original scale; bounds_c_ centered
  ChainConfig cfg_;
  CalibratedPriors calib_;
  double center_ = 0.0;
  CensoringBounds bounds_c_;
  ForestState forest_;
  Eigen::VectorXd y_star_;  // centered latent outcomes
  double sigma_ = 1.0;
  DpState dp_;
  ErrorValues err_;
};

PosteriorDraws run_chain(const Dataset& data, const ChainConfig& cfg,
                         const CalibratedPriors& calib, const Eigen::MatrixXd& test_x);

// Calibrates with the model-appropriate defaults, then runs the chain.
PosteriorDraws fit_tobart(const Dataset& data, const ChainConfig& cfg,
                          const Eigen::MatrixXd& test_x);

}  // namespace tobart
