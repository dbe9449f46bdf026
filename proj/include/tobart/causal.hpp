#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "tobart/chain.hpp"
#include "tobart/data.hpp"

namespace tobart {

struct CausalDataset {
  Eigen::MatrixXd x;
  std::vector<int> t;  // binary treatment
  std::vector<ObservedOutcome> y;
  CensoringBounds bounds;
  std::vector<double> tau_truth;  // empty unless synthetic
  std::vector<double> mu_truth;

  Eigen::Index n() const { return x.rows(); }
};

// Per-draw CATE evaluations: tau(d, i) = f_d(x_i, T=1) - f_d(x_i, T=0).
struct CateDraws {
  Eigen::MatrixXd tau;  // draws x rows

  Eigen::Index rows() const { return tau.cols(); }
  Eigen::Index draw_count() const { return tau.rows(); }
};

struct CateSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double level = 0.95;
};

struct CateResult {
  CateDraws draws;
  CateSummary summary;
};

// S-learner CATE: one censored-outcome fit with the treatment appended as a
// covariate, differencing the forest at T=1 and T=0 per retained draw.
CateResult estimate_cate(const CausalDataset& data, const ChainConfig& cfg, double level = 0.95);

// Mean squared error of CATE estimates against the truth.
double pehe(std::span<const double> estimates, std::span<const double> truth);

// (coverage of equal-tailed intervals, mean interval length).
std::pair<double, double> interval_metrics(const CateDraws& draws,
                                           std::span<const double> truth, double level);

// Estimand of a model trained only on the uncensored rows: tau plus the
// difference of inverse-Mills corrections at mu+tau and mu.
double naive_uncensored_bias(double mu, double tau, double sigma, const CensoringBounds& bounds);

// Estimand of a model trained naively on the full censored data.
double naive_fulldata_bias(double mu, double tau, double sigma, const CensoringBounds& bounds);

}  // namespace tobart
