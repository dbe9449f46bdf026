#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "tobart/causal.hpp"
#include "tobart/chain.hpp"
#include "tobart/data.hpp"
#include "tobart/stats.hpp"

namespace tobart {

// Synthetic benchmark generators. Censoring thresholds are empirical order
// statistics of the training latent outcomes, applied to train and test.
struct DgpSpec {
  std::string name = "friedman";
  int n_train = 500;
  int n_test = 500;
  int p = 30;
  ErrorKind error = ErrorKind::kNormal;
  ErrorParams error_params;
  double censor_lower_pct = 15.0;  // < 0 disables
  double censor_upper_pct = -1.0;
  bool causal = false;
};

// Paper presets by name: friedman, friedman-1side, groot, sigrist, jacobson,
// caron, friedberg, nie-A..nie-D.
DgpSpec make_dgp_spec(const std::string& name);

struct GeneratedData {
  Dataset train;
  Dataset test;
  Eigen::VectorXd y_star_train;
  Eigen::VectorXd y_star_test;
  // causal fields (empty for prediction DGPs)
  std::vector<int> t_train;
  std::vector<int> t_test;
  Eigen::VectorXd tau_train;
  Eigen::VectorXd tau_test;
  Eigen::VectorXd mu_train;
  Eigen::VectorXd mu_test;
  bool causal = false;

  CausalDataset causal_view() const;
};

GeneratedData generate(const DgpSpec& spec, RngStream& rng);

// Latent mean surfaces, exposed for direct checks.
double friedman_mean(const Eigen::RowVectorXd& x);
double groot_mean(const Eigen::RowVectorXd& x);
double sigrist_mean(const Eigen::RowVectorXd& x);
double jacobson_mean(const Eigen::RowVectorXd& x);

struct Metrics {
  double mse = 0.0;
  double brier = 0.0;
  double auc = 0.0;
  double coverage = 0.0;
  double length = 0.0;
};

struct TestPredictions {
  Eigen::VectorXd outcome_mean;  // point prediction of the censored outcome
  Eigen::VectorXd p_censored;    // may be empty (no probability model)
  Eigen::VectorXd latent_lower;  // may be empty (no interval model)
  Eigen::VectorXd latent_upper;
};

// MSE against the censored test outcomes, Brier/AUC on the censoring
// indicator, coverage/length of the latent-outcome intervals.
Metrics compute_metrics(const TestPredictions& pred, const Dataset& test,
                        const Eigen::VectorXd& y_star_test);

// Rank-statistic AUC of scores against binary labels (ties count half).
double rank_auc(const Eigen::VectorXd& scores, const std::vector<int>& labels);

struct ExperimentSpec {
  DgpSpec dgp;
  std::vector<std::string> methods;  // tobart, tobart-np, soft-tobart,
                                     // soft-tobart-np, bart-naive, linear-tobit
  int repetitions = 5;
  int burn_in = 1000;
  int draws = 1000;
  int thin = 1;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware choice
};

struct ReplicationResult {
  std::string dgp_name;
  bool causal = false;
  std::vector<std::string> methods;
  std::vector<Metrics> mean_metrics;               // per method
  std::vector<std::vector<Metrics>> rep_metrics;   // per method, per repetition

  std::string table() const;  // delimited text, one row per method
};

// Runs every method on each seeded replication (repetitions run in
// parallel), averages the metrics. For causal DGPs the mse column holds
// PEHE and coverage/length refer to the CATE intervals.
ReplicationResult replicate(const ExperimentSpec& spec);

Metrics run_method_on_data(const std::string& method, const GeneratedData& data,
                           const ExperimentSpec& spec, std::uint64_t chain_stream);

}  // namespace tobart
