#include "tobart/dgp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "tobart/predict.hpp"

namespace tobart {

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

DgpSpec make_dgp_spec(const std::string& name) {
  DgpSpec s;
  s.name = name;
  if (name == "friedman") {
    s.censor_lower_pct = 15.0;
    s.censor_upper_pct = 85.0;
  } else if (name == "friedman-1side") {
    // censored from below only
    s.censor_lower_pct = 15.0;
  } else if (name == "groot") {
    s.censor_lower_pct = 40.0;
  } else if (name == "sigrist") {
    s.censor_lower_pct = -1.0;
    s.censor_upper_pct = 95.0;
  } else if (name == "jacobson") {
    s.censor_lower_pct = 25.0;
  } else if (name == "caron" || name == "friedberg" || name == "nie-A" || name == "nie-B" ||
             name == "nie-C" || name == "nie-D") {
    s.causal = true;
    s.n_train = 200;
    s.n_test = 200;
    s.p = (name == "caron") ? 10 : (name == "friedberg" ? 20 : 12);
    s.censor_lower_pct = 15.0;
    s.censor_upper_pct = 85.0;
  } else {
    throw std::invalid_argument("unknown DGP: " + name);
  }
  return s;
}

double friedman_mean(const Eigen::RowVectorXd& x) {
  return 10.0 * std::sin(M_PI * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) +
         10.0 * x[3] + 5.0 * x[4];
}

double groot_mean(const Eigen::RowVectorXd& x) {
  return 6.0 * (x[0] - 2.0) * (x[0] - 2.0) * std::sin(2.0 * (6.0 * x[0] - 2.0));
}

double sigrist_mean(const Eigen::RowVectorXd& x) {
  double s = 0.0;
  for (int k = 0; k < 5; ++k) s += 0.3 * std::max(x[k], 0.0);
  for (int k = 0; k < 3; ++k)
    for (int j = k + 1; j < 4; ++j) s += std::max(x[k] * x[j], 0.0);
  return s;
}

double jacobson_mean(const Eigen::RowVectorXd& x) {
  return 3.0 + 5.0 * x[0] + x[1] + 0.5 * x[2] - 2.0 * x[3] + 0.1 * x[4];
}

namespace {

struct CausalSurface {
  double pi;
  double mu;
  double tau;
};

CausalSurface caron_surface(const Eigen::RowVectorXd& x) {
  CausalSurface s;
  s.pi = std_normal_cdf(-0.4 + 0.3 * x[0] + 0.2 * x[1]);
  s.mu = 3.0 + x[0] + 0.8 * std::sin(x[1]) + 0.7 * x[2] * x[3] - x[4];
  s.tau = 2.0 + 0.8 * x[0] - 0.3 * x[1] * x[1];
  return s;
}

CausalSurface friedberg_surface(const Eigen::RowVectorXd& x) {
  CausalSurface s;
  s.pi = 0.5;
  s.mu = 0.0;
  s.tau = (1.0 + logistic(20.0 * (x[0] - 1.0 / 3.0))) *
          (1.0 + logistic(20.0 * (x[1] - 1.0 / 3.0)));
  return s;
}

CausalSurface nie_surface(char scenario, const Eigen::RowVectorXd& x) {
  CausalSurface s;
  switch (scenario) {
    case 'A':
      s.pi = std::clamp(std::sin(M_PI * x[0] * x[1]), 0.1, 0.9);
      s.mu = std::sin(M_PI * x[0] * x[1]) + 2.0 * (x[2] - 0.5) * (x[2] - 0.5) + x[3] +
             0.5 * x[4];
      s.tau = 0.5 * (x[0] + x[1]);
      break;
    case 'B':
      s.pi = 0.5;
      s.mu = std::max({x[0] + x[1], x[2], 0.0});
      s.tau = x[0] + std::log1p(std::exp(x[1]));
      break;
    case 'C':
      s.pi = 1.0 / (1.0 + std::exp(x[1] + x[2]));
      s.mu = 2.0 * std::log1p(std::exp(x[0] + x[1] + x[2]));
      s.tau = 1.0;
      break;
    case 'D':
      s.pi = 1.0 / (1.0 + std::exp(-x[0]) + std::exp(-x[1]));
      s.mu = 0.5 * (std::max(x[0] + x[1] + x[2], 0.0) + std::max(x[3] + x[4], 0.0));
      s.tau = std::max(x[0] + x[1] + x[2], 0.0) - std::max(x[3] + x[4], 0.0);
      break;
    default:
      throw std::logic_error("nie_surface: bad scenario");
  }
  return s;
}

Eigen::MatrixXd caron_chol(int p) {
  Eigen::MatrixXd cov(p, p);
  for (int j = 0; j < p; ++j)
    for (int k = 0; k < p; ++k)
      cov(j, k) = std::pow(0.6, std::abs(j - k)) + (j != k ? 0.1 : 0.0);
  return Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
}

Eigen::MatrixXd draw_covariates(const DgpSpec& spec, int n, RngStream& rng) {
  Eigen::MatrixXd x(n, spec.p);
  if (spec.name == "caron") {
    static thread_local Eigen::MatrixXd chol;  // fixed covariance, cache per thread
    if (chol.rows() != spec.p) chol = caron_chol(spec.p);
    Eigen::VectorXd z(spec.p);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < spec.p; ++j) z[j] = rng.normal();
      x.row(i) = (chol * z).transpose();
    }
  } else if (spec.name == "sigrist") {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < spec.p; ++j) x(i, j) = 2.0 * rng.uniform() - 1.0;
  } else if (spec.name == "nie-B" || spec.name == "nie-C" || spec.name == "nie-D") {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < spec.p; ++j) x(i, j) = rng.normal();
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < spec.p; ++j) x(i, j) = rng.uniform();
  }
  return x;
}

double mean_surface(const DgpSpec& spec, const Eigen::RowVectorXd& x) {
  if (spec.name == "friedman" || spec.name == "friedman-1side") return friedman_mean(x);
  if (spec.name == "groot") return groot_mean(x);
  if (spec.name == "sigrist") return sigrist_mean(x);
  if (spec.name == "jacobson") return jacobson_mean(x);
  throw std::logic_error("mean_surface: not a prediction DGP");
}

CausalSurface causal_surface(const DgpSpec& spec, const Eigen::RowVectorXd& x) {
  if (spec.name == "caron") return caron_surface(x);
  if (spec.name == "friedberg") return friedberg_surface(x);
  if (spec.name.rfind("nie-", 0) == 0) return nie_surface(spec.name.back(), x);
  throw std::logic_error("causal_surface: not a causal DGP");
}

// k-th order statistic at the requested percentile (empirical threshold).
double percentile_threshold(Eigen::VectorXd values, double pct) {
  std::sort(values.begin(), values.end());
  const int n = static_cast<int>(values.size());
  int k = static_cast<int>(std::lround(pct / 100.0 * n));
  k = std::clamp(k, 1, n);
  return values[k - 1];
}

}  // namespace

CausalDataset GeneratedData::causal_view() const {
  CausalDataset c;
  c.x = train.x;
  c.t = t_train;
  c.y = train.y;
  c.bounds = train.bounds;
  c.tau_truth.assign(tau_train.begin(), tau_train.end());
  c.mu_truth.assign(mu_train.begin(), mu_train.end());
  return c;
}

GeneratedData generate(const DgpSpec& spec, RngStream& rng) {
  if (spec.n_train < 2 || spec.n_test < 0 || spec.p < 1)
    throw std::invalid_argument("generate: invalid sizes");
  if (spec.censor_lower_pct >= 0.0 && spec.censor_upper_pct >= 0.0 &&
      spec.censor_lower_pct >= spec.censor_upper_pct)
    throw std::invalid_argument("generate: lower percentile must be below upper");

  GeneratedData out;
  out.causal = spec.causal;
  out.train.x = draw_covariates(spec, spec.n_train, rng);
  out.test.x = draw_covariates(spec, spec.n_test, rng);

  const auto draw_eps = [&] { return sample_error_dist(rng, spec.error, spec.error_params); };

  out.y_star_train.resize(spec.n_train);
  out.y_star_test.resize(spec.n_test);
  if (!spec.causal) {
    for (int i = 0; i < spec.n_train; ++i)
      out.y_star_train[i] = mean_surface(spec, out.train.x.row(i)) + draw_eps();
    for (int i = 0; i < spec.n_test; ++i)
      out.y_star_test[i] = mean_surface(spec, out.test.x.row(i)) + draw_eps();
  } else {
    out.t_train.resize(spec.n_train);
    out.t_test.resize(spec.n_test);
    out.tau_train.resize(spec.n_train);
    out.tau_test.resize(spec.n_test);
    out.mu_train.resize(spec.n_train);
    out.mu_test.resize(spec.n_test);
    const bool centered_treatment = spec.name.rfind("nie-", 0) == 0;
    const auto gen_rows = [&](const Eigen::MatrixXd& x, std::vector<int>& t,
                              Eigen::VectorXd& tau, Eigen::VectorXd& mu, Eigen::VectorXd& ys) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const CausalSurface s = causal_surface(spec, x.row(i));
        const int z = rng.uniform() < s.pi ? 1 : 0;
        t[static_cast<std::size_t>(i)] = z;
        tau[i] = s.tau;
        mu[i] = s.mu;
        const double zval = centered_treatment ? (z - 0.5) : static_cast<double>(z);
        ys[i] = s.mu + s.tau * zval + draw_eps();
      }
    };
    gen_rows(out.train.x, out.t_train, out.tau_train, out.mu_train, out.y_star_train);
    gen_rows(out.test.x, out.t_test, out.tau_test, out.mu_test, out.y_star_test);
  }

  CensoringBounds bounds;
  if (spec.censor_lower_pct >= 0.0)
    bounds.a = percentile_threshold(out.y_star_train, spec.censor_lower_pct);
  if (spec.censor_upper_pct >= 0.0)
    bounds.b = percentile_threshold(out.y_star_train, spec.censor_upper_pct);
  if (!bounds.valid()) throw std::invalid_argument("generate: degenerate censoring thresholds");

  out.train.bounds = bounds;
  out.test.bounds = bounds;
  out.train.y.resize(static_cast<std::size_t>(spec.n_train));
  out.test.y.resize(static_cast<std::size_t>(spec.n_test));
  for (int i = 0; i < spec.n_train; ++i)
    out.train.y[static_cast<std::size_t>(i)] = observe(out.y_star_train[i], bounds);
  for (int i = 0; i < spec.n_test; ++i)
    out.test.y[static_cast<std::size_t>(i)] = observe(out.y_star_test[i], bounds);
  return out;
}

double rank_auc(const Eigen::VectorXd& scores, const std::vector<int>& labels) {
  double n_pos = 0.0, n_neg = 0.0;
  for (int l : labels) (l ? n_pos : n_neg) += 1.0;
  if (n_pos == 0.0 || n_neg == 0.0) return std::numeric_limits<double>::quiet_NaN();
  double u = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (!labels[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = 0; j < scores.size(); ++j) {
      if (labels[static_cast<std::size_t>(j)]) continue;
      if (scores[i] > scores[j])
        u += 1.0;
      else if (scores[i] == scores[j])
        u += 0.5;
    }
  }
  return u / (n_pos * n_neg);
}

Metrics compute_metrics(const TestPredictions& pred, const Dataset& test,
                        const Eigen::VectorXd& y_star_test) {
  const Eigen::Index n = test.n();
  if (pred.outcome_mean.size() != n)
    throw std::invalid_argument("compute_metrics: prediction/test alignment mismatch");
  Metrics m;
  double sse = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = pred.outcome_mean[i] - test.y[static_cast<std::size_t>(i)].y;
    sse += d * d;
  }
  m.mse = sse / static_cast<double>(n);

  std::vector<int> censored(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    censored[static_cast<std::size_t>(i)] =
        test.y[static_cast<std::size_t>(i)].status != CensorStatus::kInterior ? 1 : 0;

  if (pred.p_censored.size() == n) {
    double bs = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = pred.p_censored[i] - censored[static_cast<std::size_t>(i)];
      bs += d * d;
    }
    m.brier = bs / static_cast<double>(n);
    m.auc = rank_auc(pred.p_censored, censored);
  } else {
    m.brier = std::numeric_limits<double>::quiet_NaN();
    m.auc = std::numeric_limits<double>::quiet_NaN();
  }

  if (pred.latent_lower.size() == n && pred.latent_upper.size() == n) {
    double cov = 0.0, len = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (y_star_test[i] >= pred.latent_lower[i] && y_star_test[i] <= pred.latent_upper[i])
        cov += 1.0;
      len += pred.latent_upper[i] - pred.latent_lower[i];
    }
    m.coverage = cov / static_cast<double>(n);
    m.length = len / static_cast<double>(n);
  } else {
    m.coverage = std::numeric_limits<double>::quiet_NaN();
    m.length = std::numeric_limits<double>::quiet_NaN();
  }
  return m;
}

namespace {

ChainConfig method_config(const std::string& method, const ExperimentSpec& spec,
                          std::uint64_t stream) {
  ChainConfig cfg;
  cfg.burn_in = spec.burn_in;
  cfg.draws = spec.draws;
  cfg.thin = spec.thin;
  cfg.seed = spec.seed;
  cfg.stream_id = stream;
  if (method == "tobart" || method == "bart-naive") {
    cfg.mode = TreeMode::kHard;
    cfg.error_model = ErrorModel::kHomoskedastic;
  } else if (method == "tobart-np") {
    cfg.mode = TreeMode::kHard;
    cfg.error_model = ErrorModel::kDp;
  } else if (method == "soft-tobart") {
    cfg.mode = TreeMode::kSoft;
    cfg.error_model = ErrorModel::kHomoskedastic;
  } else if (method == "soft-tobart-np") {
    cfg.mode = TreeMode::kSoft;
    cfg.error_model = ErrorModel::kDp;
  } else {
    throw std::invalid_argument("unknown method: " + method);
  }
  return cfg;
}

Dataset uncensored_view(const Dataset& d) {
  Dataset out = d;
  out.bounds = CensoringBounds{};
  for (auto& o : out.y) o.status = CensorStatus::kInterior;
  return out;
}

Metrics run_prediction_method(const std::string& method, const GeneratedData& data,
                              const ExperimentSpec& spec, std::uint64_t chain_stream) {
  const Eigen::Index n_test = data.test.n();
  TestPredictions pred;

  if (method == "linear-tobit") {
    const auto fit = fit_linear_tobit(data.train.x, data.train.y, data.train.bounds);
    Eigen::MatrixXd design(n_test, data.test.x.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(data.test.x.cols()) = data.test.x;
    const Eigen::VectorXd xb = design * fit.beta;
    pred.outcome_mean.resize(n_test);
    pred.p_censored.resize(n_test);
    pred.latent_lower.resize(n_test);
    pred.latent_upper.resize(n_test);
    const double zq = normal_quantile(0.975);
    for (Eigen::Index i = 0; i < n_test; ++i) {
      pred.outcome_mean[i] = censored_expectation(xb[i], 0.0, fit.sigma, data.test.bounds);
      const auto [pb, pa] = censoring_probs(xb[i], 0.0, fit.sigma, data.test.bounds);
      pred.p_censored[i] = pb + pa;
      pred.latent_lower[i] = xb[i] - zq * fit.sigma;
      pred.latent_upper[i] = xb[i] + zq * fit.sigma;
    }
    return compute_metrics(pred, data.test, data.y_star_test);
  }

  const ChainConfig cfg = method_config(method, spec, chain_stream);
  const bool naive = method == "bart-naive";
  const Dataset& train = naive ? uncensored_view(data.train) : data.train;
  const PosteriorDraws draws = fit_tobart(train, cfg, data.test.x);
  RngStream pred_rng(spec.seed ^ 0x5bf0a8f8ULL, chain_stream);
  const auto records = posterior_predict(draws, train.bounds, 0.95, pred_rng);

  pred.outcome_mean.resize(n_test);
  pred.latent_lower.resize(n_test);
  pred.latent_upper.resize(n_test);
  if (!naive) pred.p_censored.resize(n_test);
  for (Eigen::Index i = 0; i < n_test; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    // the naive fit ignores censoring entirely: its prediction is the latent mean
    pred.outcome_mean[i] = naive ? r.latent_mean : r.outcome_mean;
    pred.latent_lower[i] = r.latent_lower;
    pred.latent_upper[i] = r.latent_upper;
    if (!naive) pred.p_censored[i] = r.p_below + r.p_above;
  }
  return compute_metrics(pred, data.test, data.y_star_test);
}

Metrics run_causal_method(const std::string& method, const GeneratedData& data,
                          const ExperimentSpec& spec, std::uint64_t chain_stream) {
  Metrics m;
  m.brier = std::numeric_limits<double>::quiet_NaN();
  m.auc = std::numeric_limits<double>::quiet_NaN();
  const CausalDataset cd = data.causal_view();

  if (method == "linear-tobit") {
    Eigen::MatrixXd x(cd.n(), cd.x.cols() + 1);
    x.leftCols(cd.x.cols()) = cd.x;
    for (Eigen::Index i = 0; i < cd.n(); ++i)
      x(i, cd.x.cols()) = static_cast<double>(cd.t[static_cast<std::size_t>(i)]);
    const auto fit = fit_linear_tobit(x, cd.y, cd.bounds);
    const double tau_hat = fit.beta[fit.beta.size() - 1];
    std::vector<double> est(static_cast<std::size_t>(cd.n()), tau_hat);
    m.mse = pehe(est, cd.tau_truth);
    m.coverage = std::numeric_limits<double>::quiet_NaN();
    m.length = std::numeric_limits<double>::quiet_NaN();
    return m;
  }

  const ChainConfig cfg = method_config(method, spec, chain_stream);
  CausalDataset input = cd;
  if (method == "bart-naive") {
    input.bounds = CensoringBounds{};
    for (auto& o : input.y) o.status = CensorStatus::kInterior;
  }
  const CateResult res = estimate_cate(input, cfg);
  std::vector<double> est(res.summary.mean.begin(), res.summary.mean.end());
  m.mse = pehe(est, cd.tau_truth);
  const auto [cov, len] = interval_metrics(res.draws, cd.tau_truth, 0.95);
  m.coverage = cov;
  m.length = len;
  return m;
}

}  // namespace

Metrics run_method_on_data(const std::string& method, const GeneratedData& data,
                           const ExperimentSpec& spec, std::uint64_t chain_stream) {
  return data.causal ? run_causal_method(method, data, spec, chain_stream)
                     : run_prediction_method(method, data, spec, chain_stream);
}

ReplicationResult replicate(const ExperimentSpec& spec) {
  if (spec.repetitions < 1) throw std::invalid_argument("replicate: need >= 1 repetition");
  if (spec.methods.empty()) throw std::invalid_argument("replicate: empty method list");

  ReplicationResult out;
  out.dgp_name = spec.dgp.name;
  out.causal = spec.dgp.causal;
  out.methods = spec.methods;
  out.rep_metrics.assign(spec.methods.size(), std::vector<Metrics>(spec.repetitions));

  const auto run_rep = [&](int rep) {
    RngStream gen_rng(spec.seed, 2 * static_cast<std::uint64_t>(rep));
    const GeneratedData data = generate(spec.dgp, gen_rng);
    std::vector<Metrics> per_method(spec.methods.size());
    for (std::size_t mi = 0; mi < spec.methods.size(); ++mi)
      per_method[mi] = run_method_on_data(spec.methods[mi], data, spec,
                                          2 * static_cast<std::uint64_t>(rep) + 1);
    return per_method;
  };

  unsigned workers = spec.threads > 0 ? static_cast<unsigned>(spec.threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(spec.repetitions));
  std::vector<std::future<std::vector<Metrics>>> futures(spec.repetitions);
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::promise<std::vector<Metrics>>> promises(spec.repetitions);
  for (int r = 0; r < spec.repetitions; ++r) futures[r] = promises[r].get_future();
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= spec.repetitions) return;
        try {
          promises[r].set_value(run_rep(r));
        } catch (...) {
          promises[r].set_exception(std::current_exception());
        }
      }
    });
  }
  for (auto& t : pool) t.join();

  for (int r = 0; r < spec.repetitions; ++r) {
    const auto per_method = futures[r].get();
    for (std::size_t mi = 0; mi < spec.methods.size(); ++mi)
      out.rep_metrics[mi][static_cast<std::size_t>(r)] = per_method[mi];
  }

  out.mean_metrics.resize(spec.methods.size());
  for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
    Metrics acc;
    for (const auto& m : out.rep_metrics[mi]) {
      acc.mse += m.mse;
      acc.brier += m.brier;
      acc.auc += m.auc;
      acc.coverage += m.coverage;
      acc.length += m.length;
    }
    const double k = static_cast<double>(spec.repetitions);
    acc.mse /= k;
    acc.brier /= k;
    acc.auc /= k;
    acc.coverage /= k;
    acc.length /= k;
    out.mean_metrics[mi] = acc;
  }
  return out;
}

std::string ReplicationResult::table() const {
  std::ostringstream os;
  os << "dgp\tmethod\t" << (causal ? "pehe" : "mse") << "\tbrier\tauc\tcoverage\tlength\n";
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const Metrics& m = mean_metrics[mi];
    os << dgp_name << '\t' << methods[mi] << '\t' << m.mse << '\t' << m.brier << '\t' << m.auc
       << '\t' << m.coverage << '\t' << m.length << '\n';
  }
  return os.str();
}

}  // namespace tobart
