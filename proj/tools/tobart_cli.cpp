// Command-line front end: fit/predict on CSVs, simulate benchmark data,
// run replication experiments.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "tobart/causal.hpp"
#include "tobart/chain.hpp"
#include "tobart/csv.hpp"
#include "tobart/dgp.hpp"
#include "tobart/predict.hpp"
#include "tobart/serialize.hpp"

namespace fs = std::filesystem;
using namespace tobart;

namespace {

constexpr const char* kVersion = "tobart 1.0.0";

double parse_bound(const std::string& text, double fallback) {
  if (text.empty()) return fallback;
  if (text == "-inf" || text == "-Inf") return -kInf;
  if (text == "inf" || text == "Inf" || text == "+inf") return kInf;
  return std::stod(text);
}

struct CommonOpts {
  std::string data_path;
  std::string outcome;
  std::string treatment;
  std::string lower = "-inf";
  std::string upper = "inf";
  std::string mode = "hard";
  std::string error_model = "normal";
  std::string calib = "";
  int trees = 0;
  int burnin = 1000;
  int draws = 1000;
  int thin = 1;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  double level = 0.95;
};

ChainConfig chain_config(const CommonOpts& o) {
  ChainConfig cfg;
  cfg.burn_in = o.burnin;
  cfg.draws = o.draws;
  cfg.thin = o.thin;
  cfg.m = o.trees;
  cfg.seed = o.seed;
  if (o.mode == "hard")
    cfg.mode = TreeMode::kHard;
  else if (o.mode == "soft")
    cfg.mode = TreeMode::kSoft;
  else
    throw CLI::ValidationError("--mode", "must be hard or soft");
  if (o.error_model == "normal")
    cfg.error_model = ErrorModel::kHomoskedastic;
  else if (o.error_model == "dp")
    cfg.error_model = ErrorModel::kDp;
  else
    throw CLI::ValidationError("--error", "must be normal or dp");
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_data) {
  if (needs_data) {
    cmd->add_option("--data", o.data_path, "input CSV path")->required();
    cmd->add_option("--outcome", o.outcome, "outcome column name")->required();
    cmd->add_option("--treatment", o.treatment, "binary treatment column (optional)");
    cmd->add_option("--lower", o.lower, "lower censoring limit a (or -inf)");
    cmd->add_option("--upper", o.upper, "upper censoring limit b (or inf)");
  }
  cmd->add_option("--mode", o.mode, "tree mode: hard|soft");
  cmd->add_option("--error", o.error_model, "error model: normal|dp");
  cmd->add_option("--trees", o.trees, "tree count (0 = default for the mode)");
  cmd->add_option("--burnin", o.burnin, "burn-in iterations");
  cmd->add_option("--draws", o.draws, "retained iterations");
  cmd->add_option("--thin", o.thin, "thinning interval");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--calib", o.calib, "sigma-hat method: naive|tobit|cens|lm");
  cmd->add_option("--out", o.out_dir, "output directory");
}

void write_manifest(const fs::path& path, const std::string& command, const CommonOpts& o,
                    const ChainConfig& cfg, const std::string& extra) {
  std::ofstream out(path);
  out << "version=" << kVersion << "\n"
      << "command=" << command << "\n"
      << "data=" << o.data_path << "\n"
      << "outcome=" << o.outcome << "\n"
      << "treatment=" << o.treatment << "\n"
      << "lower=" << o.lower << "\n"
      << "upper=" << o.upper << "\n"
      << "mode=" << o.mode << "\n"
      << "error=" << o.error_model << "\n"
      << "trees=" << cfg.tree_count() << "\n"
      << "burnin=" << cfg.burn_in << "\n"
      << "draws=" << cfg.draws << "\n"
      << "thin=" << cfg.thin << "\n"
      << "seed=" << cfg.seed << "\n"
      << extra;
}

int run_fit(const CommonOpts& o, const std::string& test_path) {
  const CensoringBounds bounds{parse_bound(o.lower, -kInf), parse_bound(o.upper, kInf)};
  if (!bounds.valid()) throw CLI::ValidationError("--lower/--upper", "need lower < upper");
  const auto ingest = ingest_csv(o.data_path, o.outcome,
                                 o.treatment.empty() ? std::nullopt
                                                     : std::optional<std::string>(o.treatment),
                                 bounds);
  ChainConfig cfg = chain_config(o);
  cfg.keep_forests = true;

  auto cal_opts = default_calibration(cfg.error_model == ErrorModel::kDp);
  if (!o.calib.empty()) cal_opts.method = parse_sigma_hat_method(o.calib);
  const auto calib = calibrate(ingest.data, cal_opts);

  Eigen::MatrixXd test_x(0, ingest.data.p());
  if (!test_path.empty()) {
    const auto test =
        ingest_csv(test_path, o.outcome,
                   o.treatment.empty() ? std::nullopt : std::optional<std::string>(o.treatment),
                   bounds);
    if (test.data.p() != ingest.data.p())
      throw std::invalid_argument("test covariates do not match the training columns");
    test_x = test.data.x;
  } else {
    test_x = ingest.data.x;
  }

  const auto draws = run_chain(ingest.data, cfg, calib, test_x);

  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  save_model(draws, (dir / "model.json").string());
  write_draws_csv((dir / "draws.csv").string(), draws);
  {
    std::ofstream rep(dir / "calibration.txt");
    rep << calib.report();
  }
  RngStream pred_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL, cfg.stream_id);
  const auto records = posterior_predict(draws, bounds, o.level, pred_rng);
  write_prediction_records((dir / "predictions.csv").string(), records);
  write_manifest(dir / "manifest.txt", "fit", o, cfg,
                 "test=" + (test_path.empty() ? std::string("(train)") : test_path) + "\n" +
                     calib.report());
  std::cout << "fit complete: " << draws.size() << " retained draws -> " << o.out_dir << "\n";
  return 0;
}

int run_predict(const std::string& model_path, const CommonOpts& o) {
  const auto model = load_model(model_path);
  const auto ingest = ingest_csv(o.data_path, o.outcome,
                                 o.treatment.empty() ? std::nullopt
                                                     : std::optional<std::string>(o.treatment),
                                 CensoringBounds{});
  RngStream rng(o.seed, 0);
  const auto draws = predict_draws_from_model(model, ingest.data.x, rng);
  RngStream pred_rng(o.seed ^ 0x9e3779b97f4a7c15ULL, 0);
  const auto records = posterior_predict(draws, model.bounds, o.level, pred_rng);
  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  write_prediction_records((dir / "predictions.csv").string(), records);
  std::ofstream man(dir / "manifest.txt");
  man << "version=" << kVersion << "\ncommand=predict\nmodel=" << model_path
      << "\ndata=" << o.data_path << "\nseed=" << o.seed << "\nlevel=" << o.level << "\n";
  std::cout << "predictions written for " << records.size() << " rows -> " << o.out_dir << "\n";
  return 0;
}

int run_simulate(const std::string& dgp_name, int n_train, int n_test, const std::string& error,
                 double sigma, std::uint64_t seed, const std::string& out_dir) {
  DgpSpec spec = make_dgp_spec(dgp_name);
  if (n_train > 0) spec.n_train = n_train;
  if (n_test > 0) spec.n_test = n_test;
  if (!error.empty()) spec.error = parse_error_kind(error);
  spec.error_params.sigma = sigma;
  RngStream rng(seed, 0);
  const auto data = generate(spec, rng);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const auto dump = [&](const Dataset& d, const Eigen::VectorXd& y_star,
                        const std::vector<int>& t, const Eigen::VectorXd& tau,
                        const std::string& name) {
    CsvTable table;
    for (Eigen::Index j = 0; j < d.p(); ++j) table.header.push_back("x" + std::to_string(j + 1));
    table.header.push_back("y");
    table.header.push_back("y_star");
    table.header.push_back("censored");
    if (!t.empty()) {
      table.header.push_back("t");
      table.header.push_back("tau");
    }
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      std::vector<std::string> row;
      std::ostringstream cell;
      cell.precision(17);
      for (Eigen::Index j = 0; j < d.p(); ++j) {
        cell.str("");
        cell << d.x(i, j);
        row.push_back(cell.str());
      }
      cell.str("");
      cell << d.y[static_cast<std::size_t>(i)].y;
      row.push_back(cell.str());
      cell.str("");
      cell << y_star[i];
      row.push_back(cell.str());
      row.push_back(d.y[static_cast<std::size_t>(i)].status == CensorStatus::kInterior ? "0"
                                                                                       : "1");
      if (!t.empty()) {
        row.push_back(std::to_string(t[static_cast<std::size_t>(i)]));
        cell.str("");
        cell << tau[i];
        row.push_back(cell.str());
      }
      table.rows.push_back(std::move(row));
    }
    write_csv((dir / name).string(), table);
  };
  dump(data.train, data.y_star_train, data.t_train, data.tau_train, "train.csv");
  dump(data.test, data.y_star_test, data.t_test, data.tau_test, "test.csv");
  std::ofstream man(dir / "manifest.txt");
  man.precision(17);
  man << "version=" << kVersion << "\ncommand=simulate\ndgp=" << dgp_name
      << "\nn_train=" << spec.n_train << "\nn_test=" << spec.n_test << "\nerror="
      << error_kind_name(spec.error) << "\nsigma=" << sigma << "\nseed=" << seed
      << "\nlower_bound=" << data.train.bounds.a << "\nupper_bound=" << data.train.bounds.b
      << "\n";
  std::cout << "simulated " << dgp_name << ": " << spec.n_train << "+" << spec.n_test
            << " rows -> " << out_dir << "\n";
  return 0;
}

int run_replicate(const std::string& dgp_name, const std::string& methods_csv, int reps,
                  const std::string& error, double sigma, int burnin, int draws,
                  std::uint64_t seed, int threads, const std::string& out_dir) {
  ExperimentSpec spec;
  spec.dgp = make_dgp_spec(dgp_name);
  if (!error.empty()) spec.dgp.error = parse_error_kind(error);
  spec.dgp.error_params.sigma = sigma;
  std::stringstream ss(methods_csv);
  std::string method;
  while (std::getline(ss, method, ',')) {
    if (!method.empty()) spec.methods.push_back(method);
  }
  spec.repetitions = reps;
  spec.burn_in = burnin;
  spec.draws = draws;
  spec.seed = seed;
  spec.threads = threads;
  const auto result = replicate(spec);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  {
    std::ofstream out(dir / "results.tsv");
    out << result.table();
  }
  {
    std::ofstream out(dir / "results_per_rep.tsv");
    out << "dgp\tmethod\trep\t" << (result.causal ? "pehe" : "mse")
        << "\tbrier\tauc\tcoverage\tlength\n";
    for (std::size_t mi = 0; mi < result.methods.size(); ++mi)
      for (std::size_t r = 0; r < result.rep_metrics[mi].size(); ++r) {
        const auto& m = result.rep_metrics[mi][r];
        out << result.dgp_name << '\t' << result.methods[mi] << '\t' << r << '\t' << m.mse
            << '\t' << m.brier << '\t' << m.auc << '\t' << m.coverage << '\t' << m.length
            << '\n';
      }
  }
  std::ofstream man(dir / "manifest.txt");
  man << "version=" << kVersion << "\ncommand=replicate\ndgp=" << dgp_name
      << "\nmethods=" << methods_csv << "\nreps=" << reps << "\nerror="
      << (error.empty() ? "normal" : error) << "\nsigma=" << sigma << "\nburnin=" << burnin
      << "\ndraws=" << draws << "\nseed=" << seed << "\n";
  std::cout << result.table();
  return 0;
}

// Expand `--config file` into the equivalent flags. File entries are flat
// key=value lines; a key the user already passed on the command line is
// skipped, so explicit flags win. Unknown keys surface as unknown flags.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::size_t cfg_at = 0;
  for (std::size_t i = 1; i + 1 < args.size(); ++i)
    if (args[i] == "--config") cfg_at = i;
  if (cfg_at == 0) return args;

  const std::string path = args[cfg_at + 1];
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::vector<std::string> injected;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config file: malformed line '" + line + "'");
    const std::string key = "--" + line.substr(0, eq);
    if (std::find(args.begin(), args.end(), key) != args.end()) continue;
    injected.push_back(key);
    injected.push_back(line.substr(eq + 1));
  }
  std::vector<std::string> out(args.begin(), args.begin() + cfg_at);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + cfg_at + 2, args.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Censored-outcome regression with Bayesian additive regression trees"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonOpts fit_opts;
  std::string fit_test_path;
  auto* fit = app.add_subcommand("fit", "fit a censored-outcome model to a CSV");
  add_common(fit, fit_opts, true);
  fit->add_option("--test", fit_test_path, "optional CSV of rows to predict");
  fit->add_option("--level", fit_opts.level, "credible level for intervals");

  CommonOpts pred_opts;
  std::string model_path;
  auto* pred = app.add_subcommand("predict", "predict from a saved model dump");
  pred->add_option("--model", model_path, "model.json from a fit run")->required();
  pred->add_option("--data", pred_opts.data_path, "CSV of covariate rows")->required();
  pred->add_option("--outcome", pred_opts.outcome, "outcome column to ignore if present");
  pred->add_option("--treatment", pred_opts.treatment, "treatment column (optional)");
  pred->add_option("--seed", pred_opts.seed, "RNG seed for predictive simulation");
  pred->add_option("--level", pred_opts.level, "credible level for intervals");
  pred->add_option("--out", pred_opts.out_dir, "output directory");

  std::string sim_dgp = "friedman", sim_error, sim_out = ".";
  int sim_ntrain = 0, sim_ntest = 0;
  double sim_sigma = 1.0;
  std::uint64_t sim_seed = 1;
  auto* sim = app.add_subcommand("simulate", "generate a benchmark dataset");
  sim->add_option("--dgp", sim_dgp,
                  "friedman|friedman-1side|groot|sigrist|jacobson|caron|friedberg|nie-A..D");
  sim->add_option("--n-train", sim_ntrain, "training rows (0 = preset)");
  sim->add_option("--n-test", sim_ntest, "test rows (0 = preset)");
  sim->add_option("--error", sim_error, "error kind: normal|skew-t|weibull|t");
  sim->add_option("--sigma", sim_sigma, "normal error sd");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--out", sim_out, "output directory");

  std::string rep_dgp = "friedman", rep_methods = "tobart", rep_error, rep_out = ".";
  int rep_reps = 5, rep_burnin = 1000, rep_draws = 1000, rep_threads = 0;
  double rep_sigma = 1.0;
  std::uint64_t rep_seed = 1;
  auto* rep = app.add_subcommand("replicate", "run a seeded replication experiment");
  rep->add_option("--dgp", rep_dgp, "generator name");
  rep->add_option(
      "--methods", rep_methods,
      "comma list: tobart,tobart-np,soft-tobart,soft-tobart-np,bart-naive,linear-tobit");
  rep->add_option("--reps", rep_reps, "number of repetitions");
  rep->add_option("--error", rep_error, "error kind");
  rep->add_option("--sigma", rep_sigma, "normal error sd");
  rep->add_option("--burnin", rep_burnin, "burn-in iterations");
  rep->add_option("--draws", rep_draws, "retained iterations");
  rep->add_option("--seed", rep_seed, "base seed");
  rep->add_option("--threads", rep_threads, "parallel repetitions (0 = auto)");
  rep->add_option("--out", rep_out, "output directory");

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::vector<char*> argv2;
  for (auto& a : args) argv2.push_back(a.data());
  CLI11_PARSE(app, static_cast<int>(argv2.size()), argv2.data());

  try {
    if (fit->parsed()) return run_fit(fit_opts, fit_test_path);
    if (pred->parsed()) return run_predict(model_path, pred_opts);
    if (sim->parsed())
      return run_simulate(sim_dgp, sim_ntrain, sim_ntest, sim_error, sim_sigma, sim_seed,
                          sim_out);
    if (rep->parsed())
      return run_replicate(rep_dgp, rep_methods, rep_reps, rep_error, rep_sigma, rep_burnin,
                           rep_draws, rep_seed, rep_threads, rep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
