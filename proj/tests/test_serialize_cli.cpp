#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "tobart/chain.hpp"
#include "tobart/csv.hpp"
#include "tobart/dgp.hpp"
#include "tobart/predict.hpp"
#include "tobart/serialize.hpp"

using namespace tobart;
namespace fs = std::filesystem;

#ifndef TOBART_CLI_PATH
#define TOBART_CLI_PATH "./tobart"
#endif

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TOBART_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Dataset small_data(int n, std::uint64_t seed) {
  RngStream rng(seed);
  Dataset d;
  d.bounds = {0.0, kInf};
  d.x.resize(n, 3);
  d.y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) d.x(i, j) = rng.uniform();
    d.y[static_cast<std::size_t>(i)] = observe(2.0 * d.x(i, 0) + 0.5 * rng.normal(), d.bounds);
  }
  return d;
}

}  // namespace

TEST_CASE("forest serialization round-trips bit-identically") {
  const Dataset data = small_data(80, 1);
  ChainConfig cfg;
  cfg.burn_in = 40;
  cfg.draws = 1;
  cfg.m = 20;
  cfg.mode = TreeMode::kSoft;
  cfg.seed = 5;
  const auto calib = calibrate(data, default_calibration(false));
  TobitChain chain(data, cfg, calib);
  RngStream rng(5, 0);
  for (int it = 0; it < 40; ++it) chain.step(rng);

  const ForestState& forest = chain.forest();
  const std::string text = forest_to_json(forest);
  const ForestState loaded = forest_from_json(text);

  REQUIRE(loaded.trees.size() == forest.trees.size());
  CHECK(loaded.sigma_mu == forest.sigma_mu);
  CHECK(loaded.a_sparse == forest.a_sparse);
  RngStream probe(9);
  for (int rep = 0; rep < 300; ++rep) {
    Eigen::RowVectorXd x(3);
    for (int j = 0; j < 3; ++j) x[j] = probe.uniform() * 1.4 - 0.2;
    CHECK(forest.predict_row(x) == loaded.predict_row(x));
  }
  CHECK_THROWS(forest_from_json("{\"format\":\"other\"}"));
}

TEST_CASE("model dump reproduces posterior predictions exactly") {
  const Dataset data = small_data(60, 2);
  ChainConfig cfg;
  cfg.burn_in = 30;
  cfg.draws = 25;
  cfg.m = 15;
  cfg.seed = 7;
  cfg.keep_forests = true;
  cfg.error_model = ErrorModel::kDp;
  const auto calib = calibrate(data, default_calibration(true));
  Eigen::MatrixXd test_x = data.x.topRows(12);
  const auto draws = run_chain(data, cfg, calib, test_x);

  const std::string path = "/tmp/tobart_model_test.json";
  save_model(draws, path);
  const auto loaded = load_model(path);
  REQUIRE(loaded.forests.size() == draws.size());
  CHECK(loaded.bounds.a == draws.bounds.a);
  CHECK(loaded.center == draws.center);

  RngStream rng(11);
  const auto re = predict_draws_from_model(loaded, test_x, rng);
  REQUIRE(re.size() == draws.size());
  for (std::size_t d = 0; d < draws.size(); ++d)
    for (Eigen::Index i = 0; i < test_x.rows(); ++i)
      CHECK(re.f_test[d][i] == draws.f_test[d][i]);  // bit-identical evaluation
}

TEST_CASE("csv ingestion") {
  const std::string path = "/tmp/tobart_ingest_test.csv";
  {
    std::ofstream out(path);
    out << "y,grade,x1,t\n"
        << "0.0,b,0.25,1\n"
        << "1.5,a,0.75,0\n"
        << "2.5,b,0.10,1\n";
  }
  SUBCASE("one-hot encoding with deterministic order") {
    const auto got = ingest_csv(path, "y", std::optional<std::string>("t"),
                                CensoringBounds{0.0, kInf});
    REQUIRE(got.data.p() == 3);  // grade=a, grade=b, x1
    CHECK(got.data.columns[0] == "grade=a");
    CHECK(got.data.columns[1] == "grade=b");
    CHECK(got.data.columns[2] == "x1");
    CHECK(got.data.x(0, 1) == 1.0);
    CHECK(got.data.x(1, 0) == 1.0);
    CHECK(got.data.y[0].status == CensorStatus::kAtLower);
    CHECK(got.data.y[1].status == CensorStatus::kInterior);
    REQUIRE(got.treatment.size() == 3);
    CHECK(got.treatment[0] == 1);
    CHECK(got.treatment[1] == 0);
  }
  SUBCASE("outcome below the lower bound is rejected") {
    CHECK_THROWS_WITH_AS(ingest_csv(path, "y", std::nullopt, CensoringBounds{0.5, kInf}),
                         doctest::Contains("Type-I"), std::invalid_argument);
  }
  SUBCASE("missing cells are named") {
    const std::string bad = "/tmp/tobart_ingest_bad.csv";
    {
      std::ofstream out(bad);
      out << "y,x1\n1.0,0.5\n2.0,NA\n";
    }
    CHECK_THROWS_WITH_AS(ingest_csv(bad, "y", std::nullopt, CensoringBounds{}),
                         doctest::Contains("row 3"), std::invalid_argument);
  }
  SUBCASE("unknown outcome column") {
    CHECK_THROWS_AS(ingest_csv(path, "nope", std::nullopt, CensoringBounds{}),
                    std::invalid_argument);
  }
  SUBCASE("nonnumeric outcome") {
    const std::string bad = "/tmp/tobart_ingest_bad2.csv";
    {
      std::ofstream out(bad);
      out << "y,x1\nok,0.5\n";
    }
    CHECK_THROWS_AS(ingest_csv(bad, "y", std::nullopt, CensoringBounds{}),
                    std::invalid_argument);
  }
}

TEST_CASE("cli end to end") {
  const fs::path base = "/tmp/tobart_cli_test";
  fs::remove_all(base);
  fs::create_directories(base);

  SUBCASE("simulate then fit then predict round trip") {
    REQUIRE(run_cli("simulate --dgp jacobson --n-train 120 --n-test 40 --seed 4 --out " +
                    (base / "sim").string()) == 0);
    REQUIRE(fs::exists(base / "sim" / "train.csv"));
    REQUIRE(fs::exists(base / "sim" / "manifest.txt"));

    // bounds from the simulation manifest
    const std::string man = slurp(base / "sim" / "manifest.txt");
    const auto pos = man.find("lower_bound=");
    REQUIRE(pos != std::string::npos);
    const std::string lower = man.substr(pos + 12, man.find('\n', pos) - pos - 12);

    const std::string fit_args =
        "fit --data " + (base / "sim" / "train.csv").string() +
        " --outcome y --lower " + lower +
        " --trees 20 --burnin 40 --draws 30 --seed 9 --out " + (base / "fit").string();
    REQUIRE(run_cli(fit_args) == 0);
    REQUIRE(fs::exists(base / "fit" / "model.json"));
    REQUIRE(fs::exists(base / "fit" / "draws.csv"));
    REQUIRE(fs::exists(base / "fit" / "predictions.csv"));
    REQUIRE(fs::exists(base / "fit" / "calibration.txt"));
    REQUIRE(fs::exists(base / "fit" / "manifest.txt"));

    REQUIRE(run_cli("predict --model " + (base / "fit" / "model.json").string() + " --data " +
                    (base / "sim" / "test.csv").string() + " --outcome y --seed 2 --out " +
                    (base / "pred").string()) == 0);
    REQUIRE(fs::exists(base / "pred" / "predictions.csv"));
    // finite outcome means on every row
    const auto table = read_csv((base / "pred" / "predictions.csv").string());
    CHECK(table.rows.size() == 40);

    // same seed twice: byte-identical draws
    REQUIRE(run_cli(fit_args + "2") == 0);
    CHECK(slurp(base / "fit" / "draws.csv") == slurp(base / "fit2" / "draws.csv"));
  }

  SUBCASE("missing required outcome flag fails") {
    CHECK(run_cli("fit --data /tmp/nonexistent.csv") != 0);
  }

  SUBCASE("config file values are overridden by flags and unknown keys rejected") {
    REQUIRE(run_cli("simulate --dgp jacobson --n-train 60 --n-test 10 --seed 5 --out " +
                    (base / "sim2").string()) == 0);
    const fs::path cfg = base / "fit.cfg";
    {
      std::ofstream out(cfg);
      out << "trees=30\ndraws=25\n";
    }
    const std::string args = "fit --config " + cfg.string() + " --data " +
                             (base / "sim2" / "train.csv").string() +
                             " --outcome y --lower -inf --trees 10 --burnin 10 --seed 3 --out " +
                             (base / "cfg_fit").string();
    REQUIRE(run_cli(args) == 0);
    const std::string man = slurp(base / "cfg_fit" / "manifest.txt");
    CHECK(man.find("trees=10") != std::string::npos);  // flag wins over the file
    CHECK(man.find("draws=25") != std::string::npos);  // file value survives

    { std::ofstream out(cfg, std::ios::app); out << "bogus_key=1\n"; }
    CHECK(run_cli(args) != 0);
  }
}
