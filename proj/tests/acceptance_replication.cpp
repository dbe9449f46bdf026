// Acceptance suite, replication half: desk-scale reruns of the benchmark
// experiments (500/500 rows, 5 seeds; causal designs 200 rows). Expect
// roughly half an hour on two cores.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <string>

#include "tobart/dgp.hpp"

using namespace tobart;

namespace {

constexpr std::uint64_t kSeed = 20240801;
constexpr int kReps = 5;

void report(int criterion, const char* label, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, label,
              detail.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(pass, "criterion ", criterion, ": ", label, " -- ", detail);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

ReplicationResult run(const std::string& dgp, std::vector<std::string> methods,
                      ErrorKind error = ErrorKind::kNormal) {
  ExperimentSpec spec;
  spec.dgp = make_dgp_spec(dgp);
  spec.dgp.error = error;
  spec.methods = std::move(methods);
  spec.repetitions = kReps;
  spec.seed = kSeed;
  return replicate(spec);
}

int count_wins(const ReplicationResult& res, std::size_t a, std::size_t b) {
  int wins = 0;
  for (int r = 0; r < kReps; ++r)
    if (res.rep_metrics[a][static_cast<std::size_t>(r)].mse <
        res.rep_metrics[b][static_cast<std::size_t>(r)].mse)
      ++wins;
  return wins;
}

}  // namespace

TEST_CASE("criteria 6, 7, 12: censored Friedman benchmark") {
  const auto res = run("friedman", {"tobart", "bart-naive", "soft-tobart"});
  const double tobart_mse = res.mean_metrics[0].mse;
  const int beats_naive = count_wins(res, 0, 1);
  const int soft_beats_hard = count_wins(res, 2, 0);

  report(6, "TOBART MSE within the band", tobart_mse <= 1.6,
         fmt("mean MSE %.3f (gate 1.6; paper 1.162)", tobart_mse));
  report(6, "TOBART beats naive BART per seed", beats_naive >= 4,
         fmt("%.0f of 5 seeds (naive mean %.3f)", beats_naive, res.mean_metrics[1].mse));
  report(6, "Soft TOBART beats TOBART per seed", soft_beats_hard >= 3,
         fmt("%.0f of 5 seeds (soft mean %.3f)", soft_beats_hard, res.mean_metrics[2].mse));

  const double brier = res.mean_metrics[0].brier;
  report(7, "TOBART Brier score", brier <= 0.10, fmt("mean Brier %.4f (gate 0.10; paper 0.069)", brier));

  const double coverage = res.mean_metrics[0].coverage;
  report(12, "latent 95% interval coverage in the nominal band",
         coverage >= 0.90 && coverage <= 0.99, fmt("mean coverage %.4f (band [0.90, 0.99])", coverage));
}

TEST_CASE("criterion 8: Groot benchmark") {
  const auto res = run("groot", {"tobart", "linear-tobit"});
  const double tobart_mse = res.mean_metrics[0].mse;
  const double tobit_mse = res.mean_metrics[1].mse;
  report(8, "TOBART MSE within the band", tobart_mse <= 1.0,
         fmt("mean MSE %.3f (gate 1.0; paper 0.631)", tobart_mse));
  report(8, "TOBART at least 5x better than linear Tobit", tobit_mse >= 5.0 * tobart_mse,
         fmt("linear Tobit %.2f vs TOBART %.3f (ratio %.1f)", tobit_mse, tobart_mse,
             tobit_mse / tobart_mse));
}

TEST_CASE("criterion 9: linear Jacobson benchmark") {
  const auto res = run("jacobson", {"tobart", "linear-tobit"});
  const double tobart_mse = res.mean_metrics[0].mse;
  const double tobit_mse = res.mean_metrics[1].mse;
  report(9, "TOBART within 15% of linear Tobit on the linear design",
         tobart_mse <= 1.15 * tobit_mse,
         fmt("TOBART %.3f vs linear Tobit %.3f (ratio %.3f, gate 1.15)", tobart_mse, tobit_mse,
             tobart_mse / tobit_mse));
}

TEST_CASE("criterion 10: Weibull errors favor the DP mixture") {
  const auto res = run("friedman", {"tobart-np", "tobart"}, ErrorKind::kWeibull);
  const int np_wins = count_wins(res, 0, 1);
  report(10, "TOBART-NP beats TOBART under Weibull errors per seed", np_wins >= 3,
         fmt("%.0f of 5 seeds (np %.3f vs normal %.3f)", np_wins, res.mean_metrics[0].mse,
             res.mean_metrics[1].mse));
}

TEST_CASE("criterion 11: causal benchmarks") {
  {
    const auto res = run("nie-C", {"tobart"});
    const double pehe = res.mean_metrics[0].mse;
    const double coverage = res.mean_metrics[0].coverage;
    report(11, "Nie C PEHE within the band", pehe <= 0.10,
           fmt("mean PEHE %.4f (gate 0.10; paper 0.032)", pehe));
    report(11, "Nie C 95% CATE interval coverage", coverage >= 0.85,
           fmt("mean coverage %.4f (gate 0.85; paper 0.994)", coverage));
  }
  {
    const auto res = run("caron", {"tobart", "bart-naive"});
    const int wins = count_wins(res, 0, 1);
    report(11, "Caron: TOBART beats the naive fit per seed", wins >= 4,
           fmt("%.0f of 5 seeds (tobart %.3f vs naive %.3f)", wins, res.mean_metrics[0].mse,
               res.mean_metrics[1].mse));
  }
}
