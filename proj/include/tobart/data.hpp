#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "tobart/stats.hpp"

namespace tobart {

// Type-I censoring limits: y = a when y* <= a, y = b when y* >= b.
struct CensoringBounds {
  double a = -kInf;
  double b = kInf;

  bool valid() const { return a < b; }
  bool censors() const { return std::isfinite(a) || std::isfinite(b); }

  double censor(double y_star) const {
    if (y_star <= a) return a;
    if (y_star >= b) return b;
    return y_star;
  }
};

enum class CensorStatus { kAtLower, kInterior, kAtUpper };

struct ObservedOutcome {
  double y = 0.0;
  CensorStatus status = CensorStatus::kInterior;
};

inline ObservedOutcome observe(double y_star, const CensoringBounds& bounds) {
  if (y_star <= bounds.a) return {bounds.a, CensorStatus::kAtLower};
  if (y_star >= bounds.b) return {bounds.b, CensorStatus::kAtUpper};
  return {y_star, CensorStatus::kInterior};
}

// Classify an already-censored value against known bounds.
inline ObservedOutcome classify(double y, const CensoringBounds& bounds) {
  if (y < bounds.a || y > bounds.b)
    throw std::invalid_argument("outcome outside censoring bounds");
  if (y == bounds.a) return {y, CensorStatus::kAtLower};
  if (y == bounds.b) return {y, CensorStatus::kAtUpper};
  return {y, CensorStatus::kInterior};
}

struct Dataset {
  Eigen::MatrixXd x;                  // n rows, p covariates
  std::vector<ObservedOutcome> y;     // censored outcomes
  CensoringBounds bounds;
  std::vector<std::string> columns;   // covariate names (may be empty)

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }

  std::vector<double> observed_values() const {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i].y;
    return out;
  }
  std::size_t count(CensorStatus s) const {
    std::size_t c = 0;
    for (const auto& o : y)
      if (o.status == s) ++c;
    return c;
  }
};

}  // namespace tobart
