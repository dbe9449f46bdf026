#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tobart/data.hpp"
#include "tobart/predict.hpp"

namespace tobart {

struct IngestedData {
  Dataset data;
  std::vector<int> treatment;  // empty unless a treatment column was named
};

// Reads a header-rowed CSV: numeric columns pass through, string columns are
// one-hot encoded with lexicographically ordered categories. Outcomes equal
// to a bound are flagged censored; values outside [a,b] or missing cells are
// input errors that name the offending row/column.
IngestedData ingest_csv(const std::string& path, const std::string& outcome_column,
                        const std::optional<std::string>& treatment_column,
                        const CensoringBounds& bounds);

// Raw parsed CSV (header plus string cells), exposed for the simulate writer
// and tests.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

void write_prediction_records(const std::string& path,
                              const std::vector<PredictionRecord>& records);

// One row per (retained draw, test row): draw index, row id, f, and the
// error-state summary for that draw.
void write_draws_csv(const std::string& path, const PosteriorDraws& draws);

}  // namespace tobart
