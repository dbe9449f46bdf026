#include "tobart/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tobart {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cell);
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  for (auto& s : out) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && s[i] == ' ') ++i;
    s.erase(0, i);
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "NULL";
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": missing header row");
  table.header = split_line(line);
  if (table.header.empty() || (table.header.size() == 1 && table.header[0].empty()))
    throw std::invalid_argument(path + ": missing header row");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != table.header.size())
      throw std::invalid_argument(path + ": row " + std::to_string(lineno) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV file: " + path);
  const auto write_row = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  };
  write_row(table.header);
  for (const auto& row : table.rows) write_row(row);
}

IngestedData ingest_csv(const std::string& path, const std::string& outcome_column,
                        const std::optional<std::string>& treatment_column,
                        const CensoringBounds& bounds) {
  if (!bounds.valid()) throw std::invalid_argument("ingest_csv: invalid censoring bounds");
  const CsvTable table = read_csv(path);
  const auto col_index = [&](const std::string& name) {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end())
      throw std::invalid_argument(path + ": no column named '" + name + "'");
    return static_cast<std::size_t>(it - table.header.begin());
  };
  const std::size_t y_col = col_index(outcome_column);
  std::optional<std::size_t> t_col;
  if (treatment_column) t_col = col_index(*treatment_column);

  const std::size_t n = table.rows.size();
  if (n == 0) throw std::invalid_argument(path + ": no data rows");

  // classify covariate columns: numeric iff every cell parses
  std::vector<std::size_t> covariate_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c)
    if (c != y_col && (!t_col || c != *t_col)) covariate_cols.push_back(c);

  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < table.header.size(); ++c)
      if (is_missing(table.rows[r][c]))
        throw std::invalid_argument(path + ": missing value at row " + std::to_string(r + 2) +
                                    ", column '" + table.header[c] + "'");

  std::vector<bool> numeric(table.header.size(), true);
  for (std::size_t c : covariate_cols) {
    for (std::size_t r = 0; r < n; ++r) {
      double v;
      if (!parse_double(table.rows[r][c], v)) {
        numeric[c] = false;
        break;
      }
    }
  }

  // expanded column layout
  std::vector<std::string> out_names;
  std::vector<std::pair<std::size_t, std::string>> dummy_of;  // source col, category ("" numeric)
  for (std::size_t c : covariate_cols) {
    if (numeric[c]) {
      out_names.push_back(table.header[c]);
      dummy_of.emplace_back(c, "");
    } else {
      std::set<std::string> cats;
      for (std::size_t r = 0; r < n; ++r) cats.insert(table.rows[r][c]);
      for (const auto& cat : cats) {
        out_names.push_back(table.header[c] + "=" + cat);
        dummy_of.emplace_back(c, cat);
      }
    }
  }

  IngestedData out;
  out.data.bounds = bounds;
  out.data.columns = out_names;
  out.data.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out_names.size()));
  out.data.y.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < dummy_of.size(); ++j) {
      const auto& [c, cat] = dummy_of[j];
      if (cat.empty()) {
        double v;
        parse_double(table.rows[r][c], v);
        out.data.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v;
      } else {
        out.data.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
            table.rows[r][c] == cat ? 1.0 : 0.0;
      }
    }
    double yv;
    if (!parse_double(table.rows[r][y_col], yv))
      throw std::invalid_argument(path + ": nonnumeric outcome at row " + std::to_string(r + 2) +
                                  ", column '" + outcome_column + "'");
    if (yv < bounds.a || yv > bounds.b)
      throw std::invalid_argument(path + ": outcome outside censoring bounds at row " +
                                  std::to_string(r + 2) +
                                  " (impossible under Type-I censoring)");
    out.data.y[r] = classify(yv, bounds);
    if (t_col) {
      double tv;
      if (!parse_double(table.rows[r][*t_col], tv) || (tv != 0.0 && tv != 1.0))
        throw std::invalid_argument(path + ": treatment must be 0/1 at row " +
                                    std::to_string(r + 2));
      out.treatment.push_back(static_cast<int>(tv));
    }
  }
  return out;
}

void write_prediction_records(const std::string& path,
                              const std::vector<PredictionRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "row,latent_mean,outcome_mean,p_below,p_above,latent_lower,latent_upper,"
         "outcome_lower,outcome_upper,level\n";
  for (const auto& r : records)
    out << r.row << ',' << r.latent_mean << ',' << r.outcome_mean << ',' << r.p_below << ','
        << r.p_above << ',' << r.latent_lower << ',' << r.latent_upper << ',' << r.outcome_lower
        << ',' << r.outcome_upper << ',' << r.level << '\n';
}

void write_draws_csv(const std::string& path, const PosteriorDraws& draws) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  const bool dp = draws.error_model == ErrorModel::kDp;
  out << "draw,row,f," << (dp ? "gamma,sigma,clusters,alpha_dp\n" : "sigma\n");
  for (std::size_t d = 0; d < draws.size(); ++d) {
    const auto& f = draws.f_test[d];
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      out << d << ',' << i << ',' << f[i] << ',';
      if (dp) {
        const auto& pr = draws.oos_test[d][static_cast<std::size_t>(i)];
        out << pr.first << ',' << pr.second << ',' << draws.dp_diag[d].cluster_count << ','
            << draws.dp_diag[d].alpha_dp << '\n';
      } else {
        out << draws.sigma[d] << '\n';
      }
    }
  }
}

}  // namespace tobart
