#include "genq/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace genq {

namespace {

std::string fmt(const char* pattern, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, pattern, value);
  return buffer;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

// column-aligned text plus a CSV with the same cells
TableRender render_grid(const std::vector<std::vector<std::string>>& rows) {
  TableRender render;
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) {
        render.csv += ',';
        line += "  ";
      }
      line += row[c];
      if (c + 1 < row.size()) line.append(widths[c] - row[c].size(), ' ');
      render.csv += csv_field(row[c]);
    }
    render.text += line;
    render.text += '\n';
    render.csv += '\n';
  }
  return render;
}

}  // namespace

std::string significance_stars(double p) {
  if (p < 0.0001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return ".";
  return "";
}

TableRender report_table(const std::vector<GroupStats>& rows, TableLayout layout) {
  if (layout != TableLayout::table3 || rows.empty()) throw LayoutMismatch();
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"Group", "N", "Mean (SD)"});
  for (const auto& row : rows) {
    std::string spread = row.n_lt_2 ? "NA" : fmt("%.2f", row.sd);
    grid.push_back({row.group.label(), std::to_string(row.n),
                    fmt("%.2f", row.mean) + " (" + spread + ")"});
  }
  return render_grid(grid);
}

TableRender report_table(const std::vector<RegressionTableEntry>& models, TableLayout layout) {
  if (layout != TableLayout::table4 || models.empty()) throw LayoutMismatch();
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"Model", "Term", "Coefficient Estimate", "Coefficient Std. Error", "Z-value",
                  "AIC", "2xloglikelihood", "p-val", ""});
  for (const auto& [label, result] : models) {
    double expected_aic =
        -2.0 * result.log_likelihood + 2.0 * (result.coefficients.size() + 1.0);
    if (std::abs(result.aic - expected_aic) > 1e-6)
      throw Error("regression result violates the AIC identity");
    for (std::size_t i = 0; i < result.terms.size(); ++i) {
      grid.push_back({i == 0 ? label : "", result.terms[i],
                      fmt("%.5f", result.coefficients[i]),
                      fmt("%.5f", result.standard_errors[i]), fmt("%.3f", result.z[i]),
                      i == 0 ? fmt("%.3f", result.aic) : "",
                      i == 0 ? fmt("%.3f", 2.0 * result.log_likelihood) : "",
                      fmt("%.6g", result.p[i]), significance_stars(result.p[i])});
    }
  }
  return render_grid(grid);
}

TableRender report_table(const std::vector<std::pair<std::string, RankSumResult>>& rows,
                         TableLayout layout) {
  if (layout != TableLayout::table5 || rows.empty()) throw LayoutMismatch();
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"Comparison", "W-value", "p-value", ""});
  for (const auto& [label, result] : rows)
    grid.push_back({label, fmt("%.4g", result.w), fmt("%.6g", result.p),
                    significance_stars(result.p)});
  return render_grid(grid);
}

TableRender report_table(const std::vector<LengthStats>& rows, TableLayout layout) {
  if (layout != TableLayout::table6 || rows.empty()) throw LayoutMismatch();
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"Group", "Questions", "Mean length"});
  for (const auto& row : rows)
    grid.push_back({row.group.label(), std::to_string(row.n_questions),
                    row.mean_length ? fmt("%.2f", *row.mean_length) : "NA"});
  return render_grid(grid);
}

TableRender report_table(const RankedTemplates& ranked, TableLayout layout) {
  if (layout != TableLayout::table8 || ranked.proportions.empty()) throw LayoutMismatch();
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"Demographic", "Count", "Percent"});
  for (const auto& share : ranked.proportions)
    grid.push_back({share.group, std::to_string(share.count), fmt("%.1f", share.percent)});
  return render_grid(grid);
}

}  // namespace genq
