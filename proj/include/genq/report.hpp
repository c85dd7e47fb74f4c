#pragma once

#include <string>
#include <utility>
#include <vector>

#include "genq/corpus.hpp"
#include "genq/error.hpp"
#include "genq/stats.hpp"
#include "genq/templates.hpp"

namespace genq {

/// The table shapes the report command emits: descriptive group counts
/// (table3), regression fits (table4), rank-sum tests (table5), question
/// lengths (table6), and demographic template shares (table8).
enum class TableLayout { table3, table4, table5, table6, table8 };

struct LayoutMismatch : Error {
  LayoutMismatch() : Error("results do not fit the requested table layout") {}
};

/// Both renderings of one table.
struct TableRender {
  std::string text;
  std::string csv;
};

/// Caption convention: *** < 0.0001, ** < 0.01, * < 0.05, . < 0.1.
std::string significance_stars(double p);

/// One fitted model in a regression table; the label names the outcome/model.
struct RegressionTableEntry {
  std::string label;
  RegressionResult result;
};

TableRender report_table(const std::vector<GroupStats>& rows, TableLayout layout);
TableRender report_table(const std::vector<RegressionTableEntry>& models, TableLayout layout);
TableRender report_table(const std::vector<std::pair<std::string, RankSumResult>>& rows,
                         TableLayout layout);
TableRender report_table(const std::vector<LengthStats>& rows, TableLayout layout);
TableRender report_table(const RankedTemplates& ranked, TableLayout layout);

}  // namespace genq
