#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spcg/data.hpp"
#include "spcg/models.hpp"

namespace spcg::eval {

enum class DaMethod { sp_cyclegan, default_cyclegan, no_da };

const char* da_method_name(DaMethod method);
DaMethod da_method_from_name(const std::string& name);

struct ClassStat {
  int class_id = 0;
  real_t mean = 0.0;
  real_t se = 0.0;  // standard error of the per-image mean
};

struct MetricsRecord {
  std::string direction;
  DaMethod method = DaMethod::no_da;
  int n = 0;  // test items
  std::vector<ClassStat> per_class;
  real_t overall_mean = 0.0;
  real_t overall_se = 0.0;
  std::vector<std::vector<real_t>> per_image_scores;  // [item][class column]
  std::vector<real_t> per_image_overall;
};

/// Hard-predicts every test item (0.5 threshold binary, arg-max multi-class)
/// and reports per-class Dice mean and standard error over items. Binary
/// reports the foreground class; multi-class reports every class including
/// background, and the overall mean averages the per-class values.
MetricsRecord evaluate(const nn::Segmenter& segmenter, const data::Dataset& test_set,
                       const std::string& direction, DaMethod method);

struct ComparisonRow {
  MetricsRecord record;
  bool best_overall = false;
  std::vector<bool> best_per_class;
  bool statistically_even_with_best = false;
};

struct ComparisonReport {
  std::string direction;
  std::vector<ComparisonRow> rows;  // sorted by overall mean, best first
};

/// All records must share direction and test-set size.
ComparisonReport compare_methods(const std::vector<MetricsRecord>& records);

std::string format_metrics_text(const MetricsRecord& record);
std::string format_comparison_text(const ComparisonReport& report);

void write_metrics_json(const std::filesystem::path& path, const MetricsRecord& record);
MetricsRecord read_metrics_json(const std::filesystem::path& path);
void write_metrics_text(const std::filesystem::path& path, const MetricsRecord& record);
void write_per_image_csv(const std::filesystem::path& path, const MetricsRecord& record);
void write_comparison_json(const std::filesystem::path& path, const ComparisonReport& report);
void write_comparison_text(const std::filesystem::path& path, const ComparisonReport& report);

}  // namespace spcg::eval
