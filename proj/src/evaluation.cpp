#include "spcg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spcg/losses.hpp"

namespace spcg::eval {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

const char* da_method_name(DaMethod method) {
  switch (method) {
    case DaMethod::sp_cyclegan: return "sp_cyclegan";
    case DaMethod::default_cyclegan: return "default_cyclegan";
    case DaMethod::no_da: return "no_da";
  }
  throw_validation("unknown DA method");
}

DaMethod da_method_from_name(const std::string& name) {
  if (name == "sp_cyclegan") return DaMethod::sp_cyclegan;
  if (name == "default_cyclegan") return DaMethod::default_cyclegan;
  if (name == "no_da") return DaMethod::no_da;
  throw_validation("unknown DA method '" + name + "'");
}

namespace {

struct MeanSe {
  real_t mean = 0.0;
  real_t se = 0.0;
};

MeanSe mean_and_se(const std::vector<real_t>& xs) {
  MeanSe out;
  const std::size_t n = xs.size();
  if (n == 0) return out;
  real_t total = 0.0;
  for (real_t x : xs) total += x;
  out.mean = total / static_cast<real_t>(n);
  if (n > 1) {
    real_t ss = 0.0;
    for (real_t x : xs) ss += (x - out.mean) * (x - out.mean);
    const real_t sd = std::sqrt(ss / static_cast<real_t>(n - 1));
    out.se = sd / std::sqrt(static_cast<real_t>(n));
  }
  return out;
}

LabelMap hard_predict(const ProbMap& probs) {
  const Shape s = probs.values.shape;
  LabelMap out(s.n, s.h, s.w);
  for (int n = 0; n < s.n; ++n) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        if (s.c == 1) {
          out.at(n, y, x) = probs.values.at(n, 0, y, x) >= 0.5 ? 1 : 0;
        } else {
          int best = 0;
          real_t best_p = probs.values.at(n, 0, y, x);
          for (int c = 1; c < s.c; ++c) {
            const real_t p = probs.values.at(n, c, y, x);
            if (p > best_p) {
              best_p = p;
              best = c;
            }
          }
          out.at(n, y, x) = best;
        }
      }
    }
  }
  return out;
}

std::string format_pm(real_t mean, real_t se) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f \xC2\xB1 %.4f", mean, se);
  return buf;
}

}  // namespace

MetricsRecord evaluate(const nn::Segmenter& segmenter, const data::Dataset& test_set,
                       const std::string& direction, DaMethod method) {
  if (test_set.samples.empty()) throw_validation("evaluate: empty test set");
  if (!test_set.fully_labelled()) throw_validation("evaluate: every test sample must be labelled");
  const int seg_classes = segmenter.num_classes();
  const int expected_mask_classes = seg_classes == 1 ? 2 : seg_classes;
  if (test_set.num_classes != expected_mask_classes) {
    throw_validation("evaluate: segmenter emits " + std::to_string(seg_classes) +
                     " class channels but the dataset declares " +
                     std::to_string(test_set.num_classes) + " classes");
  }

  // evaluated class columns: foreground only (binary) or all classes
  std::vector<int> class_ids;
  if (seg_classes == 1) {
    class_ids.push_back(1);
  } else {
    for (int c = 0; c < seg_classes; ++c) class_ids.push_back(c);
  }

  MetricsRecord record;
  record.direction = direction;
  record.method = method;
  record.n = static_cast<int>(test_set.samples.size());

  std::vector<std::vector<real_t>> per_class_scores(class_ids.size());
  for (const data::PairedSample& sample : test_set.samples) {
    const ProbMap probs = segmenter.predict(sample.image);
    const LabelMap pred = hard_predict(probs);
    const MaskBatch pred_mask{pred, test_set.num_classes};
    const MaskBatch true_mask{*sample.label, test_set.num_classes};

    std::vector<real_t> row;
    real_t overall = 0.0;
    for (std::size_t k = 0; k < class_ids.size(); ++k) {
      const real_t d = dice_score(pred_mask, true_mask, class_ids[k]);
      per_class_scores[k].push_back(d);
      row.push_back(d);
      overall += d;
    }
    overall /= static_cast<real_t>(class_ids.size());
    record.per_image_scores.push_back(std::move(row));
    record.per_image_overall.push_back(overall);
  }

  for (std::size_t k = 0; k < class_ids.size(); ++k) {
    const MeanSe stat = mean_and_se(per_class_scores[k]);
    record.per_class.push_back({class_ids[k], stat.mean, stat.se});
  }
  const MeanSe overall = mean_and_se(record.per_image_overall);
  record.overall_mean = overall.mean;
  record.overall_se = overall.se;
  return record;
}

ComparisonReport compare_methods(const std::vector<MetricsRecord>& records) {
  if (records.empty()) throw_validation("compare_methods: no records");
  const std::string& direction = records[0].direction;
  const std::size_t columns = records[0].per_class.size();
  for (const MetricsRecord& r : records) {
    if (r.direction != direction) {
      throw_validation("compare_methods: records mix directions '" + direction + "' and '" +
                       r.direction + "'");
    }
    if (r.n != records[0].n || r.per_class.size() != columns) {
      throw_validation("compare_methods: records evaluate different test sets");
    }
  }

  ComparisonReport report;
  report.direction = direction;
  for (const MetricsRecord& r : records) report.rows.push_back({r, false, {}, false});
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) {
                     return a.record.overall_mean > b.record.overall_mean;
                   });

  const real_t best_overall = report.rows[0].record.overall_mean;
  for (ComparisonRow& row : report.rows) {
    row.best_overall = row.record.overall_mean >= best_overall - 1e-12;
    row.best_per_class.assign(columns, false);
  }
  for (std::size_t c = 0; c < columns; ++c) {
    real_t best = report.rows[0].record.per_class[c].mean;
    for (const ComparisonRow& row : report.rows) best = std::max(best, row.record.per_class[c].mean);
    for (ComparisonRow& row : report.rows) {
      row.best_per_class[c] = row.record.per_class[c].mean >= best - 1e-12;
    }
  }
  // standard-error interval overlap against the leader
  const MetricsRecord& lead = report.rows[0].record;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const MetricsRecord& r = report.rows[i].record;
    report.rows[i].statistically_even_with_best =
        std::abs(lead.overall_mean - r.overall_mean) <= lead.overall_se + r.overall_se;
  }
  return report;
}

std::string format_metrics_text(const MetricsRecord& record) {
  std::ostringstream os;
  os << "direction: " << record.direction << "\n";
  os << "method: " << da_method_name(record.method) << "\n";
  os << "test items: " << record.n << "\n";
  for (const ClassStat& stat : record.per_class) {
    os << "class " << stat.class_id << " DSC: " << format_pm(stat.mean, stat.se) << "\n";
  }
  os << "overall mean DSC: " << format_pm(record.overall_mean, record.overall_se)
     << "  (mean \xC2\xB1 standard error over test items)\n";
  return os.str();
}

std::string format_comparison_text(const ComparisonReport& report) {
  std::ostringstream os;
  os << "direction: " << report.direction << "\n";
  os << std::left;
  os.width(20);
  os << "method";
  os.width(22);
  os << "overall DSC";
  for (const ClassStat& stat : report.rows[0].record.per_class) {
    os.width(22);
    os << ("class " + std::to_string(stat.class_id) + " DSC");
  }
  os << "notes\n";
  for (const ComparisonRow& row : report.rows) {
    os.width(20);
    os << da_method_name(row.record.method);
    std::string cell = format_pm(row.record.overall_mean, row.record.overall_se);
    if (row.best_overall) cell += " *";
    os.width(22 + 1);  // the ± glyph is two bytes
    os << cell;
    for (std::size_t c = 0; c < row.record.per_class.size(); ++c) {
      const ClassStat& stat = row.record.per_class[c];
      std::string body = format_pm(stat.mean, stat.se);
      if (row.best_per_class[c]) body += " *";
      os.width(22 + 1);
      os << body;
    }
    os << (row.statistically_even_with_best ? "statistically even with best" : "");
    os << "\n";
  }
  os << "* best per column\n";
  return os.str();
}

namespace {

ordered_json metrics_to_json(const MetricsRecord& record) {
  ordered_json j;
  j["direction"] = record.direction;
  j["method"] = da_method_name(record.method);
  j["n"] = record.n;
  j["error_kind"] = "standard_error";
  ordered_json per_class = ordered_json::array();
  for (const ClassStat& stat : record.per_class) {
    per_class.push_back(
        {{"class", stat.class_id}, {"mean_dsc", stat.mean}, {"se", stat.se}});
  }
  j["per_class"] = std::move(per_class);
  j["overall_mean_dsc"] = record.overall_mean;
  j["overall_se"] = record.overall_se;
  return j;
}

}  // namespace

void write_metrics_json(const fs::path& path, const MetricsRecord& record) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw_io("cannot write " + path.string());
  f << metrics_to_json(record).dump(2) << "\n";
}

MetricsRecord read_metrics_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw_io("cannot read metrics report " + path.string());
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded()) throw_data("unparsable metrics report " + path.string());
  MetricsRecord record;
  record.direction = j.at("direction").get<std::string>();
  record.method = da_method_from_name(j.at("method").get<std::string>());
  record.n = j.at("n").get<int>();
  for (const auto& entry : j.at("per_class")) {
    record.per_class.push_back({entry.at("class").get<int>(), entry.at("mean_dsc").get<real_t>(),
                                entry.at("se").get<real_t>()});
  }
  record.overall_mean = j.at("overall_mean_dsc").get<real_t>();
  record.overall_se = j.at("overall_se").get<real_t>();
  return record;
}

void write_metrics_text(const fs::path& path, const MetricsRecord& record) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw_io("cannot write " + path.string());
  f << format_metrics_text(record);
}

void write_per_image_csv(const fs::path& path, const MetricsRecord& record) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw_io("cannot write " + path.string());
  f << "item";
  for (const ClassStat& stat : record.per_class) f << ",dsc_class_" << stat.class_id;
  f << ",dsc_overall\n";
  for (std::size_t i = 0; i < record.per_image_scores.size(); ++i) {
    f << i;
    char buf[32];
    for (real_t v : record.per_image_scores[i]) {
      std::snprintf(buf, sizeof(buf), ",%.6f", v);
      f << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.6f", record.per_image_overall[i]);
    f << buf << "\n";
  }
}

void write_comparison_json(const fs::path& path, const ComparisonReport& report) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  ordered_json j;
  j["direction"] = report.direction;
  ordered_json rows = ordered_json::array();
  for (const ComparisonRow& row : report.rows) {
    ordered_json r = metrics_to_json(row.record);
    r["best_overall"] = row.best_overall;
    r["statistically_even_with_best"] = row.statistically_even_with_best;
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw_io("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

void write_comparison_text(const fs::path& path, const ComparisonReport& report) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw_io("cannot write " + path.string());
  f << format_comparison_text(report);
}

}  // namespace spcg::eval
