#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "iadcps/timeseries.hpp"

namespace iadcps::eval {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;

  std::size_t total() const { return tp + fn + tn + fp; }
};

/// Pointwise counts; points with unknown labels are skipped.
Confusion confusion(std::span<const ts::Label> labels, std::span<const bool> predictions);

struct Prf1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision, recall and their harmonic mean. Any 0/0 is reported as 0.
Prf1 prf1(const Confusion& c);
double f1_score(double precision, double recall);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double score = 0.0;  ///< points with score >= this are flagged; +inf for the origin
};

struct Roc {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// ROC over every distinct score (descending) with trapezoidal AUC.
/// Unknown labels are skipped; both classes must remain.
Roc roc(std::span<const double> scores, std::span<const ts::Label> labels);

struct Report {
  Confusion confusion;
  Prf1 metrics;
  std::optional<double> auc;  ///< absent when only one class is present
  double threshold = 0.0;
};

Report make_report(std::span<const double> scores, std::span<const ts::Label> labels, double threshold);

/// {pre, rec, f1, tp, fn, tn, fp, auc, threshold}; auc is null when undefined.
nlohmann::json to_json(const Report& report);

}  // namespace iadcps::eval
