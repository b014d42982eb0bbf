#include "iadcps/eval.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <numeric>

#include "iadcps/error.hpp"
#include "iadcps/threshold.hpp"

namespace iadcps::eval {

Confusion confusion(std::span<const ts::Label> labels, std::span<const bool> predictions) {
  if (labels.size() != predictions.size()) throw DataError("labels and predictions differ in length");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == ts::Label::Unknown) continue;
    const bool anomalous = labels[i] == ts::Label::Anomalous;
    if (anomalous) {
      predictions[i] ? ++c.tp : ++c.fn;
    } else {
      predictions[i] ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

double f1_score(double precision, double recall) {
  return ratio(2.0 * precision * recall, precision + recall);
}

Prf1 prf1(const Confusion& c) {
  Prf1 r;
  r.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  r.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

Roc roc(std::span<const double> scores, std::span<const ts::Label> labels) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  std::vector<std::size_t> order;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == ts::Label::Unknown) continue;
    order.push_back(i);
    labels[i] == ts::Label::Anomalous ? ++positives : ++negatives;
  }
  if (positives == 0 || negatives == 0) throw DataError("ROC needs both normal and anomalous labels");
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  Roc r;
  r.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t j = 0; j < order.size();) {
    const double s = scores[order[j]];
    // consume every point tied at this score before emitting a vertex
    for (; j < order.size() && scores[order[j]] == s; ++j) labels[order[j]] == ts::Label::Anomalous ? ++tp : ++fp;
    const RocPoint p{static_cast<double>(fp) / static_cast<double>(negatives),
                     static_cast<double>(tp) / static_cast<double>(positives), s};
    const RocPoint& prev = r.points.back();
    r.auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
    r.points.push_back(p);
  }
  return r;
}

Report make_report(std::span<const double> scores, std::span<const ts::Label> labels, double threshold) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  const auto flags = std::make_unique<bool[]>(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) flags[i] = threshold::is_anomalous(scores[i], threshold);
  const std::span<const bool> predictions(flags.get(), scores.size());

  Report report;
  report.threshold = threshold;
  report.confusion = confusion(labels, predictions);
  report.metrics = prf1(report.confusion);
  const bool has_pos = std::find(labels.begin(), labels.end(), ts::Label::Anomalous) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), ts::Label::Normal) != labels.end();
  if (has_pos && has_neg) report.auc = roc(scores, labels).auc;
  return report;
}

nlohmann::json to_json(const Report& report) {
  nlohmann::json j{{"pre", report.metrics.precision},
                   {"rec", report.metrics.recall},
                   {"f1", report.metrics.f1},
                   {"tp", report.confusion.tp},
                   {"fn", report.confusion.fn},
                   {"tn", report.confusion.tn},
                   {"fp", report.confusion.fp},
                   {"auc", nullptr},
                   {"threshold", report.threshold}};
  if (report.auc) j["auc"] = *report.auc;
  return j;
}

}  // namespace iadcps::eval
