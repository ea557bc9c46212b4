#include "canids/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace canids {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> delta(std::optional<double> ours, double reference) {
  if (!ours) return std::nullopt;
  return *ours - reference;
}

nlohmann::ordered_json opt(std::optional<double> v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string fmt(std::optional<double> v, const char* spec = "%.4f") {
  if (!v) return "undef";
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, *v);
  return buf;
}

}  // namespace

std::string_view to_string(Scenario scenario) noexcept {
  switch (scenario) {
    case Scenario::DoS: return "dos";
    case Scenario::Fuzzy: return "fuzzy";
    case Scenario::Spoofing: return "spoofing";
    case Scenario::Replay: return "replay";
    case Scenario::MixedDFS: return "mixed-dfs";
    case Scenario::MixedDFSR: return "mixed-dfsr";
  }
  return "unknown";
}

Scenario parse_scenario(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto s : kAllScenarios) {
    if (to_string(s) == lower) return s;
  }
  throw Error(ErrorCode::BadConfig, "unknown scenario '" + std::string(name) + "'");
}

std::vector<AttackKind> scenario_kinds(Scenario scenario) {
  switch (scenario) {
    case Scenario::DoS: return {AttackKind::DoS};
    case Scenario::Fuzzy: return {AttackKind::Fuzzy};
    case Scenario::Spoofing: return {AttackKind::Spoofing};
    case Scenario::Replay: return {AttackKind::Replay};
    case Scenario::MixedDFS: return {AttackKind::DoS, AttackKind::Fuzzy, AttackKind::Spoofing};
    case Scenario::MixedDFSR: return {AttackKind::DoS, AttackKind::Fuzzy, AttackKind::Spoofing, AttackKind::Replay};
  }
  return {};
}

ConfusionMatrix confusion(std::span<const GraphLabel> predictions, std::span<const GraphLabel> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "nothing to evaluate");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = predictions[i] == GraphLabel::Attacked;
    const bool actual = labels[i] == GraphLabel::Attacked;
    if (predicted && actual) ++cm.tp;
    else if (predicted) ++cm.fp;
    else if (actual) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorCode::EmptyMatrix, "confusion matrix is empty");
  Metrics m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  m.precision = ratio(cm.tp, cm.tp + cm.fp);
  m.recall = ratio(cm.tp, cm.tp + cm.fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  return m;
}

ReferenceTargets reference_targets(Scenario scenario) {
  switch (scenario) {
    case Scenario::DoS: return {0.99, 1.00, 1.00, 0.9917};
    case Scenario::Fuzzy: return {1.00, 1.00, 1.00, 0.9989};
    case Scenario::Spoofing: return {0.99, 1.00, 1.00, 0.9929};
    case Scenario::Replay: return {0.99, 0.88, 0.93, 0.9343};
    case Scenario::MixedDFS: return {1.00, 0.99, 0.99, 0.9892};
    case Scenario::MixedDFSR: return {0.98, 1.00, 0.99, 0.9835};
  }
  return {};
}

MetricsReport scenario_report(Scenario scenario, std::span<const GraphLabel> predictions,
                              std::span<const GraphLabel> labels, std::optional<ReferenceTargets> targets) {
  MetricsReport r;
  r.scenario = scenario;
  r.confusion = confusion(predictions, labels);
  r.metrics = metrics(r.confusion);
  r.reference = targets;
  if (targets) {
    r.delta_precision = delta(r.metrics.precision, targets->precision);
    r.delta_recall = delta(r.metrics.recall, targets->recall);
    r.delta_f1 = delta(r.metrics.f1, targets->f1);
    r.delta_accuracy = r.metrics.accuracy - targets->accuracy;
  }
  return r;
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["scenario"] = to_string(report.scenario);
  j["counts"] = {{"tp", report.confusion.tp},
                 {"fp", report.confusion.fp},
                 {"tn", report.confusion.tn},
                 {"fn", report.confusion.fn},
                 {"total", report.confusion.total()}};
  j["metrics"] = {{"accuracy", report.metrics.accuracy},
                  {"precision", opt(report.metrics.precision)},
                  {"recall", opt(report.metrics.recall)},
                  {"f1", opt(report.metrics.f1)}};
  if (report.reference) {
    j["reference_targets"] = {{"precision", report.reference->precision},
                          {"recall", report.reference->recall},
                          {"f1", report.reference->f1},
                          {"accuracy", report.reference->accuracy}};
    j["deltas"] = {{"precision", opt(report.delta_precision)},
                   {"recall", opt(report.delta_recall)},
                   {"f1", opt(report.delta_f1)},
                   {"accuracy", opt(report.delta_accuracy)}};
  }
  return j.dump(2);
}

std::string report_to_text(const MetricsReport& report) {
  std::ostringstream out;
  const auto& cm = report.confusion;
  out << "scenario: " << to_string(report.scenario) << "\n";
  out << "counts:   tp=" << cm.tp << " fp=" << cm.fp << " tn=" << cm.tn << " fn=" << cm.fn << " total=" << cm.total()
      << "\n\n";
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %10s %10s %10s\n", "metric", "ours", "reference", "delta");
  out << line;
  auto row = [&](const char* name, std::optional<double> ours, std::optional<double> ref, std::optional<double> d) {
    std::snprintf(line, sizeof line, "%-10s %10s %10s %10s\n", name, fmt(ours).c_str(),
                  ref ? fmt(ref).c_str() : "-", report.reference ? fmt(d, "%+.4f").c_str() : "-");
    out << line;
  };
  const auto& p = report.reference;
  row("accuracy", report.metrics.accuracy, p ? std::optional(p->accuracy) : std::nullopt, report.delta_accuracy);
  row("precision", report.metrics.precision, p ? std::optional(p->precision) : std::nullopt, report.delta_precision);
  row("recall", report.metrics.recall, p ? std::optional(p->recall) : std::nullopt, report.delta_recall);
  row("f1", report.metrics.f1, p ? std::optional(p->f1) : std::nullopt, report.delta_f1);
  return out.str();
}

}  // namespace canids
