#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "canids/can_log.hpp"
#include "canids/graph_builder.hpp"

namespace canids {

/// Evaluation scenarios; each names a merged attacked + attack-free dataset.
enum class Scenario : std::uint8_t { DoS, Fuzzy, Spoofing, Replay, MixedDFS, MixedDFSR };

inline constexpr std::array<Scenario, 6> kAllScenarios = {Scenario::DoS,    Scenario::Fuzzy,    Scenario::Spoofing,
                                                          Scenario::Replay, Scenario::MixedDFS, Scenario::MixedDFSR};

/// "dos", "fuzzy", "spoofing", "replay", "mixed-dfs", "mixed-dfsr".
std::string_view to_string(Scenario scenario) noexcept;
/// Case-insensitive; throws BadConfig for unknown names.
Scenario parse_scenario(std::string_view name);
/// Attack kinds injected for a scenario, in rotation order.
std::vector<AttackKind> scenario_kinds(Scenario scenario);

/// Positive class = Attacked.
struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Throws LengthMismatch, EmptyInput.
ConfusionMatrix confusion(std::span<const GraphLabel> predictions, std::span<const GraphLabel> labels);

/// A metric with no defined value (zero denominator) is nullopt, never 0.
struct Metrics {
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

/// Throws EmptyMatrix.
Metrics metrics(const ConfusionMatrix& cm);

struct ReferenceTargets {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;  // from the confusion-matrix figures
};

/// Published GCN results per scenario (Pr / Re / F1 as printed in the
/// results table, accuracy from the confusion-matrix figure captions).
/// Reporting aids only; nothing asserts against them.
ReferenceTargets reference_targets(Scenario scenario);

struct MetricsReport {
  Scenario scenario = Scenario::DoS;
  ConfusionMatrix confusion;
  Metrics metrics;
  std::optional<ReferenceTargets> reference;
  // ours - reference; nullopt when either side is undefined or no targets given.
  std::optional<double> delta_precision, delta_recall, delta_f1, delta_accuracy;
};

MetricsReport scenario_report(Scenario scenario, std::span<const GraphLabel> predictions,
                              std::span<const GraphLabel> labels, std::optional<ReferenceTargets> targets = std::nullopt);

std::string report_to_json(const MetricsReport& report);
/// Aligned plain-text table; undefined values print as "undef".
std::string report_to_text(const MetricsReport& report);

}  // namespace canids
