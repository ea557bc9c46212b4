#include <gtest/gtest.h>

#include "canids/evaluator.hpp"
#include "canids/rng.hpp"
#include "json.hpp"

namespace canids {
namespace {

constexpr auto A = GraphLabel::Attacked;
constexpr auto N = GraphLabel::AttackFree;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::EmptyInput;
}

TEST(Confusion, Counts) {
  const std::vector<GraphLabel> pred = {A, A, N, N, A, N};
  const std::vector<GraphLabel> truth = {A, N, N, A, A, N};
  const auto cm = confusion(pred, truth);
  EXPECT_EQ(cm, (ConfusionMatrix{2, 1, 2, 1}));
  EXPECT_EQ(cm.total(), 6u);
}

TEST(Confusion, Errors) {
  const std::vector<GraphLabel> one = {A};
  EXPECT_EQ(code_of([&] { confusion(one, {}); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([] { confusion({}, {}); }), ErrorCode::EmptyInput);
  EXPECT_EQ(code_of([] { metrics(ConfusionMatrix{}); }), ErrorCode::EmptyMatrix);
}

TEST(Metrics, Formulas) {
  const auto m = metrics({90, 10, 80, 20});
  EXPECT_DOUBLE_EQ(m.accuracy, 170.0 / 200.0);
  EXPECT_DOUBLE_EQ(*m.precision, 0.9);
  EXPECT_DOUBLE_EQ(*m.recall, 90.0 / 110.0);
  EXPECT_DOUBLE_EQ(*m.f1, 2 * 0.9 * (90.0 / 110.0) / (0.9 + 90.0 / 110.0));
}

TEST(Metrics, PerfectAndUndefined) {
  const auto perfect = metrics({5, 0, 5, 0});
  EXPECT_EQ(*perfect.f1, 1.0);
  EXPECT_EQ(perfect.accuracy, 1.0);
  // Nothing predicted attacked: precision undefined, not zero.
  const auto none = metrics({0, 0, 7, 3});
  EXPECT_FALSE(none.precision);
  EXPECT_EQ(*none.recall, 0.0);
  EXPECT_FALSE(none.f1);
  const auto no_positives = metrics({0, 2, 8, 0});
  EXPECT_EQ(*no_positives.precision, 0.0);
  EXPECT_FALSE(no_positives.recall);
  EXPECT_FALSE(no_positives.f1);
  const auto all_wrong = metrics({0, 4, 0, 4});
  EXPECT_EQ(*all_wrong.precision, 0.0);
  EXPECT_EQ(*all_wrong.recall, 0.0);
  EXPECT_FALSE(all_wrong.f1);
}

TEST(Metrics, F1IsHarmonicMeanOnRandomMatrices) {
  SeededRng rng(3);
  for (int i = 0; i < 200; ++i) {
    ConfusionMatrix cm{1 + rng.below(100), rng.below(100), rng.below(100), rng.below(100)};
    const auto m = metrics(cm);
    const double p = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    const double r = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    EXPECT_NEAR(*m.f1, 2.0 / (1.0 / p + 1.0 / r), 1e-12);
    EXPECT_GE(*m.f1, std::min(p, r) - 1e-12);
    EXPECT_LE(*m.f1, std::max(p, r) + 1e-12);
  }
}

TEST(ReferenceTargets, PublishedValues) {
  const auto replay = reference_targets(Scenario::Replay);
  EXPECT_EQ(replay.precision, 0.99);
  EXPECT_EQ(replay.recall, 0.88);
  EXPECT_EQ(replay.f1, 0.93);
  const auto dos = reference_targets(Scenario::DoS);
  EXPECT_EQ(dos.f1, 1.00);
  EXPECT_EQ(dos.accuracy, 0.9917);
  EXPECT_EQ(reference_targets(Scenario::MixedDFS).f1, 0.99);
  EXPECT_EQ(reference_targets(Scenario::MixedDFSR).precision, 0.98);
  // Replay is the weakest published F1.
  for (auto s : kAllScenarios) {
    if (s != Scenario::Replay) {
      EXPECT_GT(reference_targets(s).f1, replay.f1);
    }
  }
}

TEST(Scenario, NamesAndKinds) {
  for (auto s : kAllScenarios) EXPECT_EQ(parse_scenario(to_string(s)), s);
  EXPECT_EQ(parse_scenario("Mixed-DFSR"), Scenario::MixedDFSR);
  EXPECT_EQ(code_of([] { parse_scenario("flood"); }), ErrorCode::BadConfig);
  EXPECT_EQ(scenario_kinds(Scenario::MixedDFS).size(), 3u);
  EXPECT_EQ(scenario_kinds(Scenario::MixedDFSR).back(), AttackKind::Replay);
}

TEST(Report, DeltasAgainstTargets) {
  const std::vector<GraphLabel> pred = {A, A, N, N};
  const std::vector<GraphLabel> truth = {A, A, N, A};
  const auto r = scenario_report(Scenario::Replay, pred, truth, reference_targets(Scenario::Replay));
  EXPECT_DOUBLE_EQ(*r.delta_precision, 1.0 - 0.99);
  EXPECT_DOUBLE_EQ(*r.delta_recall, 2.0 / 3.0 - 0.88);
  EXPECT_DOUBLE_EQ(*r.delta_accuracy, 0.75 - 0.9343);
  const auto bare = scenario_report(Scenario::Replay, pred, truth);
  EXPECT_FALSE(bare.reference);
  EXPECT_FALSE(bare.delta_f1);
}

TEST(Report, UndefinedDeltaStaysUndefined) {
  const std::vector<GraphLabel> pred = {N, N};
  const std::vector<GraphLabel> truth = {A, N};
  const auto r = scenario_report(Scenario::DoS, pred, truth, reference_targets(Scenario::DoS));
  EXPECT_FALSE(r.delta_precision);
  EXPECT_FALSE(r.delta_f1);
  EXPECT_TRUE(r.delta_recall);
  const auto j = nlohmann::json::parse(report_to_json(r));
  EXPECT_TRUE(j["metrics"]["precision"].is_null());
  EXPECT_TRUE(j["deltas"]["f1"].is_null());
  EXPECT_NE(report_to_text(r).find("undef"), std::string::npos);
}

TEST(Report, JsonShape) {
  const std::vector<GraphLabel> pred = {A, N, A};
  const std::vector<GraphLabel> truth = {A, N, N};
  const auto j = nlohmann::json::parse(
      report_to_json(scenario_report(Scenario::Fuzzy, pred, truth, reference_targets(Scenario::Fuzzy))));
  EXPECT_EQ(j["scenario"], "fuzzy");
  EXPECT_EQ(j["counts"]["tp"], 1);
  EXPECT_EQ(j["counts"]["fp"], 1);
  EXPECT_EQ(j["counts"]["total"], 3);
  EXPECT_EQ(j["reference_targets"]["f1"], 1.0);
  EXPECT_DOUBLE_EQ(j["metrics"]["precision"].get<double>(), 0.5);
}

TEST(Report, TextTable) {
  const std::vector<GraphLabel> pred = {A, N};
  const std::vector<GraphLabel> truth = {A, N};
  const auto text = report_to_text(scenario_report(Scenario::DoS, pred, truth, reference_targets(Scenario::DoS)));
  EXPECT_NE(text.find("scenario: dos"), std::string::npos);
  EXPECT_NE(text.find("tp=1 fp=0 tn=1 fn=0 total=2"), std::string::npos);
  EXPECT_NE(text.find("1.0000"), std::string::npos);
  EXPECT_NE(text.find("+0.0083"), std::string::npos);  // accuracy 1.0 vs 0.9917
}

}  // namespace
}  // namespace canids
