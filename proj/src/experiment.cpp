#include <algorithm>
#include <cmath>

#include "canids/pipeline.hpp"
#include "json.hpp"

namespace canids {

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IoError:
      return kExitIo;
    case ErrorCode::MalformedLine:
    case ErrorCode::BadHex:
    case ErrorCode::DlcOutOfRange:
    case ErrorCode::PayloadLengthMismatch:
    case ErrorCode::IdOutOfRange:
    case ErrorCode::BadConfig:
    case ErrorCode::InvalidSpec:
    case ErrorCode::EmptyIdPool:
    case ErrorCode::WindowOutsideStream:
    case ErrorCode::TargetIdAbsent:
    case ErrorCode::SourceAfterInjection:
    case ErrorCode::EmptySourceSegment:
    case ErrorCode::WindowTooSmall:
    case ErrorCode::BadProbability:
      return kExitConfig;
    case ErrorCode::BadMagic:
    case ErrorCode::VersionMismatch:
    case ErrorCode::ShapeMismatch:
      return kExitModel;
    default:
      return kExitData;
  }
}

LabeledStream synthesize(const SynthConfig& config) {
  NormalTrafficSpec normal;
  normal.id_pool = make_vehicle_pool(derive_seed(config.seed, 0), config.id_count, config.jitter_fraction);
  normal.message_count = config.normal_frames;
  normal.seed = derive_seed(config.seed, 1);
  auto stream = generate_normal(normal);
  stream.manifest.seed = config.seed;

  AttackPlan plan;
  for (auto kind : kAllAttackKinds) {
    auto it = config.intensity.find(kind);
    if (it != config.intensity.end() && it->second > 0.0) {
      plan.kinds.push_back(kind);
      plan.intensity[kind] = it->second;
    }
  }
  plan.segment_us = config.segment_us;
  plan.replay_source_us = config.replay_source_us;
  plan.spoof_targets = config.spoof_targets;
  plan.seed = derive_seed(config.seed, 2);
  const auto specs = plan_attacks(stream, plan);
  return mix_attacks(stream, specs);
}

SynthConfig scenario_synth_config(Scenario scenario, std::size_t normal_frames, std::uint64_t seed) {
  SynthConfig config;
  config.normal_frames = normal_frames;
  config.seed = seed;
  // One injected frame per normal frame inside each attack segment.
  for (auto kind : scenario_kinds(scenario)) config.intensity[kind] = 1.0;
  return config;
}

Split stratified_split(std::span<const GraphLabel> labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::BadConfig, "train fraction must be strictly between 0 and 1");
  }
  SeededRng rng(seed);
  Split split;
  for (auto cls : {GraphLabel::AttackFree, GraphLabel::Attacked}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(members));
    const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(cut));
    split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(cut), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::string epoch_to_json(const EpochRecord& record) {
  nlohmann::ordered_json j;
  j["epoch"] = record.epoch;
  j["train_loss"] = record.train_loss;
  j["train_accuracy"] = record.train_accuracy;
  j["validation_loss"] = record.validation_loss ? nlohmann::ordered_json(*record.validation_loss) : nullptr;
  j["validation_accuracy"] =
      record.validation_accuracy ? nlohmann::ordered_json(*record.validation_accuracy) : nullptr;
  return j.dump();
}

}  // namespace canids
