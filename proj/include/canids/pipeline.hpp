#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "canids/evaluator.hpp"
#include "canids/gcn.hpp"
#include "canids/graph_builder.hpp"
#include "canids/traffic_synth.hpp"

namespace canids {

/// Stable process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitIo = 3,
  kExitData = 4,
  kExitModel = 5,
};

int exit_code_for(ErrorCode code) noexcept;

/// Synthetic capture: vehicle-like periodic traffic with attacks laid out by
/// plan_attacks.
struct SynthConfig {
  std::size_t normal_frames = 500'000;
  std::size_t id_count = 40;
  double jitter_fraction = 0.1;
  std::map<AttackKind, double> intensity;  // kinds with intensity > 0 are injected, in enum order
  std::uint64_t segment_us = 2'000'000;
  std::uint64_t replay_source_us = 20'000;
  std::size_t spoof_targets = 1;
  std::uint64_t seed = 0;
};

LabeledStream synthesize(const SynthConfig& config);

/// Default intensities used for each scenario's synthetic dataset.
SynthConfig scenario_synth_config(Scenario scenario, std::size_t normal_frames, std::uint64_t seed);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-label shuffled split; round(fraction * class size) of each class goes
/// to train. Index lists are returned in ascending order. Throws BadConfig
/// unless 0 < fraction < 1.
Split stratified_split(std::span<const GraphLabel> labels, double train_fraction, std::uint64_t seed);

template <typename T>
std::vector<T> gather(std::span<const T> items, std::span<const std::size_t> indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(items[i]);
  return out;
}

std::string epoch_to_json(const EpochRecord& record);

/// CLI entry point: `canids <synth|graphs|train|eval|detect> [--config FILE] [flags]`.
/// Streams are injected so tests can drive it in-process.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace canids
