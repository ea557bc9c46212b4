#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "canids/can_log.hpp"
#include "canids/rng.hpp"

namespace canids {

/// One periodic ECU broadcast.
struct IdSchedule {
  std::uint32_t id = 0;
  std::uint64_t period_us = 0;
  double jitter_fraction = 0.0;  // in [0, 1): uniform delay of up to this fraction of a period
  std::uint64_t offset_us = 0;   // phase of the first frame
  std::uint8_t dlc = 8;
};

struct NormalTrafficSpec {
  std::vector<IdSchedule> id_pool;
  std::optional<std::size_t> message_count;   // stop after this many frames
  std::optional<std::uint64_t> duration_us;   // or at this timestamp (exclusive)
  std::uint64_t seed = 0;
};

struct AttackSpec {
  AttackKind kind = AttackKind::DoS;
  std::uint64_t start_us = 0;
  std::uint64_t end_us = 0;      // exclusive
  double intensity = 0.0;        // injected frames per normal frame inside [start, end)
  std::uint64_t seed = 0;

  std::uint32_t flood_id = 0x000;            // DoS
  std::vector<std::uint32_t> target_ids;     // Spoofing
  std::uint8_t spoof_fill = 0xFF;            // Spoofing payload byte
  std::uint64_t source_start_us = 0;         // Replay source segment [start, end)
  std::uint64_t source_end_us = 0;
};

struct AttackRecord {
  AttackKind kind = AttackKind::DoS;
  std::uint64_t start_us = 0;
  std::uint64_t end_us = 0;
  double intensity = 0.0;
  std::uint64_t seed = 0;
  std::size_t injected = 0;
};

struct Manifest {
  std::string prng = SeededRng::kAlgorithm;
  std::uint64_t seed = 0;
  std::size_t normal_frames = 0;
  std::vector<AttackRecord> attacks;

  std::size_t injected_total() const;
  std::map<AttackKind, std::size_t> injected_by_kind() const;
};

struct LabeledStream {
  std::vector<CanFrame> frames;
  Manifest manifest;
};

/// Periodic traffic from `spec.id_pool`. Frames of one ID are spaced by its
/// period plus a uniform delay in [0, jitter * period); all IDs are merged in
/// timestamp order, ties broken by pool position. Payload bytes come from the
/// seeded PRNG. Throws EmptyIdPool / InvalidSpec.
LabeledStream generate_normal(const NormalTrafficSpec& spec);

/// A plausible in-vehicle ID pool: `count` distinct standard IDs in
/// 0x080..0x7FF with periods drawn from the usual 10 ms .. 1 s ladder.
std::vector<IdSchedule> make_vehicle_pool(std::uint64_t seed, std::size_t count, double jitter_fraction = 0.1);

// Injectors. Each returns a new stream: input frames keep their relative
// order, new frames are merged by timestamp and placed after existing frames
// with an equal timestamp. An intensity of 0 returns the input unchanged.
//
// Injected count is round(intensity * N), N = normal frames in [start, end);
// DoS, fuzzy and spoofing frames are spaced evenly over the window.

/// High-priority flood: id = flood_id, dlc 8, zero payload.
LabeledStream inject_dos(const LabeledStream& stream, const AttackSpec& spec);
/// Uniform random 11-bit IDs with random dlc-8 payloads.
LabeledStream inject_fuzzy(const LabeledStream& stream, const AttackSpec& spec);
/// Legitimate target IDs (round-robin) with a forged constant payload.
LabeledStream inject_spoofing(const LabeledStream& stream, const AttackSpec& spec);
/// Re-sends the normal frames of the source segment. The block is tiled
/// across [start, end) as many times as the intensity requires (at least
/// once), each copy keeping the original inter-frame gaps; frames that
/// would land at or after `end` are dropped.
LabeledStream inject_replay(const LabeledStream& stream, const AttackSpec& spec);

/// Dispatches on spec.kind.
LabeledStream inject(const LabeledStream& stream, const AttackSpec& spec);
/// Applies `specs` in order.
LabeledStream mix_attacks(const LabeledStream& stream, std::span<const AttackSpec> specs);

/// Lays attacks out over the stream's time span: attack-free gaps of
/// `segment_us` alternate with attack segments (the stream starts with a gap),
/// and `kinds` rotate across attack segments. With `balance_windows` an attack
/// segment lasts segment_us / (1 + intensity), which offsets the extra frames
/// it receives. Replay sources are taken from the tail of the preceding
/// attack-free gap; spoofing targets are IDs observed in the stream.
struct AttackPlan {
  std::vector<AttackKind> kinds;
  std::map<AttackKind, double> intensity;
  std::uint64_t segment_us = 2'000'000;
  std::uint64_t replay_source_us = 20'000;
  std::size_t spoof_targets = 1;
  bool balance_windows = true;  // shorten attack segments to 1/(1 + intensity)
  std::uint64_t seed = 0;
};

std::vector<AttackSpec> plan_attacks(const LabeledStream& normal, const AttackPlan& plan);

/// Number of windows (offsets 0, stride, ...) that contain at least one
/// injected frame, computed from frame positions alone.
std::size_t count_attacked_windows(std::span<const CanFrame> frames, std::size_t window_size,
                                   std::size_t stride);

std::string manifest_to_json(const Manifest& manifest, std::size_t window_size, std::size_t attacked_windows);

}  // namespace canids
