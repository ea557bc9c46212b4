#include "canids/traffic_synth.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <tuple>

#include "json.hpp"

namespace canids {

namespace {

struct Pending {
  std::uint64_t ts;
  std::size_t pool_index;
  std::uint64_t k;
  bool operator>(const Pending& o) const { return std::tie(ts, pool_index) > std::tie(o.ts, o.pool_index); }
};

std::uint64_t scheduled_ts(const IdSchedule& s, std::uint64_t k, SeededRng& rng) {
  std::uint64_t ts = s.offset_us + k * s.period_us;
  if (s.jitter_fraction > 0.0) {
    ts += static_cast<std::uint64_t>(std::floor(rng.uniform() * s.jitter_fraction * static_cast<double>(s.period_us)));
  }
  return ts;
}

void validate_window(const LabeledStream& stream, const AttackSpec& spec, AttackKind expected) {
  if (spec.kind != expected) {
    throw Error(ErrorCode::InvalidSpec, "injector for " + std::string(to_string(expected)) + " got " +
                                            std::string(to_string(spec.kind)));
  }
  if (!(spec.intensity >= 0.0) || !std::isfinite(spec.intensity)) {
    throw Error(ErrorCode::InvalidSpec, "intensity must be >= 0");
  }
  if (spec.start_us >= spec.end_us) throw Error(ErrorCode::InvalidSpec, "attack window start >= end");
  if (stream.frames.empty() || spec.end_us <= stream.frames.front().timestamp_us ||
      spec.start_us > stream.frames.back().timestamp_us) {
    throw Error(ErrorCode::WindowOutsideStream, "[" + std::to_string(spec.start_us) + ", " +
                                                    std::to_string(spec.end_us) + ")");
  }
}

std::pair<std::size_t, std::size_t> range_of(std::span<const CanFrame> frames, std::uint64_t start,
                                             std::uint64_t end) {
  auto lo = std::lower_bound(frames.begin(), frames.end(), start,
                             [](const CanFrame& f, std::uint64_t t) { return f.timestamp_us < t; });
  auto hi = std::lower_bound(lo, frames.end(), end,
                             [](const CanFrame& f, std::uint64_t t) { return f.timestamp_us < t; });
  return {static_cast<std::size_t>(lo - frames.begin()), static_cast<std::size_t>(hi - frames.begin())};
}

std::size_t normal_in(std::span<const CanFrame> frames, std::uint64_t start, std::uint64_t end) {
  auto [lo, hi] = range_of(frames, start, end);
  return static_cast<std::size_t>(
      std::count_if(frames.begin() + lo, frames.begin() + hi, [](const CanFrame& f) { return !f.is_injected(); }));
}

std::size_t injection_count(const LabeledStream& stream, const AttackSpec& spec) {
  const auto n = normal_in(stream.frames, spec.start_us, spec.end_us);
  return static_cast<std::size_t>(std::llround(spec.intensity * static_cast<double>(n)));
}

std::uint64_t evenly_spaced(const AttackSpec& spec, std::size_t j, std::size_t count) {
  const auto span = spec.end_us - spec.start_us;
  return spec.start_us + ((2 * j + 1) * span) / (2 * count);
}

/// Merges `injected` (sorted by timestamp) into the stream and records the attack.
LabeledStream merge_injected(const LabeledStream& stream, std::vector<CanFrame> injected, const AttackSpec& spec) {
  LabeledStream out;
  out.manifest = stream.manifest;
  out.manifest.attacks.push_back({spec.kind, spec.start_us, spec.end_us, spec.intensity, spec.seed, injected.size()});
  out.frames.resize(stream.frames.size() + injected.size());
  // std::merge takes from the first range on ties: existing frames first.
  std::merge(stream.frames.begin(), stream.frames.end(), injected.begin(), injected.end(), out.frames.begin(),
             [](const CanFrame& a, const CanFrame& b) { return a.timestamp_us < b.timestamp_us; });
  return out;
}

CanFrame make_frame(std::uint64_t ts, std::uint32_t id, std::uint8_t dlc, AttackKind kind) {
  CanFrame f;
  f.timestamp_us = ts;
  f.id = id;
  f.dlc = dlc;
  f.injected = kind;
  return f;
}

}  // namespace

std::size_t Manifest::injected_total() const {
  std::size_t total = 0;
  for (const auto& a : attacks) total += a.injected;
  return total;
}

std::map<AttackKind, std::size_t> Manifest::injected_by_kind() const {
  std::map<AttackKind, std::size_t> out;
  for (const auto& a : attacks) out[a.kind] += a.injected;
  return out;
}

LabeledStream generate_normal(const NormalTrafficSpec& spec) {
  if (spec.id_pool.empty()) throw Error(ErrorCode::EmptyIdPool, "normal traffic needs at least one ID");
  if (!spec.message_count && !spec.duration_us) {
    throw Error(ErrorCode::InvalidSpec, "normal traffic needs a message count or a duration");
  }
  for (const auto& s : spec.id_pool) {
    if (s.period_us == 0) throw Error(ErrorCode::InvalidSpec, "period must be > 0");
    if (!(s.jitter_fraction >= 0.0 && s.jitter_fraction < 1.0)) {
      throw Error(ErrorCode::InvalidSpec, "jitter fraction must be in [0, 1)");
    }
    if (s.dlc > kMaxDlc || s.id > kMaxStandardId) throw Error(ErrorCode::InvalidSpec, "bad id or dlc in pool");
  }

  SeededRng rng(spec.seed);
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue;
  for (std::size_t i = 0; i < spec.id_pool.size(); ++i) queue.push({scheduled_ts(spec.id_pool[i], 0, rng), i, 0});

  LabeledStream out;
  out.manifest.seed = spec.seed;
  if (spec.message_count) out.frames.reserve(*spec.message_count);
  while (true) {
    if (spec.message_count && out.frames.size() >= *spec.message_count) break;
    const Pending next = queue.top();
    if (spec.duration_us && next.ts >= *spec.duration_us) break;
    queue.pop();
    const auto& sched = spec.id_pool[next.pool_index];
    CanFrame f;
    f.timestamp_us = next.ts;
    f.id = sched.id;
    f.dlc = sched.dlc;
    for (std::size_t b = 0; b < sched.dlc; ++b) f.payload[b] = rng.byte();
    out.frames.push_back(f);
    queue.push({scheduled_ts(sched, next.k + 1, rng), next.pool_index, next.k + 1});
  }
  out.manifest.normal_frames = out.frames.size();
  return out;
}

std::vector<IdSchedule> make_vehicle_pool(std::uint64_t seed, std::size_t count, double jitter_fraction) {
  static constexpr std::uint64_t kPeriods[] = {10'000, 10'000, 20'000, 20'000, 50'000, 100'000,
                                               100'000, 200'000, 500'000, 1'000'000};
  SeededRng rng(seed);
  std::set<std::uint32_t> used;
  std::vector<IdSchedule> pool;
  pool.reserve(count);
  const std::uint32_t span = kMaxStandardId - 0x080 + 1;
  while (pool.size() < count && used.size() < span) {
    const auto id = 0x080 + static_cast<std::uint32_t>(rng.below(span));
    if (!used.insert(id).second) continue;
    IdSchedule s;
    s.id = id;
    s.period_us = kPeriods[rng.below(std::size(kPeriods))];
    s.jitter_fraction = jitter_fraction;
    s.offset_us = rng.below(s.period_us);
    s.dlc = 8;
    pool.push_back(s);
  }
  return pool;
}

LabeledStream inject_dos(const LabeledStream& stream, const AttackSpec& spec) {
  validate_window(stream, spec, AttackKind::DoS);
  if (spec.flood_id > kMaxStandardId) throw Error(ErrorCode::InvalidSpec, "flood id out of range");
  const auto count = injection_count(stream, spec);
  if (count == 0) return stream;
  std::vector<CanFrame> injected;
  injected.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    injected.push_back(make_frame(evenly_spaced(spec, j, count), spec.flood_id, 8, AttackKind::DoS));
  }
  return merge_injected(stream, std::move(injected), spec);
}

LabeledStream inject_fuzzy(const LabeledStream& stream, const AttackSpec& spec) {
  validate_window(stream, spec, AttackKind::Fuzzy);
  const auto count = injection_count(stream, spec);
  if (count == 0) return stream;
  SeededRng rng(spec.seed);
  std::vector<CanFrame> injected;
  injected.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    auto f = make_frame(evenly_spaced(spec, j, count), static_cast<std::uint32_t>(rng.below(kMaxStandardId + 1)), 8,
                        AttackKind::Fuzzy);
    for (auto& b : f.payload) b = rng.byte();
    injected.push_back(f);
  }
  return merge_injected(stream, std::move(injected), spec);
}

LabeledStream inject_spoofing(const LabeledStream& stream, const AttackSpec& spec) {
  validate_window(stream, spec, AttackKind::Spoofing);
  if (spec.target_ids.empty()) throw Error(ErrorCode::TargetIdAbsent, "no spoofing targets");
  std::vector<std::uint8_t> target_dlc;
  for (auto id : spec.target_ids) {
    auto it = std::find_if(stream.frames.begin(), stream.frames.end(),
                           [id](const CanFrame& f) { return !f.is_injected() && !f.extended && f.id == id; });
    if (it == stream.frames.end()) throw Error(ErrorCode::TargetIdAbsent, "id " + std::to_string(id));
    target_dlc.push_back(it->dlc);
  }
  const auto count = injection_count(stream, spec);
  if (count == 0) return stream;
  std::vector<CanFrame> injected;
  injected.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    const auto t = j % spec.target_ids.size();
    auto f = make_frame(evenly_spaced(spec, j, count), spec.target_ids[t], target_dlc[t], AttackKind::Spoofing);
    std::fill_n(f.payload.begin(), f.dlc, spec.spoof_fill);
    injected.push_back(f);
  }
  return merge_injected(stream, std::move(injected), spec);
}

LabeledStream inject_replay(const LabeledStream& stream, const AttackSpec& spec) {
  validate_window(stream, spec, AttackKind::Replay);
  if (spec.source_start_us >= spec.source_end_us) {
    throw Error(ErrorCode::EmptySourceSegment, "source segment is empty");
  }
  if (spec.source_end_us > spec.start_us) {
    throw Error(ErrorCode::SourceAfterInjection, "source segment must end before the injection starts");
  }
  auto [lo, hi] = range_of(stream.frames, spec.source_start_us, spec.source_end_us);
  std::vector<CanFrame> source;
  for (auto i = lo; i < hi; ++i) {
    if (!stream.frames[i].is_injected()) source.push_back(stream.frames[i]);
  }
  if (source.empty()) throw Error(ErrorCode::EmptySourceSegment, "no normal frames in source segment");
  if (spec.intensity == 0.0) return stream;

  const auto wanted = static_cast<double>(injection_count(stream, spec));
  const auto reps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(wanted / static_cast<double>(source.size()))));
  const auto block_span = (spec.end_us - spec.start_us) / reps;
  const auto base = source.front().timestamp_us;

  std::vector<CanFrame> injected;
  injected.reserve(reps * source.size());
  for (std::size_t r = 0; r < reps; ++r) {
    const auto origin = spec.start_us + r * block_span;
    for (const auto& f : source) {
      const auto ts = origin + (f.timestamp_us - base);
      if (ts >= spec.end_us) break;
      CanFrame copy = f;
      copy.timestamp_us = ts;
      copy.injected = AttackKind::Replay;
      injected.push_back(copy);
    }
  }
  // Copies of a block longer than block_span overlap the next copy.
  std::stable_sort(injected.begin(), injected.end(),
                   [](const CanFrame& a, const CanFrame& b) { return a.timestamp_us < b.timestamp_us; });
  return merge_injected(stream, std::move(injected), spec);
}

LabeledStream inject(const LabeledStream& stream, const AttackSpec& spec) {
  switch (spec.kind) {
    case AttackKind::DoS: return inject_dos(stream, spec);
    case AttackKind::Fuzzy: return inject_fuzzy(stream, spec);
    case AttackKind::Spoofing: return inject_spoofing(stream, spec);
    case AttackKind::Replay: return inject_replay(stream, spec);
  }
  throw Error(ErrorCode::InvalidSpec, "unknown attack kind");
}

LabeledStream mix_attacks(const LabeledStream& stream, std::span<const AttackSpec> specs) {
  LabeledStream out = stream;
  for (const auto& spec : specs) out = inject(out, spec);
  return out;
}

std::vector<AttackSpec> plan_attacks(const LabeledStream& normal, const AttackPlan& plan) {
  if (plan.kinds.empty() || normal.frames.empty()) return {};
  if (plan.segment_us == 0) throw Error(ErrorCode::InvalidSpec, "segment length must be > 0");
  if (plan.replay_source_us == 0 || plan.replay_source_us > plan.segment_us) {
    throw Error(ErrorCode::InvalidSpec, "replay source must fit in one segment");
  }

  // Spoofing targets: the most frequent IDs are the likeliest to exist in
  // every window, which keeps targets valid for any segment.
  std::map<std::uint32_t, std::size_t> counts;
  for (const auto& f : normal.frames) {
    if (!f.is_injected() && !f.extended) ++counts[f.id];
  }
  std::vector<std::pair<std::size_t, std::uint32_t>> ranked;
  for (auto [id, n] : counts) ranked.emplace_back(n, id);
  std::sort(ranked.begin(), ranked.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  SeededRng rng(plan.seed);
  std::vector<std::uint32_t> targets;
  // Pick among the top half so targets are legitimate but not always the same.
  const auto pick_from = std::max<std::size_t>(1, ranked.size() / 2);
  while (targets.size() < std::min(plan.spoof_targets, ranked.size())) {
    const auto id = ranked[rng.below(pick_from)].second;
    if (std::find(targets.begin(), targets.end(), id) == targets.end()) targets.push_back(id);
    if (targets.size() == pick_from) break;
  }

  const auto first = normal.frames.front().timestamp_us;
  const auto last = normal.frames.back().timestamp_us;
  std::vector<AttackSpec> specs;
  std::size_t attacked = 0;
  // Attack-free gaps of segment_us alternate with attack segments shortened
  // by 1/(1 + intensity), so both labels get about the same window count.
  for (auto start = first + plan.segment_us; start <= last;) {
    AttackSpec spec;
    spec.kind = plan.kinds[attacked % plan.kinds.size()];
    auto it = plan.intensity.find(spec.kind);
    spec.intensity = it == plan.intensity.end() ? 0.5 : it->second;
    const auto length = plan.balance_windows
                            ? static_cast<std::uint64_t>(static_cast<double>(plan.segment_us) / (1.0 + spec.intensity))
                            : plan.segment_us;
    spec.start_us = start;
    spec.end_us = std::min(start + std::max<std::uint64_t>(length, 1), last + 1);
    spec.seed = derive_seed(plan.seed, attacked);
    spec.target_ids = targets;
    spec.source_end_us = start;
    spec.source_start_us = start - plan.replay_source_us;
    specs.push_back(spec);
    ++attacked;
    start = spec.end_us + plan.segment_us;
  }
  return specs;
}

std::size_t count_attacked_windows(std::span<const CanFrame> frames, std::size_t window_size, std::size_t stride) {
  if (window_size == 0 || stride == 0 || frames.size() < window_size) return 0;
  const std::size_t windows = (frames.size() - window_size) / stride + 1;
  // Prefix count of injected frames; window w is attacked iff its range holds one.
  std::vector<std::size_t> prefix(frames.size() + 1, 0);
  for (std::size_t i = 0; i < frames.size(); ++i) prefix[i + 1] = prefix[i] + (frames[i].is_injected() ? 1 : 0);
  std::size_t attacked = 0;
  for (std::size_t w = 0; w < windows; ++w) {
    const auto lo = w * stride;
    if (prefix[lo + window_size] > prefix[lo]) ++attacked;
  }
  return attacked;
}

std::string manifest_to_json(const Manifest& manifest, std::size_t window_size, std::size_t attacked_windows) {
  nlohmann::ordered_json j;
  j["prng"] = manifest.prng;
  j["seed"] = manifest.seed;
  j["normal_frames"] = manifest.normal_frames;
  j["injected_frames"] = manifest.injected_total();
  nlohmann::ordered_json kinds = nlohmann::ordered_json::object();
  for (auto [kind, n] : manifest.injected_by_kind()) kinds[std::string(to_string(kind))] = n;
  j["injected_by_kind"] = kinds;
  j["attacks"] = nlohmann::ordered_json::array();
  for (const auto& a : manifest.attacks) {
    j["attacks"].push_back({{"kind", to_string(a.kind)},
                            {"start_us", a.start_us},
                            {"end_us", a.end_us},
                            {"intensity", a.intensity},
                            {"seed", a.seed},
                            {"injected", a.injected}});
  }
  j["window_size"] = window_size;
  j["attacked_windows"] = attacked_windows;
  return j.dump(2);
}

}  // namespace canids
