#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "canids/graph_builder.hpp"
#include "canids/pipeline.hpp"

namespace canids {
namespace {

CanFrame frame(std::uint32_t id, bool extended = false, bool injected = false) {
  CanFrame f;
  f.id = id;
  f.extended = extended;
  if (injected) f.injected = AttackKind::DoS;
  return f;
}

std::vector<CanFrame> frames_of(std::initializer_list<std::uint32_t> ids) {
  std::vector<CanFrame> out;
  for (auto id : ids) out.push_back(frame(id));
  return out;
}

std::vector<CanFrame> random_frames(std::size_t n, std::uint32_t id_range, std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<CanFrame> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto f = frame(static_cast<std::uint32_t>(rng.below(id_range)), rng.below(8) == 0, rng.below(50) == 0);
    f.timestamp_us = i;
    out.push_back(f);
  }
  return out;
}

// Independent oracle: counts consecutive pairs by node identity with a map.
std::map<std::pair<NodeId, NodeId>, std::size_t> brute_edges(std::span<const CanFrame> window) {
  std::map<std::pair<NodeId, NodeId>, std::size_t> edges;
  for (std::size_t k = 0; k + 1 < window.size(); ++k) {
    ++edges[{NodeId{window[k].id, window[k].extended}, NodeId{window[k + 1].id, window[k + 1].extended}}];
  }
  return edges;
}

TEST(BuildGraph, WorkedExample) {
  // A B A C A: nodes A, B, C; edges A->B, B->A, A->C, C->A.
  const auto frames = frames_of({0xA, 0xB, 0xA, 0xC, 0xA});
  const auto g = build_graph(frames);
  ASSERT_EQ(g.node_count(), 3u);
  EXPECT_EQ(g.node_ids[0].id, 0xAu);
  EXPECT_EQ(g.node_ids[1].id, 0xBu);
  EXPECT_EQ(g.node_ids[2].id, 0xCu);
  const std::vector<Edge> expected = {{0, 1, 1}, {0, 2, 1}, {1, 0, 1}, {2, 0, 1}};
  EXPECT_EQ(g.edges, expected);
  EXPECT_EQ(g.in_degree, (std::vector<std::size_t>{2, 1, 1}));
  EXPECT_EQ(g.out_degree, (std::vector<std::size_t>{2, 1, 1}));
  EXPECT_EQ(g.label, GraphLabel::AttackFree);
}

TEST(BuildGraph, SelfLoopsAndMultiplicity) {
  const auto g = build_graph(frames_of({1, 1, 1, 2, 1, 2}));
  const std::vector<Edge> expected = {{0, 0, 2}, {0, 1, 2}, {1, 0, 1}};
  EXPECT_EQ(g.edges, expected);
  EXPECT_EQ(g.out_degree, (std::vector<std::size_t>{4, 1}));
  EXPECT_EQ(g.in_degree, (std::vector<std::size_t>{3, 2}));
}

TEST(BuildGraph, ExtendedAndStandardAreDistinct) {
  std::vector<CanFrame> w = {frame(0x10), frame(0x10, true), frame(0x10)};
  const auto g = build_graph(w);
  EXPECT_EQ(g.node_count(), 2u);
}

TEST(BuildGraph, LabelFromAnyInjectedFrame) {
  auto w = frames_of({1, 2, 3, 4});
  w[3].injected = AttackKind::Replay;
  EXPECT_EQ(build_graph(w).label, GraphLabel::Attacked);
}

TEST(BuildGraph, RejectsTinyWindow) {
  const auto w = frames_of({1});
  EXPECT_THROW(build_graph(w), Error);
}

TEST(BuildGraph, MatchesBruteForceOracle) {
  const auto frames = random_frames(4000, 30, 3);
  for (const auto& g : build_graphs(frames, 200, 200)) {
    const auto window = std::span<const CanFrame>(frames).subspan(g.window_index * 200, 200);
    const auto oracle = brute_edges(window);
    std::map<std::pair<NodeId, NodeId>, std::size_t> got;
    std::size_t total = 0;
    for (const auto& e : g.edges) {
      ASSERT_GE(e.multiplicity, 1u);
      got[{g.node_ids[e.src], g.node_ids[e.dst]}] = e.multiplicity;
      total += e.multiplicity;
    }
    EXPECT_EQ(got, oracle);
    EXPECT_EQ(total, 199u);
  }
}

TEST(BuildGraph, DegreeConservation) {
  const auto frames = random_frames(20'000, 60, 9);
  for (const auto& g : build_graphs(frames, 150, 50)) {
    std::size_t in = 0, out = 0;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      in += g.in_degree[i];
      out += g.out_degree[i];
      // Each node is entered and left once per occurrence, except at the window ends.
      const auto diff = static_cast<long long>(g.in_degree[i]) - static_cast<long long>(g.out_degree[i]);
      EXPECT_LE(std::llabs(diff), 1);
    }
    EXPECT_EQ(in, 149u);
    EXPECT_EQ(out, 149u);
  }
}

TEST(BuildGraph, EdgesSortedAndUnique) {
  const auto frames = random_frames(1000, 20, 4);
  const auto g = build_graph(frames);
  for (std::size_t i = 1; i < g.edges.size(); ++i) {
    EXPECT_LT(std::tie(g.edges[i - 1].src, g.edges[i - 1].dst), std::tie(g.edges[i].src, g.edges[i].dst));
  }
}

TEST(BuildWindows, CountsAndOffsets) {
  const auto frames = random_frames(1000, 10, 1);
  EXPECT_EQ(build_windows(frames, 200, 200).size(), 5u);
  EXPECT_EQ(build_windows(frames, 300, 300).size(), 3u);  // trailing 100 dropped
  const auto sliding = build_windows(frames, 200, 100);
  ASSERT_EQ(sliding.size(), 9u);
  EXPECT_EQ(sliding[3].data(), frames.data() + 300);
  EXPECT_TRUE(build_windows(std::span<const CanFrame>(frames).first(199), 200, 200).empty());
}

TEST(BuildWindows, Errors) {
  const auto frames = random_frames(10, 3, 1);
  try {
    build_windows(frames, 1, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WindowTooSmall);
  }
  try {
    build_windows(frames, 5, 6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidSpec);
  }
  EXPECT_THROW(build_windows(frames, 5, 0), Error);
}

TEST(BuildGraphs, ParallelMatchesSerial) {
  const auto frames = synthesize(scenario_synth_config(Scenario::MixedDFSR, 40'000, 2)).frames;
  EXPECT_EQ(build_graphs(frames), serial::build_graphs(frames));
  EXPECT_EQ(build_graphs(frames, 100, 37), serial::build_graphs(frames, 100, 37));
}

TEST(BuildGraphs, LabelsMatchWindowCount) {
  const auto frames = synthesize(scenario_synth_config(Scenario::Spoofing, 40'000, 6)).frames;
  const auto graphs = build_graphs(frames);
  std::size_t attacked = 0;
  for (const auto& g : graphs) attacked += g.label == GraphLabel::Attacked;
  EXPECT_EQ(attacked, count_attacked_windows(frames, 200, 200));
  EXPECT_GT(attacked, 0u);
  EXPECT_LT(attacked, graphs.size());
}

TEST(NodeFeatures, DegreesAndNormalization) {
  const auto g = build_graph(frames_of({1, 1, 1, 2, 1, 2}));
  const auto x = node_features(g);
  EXPECT_EQ(x, (DenseMatrix{{3, 4}, {2, 1}}));
  const auto xn = node_features(g, true);
  EXPECT_EQ(xn, (DenseMatrix{{1.0, 1.0}, {2.0 / 3.0, 0.25}}));
}

TEST(ConvAdjacency, RawDirected) {
  const auto g = build_graph(frames_of({1, 2, 2, 3}));
  EXPECT_EQ(conv_adjacency(g, AdjacencyMode::RawDirected), (DenseMatrix{{0, 1, 0}, {0, 1, 1}, {0, 0, 0}}));
}

TEST(ConvAdjacency, SymNormOracle) {
  const auto frames = random_frames(300, 25, 12);
  const auto g = build_graph(frames);
  const auto a = conv_adjacency(g);
  const auto n = g.node_count();
  // Oracle: symmetric binary pattern with self loops, then D^-1/2 . D^-1/2.
  std::vector<std::vector<int>> m(n, std::vector<int>(n, 0));
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    std::size_t i = 0, j = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (g.node_ids[t] == NodeId{frames[k].id, frames[k].extended}) i = t;
      if (g.node_ids[t] == NodeId{frames[k + 1].id, frames[k + 1].extended}) j = t;
    }
    m[i][j] = m[j][i] = 1;
  }
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    m[i][i] = 1;
    for (std::size_t j = 0; j < n; ++j) d[i] += m[i][j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_NEAR(a(i, j), m[i][j] / std::sqrt(d[i] * d[j]), 1e-15);
      EXPECT_EQ(a(i, j), a(j, i));
    }
  }
}

TEST(ConvAdjacency, ModeNames) {
  EXPECT_EQ(parse_adjacency_mode("raw"), AdjacencyMode::RawDirected);
  EXPECT_EQ(parse_adjacency_mode(to_string(AdjacencyMode::SymNormSelfLoop)), AdjacencyMode::SymNormSelfLoop);
  EXPECT_THROW(parse_adjacency_mode("dense"), Error);
}

TEST(BatchGraphs, BlockStructure) {
  const auto a = build_graph(frames_of({1, 2, 3, 1}));
  const auto b = build_graph(frames_of({5, 5, 6}));
  const std::vector<MessageGraph> graphs = {a, b};
  const auto batch = batch_graphs(graphs);
  EXPECT_EQ(batch.graph_count(), 2u);
  EXPECT_EQ(batch.node_count(), 5u);
  EXPECT_EQ(batch.graph_of_node, (std::vector<std::size_t>{0, 0, 0, 1, 1}));
  const auto dense = batch.dense_adjacency();
  const auto ca = conv_adjacency(a), cb = conv_adjacency(b);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double expected = 0.0;
      if (i < 3 && j < 3) expected = ca(i, j);
      if (i >= 3 && j >= 3) expected = cb(i - 3, j - 3);
      EXPECT_EQ(dense(i, j), expected);
    }
  }
  EXPECT_EQ(batch.features(3, 0), 1.0);  // node 5: in-degree 1 (from self loop)
  EXPECT_EQ(batch.features(3, 1), 2.0);
}

TEST(BatchGraphs, EmptyAndStale) {
  std::vector<GraphTensors> none;
  try {
    batch_graphs(std::span<const GraphTensors>(none));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyBatch);
  }
  auto t = prepare_graph(build_graph(frames_of({1, 2, 3})));
  t.adjacency = DenseMatrix::identity(2);
  t.features = DenseMatrix(2, 2);
  std::vector<GraphTensors> one = {t};
  EXPECT_THROW(batch_graphs(std::span<const GraphTensors>(one)), Error);
  t.sparse_adjacency.reset();
  one = {t};
  EXPECT_EQ(batch_graphs(std::span<const GraphTensors>(one)).node_count(), 2u);
}

TEST(GraphDump, RoundTrip) {
  auto frames = random_frames(2000, 40, 5);
  const auto graphs = build_graphs(frames);
  std::stringstream buf;
  write_graph_dump(buf, graphs);
  EXPECT_EQ(read_graph_dump(buf), graphs);
}

TEST(GraphDump, Format) {
  const auto g = build_graph(frames_of({0x316, 0x18f, 0x316}));
  EXPECT_EQ(graph_to_json(g),
            R"({"window_index":0,"window_size":3,"nodes":["316","18f"],"edges":[[0,1,1],[1,0,1]],"label":"attack_free"})");
}

TEST(GraphDump, RejectsInconsistentRecords) {
  const char* bad[] = {
      R"({"window_index":0,"window_size":3,"nodes":["316"],"edges":[[0,1,2]],"label":"attack_free"})",
      R"({"window_index":0,"window_size":4,"nodes":["316"],"edges":[[0,0,2]],"label":"attack_free"})",
      R"({"window_index":0,"window_size":3,"nodes":["316"],"edges":[[0,0,2]],"label":"maybe"})",
      R"({"window_index":0})",
      "not json",
  };
  for (const auto* line : bad) {
    try {
      graph_from_json(line);
      ADD_FAILURE() << line;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidSpec) << line;
    }
  }
}

}  // namespace
}  // namespace canids
