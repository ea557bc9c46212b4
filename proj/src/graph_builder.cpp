#include "canids/graph_builder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <tuple>
#include <unordered_map>

#include "json.hpp"

namespace canids {

namespace {

std::uint64_t node_key(const CanFrame& f) {
  return (static_cast<std::uint64_t>(f.extended) << 32) | f.id;
}

std::string node_hex(const NodeId& n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, n.extended ? "%08x" : "%03x", n.id);
  return buf;
}

void fill_degrees(MessageGraph& g) {
  g.in_degree.assign(g.node_ids.size(), 0);
  g.out_degree.assign(g.node_ids.size(), 0);
  for (const auto& e : g.edges) {
    g.out_degree[e.src] += e.multiplicity;
    g.in_degree[e.dst] += e.multiplicity;
  }
}

}  // namespace

std::vector<std::span<const CanFrame>> build_windows(std::span<const CanFrame> frames, std::size_t window_size,
                                                     std::size_t stride) {
  if (window_size < 2) throw Error(ErrorCode::WindowTooSmall, "window size must be >= 2");
  if (stride < 1 || stride > window_size) throw Error(ErrorCode::InvalidSpec, "stride must be in [1, window size]");
  std::vector<std::span<const CanFrame>> windows;
  for (std::size_t off = 0; off + window_size <= frames.size(); off += stride) {
    windows.push_back(frames.subspan(off, window_size));
  }
  return windows;
}

MessageGraph build_graph(std::span<const CanFrame> window, std::size_t window_index) {
  if (window.size() < 2) throw Error(ErrorCode::WindowTooSmall, "a graph needs at least 2 frames");
  MessageGraph g;
  g.window_index = window_index;
  g.window_size = window.size();

  std::unordered_map<std::uint64_t, std::size_t> index;
  std::vector<std::size_t> seq;
  seq.reserve(window.size());
  bool attacked = false;
  for (const auto& f : window) {
    auto [it, fresh] = index.try_emplace(node_key(f), g.node_ids.size());
    if (fresh) g.node_ids.push_back({f.id, f.extended});
    seq.push_back(it->second);
    attacked = attacked || f.is_injected();
  }
  g.label = attacked ? GraphLabel::Attacked : GraphLabel::AttackFree;

  std::vector<std::uint64_t> pairs;
  pairs.reserve(seq.size() - 1);
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
    pairs.push_back((static_cast<std::uint64_t>(seq[k]) << 32) | seq[k + 1]);
  }
  std::sort(pairs.begin(), pairs.end());
  for (std::size_t i = 0; i < pairs.size();) {
    std::size_t j = i;
    while (j < pairs.size() && pairs[j] == pairs[i]) ++j;
    g.edges.push_back({static_cast<std::size_t>(pairs[i] >> 32), static_cast<std::size_t>(pairs[i] & 0xFFFF'FFFFu), j - i});
    i = j;
  }
  fill_degrees(g);
  return g;
}

std::vector<MessageGraph> build_graphs(std::span<const CanFrame> frames, std::size_t window_size, std::size_t stride) {
  const auto windows = build_windows(frames, window_size, stride);
  std::vector<MessageGraph> graphs(windows.size());
  const auto n = static_cast<std::ptrdiff_t>(windows.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t w = 0; w < n; ++w) {
    graphs[static_cast<std::size_t>(w)] = build_graph(windows[static_cast<std::size_t>(w)], static_cast<std::size_t>(w));
  }
  return graphs;
}

namespace serial {

std::vector<MessageGraph> build_graphs(std::span<const CanFrame> frames, std::size_t window_size, std::size_t stride) {
  std::vector<MessageGraph> graphs;
  std::size_t w = 0;
  for (auto window : build_windows(frames, window_size, stride)) graphs.push_back(build_graph(window, w++));
  return graphs;
}

}  // namespace serial

DenseMatrix node_features(const MessageGraph& graph, bool normalize) {
  const auto n = graph.node_count();
  DenseMatrix x(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(graph.in_degree[i]);
    x(i, 1) = static_cast<double>(graph.out_degree[i]);
  }
  if (normalize) {
    for (std::size_t c = 0; c < 2; ++c) {
      double peak = 0.0;
      for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, x(i, c));
      if (peak > 0.0) {
        for (std::size_t i = 0; i < n; ++i) x(i, c) /= peak;
      }
    }
  }
  return x;
}

std::string_view to_string(AdjacencyMode mode) noexcept {
  return mode == AdjacencyMode::RawDirected ? "raw" : "symnorm";
}

AdjacencyMode parse_adjacency_mode(std::string_view text) {
  if (text == "raw") return AdjacencyMode::RawDirected;
  if (text == "symnorm") return AdjacencyMode::SymNormSelfLoop;
  throw Error(ErrorCode::BadConfig, "adjacency mode must be 'raw' or 'symnorm', got '" + std::string(text) + "'");
}

DenseMatrix conv_adjacency(const MessageGraph& graph, AdjacencyMode mode) {
  const auto n = graph.node_count();
  DenseMatrix a(n, n);
  if (mode == AdjacencyMode::RawDirected) {
    for (const auto& e : graph.edges) a(e.src, e.dst) = 1.0;
    return a;
  }
  for (const auto& e : graph.edges) {
    a(e.src, e.dst) = 1.0;
    a(e.dst, e.src) = 1.0;
  }
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (auto v : a.row(i)) deg += v;
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) *= inv_sqrt[i] * inv_sqrt[j];
  return a;
}

GraphTensors prepare_graph(const MessageGraph& graph, AdjacencyMode mode, bool normalize_features) {
  GraphTensors t{conv_adjacency(graph, mode), node_features(graph, normalize_features), graph.label, nullptr};
  t.sparse_adjacency = std::make_shared<const SparseMatrix>(SparseMatrix::from_dense(t.adjacency));
  return t;
}

GraphBatch batch_graphs(std::span<const GraphTensors* const> graphs) {
  if (graphs.empty()) throw Error(ErrorCode::EmptyBatch, "cannot batch zero graphs");
  GraphBatch batch;
  std::vector<BlockDiagonal::Block> blocks;
  blocks.reserve(graphs.size());
  std::size_t rows = 0;
  for (const auto* g : graphs) {
    if (g->features.cols() != 2) throw Error(ErrorCode::ShapeMismatch, "node features must have 2 columns");
    if (g->adjacency.rows() != g->features.rows()) throw Error(ErrorCode::ShapeMismatch, "adjacency vs features");
    if (g->sparse_adjacency && g->sparse_adjacency->rows() != g->adjacency.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "stale sparse adjacency");
    }
    rows += g->features.rows();
  }
  batch.features = DenseMatrix(rows, 2);
  batch.graph_of_node.reserve(rows);
  std::size_t r = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto& g = *graphs[gi];
    for (std::size_t i = 0; i < g.features.rows(); ++i, ++r) {
      batch.features(r, 0) = g.features(i, 0);
      batch.features(r, 1) = g.features(i, 1);
      batch.graph_of_node.push_back(gi);
    }
    blocks.push_back(g.sparse_adjacency ? g.sparse_adjacency
                                        : std::make_shared<const SparseMatrix>(SparseMatrix::from_dense(g.adjacency)));
    batch.labels.push_back(g.label);
  }
  batch.adjacency = BlockDiagonal(std::move(blocks));
  return batch;
}

GraphBatch batch_graphs(std::span<const GraphTensors> graphs) {
  std::vector<const GraphTensors*> ptrs;
  ptrs.reserve(graphs.size());
  for (const auto& g : graphs) ptrs.push_back(&g);
  return batch_graphs(std::span<const GraphTensors* const>(ptrs));
}

GraphBatch batch_graphs(std::span<const MessageGraph> graphs, AdjacencyMode mode, bool normalize_features) {
  std::vector<GraphTensors> tensors;
  tensors.reserve(graphs.size());
  for (const auto& g : graphs) tensors.push_back(prepare_graph(g, mode, normalize_features));
  return batch_graphs(std::span<const GraphTensors>(tensors));
}

std::string graph_to_json(const MessageGraph& graph) {
  nlohmann::ordered_json j;
  j["window_index"] = graph.window_index;
  j["window_size"] = graph.window_size;
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& n : graph.node_ids) nodes.push_back(node_hex(n));
  j["nodes"] = std::move(nodes);
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : graph.edges) edges.push_back({e.src, e.dst, e.multiplicity});
  j["edges"] = std::move(edges);
  j["label"] = graph.label == GraphLabel::Attacked ? "attacked" : "attack_free";
  return j.dump();
}

MessageGraph graph_from_json(std::string_view line) {
  MessageGraph g;
  try {
    const auto j = nlohmann::json::parse(line);
    g.window_index = j.at("window_index").get<std::size_t>();
    g.window_size = j.at("window_size").get<std::size_t>();
    for (const auto& n : j.at("nodes")) {
      const auto hex = n.get<std::string>();
      if (hex.empty() || hex.size() > 8) throw Error(ErrorCode::InvalidSpec, "bad node id '" + hex + "'");
      g.node_ids.push_back({static_cast<std::uint32_t>(std::stoul(hex, nullptr, 16)), hex.size() > 4});
    }
    for (const auto& e : j.at("edges")) {
      g.edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<std::size_t>()});
    }
    const auto label = j.at("label").get<std::string>();
    if (label == "attacked") {
      g.label = GraphLabel::Attacked;
    } else if (label == "attack_free") {
      g.label = GraphLabel::AttackFree;
    } else {
      throw Error(ErrorCode::InvalidSpec, "bad label '" + label + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("graph record: ") + e.what());
  } catch (const std::logic_error& e) {  // stoul
    throw Error(ErrorCode::InvalidSpec, std::string("graph record: ") + e.what());
  }
  std::size_t total = 0;
  for (const auto& e : g.edges) {
    if (e.src >= g.node_ids.size() || e.dst >= g.node_ids.size() || e.multiplicity == 0) {
      throw Error(ErrorCode::InvalidSpec, "edge out of range in window " + std::to_string(g.window_index));
    }
    total += e.multiplicity;
  }
  if (g.window_size < 2 || total != g.window_size - 1) {
    throw Error(ErrorCode::InvalidSpec, "edge multiplicities do not sum to window_size - 1");
  }
  std::sort(g.edges.begin(), g.edges.end(),
            [](const Edge& a, const Edge& b) { return std::tie(a.src, a.dst) < std::tie(b.src, b.dst); });
  fill_degrees(g);
  return g;
}

void write_graph_dump(std::ostream& out, std::span<const MessageGraph> graphs) {
  for (const auto& g : graphs) out << graph_to_json(g) << '\n';
}

std::vector<MessageGraph> read_graph_dump(std::istream& in) {
  std::vector<MessageGraph> graphs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    graphs.push_back(graph_from_json(line));
  }
  return graphs;
}

}  // namespace canids
