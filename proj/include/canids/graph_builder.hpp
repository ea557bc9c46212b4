#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "canids/can_log.hpp"
#include "canids/matrix.hpp"

namespace canids {

/// Arbitration ID as a graph node key; standard and extended IDs with the
/// same numeric value are different nodes.
struct NodeId {
  std::uint32_t id = 0;
  bool extended = false;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

enum class GraphLabel : std::uint8_t { AttackFree = 0, Attacked = 1 };

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  std::size_t multiplicity = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Directed multigraph of one window: nodes are the window's distinct IDs in
/// first-appearance order, and every consecutive frame pair (a, b) adds one
/// occurrence of edge a -> b. Degrees count occurrences, so for a window of W
/// frames the in-degrees, the out-degrees and the multiplicities each sum to
/// W - 1.
struct MessageGraph {
  std::size_t window_index = 0;
  std::size_t window_size = 0;
  std::vector<NodeId> node_ids;
  std::vector<Edge> edges;  // sorted by (src, dst), multiplicity >= 1
  std::vector<std::size_t> in_degree;
  std::vector<std::size_t> out_degree;
  GraphLabel label = GraphLabel::AttackFree;

  std::size_t node_count() const noexcept { return node_ids.size(); }
  friend bool operator==(const MessageGraph&, const MessageGraph&) = default;
};

/// Windows at offsets 0, stride, 2*stride, ...; a trailing partial window is
/// dropped. Throws WindowTooSmall if window_size < 2 and InvalidSpec if stride
/// is outside [1, window_size].
std::vector<std::span<const CanFrame>> build_windows(std::span<const CanFrame> frames, std::size_t window_size = 200,
                                                     std::size_t stride = 200);

MessageGraph build_graph(std::span<const CanFrame> window, std::size_t window_index = 0);

/// build_windows + build_graph over every window. Windows are independent, so
/// graphs are built in parallel and collected in window order.
std::vector<MessageGraph> build_graphs(std::span<const CanFrame> frames, std::size_t window_size = 200,
                                       std::size_t stride = 200);

namespace serial {
std::vector<MessageGraph> build_graphs(std::span<const CanFrame> frames, std::size_t window_size = 200,
                                       std::size_t stride = 200);
}  // namespace serial

/// n x 2 matrix of (in-degree, out-degree). With `normalize`, each column is
/// divided by its maximum (columns with maximum 0 stay 0).
DenseMatrix node_features(const MessageGraph& graph, bool normalize = false);

enum class AdjacencyMode : std::uint8_t {
  RawDirected,      // A(i, j) = 1 iff edge i -> j exists
  SymNormSelfLoop,  // D^-1/2 (binarize(A | A^T) + I) D^-1/2
};

std::string_view to_string(AdjacencyMode mode) noexcept;
AdjacencyMode parse_adjacency_mode(std::string_view text);

DenseMatrix conv_adjacency(const MessageGraph& graph, AdjacencyMode mode = AdjacencyMode::SymNormSelfLoop);

/// Convolution-ready tensors of a single graph.
struct GraphTensors {
  DenseMatrix adjacency;
  DenseMatrix features;
  GraphLabel label = GraphLabel::AttackFree;
  // Sparse copy of `adjacency` set by prepare_graph and shared by every batch
  // the graph joins; when null, batch_graphs converts `adjacency` itself.
  BlockDiagonal::Block sparse_adjacency;
};

GraphTensors prepare_graph(const MessageGraph& graph, AdjacencyMode mode = AdjacencyMode::SymNormSelfLoop,
                           bool normalize_features = false);

/// Several graphs as one disconnected graph: adjacency blocks on the
/// diagonal, feature rows stacked, and `graph_of_node` mapping each row back
/// to its graph.
struct GraphBatch {
  BlockDiagonal adjacency;
  DenseMatrix features;
  std::vector<std::size_t> graph_of_node;
  std::vector<GraphLabel> labels;

  std::size_t graph_count() const noexcept { return labels.size(); }
  std::size_t node_count() const noexcept { return graph_of_node.size(); }
  DenseMatrix dense_adjacency() const { return adjacency.to_dense(); }
};

/// Throws EmptyBatch for an empty list.
GraphBatch batch_graphs(std::span<const GraphTensors> graphs);
GraphBatch batch_graphs(std::span<const GraphTensors* const> graphs);
GraphBatch batch_graphs(std::span<const MessageGraph> graphs, AdjacencyMode mode = AdjacencyMode::SymNormSelfLoop,
                        bool normalize_features = false);

// Graph dump: one JSON object per line with window_index, window_size,
// nodes (hex strings), edges ([src, dst, multiplicity]) and label.
std::string graph_to_json(const MessageGraph& graph);
/// Rebuilds degrees from the edge list; throws InvalidSpec on inconsistent records.
MessageGraph graph_from_json(std::string_view line);
void write_graph_dump(std::ostream& out, std::span<const MessageGraph> graphs);
std::vector<MessageGraph> read_graph_dump(std::istream& in);

}  // namespace canids
