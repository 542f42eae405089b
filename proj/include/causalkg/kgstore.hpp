#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "causalkg/corpus.hpp"
#include "causalkg/extraction.hpp"

namespace causalkg {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

struct Occurrence {
  Timestamp timestamp = 0;
  TweetId tweet = 0;

  auto operator<=>(const Occurrence&) const = default;
};

struct Edge {
  NodeId src = 0;
  std::string rel;
  NodeId dst = 0;
  std::vector<Occurrence> occurrences;  // sorted, unique, nonempty

  bool operator==(const Edge&) const = default;
};

// Edge identity by node names, used in indexes and traces.
struct EdgeKey {
  std::string src;
  std::string rel;
  std::string dst;

  auto operator<=>(const EdgeKey&) const = default;
};

enum class Direction { kOut, kIn, kBoth };

struct Neighbor {
  EdgeId edge = 0;
  NodeId node = 0;
};

struct MergeResult {
  int nodes_created = 0;
  bool edge_created = false;
};

struct ProvenanceSentence {
  Timestamp timestamp = 0;
  TweetId tweet = 0;
  std::string text;

  bool operator==(const ProvenanceSentence&) const = default;
};

/// Temporal labeled-property graph with MERGE semantics.
///
/// Nodes are identified by normalized entity name, edges by (src, rel, dst);
/// each edge keeps the sorted list of (timestamp, tweet) occurrences that
/// asserted it.
class TemporalGraph {
 public:
  MergeResult merge(const Triple& triple);

  std::size_t node_count() const { return names_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const std::string& name(NodeId id) const { return names_.at(id); }
  std::optional<NodeId> find_node(std::string_view name) const;
  std::optional<EdgeId> find_edge(NodeId src, std::string_view rel, NodeId dst) const;

  const Edge& edge(EdgeId id) const { return edges_.at(id); }
  std::span<const Edge> edges() const { return edges_; }
  EdgeKey key(EdgeId id) const;

  // Ordered by neighbor id, then relation, then edge id. kBoth lists a
  // self-loop once. Throws UnknownNode.
  std::vector<Neighbor> neighbors(NodeId n, Direction direction) const;

  bool operator==(const TemporalGraph& other) const {
    return names_ == other.names_ && edges_ == other.edges_;
  }

  // nodes.jsonl + edges.jsonl in `dir`.
  void save(const std::filesystem::path& dir) const;
  static TemporalGraph load(const std::filesystem::path& dir);

 private:
  NodeId intern(const std::string& name, int& created);
  void check_node(NodeId n) const;

  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<Edge> edges_;
  std::map<std::tuple<NodeId, std::string, NodeId>, EdgeId, std::less<>> edge_index_;
  std::vector<std::vector<EdgeId>> out_;
  std::vector<std::vector<EdgeId>> in_;
};

TemporalGraph build_graph(std::span<const Triple> triples);

// Tweets behind every edge whose endpoints are both in `nodes`, deduplicated
// and sorted by (timestamp, tweet id). Tweets missing from the store are
// skipped.
std::vector<ProvenanceSentence> provenance_sentences(const TemporalGraph& g, std::span<const NodeId> nodes,
                                                     const TweetStore& corpus);

}  // namespace causalkg
