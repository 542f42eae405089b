#include "causalkg/kgstore.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "causalkg/error.hpp"
#include "causalkg/text.hpp"

namespace causalkg {

using ordered_json = nlohmann::ordered_json;

NodeId TemporalGraph::intern(const std::string& name, int& created) {
  if (auto it = index_.find(name); it != index_.end()) return it->second;
  const auto id = static_cast<NodeId>(names_.size());
  names_.push_back(name);
  index_.emplace(name, id);
  out_.emplace_back();
  in_.emplace_back();
  ++created;
  return id;
}

MergeResult TemporalGraph::merge(const Triple& triple) {
  MergeResult result;
  const NodeId src = intern(text::normalize_phrase(triple.subject), result.nodes_created);
  const NodeId dst = intern(text::normalize_phrase(triple.object), result.nodes_created);
  const std::string rel = text::normalize_phrase(triple.relation);

  EdgeId id;
  auto key = std::make_tuple(src, rel, dst);
  if (auto it = edge_index_.find(key); it != edge_index_.end()) {
    id = it->second;
  } else {
    id = static_cast<EdgeId>(edges_.size());
    edges_.push_back(Edge{src, rel, dst, {}});
    edge_index_.emplace(std::move(key), id);
    out_[src].push_back(id);
    in_[dst].push_back(id);
    result.edge_created = true;
  }

  auto& occ = edges_[id].occurrences;
  const Occurrence o{triple.timestamp, triple.source};
  auto pos = std::lower_bound(occ.begin(), occ.end(), o);
  if (pos == occ.end() || *pos != o) occ.insert(pos, o);
  return result;
}

std::optional<NodeId> TemporalGraph::find_node(std::string_view name) const {
  auto it = index_.find(text::normalize_phrase(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<EdgeId> TemporalGraph::find_edge(NodeId src, std::string_view rel, NodeId dst) const {
  auto it = edge_index_.find(std::make_tuple(src, std::string(rel), dst));
  if (it == edge_index_.end()) return std::nullopt;
  return it->second;
}

EdgeKey TemporalGraph::key(EdgeId id) const {
  const Edge& e = edges_.at(id);
  return EdgeKey{names_[e.src], e.rel, names_[e.dst]};
}

void TemporalGraph::check_node(NodeId n) const {
  if (n >= names_.size()) throw data_error("UnknownNode", std::to_string(n));
}

std::vector<Neighbor> TemporalGraph::neighbors(NodeId n, Direction direction) const {
  check_node(n);
  std::vector<Neighbor> out;
  if (direction != Direction::kIn) {
    for (EdgeId e : out_[n]) out.push_back({e, edges_[e].dst});
  }
  if (direction != Direction::kOut) {
    for (EdgeId e : in_[n]) {
      // A self-loop is already listed as outgoing.
      if (direction == Direction::kBoth && edges_[e].src == n) continue;
      out.push_back({e, edges_[e].src});
    }
  }
  std::sort(out.begin(), out.end(), [this](const Neighbor& a, const Neighbor& b) {
    if (a.node != b.node) return a.node < b.node;
    if (edges_[a.edge].rel != edges_[b.edge].rel) return edges_[a.edge].rel < edges_[b.edge].rel;
    return a.edge < b.edge;
  });
  return out;
}

void TemporalGraph::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "nodes.jsonl", std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + (dir / "nodes.jsonl").string());
    for (std::size_t i = 0; i < names_.size(); ++i) {
      ordered_json line = {{"id", i}, {"name", names_[i]}};
      out << line.dump() << '\n';
    }
    if (!out) throw io_error("write failed: nodes.jsonl");
  }
  std::ofstream out(dir / "edges.jsonl", std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + (dir / "edges.jsonl").string());
  for (const auto& e : edges_) {
    ordered_json occ = ordered_json::array();
    for (const auto& o : e.occurrences) occ.push_back({o.timestamp, o.tweet});
    ordered_json line = {{"src", e.src}, {"rel", e.rel}, {"dst", e.dst}, {"occ", std::move(occ)}};
    out << line.dump() << '\n';
  }
  if (!out) throw io_error("write failed: edges.jsonl");
}

TemporalGraph TemporalGraph::load(const std::filesystem::path& dir) {
  TemporalGraph g;
  auto open = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw io_error("cannot open " + p.string());
    return in;
  };

  const auto nodes_path = dir / "nodes.jsonl";
  auto nodes_in = open(nodes_path);
  std::string line;
  std::size_t lineno = 0;
  auto corrupt = [&](const std::filesystem::path& p) {
    return data_error("CorruptFile", p.string() + ":" + std::to_string(lineno));
  };
  while (std::getline(nodes_in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::uint64_t id = 0;
    std::string name;
    try {
      auto j = nlohmann::json::parse(line);
      id = j.at("id").get<std::uint64_t>();
      name = j.at("name").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw corrupt(nodes_path);
    }
    if (id != g.names_.size() || name.empty() || name != text::normalize_phrase(name) || g.index_.count(name)) {
      throw corrupt(nodes_path);
    }
    int created = 0;
    g.intern(name, created);
  }

  const auto edges_path = dir / "edges.jsonl";
  auto edges_in = open(edges_path);
  lineno = 0;
  while (std::getline(edges_in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Edge e;
    try {
      auto j = nlohmann::json::parse(line);
      e.src = j.at("src").get<NodeId>();
      e.rel = j.at("rel").get<std::string>();
      e.dst = j.at("dst").get<NodeId>();
      for (const auto& o : j.at("occ")) {
        if (!o.is_array() || o.size() != 2) throw corrupt(edges_path);
        e.occurrences.push_back({o[0].get<Timestamp>(), o[1].get<TweetId>()});
      }
    } catch (const nlohmann::json::exception&) {
      throw corrupt(edges_path);
    }
    const bool valid = e.src < g.names_.size() && e.dst < g.names_.size() && !e.rel.empty() &&
                       e.rel == text::normalize_phrase(e.rel) && !e.occurrences.empty() &&
                       std::adjacent_find(e.occurrences.begin(), e.occurrences.end(),
                                          [](const Occurrence& a, const Occurrence& b) { return !(a < b); }) ==
                           e.occurrences.end() &&
                       !g.find_edge(e.src, e.rel, e.dst);
    if (!valid) throw corrupt(edges_path);
    const auto id = static_cast<EdgeId>(g.edges_.size());
    g.edge_index_.emplace(std::make_tuple(e.src, e.rel, e.dst), id);
    g.out_[e.src].push_back(id);
    g.in_[e.dst].push_back(id);
    g.edges_.push_back(std::move(e));
  }
  return g;
}

TemporalGraph build_graph(std::span<const Triple> triples) {
  TemporalGraph g;
  for (const auto& t : triples) g.merge(t);
  return g;
}

std::vector<ProvenanceSentence> provenance_sentences(const TemporalGraph& g, std::span<const NodeId> nodes,
                                                     const TweetStore& corpus) {
  const std::set<NodeId> members(nodes.begin(), nodes.end());
  std::set<TweetId> tweet_ids;
  for (NodeId n : members) {
    for (const auto& nb : g.neighbors(n, Direction::kOut)) {
      if (!members.count(nb.node)) continue;
      for (const auto& o : g.edge(nb.edge).occurrences) tweet_ids.insert(o.tweet);
    }
  }
  std::vector<ProvenanceSentence> out;
  for (TweetId id : tweet_ids) {
    if (const Tweet* t = corpus.find(id)) out.push_back({t->timestamp, t->id, t->text});
  }
  std::sort(out.begin(), out.end(), [](const ProvenanceSentence& a, const ProvenanceSentence& b) {
    return std::tie(a.timestamp, a.tweet) < std::tie(b.timestamp, b.tweet);
  });
  return out;
}

}  // namespace causalkg
