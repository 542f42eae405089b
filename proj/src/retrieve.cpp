#include "causalkg/retrieve.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <nlohmann/json.hpp>

#include "causalkg/error.hpp"

namespace causalkg {

void RetrievalConfig::validate() const {
  if (k_contextual < 1) throw config_error("retrieval.k_contextual", "must be >= 1");
  if (!(sim_threshold >= 0.0 && sim_threshold <= 1.0)) throw config_error("retrieval.sim_threshold", "must be in [0, 1]");
  if (max_context_sentences < 1) throw config_error("retrieval.max_context_sentences", "must be >= 1");
}

std::vector<Candidate> rank_candidates(std::span<const double> query, const TripleIndex& index,
                                       const RetrievalConfig& cfg) {
  if (index.entries.empty()) throw data_error("EmptyIndex", "triple index has no entries");
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    const double sim = cosine_sim(query, index.entries[i].vec);
    if (sim >= cfg.sim_threshold) out.push_back({i, index.entries[i].key, sim});
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.key < b.key;
  });
  if (out.size() > static_cast<std::size_t>(cfg.k_contextual)) out.resize(static_cast<std::size_t>(cfg.k_contextual));
  return out;
}

std::vector<NodeId> expand_neighbors(std::span<const NodeId> seeds, const EmbeddingMatrix& embeddings,
                                     const RetrievalConfig& cfg) {
  std::vector<NodeId> seed_list(seeds.begin(), seeds.end());
  std::sort(seed_list.begin(), seed_list.end());
  seed_list.erase(std::unique(seed_list.begin(), seed_list.end()), seed_list.end());
  if (seed_list.empty()) return {};

  auto is_zero = [&](NodeId n) {
    const auto row = embeddings.row(n);
    return std::all_of(row.begin(), row.end(), [](double x) { return x == 0.0; });
  };
  std::vector<NodeId> live_seeds;
  for (NodeId s : seed_list) {
    if (s >= embeddings.rows()) throw data_error("UnknownNode", std::to_string(s));
    if (!is_zero(s)) live_seeds.push_back(s);
  }

  std::vector<NodeId> out;
  for (NodeId w = 0; w < embeddings.rows(); ++w) {
    if (std::binary_search(seed_list.begin(), seed_list.end(), w)) {
      out.push_back(w);
      continue;
    }
    if (is_zero(w)) continue;
    for (NodeId s : live_seeds) {
      if (cosine_sim(embeddings.row(w), embeddings.row(s)) >= cfg.sim_threshold) {
        out.push_back(w);
        break;
      }
    }
  }
  return out;
}

ContextBundle assemble_context(const TemporalGraph& g, std::span<const NodeId> nodes,
                               std::span<const EdgeId> seed_edges, const TweetStore& corpus,
                               const RetrievalConfig& cfg) {
  ContextBundle bundle;
  auto sentences = provenance_sentences(g, nodes, corpus);

  // Number of seed edges each tweet asserted.
  std::map<TweetId, int> hits;
  for (EdgeId e : seed_edges) {
    std::set<TweetId> sources;
    for (const auto& o : g.edge(e).occurrences) sources.insert(o.tweet);
    for (TweetId id : sources) ++hits[id];
  }
  auto hit_count = [&](TweetId id) {
    auto it = hits.find(id);
    return it == hits.end() ? 0 : it->second;
  };
  std::stable_sort(sentences.begin(), sentences.end(), [&](const ContextSentence& a, const ContextSentence& b) {
    const int ha = hit_count(a.tweet);
    const int hb = hit_count(b.tweet);
    if (ha != hb) return ha > hb;
    if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;  // most recent first
    return a.tweet < b.tweet;
  });
  if (sentences.size() > static_cast<std::size_t>(cfg.max_context_sentences)) {
    sentences.resize(static_cast<std::size_t>(cfg.max_context_sentences));
  }
  if (cfg.temporal_order) {
    std::sort(sentences.begin(), sentences.end(), [](const ContextSentence& a, const ContextSentence& b) {
      return std::tie(a.timestamp, a.tweet) < std::tie(b.timestamp, b.tweet);
    });
  }
  bundle.sentences = std::move(sentences);
  for (EdgeId e : seed_edges) bundle.seed_edges.push_back(g.key(e));
  for (NodeId n : nodes) bundle.expanded_nodes.push_back(g.name(n));
  return bundle;
}

Retriever::Retriever(const TemporalGraph& graph, const TripleIndex& index, const EmbeddingMatrix& embeddings,
                     const TweetStore& corpus, const Encoder& encoder, const ContractionDictionary& dict,
                     RetrievalConfig cfg)
    : graph_(graph), index_(index), embeddings_(embeddings), corpus_(corpus), encoder_(encoder), dict_(dict), cfg_(cfg) {
  cfg_.validate();
  if (embeddings_.rows() != graph_.node_count()) {
    throw data_error("MisalignedEmbeddings", "embedding rows do not match graph nodes");
  }
}

Retrieval Retriever::retrieve(const std::string& query) const {
  Retrieval r;
  r.query = query;
  std::string cleaned = preprocess_text(query, dict_);
  if (cleaned.empty()) cleaned = query;
  const Vector qv = encoder_.encode(cleaned);
  r.seeds = rank_candidates(qv, index_, cfg_);

  std::vector<NodeId> seed_nodes;
  std::vector<EdgeId> seed_edges;
  for (const auto& c : r.seeds) {
    const auto& entry = index_.entries[c.entry];
    seed_nodes.push_back(entry.src);
    seed_nodes.push_back(entry.dst);
    seed_edges.push_back(*graph_.find_edge(entry.src, entry.key.rel, entry.dst));
  }
  const auto nodes = expand_neighbors(seed_nodes, embeddings_, cfg_);
  r.bundle = assemble_context(graph_, nodes, seed_edges, corpus_, cfg_);
  return r;
}

std::string explain_json(const Retrieval& r) {
  nlohmann::ordered_json doc;
  doc["query"] = r.query;
  auto& seeds = doc["seeds"] = nlohmann::ordered_json::array();
  for (const auto& c : r.seeds) seeds.push_back({{"edge", {c.key.src, c.key.rel, c.key.dst}}, {"sim", c.similarity}});
  doc["expanded"] = r.bundle.expanded_nodes;
  auto& sentences = doc["sentences"] = nlohmann::ordered_json::array();
  for (const auto& s : r.bundle.sentences) sentences.push_back({{"ts", s.timestamp}, {"id", s.tweet}, {"text", s.text}});
  return doc.dump();
}

}  // namespace causalkg
