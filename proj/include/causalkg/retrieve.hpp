#pragma once

#include <span>
#include <string>
#include <vector>

#include "causalkg/encode.hpp"
#include "causalkg/kgstore.hpp"
#include "causalkg/n2v.hpp"

namespace causalkg {

struct RetrievalConfig {
  int k_contextual = 25;
  double sim_threshold = 0.35;
  int max_context_sentences = 5;
  bool temporal_order = true;

  void validate() const;
};

struct Candidate {
  std::size_t entry = 0;  // position in TripleIndex::entries
  EdgeKey key;
  double similarity = 0.0;
};

using ContextSentence = ProvenanceSentence;

struct ContextBundle {
  std::vector<ContextSentence> sentences;
  std::vector<EdgeKey> seed_edges;
  std::vector<std::string> expanded_nodes;

  bool empty() const { return sentences.empty(); }
};

// Entries with cosine >= threshold, best first (ties by edge key), at most
// k_contextual. Throws EmptyIndex.
std::vector<Candidate> rank_candidates(std::span<const double> query, const TripleIndex& index,
                                       const RetrievalConfig& cfg);

// Seeds plus every node whose embedding reaches the threshold against some
// seed. Sorted ascending.
std::vector<NodeId> expand_neighbors(std::span<const NodeId> seeds, const EmbeddingMatrix& embeddings,
                                     const RetrievalConfig& cfg);

// Provenance sentences of the node-induced subgraph, ranked by how many seed
// edges each tweet sources (then most recent first), cut to
// max_context_sentences, and finally put in chronological order when
// temporal_order is set.
ContextBundle assemble_context(const TemporalGraph& g, std::span<const NodeId> nodes,
                               std::span<const EdgeId> seed_edges, const TweetStore& corpus,
                               const RetrievalConfig& cfg);

struct Retrieval {
  std::string query;
  std::vector<Candidate> seeds;
  ContextBundle bundle;
};

// Read-only view over one artifact snapshot; safe to share across threads.
class Retriever {
 public:
  Retriever(const TemporalGraph& graph, const TripleIndex& index, const EmbeddingMatrix& embeddings,
            const TweetStore& corpus, const Encoder& encoder, const ContractionDictionary& dict,
            RetrievalConfig cfg);

  // Cleans the query like a tweet, encodes it, ranks triples, expands in
  // embedding space and assembles the context.
  Retrieval retrieve(const std::string& query) const;

 private:
  const TemporalGraph& graph_;
  const TripleIndex& index_;
  const EmbeddingMatrix& embeddings_;
  const TweetStore& corpus_;
  const Encoder& encoder_;
  const ContractionDictionary& dict_;
  RetrievalConfig cfg_;
};

// {query, seeds: [{edge, sim}], expanded: [names], sentences: [{ts, id, text}]}
std::string explain_json(const Retrieval& r);

}  // namespace causalkg
