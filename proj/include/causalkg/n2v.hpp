#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "causalkg/kgstore.hpp"

namespace causalkg {

struct WalkConfig {
  int walks_per_node = 10;
  int walk_length = 20;  // nodes per walk, including the start node
  double p = 1.0;        // return parameter
  double q = 1.0;        // in-out parameter
  bool temporal = true;  // require non-decreasing edge timestamps along a walk
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainConfig {
  int dim = 128;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double initial_lr = 0.025;
  std::uint64_t seed = 1;
  // 1 is bit-deterministic. More workers train lock-free (Hogwild) and are not
  // reproducible run to run.
  int workers = 1;

  void validate() const;
};

struct Walk {
  std::vector<NodeId> nodes;
  // Timestamp of the edge occurrence used for each step; nodes.size() - 1 entries.
  std::vector<Timestamp> step_times;
};

/// Second-order biased walks over `both`-direction neighbors.
///
/// Every node starts walks_per_node walks. Output order is walk round major,
/// node id minor. Each walk draws from its own stream seeded by (seed, start,
/// round), so the result does not depend on `workers`.
///
/// With cfg.temporal, a step is admissible only along an edge that has an
/// occurrence at or after the previous step's timestamp, not counting the
/// occurrence the previous step itself used; the earliest such occurrence
/// becomes the new step time. A walk stops early when nothing is admissible.
std::vector<Walk> sample_walks(const TemporalGraph& g, const WalkConfig& cfg, std::size_t workers = 1);

std::vector<std::vector<NodeId>> walk_sequences(std::span<const Walk> walks);

class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * dim_, dim_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
  std::span<const double> data() const { return data_; }

  bool all_finite() const;
  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct TrainResult {
  EmbeddingMatrix embeddings;
  // Mean negative-sampling loss per (center, context) pair, one per epoch.
  std::vector<double> epoch_loss;
};

// Uniform initialization in [-0.5/dim, 0.5/dim) from cfg.seed; this is the
// exact output when cfg.epochs == 0.
EmbeddingMatrix initial_embeddings(std::size_t num_nodes, const TrainConfig& cfg);

/// Skip-gram with negative sampling over node sequences.
///
/// Each (center, context) pair within cfg.window is one logistic update
/// against cfg.negatives nodes drawn from the unigram^0.75 distribution of
/// walk occurrences. The learning rate decays linearly from initial_lr to
/// initial_lr / 100 over all epochs.
TrainResult train_skipgram(std::span<const std::vector<NodeId>> walks, const TrainConfig& cfg,
                           std::size_t num_nodes);

// exp(z_v . z_u) / sum over all w of exp(z_w . z_u), log-sum-exp stabilized.
double softmax_prob(const EmbeddingMatrix& e, NodeId u, NodeId v);
std::vector<double> softmax_row(const EmbeddingMatrix& e, NodeId u);

// embeddings.json: {"dim", "nodes": [...], "vectors": [[...], ...]}.
void write_embeddings_json(const std::filesystem::path& path, const EmbeddingMatrix& e,
                           std::span<const std::string> names);
struct NamedEmbeddings {
  EmbeddingMatrix matrix;
  std::vector<std::string> names;
};
NamedEmbeddings read_embeddings_json(const std::filesystem::path& path);

}  // namespace causalkg
