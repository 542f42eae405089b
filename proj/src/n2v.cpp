#include "causalkg/n2v.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

#include "causalkg/error.hpp"
#include "causalkg/rng.hpp"

namespace causalkg {

void WalkConfig::validate() const {
  if (walks_per_node < 1) throw config_error("walk.walks_per_node", "must be >= 1");
  if (walk_length < 1) throw config_error("walk.walk_length", "must be >= 1");
  if (!(p > 0.0)) throw config_error("walk.p", "must be > 0");
  if (!(q > 0.0)) throw config_error("walk.q", "must be > 0");
}

void TrainConfig::validate() const {
  if (dim < 2) throw config_error("train.dim", "must be >= 2");
  if (window < 1) throw config_error("train.window", "must be >= 1");
  if (negatives < 1) throw config_error("train.negatives", "must be >= 1");
  if (epochs < 0) throw config_error("train.epochs", "must be >= 0");
  if (!(initial_lr > 0.0)) throw config_error("train.initial_lr", "must be > 0");
  if (workers < 1) throw config_error("train.workers", "must be >= 1");
}

namespace {

struct WalkContext {
  const TemporalGraph& graph;
  const WalkConfig& cfg;
  std::vector<std::vector<Neighbor>> adjacency;
  std::vector<std::vector<NodeId>> neighbor_sets;  // sorted, unique

  bool adjacent(NodeId a, NodeId b) const {
    const auto& s = neighbor_sets[a];
    return std::binary_search(s.begin(), s.end(), b);
  }
};

// Earliest occurrence at or after the previous step's time, never the very
// occurrence the previous step consumed.
std::optional<Occurrence> next_occurrence(const Edge& e, EdgeId id, std::optional<EdgeId> prev_edge,
                                          std::optional<Occurrence> prev_occ) {
  if (!prev_occ) return e.occurrences.front();
  auto it = std::lower_bound(e.occurrences.begin(), e.occurrences.end(), prev_occ->timestamp,
                             [](const Occurrence& o, Timestamp t) { return o.timestamp < t; });
  if (it != e.occurrences.end() && prev_edge == id && *it == *prev_occ) ++it;
  if (it == e.occurrences.end()) return std::nullopt;
  return *it;
}

Walk walk_from(const WalkContext& ctx, NodeId start, std::uint64_t round) {
  Rng rng(derive_seed(ctx.cfg.seed, start, round));
  Walk walk;
  walk.nodes.push_back(start);
  std::optional<NodeId> prev;
  std::optional<EdgeId> prev_edge;
  std::optional<Occurrence> prev_occ;

  std::vector<double> weights;
  std::vector<Occurrence> occs;
  while (walk.nodes.size() < static_cast<std::size_t>(ctx.cfg.walk_length)) {
    const NodeId cur = walk.nodes.back();
    const auto& options = ctx.adjacency[cur];
    weights.assign(options.size(), 0.0);
    occs.assign(options.size(), Occurrence{});
    double total = 0.0;
    for (std::size_t i = 0; i < options.size(); ++i) {
      const Edge& e = ctx.graph.edge(options[i].edge);
      const auto occ = ctx.cfg.temporal ? next_occurrence(e, options[i].edge, prev_edge, prev_occ)
                                        : std::optional<Occurrence>(e.occurrences.front());
      if (!occ) continue;
      occs[i] = *occ;
      const NodeId next = options[i].node;
      double w = 1.0;
      if (prev) {
        if (next == *prev) {
          w = 1.0 / ctx.cfg.p;
        } else if (!ctx.adjacent(*prev, next)) {
          w = 1.0 / ctx.cfg.q;
        }
      }
      weights[i] = w;
      total += w;
    }
    if (total <= 0.0) break;

    double r = rng.uniform() * total;
    std::size_t pick = options.size();
    for (std::size_t i = 0; i < options.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      pick = i;
      if (r < weights[i]) break;
      r -= weights[i];
    }
    prev = cur;
    prev_edge = options[pick].edge;
    prev_occ = occs[pick];
    walk.nodes.push_back(options[pick].node);
    walk.step_times.push_back(occs[pick].timestamp);
  }
  return walk;
}

}  // namespace

std::vector<Walk> sample_walks(const TemporalGraph& g, const WalkConfig& cfg, std::size_t workers) {
  cfg.validate();
  const std::size_t n = g.node_count();
  WalkContext ctx{g, cfg, {}, {}};
  ctx.adjacency.reserve(n);
  ctx.neighbor_sets.reserve(n);
  for (NodeId v = 0; v < n; ++v) {
    ctx.adjacency.push_back(g.neighbors(v, Direction::kBoth));
    std::vector<NodeId> set;
    for (const auto& nb : ctx.adjacency.back()) set.push_back(nb.node);
    set.erase(std::unique(set.begin(), set.end()), set.end());  // already sorted by node
    ctx.neighbor_sets.push_back(std::move(set));
  }

  const std::size_t total = n * static_cast<std::size_t>(cfg.walks_per_node);
  std::vector<Walk> walks(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < total; i = next++) {
      walks[i] = walk_from(ctx, static_cast<NodeId>(i % n), i / n);
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, total));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return walks;
}

std::vector<std::vector<NodeId>> walk_sequences(std::span<const Walk> walks) {
  std::vector<std::vector<NodeId>> out;
  out.reserve(walks.size());
  for (const auto& w : walks) out.push_back(w.nodes);
  return out;
}

bool EmbeddingMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

EmbeddingMatrix initial_embeddings(std::size_t num_nodes, const TrainConfig& cfg) {
  EmbeddingMatrix e(num_nodes, static_cast<std::size_t>(cfg.dim));
  Rng rng(cfg.seed);
  for (std::size_t r = 0; r < num_nodes; ++r) {
    for (double& x : e.row(r)) x = (rng.uniform() - 0.5) / cfg.dim;
  }
  return e;
}

namespace {

// Plain access in single-worker mode; relaxed atomics when rows are shared
// between Hogwild workers.
template <bool Shared>
inline double load(const double& x) {
  if constexpr (Shared) {
    return std::atomic_ref<double>(const_cast<double&>(x)).load(std::memory_order_relaxed);
  } else {
    return x;
  }
}

template <bool Shared>
inline void store(double& x, double v) {
  if constexpr (Shared) {
    std::atomic_ref<double>(x).store(v, std::memory_order_relaxed);
  } else {
    x = v;
  }
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// -log(sigmoid(x)), computed without overflow.
double neg_log_sigmoid(double x) { return x >= 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

class NegativeTable {
 public:
  explicit NegativeTable(const std::vector<double>& counts) {
    cdf_.reserve(counts.size());
    double acc = 0.0;
    for (double c : counts) {
      acc += c > 0 ? std::pow(c, 0.75) : 0.0;
      cdf_.push_back(acc);
    }
  }

  NodeId sample(Rng& rng) const {
    const double r = rng.uniform() * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), r);
    if (it == cdf_.end()) --it;
    return static_cast<NodeId>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

struct TrainState {
  EmbeddingMatrix& input;   // z_u, the embeddings returned
  EmbeddingMatrix& output;  // context vectors
  const NegativeTable& table;
  const TrainConfig& cfg;
  double total_positions;
};

// Trains walks[begin, end) for one epoch. `processed` counts positions across
// all epochs and workers and drives the learning-rate schedule.
template <bool Shared>
double train_range(TrainState& st, std::span<const std::vector<NodeId>> walks, Rng& rng,
                   std::atomic<std::size_t>& processed, std::size_t& pairs) {
  const std::size_t dim = st.input.dim();
  std::vector<double> grad(dim);
  double loss = 0.0;
  for (const auto& walk : walks) {
    for (std::size_t i = 0; i < walk.size(); ++i) {
      const double progress = static_cast<double>(processed.fetch_add(1, std::memory_order_relaxed)) / st.total_positions;
      const double lr = st.cfg.initial_lr * (1.0 - 0.99 * std::min(1.0, progress));
      const NodeId center = walk[i];
      const std::size_t lo = i >= static_cast<std::size_t>(st.cfg.window) ? i - st.cfg.window : 0;
      const std::size_t hi = std::min(walk.size() - 1, i + st.cfg.window);
      auto in = st.input.row(center);
      for (std::size_t j = lo; j <= hi; ++j) {
        if (j == i) continue;
        const NodeId context = walk[j];
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int k = 0; k <= st.cfg.negatives; ++k) {
          NodeId target = context;
          double label = 1.0;
          if (k > 0) {
            target = st.table.sample(rng);
            if (target == context) continue;
            label = 0.0;
          }
          auto out = st.output.row(target);
          double f = 0.0;
          for (std::size_t d = 0; d < dim; ++d) f += load<Shared>(in[d]) * load<Shared>(out[d]);
          loss += label > 0 ? neg_log_sigmoid(f) : neg_log_sigmoid(-f);
          const double g = (label - sigmoid(f)) * lr;
          for (std::size_t d = 0; d < dim; ++d) {
            grad[d] += g * load<Shared>(out[d]);
            store<Shared>(out[d], load<Shared>(out[d]) + g * load<Shared>(in[d]));
          }
        }
        for (std::size_t d = 0; d < dim; ++d) store<Shared>(in[d], load<Shared>(in[d]) + grad[d]);
        ++pairs;
      }
    }
  }
  return loss;
}

}  // namespace

TrainResult train_skipgram(std::span<const std::vector<NodeId>> walks, const TrainConfig& cfg, std::size_t num_nodes) {
  cfg.validate();
  if (num_nodes == 0) throw data_error("EmptyVocabulary", "no nodes to embed");

  TrainResult result{initial_embeddings(num_nodes, cfg), {}};
  if (cfg.epochs == 0) return result;

  std::vector<double> counts(num_nodes, 0.0);
  std::size_t positions = 0;
  for (const auto& walk : walks) {
    for (NodeId v : walk) {
      if (v >= num_nodes) throw data_error("UnknownNode", std::to_string(v));
      counts[v] += 1.0;
    }
    positions += walk.size();
  }
  if (positions == 0) throw data_error("EmptyWalks", "training needs at least one walk");

  EmbeddingMatrix context(num_nodes, static_cast<std::size_t>(cfg.dim));
  const NegativeTable table(counts);
  TrainState st{result.embeddings, context, table, cfg, static_cast<double>(positions) * cfg.epochs};
  std::atomic<std::size_t> processed{0};

  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(cfg.workers, walks.size()));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = 0.0;
    std::size_t pairs = 0;
    if (workers <= 1) {
      Rng rng(derive_seed(cfg.seed, 0x6e6567, static_cast<std::uint64_t>(epoch)));
      loss = train_range<false>(st, walks, rng, processed, pairs);
    } else {
      std::vector<double> losses(workers, 0.0);
      std::vector<std::size_t> counts_per(workers, 0);
      std::vector<std::thread> pool;
      const std::size_t chunk = (walks.size() + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
          const std::size_t b = std::min(walks.size(), w * chunk);
          const std::size_t e = std::min(walks.size(), b + chunk);
          Rng rng(derive_seed(cfg.seed, 0x6e6567 + w + 1, static_cast<std::uint64_t>(epoch)));
          losses[w] = train_range<true>(st, walks.subspan(b, e - b), rng, processed, counts_per[w]);
        });
      }
      for (auto& t : pool) t.join();
      for (std::size_t w = 0; w < workers; ++w) {
        loss += losses[w];
        pairs += counts_per[w];
      }
    }
    result.epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
  }
  return result;
}

std::vector<double> softmax_row(const EmbeddingMatrix& e, NodeId u) {
  if (u >= e.rows()) throw data_error("UnknownNode", std::to_string(u));
  const auto zu = e.row(u);
  std::vector<double> scores(e.rows());
  for (std::size_t w = 0; w < e.rows(); ++w) {
    const auto zw = e.row(w);
    double dot = 0.0;
    for (std::size_t d = 0; d < e.dim(); ++d) dot += zw[d] * zu[d];
    scores[w] = dot;
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - m);
    sum += s;
  }
  for (double& s : scores) s /= sum;
  return scores;
}

double softmax_prob(const EmbeddingMatrix& e, NodeId u, NodeId v) {
  if (v >= e.rows()) throw data_error("UnknownNode", std::to_string(v));
  return softmax_row(e, u)[v];
}

void write_embeddings_json(const std::filesystem::path& path, const EmbeddingMatrix& e,
                           std::span<const std::string> names) {
  if (names.size() != e.rows()) throw data_error("MisalignedEmbeddings", "name count differs from row count");
  nlohmann::ordered_json doc;
  doc["dim"] = e.dim();
  doc["nodes"] = std::vector<std::string>(names.begin(), names.end());
  auto& vectors = doc["vectors"] = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < e.rows(); ++r) {
    const auto row = e.row(r);
    vectors.push_back(std::vector<double>(row.begin(), row.end()));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw io_error("write failed: " + path.string());
}

NamedEmbeddings read_embeddings_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  try {
    auto doc = nlohmann::json::parse(in);
    const auto dim = doc.at("dim").get<std::size_t>();
    auto names = doc.at("nodes").get<std::vector<std::string>>();
    const auto& vectors = doc.at("vectors");
    if (vectors.size() != names.size()) throw data_error("CorruptFile", path.string() + ": vector count");
    NamedEmbeddings out{EmbeddingMatrix(names.size(), dim), std::move(names)};
    for (std::size_t r = 0; r < vectors.size(); ++r) {
      const auto row = vectors[r].get<std::vector<double>>();
      if (row.size() != dim) throw data_error("CorruptFile", path.string() + ": row " + std::to_string(r));
      std::copy(row.begin(), row.end(), out.matrix.row(r).begin());
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("CorruptFile", path.string() + ": " + e.what());
  }
}

}  // namespace causalkg
