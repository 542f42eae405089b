#include "causalkg/encode.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

#include "causalkg/error.hpp"
#include "causalkg/rng.hpp"
#include "causalkg/text.hpp"

namespace causalkg {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Vector unit(Vector v) {
  const double n = norm(v);
  for (double& x : v) x /= n;
  return v;
}

}  // namespace

LocalEncoder::LocalEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ < 8) throw config_error("encoder.dim", "must be >= 8");
}

void LocalEncoder::add_token(Vector& v, std::string_view token) const {
  const std::uint64_t h = fnv1a(token, seed_);
  v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
}

Vector LocalEncoder::encode(std::string_view input) const {
  const std::string lowered = text::to_lower_ascii(text::trim(input));
  if (lowered.empty()) throw data_error("EmptyText", "nothing to encode");
  Vector v(dim_, 0.0);
  for (const auto& token : text::split_whitespace(lowered)) add_token(v, token);
  if (norm(v) == 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    add_token(v, text::normalize_phrase(lowered));
  }
  return unit(std::move(v));
}

std::string LocalEncoder::fingerprint() const {
  return "local:dim=" + std::to_string(dim_) + ":seed=" + std::to_string(seed_);
}

RemoteEncoder::RemoteEncoder(std::shared_ptr<HttpTransport> http, RemoteEndpoint endpoint)
    : http_(std::move(http)), endpoint_(std::move(endpoint)) {
  if (!(endpoint_.timeout_s > 0.0)) throw config_error("encoder.timeout_s", "must be > 0");
}

Vector RemoteEncoder::encode(std::string_view input) const {
  if (text::trim(input).empty()) throw data_error("EmptyText", "nothing to encode");
  const nlohmann::json body = {{"model", endpoint_.model}, {"input", std::string(input)}};
  return post_json_with_retries(*http_, endpoint_, "/embeddings", body.dump(), [](const std::string& raw) {
    Vector v;
    try {
      auto j = nlohmann::json::parse(raw);
      v = j.at("data").at(0).at("embedding").get<Vector>();
    } catch (const std::exception& e) {
      throw RemoteError(RemoteError::Reason::kUnparseableResponse, std::string("embeddings: ") + e.what());
    }
    const double n = norm(v);
    if (v.empty() || !std::isfinite(n) || n == 0.0) {
      throw RemoteError(RemoteError::Reason::kUnparseableResponse, "embeddings: empty, zero or non-finite vector");
    }
    return unit(std::move(v));
  });
}

std::string RemoteEncoder::fingerprint() const { return "remote:" + endpoint_.model; }

Vector encode_triple(const Triple& t, const Encoder& enc) {
  return enc.encode(t.subject + " " + t.relation + " " + t.object);
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw data_error("DimensionMismatch", std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw data_error("ZeroVector", "cosine of a zero vector");
  // Same expression for (a, b) and (b, a), so the result is exactly symmetric.
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

TripleIndex build_triple_index(const TemporalGraph& g, const Encoder& enc, std::size_t concurrency) {
  std::vector<EdgeId> order(g.edge_count());
  for (EdgeId i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<EdgeKey> keys;
  keys.reserve(order.size());
  for (EdgeId e : order) keys.push_back(g.key(e));
  std::sort(order.begin(), order.end(), [&](EdgeId a, EdgeId b) { return keys[a] < keys[b]; });

  TripleIndex index;
  index.encoder = enc.fingerprint();
  index.entries.resize(order.size());
  std::vector<std::exception_ptr> errors(order.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < order.size(); i = next++) {
      const EdgeId e = order[i];
      const Edge& edge = g.edge(e);
      try {
        const Triple t = Triple::make(keys[e].src, keys[e].rel, keys[e].dst);
        index.entries[i] = IndexEntry{keys[e], encode_triple(t, enc), edge.src, edge.dst};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(concurrency, 1, std::max<std::size_t>(1, order.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  if (!index.entries.empty()) {
    index.dim = index.entries.front().vec.size();
    for (const auto& entry : index.entries) {
      if (entry.vec.size() != index.dim) throw data_error("DimensionMismatch", "encoder returned mixed dimensions");
    }
  }
  return index;
}

void write_triple_index_json(const std::filesystem::path& path, const TripleIndex& index) {
  nlohmann::ordered_json doc;
  doc["dim"] = index.dim;
  doc["encoder"] = index.encoder;
  auto& entries = doc["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : index.entries) {
    entries.push_back({{"edge", {e.key.src, e.key.rel, e.key.dst}}, {"vec", e.vec}});
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw io_error("write failed: " + path.string());
}

TripleIndex read_triple_index_json(const std::filesystem::path& path, const TemporalGraph& g) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  TripleIndex index;
  try {
    auto doc = nlohmann::json::parse(in);
    index.dim = doc.at("dim").get<std::size_t>();
    index.encoder = doc.at("encoder").get<std::string>();
    for (const auto& e : doc.at("entries")) {
      const auto& edge = e.at("edge");
      IndexEntry entry;
      entry.key = EdgeKey{edge.at(0).get<std::string>(), edge.at(1).get<std::string>(), edge.at(2).get<std::string>()};
      entry.vec = e.at("vec").get<Vector>();
      auto src = g.find_node(entry.key.src);
      auto dst = g.find_node(entry.key.dst);
      if (!src || !dst || !g.find_edge(*src, entry.key.rel, *dst) || entry.vec.size() != index.dim) {
        throw data_error("CorruptFile", path.string() + ": entry does not match the graph");
      }
      entry.src = *src;
      entry.dst = *dst;
      index.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error("CorruptFile", path.string() + ": " + e.what());
  }
  return index;
}

}  // namespace causalkg
